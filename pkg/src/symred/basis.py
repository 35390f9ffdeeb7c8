"""Reduced bases from snapshot data: POD and proper symplectic decomposition."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .symplectic import (
    DEFAULT_TOL,
    NLP_TOL,
    DimensionError,
    OrthonormalBasis,
    SymplecticBasis,
    as_symplectic_basis,
    poisson_apply,
    symplectic_inverse,
    symplecticity_residual,
)

log = logging.getLogger(__name__)

RANK_RTOL = 1e-12


class RankError(ValueError):
    """Requested more modes than the data supports."""


class RefinementError(RuntimeError):
    def __init__(self, msg, residual, objective):
        super().__init__(msg)
        self.residual = residual
        self.objective = objective


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    """Snapshot columns ``M_x = [x(t_1), ..., x(t_N)]``.

    ``nonlinear`` optionally holds ``f_N(x(t_i))`` column by column.  ``gamma``
    records the momentum weighting already applied to ``states``.
    """

    states: np.ndarray
    times: Optional[np.ndarray] = None
    nonlinear: Optional[np.ndarray] = None
    gamma: float = 1.0

    def __post_init__(self):
        M = np.asarray(self.states, dtype=float)
        if M.ndim != 2 or M.shape[1] < 1:
            raise ValueError("snapshot matrix must be 2-D with at least one column")
        if M.shape[0] % 2:
            raise DimensionError("snapshot rows must be 2n")
        if not np.all(np.isfinite(M)):
            raise ValueError("snapshot matrix has non-finite entries")
        if self.nonlinear is not None and np.shape(self.nonlinear) != M.shape:
            raise ValueError("nonlinear snapshots must match the state snapshots")

    @property
    def half_dim(self) -> int:
        return self.states.shape[0] // 2

    @property
    def q(self):
        return self.states[: self.half_dim]

    @property
    def p(self):
        return self.states[self.half_dim :]

    @classmethod
    def from_trajectory(cls, traj, system=None):
        X = traj.states.T.copy()
        F = None
        if system is not None and not system.is_linear:
            F = np.column_stack([system.f_N(x) for x in traj.states])
        return cls(X, np.asarray(traj.times), F)


@dataclass(frozen=True)
class SingularSpectrum:
    values: np.ndarray
    source: str

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.any(np.diff(v) > 1e-12 * max(1.0, v[0] if v.size else 1.0)):
            raise ValueError("singular values must be nonincreasing")

    def duplicated(self) -> np.ndarray:
        """``{s1, s1, s2, s2, ...}`` as plotted for a block-diagonal symplectic basis."""
        return np.repeat(self.values, 2)


def assemble_weighted(ensemble: SnapshotEnsemble, gamma: float) -> SnapshotEnsemble:
    """Rescale momenta ``p -> gamma p`` (weights compose with any earlier rescaling)."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if gamma == 1.0:
        return ensemble
    n = ensemble.half_dim
    X = ensemble.states.copy()
    X[n:] *= gamma
    return replace(ensemble, states=X, gamma=ensemble.gamma * gamma)


def _fix_signs(U):
    """Make the first nonzero entry of each column positive (complex: real positive)."""
    U = U.copy()
    for j in range(U.shape[1]):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14 * max(np.abs(col).max(), 1e-300))
        if nz.size:
            a = col[nz[0]]
            U[:, j] = col * (np.conj(a) / abs(a))
    return U


def _truncated_svd(M, k, source):
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if not 1 <= k <= s.size:
        raise RankError(f"k={k} outside 1..{s.size}")
    if s[0] == 0 or s[k - 1] < RANK_RTOL * s[0]:
        raise RankError(
            f"k={k} exceeds numerical rank: sigma_k={s[k - 1]:.3e}, sigma_1={s[0]:.3e}"
        )
    return _fix_signs(U[:, :k]), SingularSpectrum(s, source)


def pod_basis(M, k: int):
    """Leading ``k`` left singular vectors of ``M`` and the full spectrum."""
    M = np.asarray(M, dtype=float)
    Phi, spec = _truncated_svd(M, k, "pod")
    return OrthonormalBasis(Phi), spec


def _cotangent_snapshots(ensemble: SnapshotEnsemble, gamma: float, include_nonlinear: bool):
    n = ensemble.half_dim
    cols = [ensemble.q, gamma * ensemble.p]
    if include_nonlinear:
        if ensemble.nonlinear is None:
            raise ValueError("ensemble carries no nonlinear snapshots")
        F = ensemble.nonlinear
        cols += [F[:n], F[n:]]
    M1 = np.hstack(cols)
    # drop identically zero columns (e.g. the p-part of f_N) so they do not count as data
    keep = np.any(M1 != 0, axis=0)
    return M1[:, keep] if keep.any() else M1


def cotangent_lift(ensemble: SnapshotEnsemble, k: int, gamma: float = 1.0,
                   include_nonlinear: bool = False):
    """Block-diagonal symplectic basis ``diag(Phi, Phi)``.

    ``Phi`` holds the leading ``k`` left singular vectors of
    ``[q(t_1)..q(t_N), gamma p(t_1)..gamma p(t_N)]``; with
    ``include_nonlinear`` the nonlinear snapshot blocks are appended as extra
    columns.
    """
    n = ensemble.half_dim
    if k > n:
        raise RankError(f"k={k} exceeds n={n}")
    M1 = _cotangent_snapshots(ensemble, gamma, include_nonlinear)
    Phi, spec = _truncated_svd(M1, k, "cotangent")
    Z = np.zeros_like(Phi)
    A = np.block([[Phi, Z], [Z, Phi]])
    return as_symplectic_basis(A, DEFAULT_TOL), spec


def complexify(Phi, Psi=None):
    """``[[Phi, -Psi], [Psi, Phi]]`` for ``U = Phi + i Psi`` (pass a complex array alone)."""
    if Psi is None:
        U = np.asarray(Phi)
        Phi, Psi = U.real, U.imag
    return np.block([[Phi, -Psi], [Psi, Phi]])


def complex_svd_basis(ensemble: SnapshotEnsemble, k: int, gamma: float = 1.0):
    """Orthosymplectic basis from the SVD of ``q + i gamma p``."""
    n = ensemble.half_dim
    if k > n:
        raise RankError(f"k={k} exceeds n={n}")
    M2 = ensemble.q + 1j * gamma * ensemble.p
    U, spec = _truncated_svd(M2, k, "complex_svd")
    A = complexify(U)
    return as_symplectic_basis(A, DEFAULT_TOL), spec


def complex_svd_basis_real(ensemble: SnapshotEnsemble, k: int, gamma: float = 1.0):
    """Same subspace as :func:`complex_svd_basis` computed from the real matrix
    ``[M_x, -J M_x]``.

    Its singular values come in equal pairs, so the leading ``2k`` left singular
    vectors span an invariant pair of subspaces; the first of each pair gives
    ``[Phi; Psi]`` after re-pairing with ``J``.
    """
    X = ensemble.states.copy()
    n = ensemble.half_dim
    X[n:] *= gamma
    Areal = np.hstack([X, -poisson_apply(X)])
    U, s, _ = np.linalg.svd(Areal, full_matrices=False)
    V = U[:, : 2 * k]
    # symplectic Gram-Schmidt on span(V), which is J-invariant
    cols = []
    basis = np.zeros((2 * n, 0))
    for j in range(2 * k):
        v = V[:, j] - basis @ (basis.T @ V[:, j]) if basis.size else V[:, j].copy()
        nv = np.linalg.norm(v)
        if nv < 1e-8:
            continue
        v /= nv
        cols.append(v)
        basis = np.column_stack([basis, v, poisson_apply(v)])
        if len(cols) == k:
            break
    Aq = np.column_stack(cols)
    A = np.hstack([Aq, poisson_apply(Aq, transpose=True)])
    return as_symplectic_basis(A, DEFAULT_TOL), SingularSpectrum(s, "complex_svd")


def projection_error(M, A) -> float:
    """``||M - A A^+ M||_F`` for a symplectic ``A`` (or ``Phi Phi^T`` for an orthonormal one)."""
    if isinstance(A, SymplecticBasis):
        return float(np.linalg.norm(M - A.matrix @ (A.sympl_inverse @ M)))
    if isinstance(A, OrthonormalBasis):
        P = A.matrix
        return float(np.linalg.norm(M - P @ (P.T @ M)))
    A = np.asarray(A)
    return float(np.linalg.norm(M - A @ (symplectic_inverse(A) @ M)))


# --- nonlinear programming refinement ---------------------------------------


def symplectic_gram_schmidt(C, passes: int = 2):
    """Nearby exactly symplectic matrix via pairwise symplectic Gram-Schmidt.

    Columns ``[E, F]`` are processed pair by pair ``(e_i, f_i)``.
    """
    C = np.array(C, dtype=float)
    k = C.shape[1] // 2
    for _ in range(passes):
        E, F = C[:, :k].copy(), C[:, k:].copy()
        for i in range(k):
            e, f = E[:, i], F[:, i]
            for j in range(i):
                ej, fj = E[:, j], F[:, j]
                for v in (e, f):
                    v -= (v @ poisson_apply(fj)) * ej - (v @ poisson_apply(ej)) * fj
            s = e @ poisson_apply(f)
            if abs(s) < 1e-14:
                raise RefinementError("degenerate symplectic pair", np.inf, np.nan)
            r = np.sqrt(abs(s))
            E[:, i] = e / r
            F[:, i] = np.sign(s) * f / r
        C = np.hstack([E, F])
    return C


def _nlp_objective(Y, r, k):
    """Squared projection error of ``Y`` onto ``Range(C)`` and its gradient."""

    def Jr(X):  # J_{2r} X
        return poisson_apply(X)

    def fg(C):
        Cp = symplectic_inverse(C)  # 2k x 2r
        R = Y - C @ (Cp @ Y)
        f = float(np.sum(R * R))
        # d f = -2 <R, dC Cp Y + C J_k^T dC^T J_r Y>
        CJk = poisson_apply(C, axis=1)  # C J_k
        g1 = -2.0 * (R @ Y.T) @ poisson_apply(CJk, transpose=True)  # R Y^T J_r^T C J_k
        g2 = -2.0 * Jr(Y @ R.T) @ poisson_apply(C, axis=1, transpose=True)  # J_r Y R^T C J_k^T
        return f, g1 + g2

    return fg


def _penalty(C, k):
    G = C.T @ poisson_apply(C) - np.block(
        [[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]]
    )
    h = float(np.sum(G * G))
    grad = -4.0 * poisson_apply(C @ G)
    return h, grad


@dataclass
class NLPResult:
    basis: SymplecticBasis
    C: np.ndarray
    objective: float
    initial_objective: float
    constraint_residual: float
    mu: float
    accepted: bool


def nlp_refine(ensemble: SnapshotEnsemble, A1: SymplecticBasis, k: int, gamma: float = 1.0,
               mu0: float = 1e2, max_iter: int = 200, mu_max: float = 1e12,
               tol: float = NLP_TOL) -> NLPResult:
    """Refine the truncated cotangent-lift basis inside ``Range(A1)``.

    Minimizes ``||M - A1 C C^+ A1^+ M||_F`` over ``C`` in ``Sp(2k, R^{2r})`` by a
    quadratic penalty on ``C^T J C - J`` (L-BFGS inner solves, penalty raised
    tenfold until the constraint residual is below ``tol``), then polishes
    ``C`` with a symplectic Gram-Schmidt pass.  The refined basis is kept only
    if it does not increase the objective.
    """
    r = A1.half_dim_reduced
    if k > r:
        raise ValueError(f"k={k} exceeds the source width r={r}")
    M = ensemble.states.copy()
    M[ensemble.half_dim:] *= gamma
    Y = A1.sympl_inverse @ M
    perp2 = float(np.sum((M - A1.matrix @ Y) ** 2))
    I_rk = np.eye(r)[:, :k]
    Z = np.zeros_like(I_rk)
    C0 = np.block([[I_rk, Z], [Z, I_rk]])

    fg = _nlp_objective(Y, r, k)
    scale = max(float(np.sum(Y * Y)), 1e-300)
    f0 = fg(C0)[0]

    def total(objective_value):
        return float(np.sqrt(max(perp2 + objective_value, 0.0)))

    if k == r:
        basis = as_symplectic_basis(A1.matrix @ C0, tol)
        return NLPResult(basis, C0, total(f0), total(f0), 0.0, 0.0, True)

    shape = C0.shape
    C = C0.copy()
    mu = mu0
    res = np.inf
    while True:
        def fun(c):
            Cm = c.reshape(shape)
            f, g = fg(Cm)
            h, gh = _penalty(Cm, k)
            return f / scale + mu * h, (g / scale + mu * gh).ravel()

        out = minimize(fun, C.ravel(), jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-15})
        C = out.x.reshape(shape)
        res = symplecticity_residual(C)
        log.debug("nlp mu=%g objective=%.6e residual=%.3e", mu, fg(C)[0], res)
        if res <= tol or mu >= mu_max:
            break
        mu *= 10.0

    try:
        Cs = symplectic_gram_schmidt(C)
    except RefinementError:
        Cs = C
    res_s = symplecticity_residual(Cs)
    if res_s < res:
        C, res = Cs, res_s
    if res > tol:
        raise RefinementError(
            f"constraint residual {res:.3e} above {tol:.1e}", res, total(fg(C)[0])
        )
    f = fg(C)[0]
    accepted = f <= f0
    if not accepted:
        C, f = C0, f0
        res = symplecticity_residual(C0)
    basis = as_symplectic_basis(A1.matrix @ C, tol)
    return NLPResult(basis, C, total(f), total(f0), res, mu, accepted)
