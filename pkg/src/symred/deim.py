"""Discrete empirical interpolation for the nonlinear term (DEIM and symplectic DEIM)."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .basis import SnapshotEnsemble, pod_basis
from .reduction import ReducedModel, ReducedNonlinearTerm, _lift_restrict, _reduced_linear
from .symplectic import OrthonormalBasis, SymplecticBasis, poisson_apply

log = logging.getLogger(__name__)

COND_WARN = 1e8


class SelectionError(ValueError):
    def __init__(self, msg, step):
        super().__init__(msg)
        self.step = step


class ConstructionError(ValueError):
    def __init__(self, msg, cond):
        super().__init__(msg)
        self.cond = cond


def greedy_indices(Psi, rtol: float = 1e-12) -> np.ndarray:
    """Greedy interpolation indices (0-based) for the columns of ``Psi``.

    The first index maximizes ``|psi_1|``; each later index maximizes the
    residual of ``psi_i`` after interpolating it with the previous columns at
    the indices chosen so far.  Ties go to the smallest index.
    """
    Psi = np.asarray(Psi, dtype=float)
    if Psi.ndim == 1:
        Psi = Psi[:, None]
    m = Psi.shape[1]
    beta = [int(np.argmax(np.abs(Psi[:, 0])))]
    if abs(Psi[beta[0], 0]) <= 0:
        raise SelectionError("first column is zero", 1)
    for i in range(1, m):
        U = Psi[:, :i]
        psi = Psi[:, i]
        tau = np.linalg.solve(U[beta, :], psi[beta])
        r = psi - U @ tau
        b = int(np.argmax(np.abs(r)))
        rho = abs(r[b])
        if rho <= rtol * max(np.abs(psi).max(), 1e-300):
            raise SelectionError(f"column {i + 1} is dependent on the previous ones (rho={rho:.2e})", i + 1)
        beta.append(b)
    return np.array(beta, dtype=int)


def deim_interpolate(Psi, beta, f):
    """``Psi (P^T Psi)^{-1} P^T f``."""
    Psi = np.asarray(Psi, dtype=float)
    return Psi @ np.linalg.solve(Psi[beta, :], np.asarray(f)[beta])


def deim_nonlinear_basis(ensemble: SnapshotEnsemble, m: int):
    """Collateral POD basis of the nonlinear snapshots."""
    if ensemble.nonlinear is None:
        raise ValueError("ensemble carries no nonlinear snapshots")
    return pod_basis(ensemble.nonlinear, m)


@dataclass(eq=False)
class DeimOperator:
    W: np.ndarray
    indices: np.ndarray
    cond: float
    footprint: int


def _sampled_term(system, L, R, Psi, beta):
    """``N(z) = R J Psi (P^T Psi)^{-1} P^T f_N(L z)`` restricted to its footprint."""
    PtPsi = Psi[beta, :]
    cond = float(np.linalg.cond(PtPsi))
    if not np.isfinite(cond) or cond > 1e15:
        raise ConstructionError(f"P^T Psi is singular (condition {cond:.2e})", cond)
    if cond > COND_WARN:
        log.warning("ill-conditioned interpolation matrix: cond(P^T Psi) = %.2e", cond)
    RJPsi = poisson_apply(R, axis=1) @ Psi
    W = np.linalg.solve(PtPsi.T, RJPsi.T).T  # R J Psi (P^T Psi)^{-1}
    nl = system.nonlinearity
    keep = nl.footprint(beta)
    idx = beta[keep]
    term = ReducedNonlinearTerm(idx, L[idx].copy(), W[:, keep].copy(), nl)
    return term, DeimOperator(W, beta, cond, int(idx.size))


def build_deim_model(system, Phi, Psi, beta=None, gamma: float = 1.0) -> ReducedModel:
    """POD-Galerkin with the nonlinear term replaced by its DEIM interpolant."""
    P = Phi.matrix if isinstance(Phi, OrthonormalBasis) else np.asarray(Phi, dtype=float)
    Psi = Psi.matrix if isinstance(Psi, OrthonormalBasis) else np.asarray(Psi, dtype=float)
    if beta is None:
        beta = greedy_indices(Psi)
    beta = np.asarray(beta, dtype=int)
    L, R = _lift_restrict(system, P, P.T, gamma)
    term, op = _sampled_term(system, L, R, Psi, beta)
    return ReducedModel("deim", _reduced_linear(system, L, R), L, R, term, system, gamma,
                        meta={"deim": op, "m": beta.size})


def build_sdeim_model(system, A: SymplecticBasis, gamma: float = 1.0) -> ReducedModel:
    """Symplectic reduction with ``Psi = A`` and ``2k`` greedy interpolation indices.

    With ``gamma = 1`` the sampled term is ``J_{2k} (P^T A)^{-1} P^T f_N(A z)``.
    """
    B = A.matrix
    beta = greedy_indices(B)
    L, R = _lift_restrict(system, B, A.sympl_inverse, gamma)
    term, op = _sampled_term(system, L, R, B, beta)
    return ReducedModel("sdeim", _reduced_linear(system, L, R), L, R, term, system, gamma,
                        meta={"deim": op, "m": beta.size})


def time_online(model, x0_or_z0, spec, n_steps: int, repeats: int = 5, reduced_input=True):
    """Median wall-clock seconds per step of the online phase (setup excluded)."""
    from .integrators import make_stepper

    z0 = np.asarray(x0_or_z0, dtype=float)
    if not reduced_input:
        z0 = model.restrict_state(z0)
    times = []
    for _ in range(repeats):
        step = make_stepper(model, spec)
        z = z0.copy()
        t0 = time.perf_counter()
        for _ in range(n_steps):
            z = step(z)
        times.append((time.perf_counter() - t0) / n_steps)
    return float(np.median(times))


@dataclass
class SpeedupRow:
    method: str
    k: int
    n: int
    per_step: float
    total: float


def online_speedup_report(models: dict, system, x0, spec, n_steps: int = 200, repeats: int = 5):
    """Per-step and extrapolated total online time for the full model and each reduced model.

    ``models`` maps a label (``"pod_k40"``) to ``(k, model)``.  The total is
    per-step time times the number of steps to reach ``n_steps``.
    """
    rows = [SpeedupRow("full", system.half_dim, system.half_dim,
                       time_online(system, x0, spec, n_steps, repeats), 0.0)]
    for label, (k, model) in models.items():
        rows.append(SpeedupRow(label, k, system.half_dim,
                               time_online(model, model.restrict_state(x0), spec, n_steps, repeats),
                               0.0))
    for r in rows:
        r.total = r.per_step * n_steps
    return rows
