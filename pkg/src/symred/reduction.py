"""Galerkin-type reduced models on a lift/restrict pair.

Every reduced model integrates ``z' = R K L z + N(z)`` where ``L`` (lift) and
``R`` (restrict) satisfy ``R L = I``.  Symplectic Galerkin uses ``L = A``,
``R = A^+``; POD uses ``L = Phi``, ``R = Phi^T``.  Momentum weighting by
``gamma`` is folded into the pair as ``L = S^{-1} B``, ``R = B^+ S`` with
``S = diag(I, gamma I)``, so lifted states are always in the original
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import UnsupportedError
from .symplectic import (
    DimensionError,
    OrthonormalBasis,
    SymplecticBasis,
    poisson_apply,
    poisson_matrix,
)

KINDS = ("psd_linear", "psd_nonlinear_full", "pod_linear", "pod_nonlinear_full", "deim", "sdeim")


@dataclass(eq=False)
class ReducedNonlinearTerm:
    """``N(z) = B_out (g(B_in z) + offset)`` for a pointwise nonlinearity.

    ``idx`` lists the full-state indices whose values ``B_in z`` are needed;
    its length is the sample footprint ``m'``.  For a
    :class:`~symred.models.PointwiseNonlinearity` the scale and the constant
    offset are folded into ``B_out`` and a constant vector once.
    """

    idx: np.ndarray
    B_in: np.ndarray
    B_out: np.ndarray
    nonlinearity: object

    def __post_init__(self):
        nl = self.nonlinearity
        self._fast = all(hasattr(nl, a) for a in ("g", "dg", "offset", "scale"))
        if self._fast:
            self._g, self._dg = nl.g, nl.dg
            self._Bs = np.ascontiguousarray(nl.scale * self.B_out)
            self._const = self._Bs @ nl.offset[self.idx]

    @property
    def footprint(self) -> int:
        return int(self.idx.size)

    def __call__(self, z):
        v = self.B_in @ z
        if self._fast:
            return self._Bs @ self._g(v) + self._const
        return self.B_out @ self.nonlinearity.sample(self.idx, v)

    def jacobian(self, z):
        v = self.B_in @ z
        d = self.nonlinearity.sample_derivative(self.idx, v)
        return self.B_out @ (d[:, None] * self.B_in)


@dataclass(eq=False)
class ReducedModel:
    kind: str
    K: np.ndarray
    lift: np.ndarray
    restrict: np.ndarray
    nonlinear_part: Optional[ReducedNonlinearTerm]
    system: object
    gamma: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reduced model kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    @property
    def is_linear(self) -> bool:
        return self.nonlinear_part is None

    @property
    def is_symplectic(self) -> bool:
        return self.kind.startswith("psd") or self.kind == "sdeim"

    def rhs(self, z):
        out = self.K @ z
        if self.nonlinear_part is not None:
            out += self.nonlinear_part(z)
        return out

    def rhs_jacobian(self, z):
        if self.nonlinear_part is None:
            return self.K
        return self.K + self.nonlinear_part.jacobian(z)

    def lift_state(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.dim:
            raise DimensionError(f"reduced state has length {z.shape[0]}, expected {self.dim}")
        return self.lift @ z

    def restrict_state(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.lift.shape[0]:
            raise DimensionError(f"state has length {x.shape[0]}, expected {self.lift.shape[0]}")
        return self.restrict @ x

    def reduced_energy(self, z) -> float:
        return self.system.energy(self.lift @ z)

    def separable_parts(self):
        if self.dim % 2:
            raise UnsupportedError("odd-dimensional reduced model has no (q, p) split")
        k = self.dim // 2
        K = self.K
        if np.any(K[:k, :k]) or np.any(K[k:, k:]):
            raise UnsupportedError("reduced operator is not separable")
        nl = self.nonlinear_part
        if nl is not None and (np.any(nl.B_in[:, k:]) or np.any(nl.B_out[:k])):
            raise UnsupportedError("reduced nonlinearity couples q and p")
        Kqp, Kpq = K[:k, k:], K[k:, :k]

        def velocity(p):
            return Kqp @ p

        def force(q):
            out = Kpq @ q
            if nl is not None:
                out = out + nl(np.concatenate([q, np.zeros(k)]))[k:]
            return out

        return velocity, force


def _weighting(n, gamma):
    s = np.ones(2 * n)
    s[n:] = gamma
    return s


def _lift_restrict(system, B, B_left_inverse, gamma):
    n = system.half_dim
    if B.shape[0] != 2 * n:
        raise DimensionError(f"basis has {B.shape[0]} rows, system dimension is {2 * n}")
    s = _weighting(n, gamma)
    L = B / s[:, None]
    R = B_left_inverse * s[None, :]
    return L, R


def _reduced_linear(system, L, R):
    return R @ (system.K @ L)


def _full_nonlinear_term(system, L, R):
    nl = system.nonlinearity
    if nl is None:
        return None
    n = system.half_dim
    RJ = poisson_apply(R, axis=1)  # R @ J
    idx = np.arange(n)
    return ReducedNonlinearTerm(idx, L[:n].copy(), RJ[:, :n].copy(), nl)


def _basis_matrix(A):
    if isinstance(A, SymplecticBasis):
        return A.matrix, A.sympl_inverse
    raise TypeError("expected a SymplecticBasis")


def symplectic_galerkin_linear(system, A: SymplecticBasis, gamma: float = 1.0) -> ReducedModel:
    """``K~ = A^+ K A``; for a system with ``f_N`` only its linear part is kept."""
    B, Bp = _basis_matrix(A)
    L, R = _lift_restrict(system, B, Bp, gamma)
    return ReducedModel("psd_linear", _reduced_linear(system, L, R), L, R, None, system, gamma)


def symplectic_galerkin_nonlinear(system, A: SymplecticBasis, gamma: float = 1.0) -> ReducedModel:
    """``z' = K~ z + J_{2k} A^T f_N(A z)``; each evaluation costs O(n)."""
    B, Bp = _basis_matrix(A)
    L, R = _lift_restrict(system, B, Bp, gamma)
    nl = _full_nonlinear_term(system, L, R)
    kind = "psd_linear" if nl is None else "psd_nonlinear_full"
    return ReducedModel(kind, _reduced_linear(system, L, R), L, R, nl, system, gamma)


def pod_galerkin(system, Phi, gamma: float = 1.0) -> ReducedModel:
    """Orthogonal Galerkin projection of the first-order system onto ``Range(Phi)``."""
    P = Phi.matrix if isinstance(Phi, OrthonormalBasis) else np.asarray(Phi, dtype=float)
    L, R = _lift_restrict(system, P, P.T, gamma)
    nl = _full_nonlinear_term(system, L, R)
    kind = "pod_linear" if nl is None else "pod_nonlinear_full"
    return ReducedModel(kind, _reduced_linear(system, L, R), L, R, nl, system, gamma)


def lift_state(model: ReducedModel, z):
    return model.lift_state(z)


def restrict_state(model: ReducedModel, x):
    return model.restrict_state(x)


def energy_discrepancy(system, A: SymplecticBasis, x0) -> float:
    """``H(x0) - H(A A^+ x0)``, constant along the reduced flow."""
    return system.energy(x0) - system.energy(A.project(x0))


def is_hamiltonian_matrix(K, tol=1e-10) -> bool:
    k = K.shape[0] // 2
    Lr = poisson_matrix(k).T @ K
    return float(np.linalg.norm(Lr - Lr.T)) <= tol * max(1.0, float(np.linalg.norm(Lr)))
