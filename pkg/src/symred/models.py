"""Full-order Hamiltonian systems ``x' = K x + J f_N(x)`` and the wave benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .symplectic import DimensionError, poisson_apply


class UnsupportedError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """``n`` equally spaced points ``x_i = i dx`` (``i = 1..n``) on ``[0, l]``."""

    n: int
    l: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points")
        if not self.l > 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.l / self.n

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(1, self.n + 1)


@dataclass(frozen=True)
class BoundaryCondition:
    tag: str
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self):
        if self.tag not in ("periodic", "dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.tag!r}")
        if self.tag == "dirichlet" and not (np.isfinite(self.left) and np.isfinite(self.right)):
            raise ValueError("dirichlet values must be finite")

    @classmethod
    def periodic(cls):
        return cls("periodic")

    @classmethod
    def dirichlet(cls, left: float, right: float):
        return cls("dirichlet", float(left), float(right))

    @classmethod
    def neumann(cls):
        return cls("neumann")


class PointwiseNonlinearity:
    """``f_N(x) = [scale * (g(q) + offset); 0]`` with ``g`` acting entrywise.

    Sampled evaluation at interpolation indices only touches the matching
    ``q`` entries of the state, so the footprint of an index set is its
    intersection with ``{0..n-1}``.
    """

    def __init__(self, n: int, g, dg, offset=None, scale: float = 1.0):
        self.n = n
        self.g = g
        self.dg = dg
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        self.scale = float(scale)

    def __call__(self, x):
        out = np.zeros(2 * self.n)
        out[: self.n] = self.scale * (self.g(x[: self.n]) + self.offset)
        return out

    def jacobian(self, x):
        d = np.zeros(2 * self.n)
        d[: self.n] = self.scale * self.dg(x[: self.n])
        return sp.diags(d, format="csr")

    def footprint(self, indices) -> np.ndarray:
        """Positions (within ``indices``) that produce a nonzero entry; those
        entries depend only on the state at the same index."""
        indices = np.asarray(indices)
        return np.flatnonzero(indices < self.n)

    def sample(self, idx, x_at_idx):
        """``f_N(x)[idx]`` for ``idx`` inside the q block, given ``x[idx]``."""
        return self.scale * (self.g(x_at_idx) + self.offset[idx])

    def sample_derivative(self, idx, x_at_idx):
        return self.scale * self.dg(x_at_idx)


@dataclass(eq=False)
class HamiltonianSystem:
    """Split Hamiltonian system ``x' = K x + J_{2n} f_N(x)``.

    ``energy`` is the reported discrete Hamiltonian ``H_d``; ``hamiltonian``
    is the function whose scaled gradient ``grad/dx`` equals ``L x + f_N(x)``
    (the two only differ by Dirichlet boundary weights).
    """

    half_dim: int
    K: sp.csr_matrix
    nonlinearity: Optional[PointwiseNonlinearity]
    energy_fn: Callable[[np.ndarray], float]
    hamiltonian_fn: Optional[Callable[[np.ndarray], float]] = None
    grid: Optional[GridSpec] = None
    c: float = 1.0
    bc: Optional[BoundaryCondition] = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)
    _jac_pattern: Optional[tuple] = field(default=None, init=False, repr=False)

    @property
    def dim(self) -> int:
        return 2 * self.half_dim

    @property
    def is_linear(self) -> bool:
        return self.nonlinearity is None

    @property
    def L(self) -> sp.csr_matrix:
        """``J^T K``, symmetric for a Hamiltonian matrix."""
        return _jt_sparse(self.K)

    def f_N(self, x):
        if self.nonlinearity is None:
            return np.zeros(self.dim)
        return self.nonlinearity(x)

    def rhs(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise DimensionError(f"state has length {x.shape[0]}, expected {self.dim}")
        out = self.K @ x
        if self.nonlinearity is not None:
            out = out + poisson_apply(self.nonlinearity(x))
        return out

    def rhs_jacobian(self, x):
        """``K + J_{2n} df_N/dx`` as a CSC matrix."""
        nl = self.nonlinearity
        if nl is None:
            return self.K
        if not sp.issparse(self.K):
            if not isinstance(nl, PointwiseNonlinearity):
                return np.asarray(self.K) + poisson_apply(nl.jacobian(x).toarray())
            n = self.half_dim
            M = np.array(self.K, dtype=float)
            M[n:, :n] -= np.diag(nl.scale * nl.dg(np.asarray(x, dtype=float)[:n]))
            return M
        if not isinstance(nl, PointwiseNonlinearity):
            return (self.K + _j_sparse(self.half_dim) @ nl.jacobian(x)).tocsc()
        # J diag([g'(q); 0]) only touches the (p, q) diagonal; reuse a fixed pattern
        n = self.half_dim
        if self._jac_pattern is None:
            E = sp.csc_matrix((np.ones(n), (np.arange(n, 2 * n), np.arange(n))),
                              shape=(2 * n, 2 * n))
            M = (self.K.tocsc() + E).tocsc()
            M.sort_indices()
            col = np.repeat(np.arange(2 * n), np.diff(M.indptr))
            pos = np.flatnonzero((col < n) & (M.indices == col + n))
            base = M.data.copy()
            base[pos] -= 1.0
            self._jac_pattern = (base, M.indices, M.indptr, pos)
        base, indices, indptr, pos = self._jac_pattern
        data = base.copy()
        data[pos] -= nl.scale * nl.dg(np.asarray(x, dtype=float)[:n])
        return sp.csc_matrix((data, indices, indptr), shape=(2 * n, 2 * n))

    def energy(self, y) -> float:
        return float(self.energy_fn(np.asarray(y, dtype=float)))

    def hamiltonian(self, y) -> float:
        fn = self.hamiltonian_fn or self.energy_fn
        return float(fn(np.asarray(y, dtype=float)))

    def separable_parts(self):
        """Return ``(velocity(p), force(q))`` for ``H = T(p) + U(q)``.

        Requires zero diagonal blocks in ``K`` and a nonlinearity acting on
        ``q`` only.
        """
        n = self.half_dim
        K = self.K.tocsr()
        if K[:n, :n].count_nonzero() or K[n:, n:].count_nonzero():
            raise UnsupportedError("system is not separable: K has nonzero diagonal blocks")
        Kqp = K[:n, n:]
        Kpq = K[n:, :n]
        nl = self.nonlinearity

        def velocity(p):
            return Kqp @ p

        def force(q):
            out = Kpq @ q
            if nl is not None:
                x = np.concatenate([q, np.zeros(n)])
                out = out - nl(x)[:n]
            return out

        return velocity, force


def _j_sparse(n: int) -> sp.csr_matrix:
    I = sp.identity(n, format="csr")
    return sp.bmat([[None, I], [-I, None]], format="csr")


def _jt_sparse(K) -> sp.csr_matrix:
    n = K.shape[0] // 2
    return (_j_sparse(n).T @ K).tocsr()


# --- finite differences ------------------------------------------------------


def build_dxx(grid: GridSpec, bc: BoundaryCondition) -> sp.csr_matrix:
    """Three-point second-difference matrix ``(1, -2, 1) / dx^2``.

    Periodic wraps the corners.  Dirichlet omits the boundary couplings (they
    enter through ``f_N``).  Neumann mirrors the ghost point onto the first
    interior node (``q_0 = q_1``), which keeps the matrix symmetric.
    """
    n, h2 = grid.n, grid.dx**2
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    D = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if bc.tag == "periodic":
        D[0, n - 1] += 1.0
        D[n - 1, 0] += 1.0
    elif bc.tag == "neumann":
        D[0, 0] += 1.0
        D[n - 1, n - 1] += 1.0
    return (D / h2).tocsr()


def _wave_K(grid: GridSpec, c: float, bc: BoundaryCondition) -> sp.csr_matrix:
    n = grid.n
    D = build_dxx(grid, bc)
    I = sp.identity(n, format="csr")
    return sp.bmat([[None, I], [c**2 * D, None]], format="csr")


def _ghosts(q, bc: BoundaryCondition):
    if bc.tag == "periodic":
        return q[-1], q[0]
    if bc.tag == "neumann":
        return q[0], q[-1]
    return bc.left, bc.right


def wave_energy(y, grid: GridSpec, c: float, bc: BoundaryCondition, G=None) -> float:
    """Discrete Hamiltonian ``H_d`` with half-weighted forward and backward differences.

    ``H_d = dx * sum(p^2/2 + G(q)) + c^2/(4 dx) * sum((q_{i+1}-q_i)^2 + (q_i-q_{i-1})^2)``
    with ghost values ``q_0``, ``q_{n+1}`` supplied by the boundary condition.
    """
    n, dx = grid.n, grid.dx
    q, p = y[:n], y[n:]
    q0, qn1 = _ghosts(q, bc)
    qe = np.concatenate([[q0], q, [qn1]])
    d = np.diff(qe)  # n+1 differences
    # forward differences i=1..n are d[1:], backward are d[:-1]
    grad = (np.sum(d[1:] ** 2) + np.sum(d[:-1] ** 2)) * c**2 / (4 * dx)
    pot = 0.0 if G is None else dx * float(np.sum(G(q)))
    return 0.5 * dx * float(p @ p) + grad + pot


def wave_hamiltonian(y, grid: GridSpec, c: float, bc: BoundaryCondition, G=None) -> float:
    """Hamiltonian generating ``x' = K x + J f_N`` exactly (times ``dx``).

    Identical to :func:`wave_energy` except that Dirichlet boundary differences
    carry full weight ``c^2/(2 dx)``.
    """
    if bc.tag != "dirichlet":
        return wave_energy(y, grid, c, bc, G)
    n, dx = grid.n, grid.dx
    q, p = y[:n], y[n:]
    d = np.diff(np.concatenate([[bc.left], q, [bc.right]]))
    pot = 0.0 if G is None else dx * float(np.sum(G(q)))
    return 0.5 * dx * float(p @ p) + c**2 / (2 * dx) * float(d @ d) + pot


def _boundary_offset(grid: GridSpec, c: float, bc: BoundaryCondition) -> np.ndarray:
    off = np.zeros(grid.n)
    if bc.tag == "dirichlet":
        off[0] -= c**2 / grid.dx**2 * bc.left
        off[-1] -= c**2 / grid.dx**2 * bc.right
    return off


def build_linear_wave(grid: GridSpec, c: float, bc: Optional[BoundaryCondition] = None) -> HamiltonianSystem:
    """Linear wave ``u_tt = c^2 u_xx``; ``f_N`` only carries Dirichlet data."""
    if not c > 0:
        raise ValueError("wave speed must be positive")
    bc = bc or BoundaryCondition.periodic()
    off = _boundary_offset(grid, c, bc)
    nl = None
    if np.any(off):
        nl = PointwiseNonlinearity(grid.n, np.zeros_like, np.zeros_like, off)
    return HamiltonianSystem(
        half_dim=grid.n,
        K=_wave_K(grid, c, bc),
        nonlinearity=nl,
        energy_fn=lambda y: wave_energy(y, grid, c, bc),
        hamiltonian_fn=lambda y: wave_hamiltonian(y, grid, c, bc),
        grid=grid,
        c=c,
        bc=bc,
        name="linear_wave",
    )


def build_sine_gordon(grid: GridSpec, bc: Optional[BoundaryCondition] = None, c: float = 1.0) -> HamiltonianSystem:
    """Sine-Gordon ``u_tt = u_xx - sin u`` with ``G(u) = 1 - cos u``."""
    bc = bc or BoundaryCondition.dirichlet(0.0, 2 * np.pi)
    G = lambda q: 1.0 - np.cos(q)
    nl = PointwiseNonlinearity(grid.n, np.sin, np.cos, _boundary_offset(grid, c, bc))
    return HamiltonianSystem(
        half_dim=grid.n,
        K=_wave_K(grid, c, bc),
        nonlinearity=nl,
        energy_fn=lambda y: wave_energy(y, grid, c, bc, G),
        hamiltonian_fn=lambda y: wave_hamiltonian(y, grid, c, bc, G),
        grid=grid,
        c=c,
        bc=bc,
        name="sine_gordon",
    )


def energy(system: HamiltonianSystem, y) -> float:
    return system.energy(y)


# --- initial data and exact solutions --------------------------------------


def spline_bump(s):
    """Compactly supported cubic ``h(s)``: ``1 - 1.5 s^2 + 0.75 s^3`` on [0,1],
    ``(2-s)^3/4`` on (1,2], zero beyond."""
    s = np.abs(np.asarray(s, dtype=float))
    return np.where(
        s <= 1.0,
        1.0 - 1.5 * s**2 + 0.75 * s**3,
        np.where(s <= 2.0, 0.25 * (2.0 - s) ** 3, 0.0),
    )


def spline_bump_initial(grid: GridSpec) -> np.ndarray:
    s = 10.0 * np.abs(grid.x - 0.5)
    return np.concatenate([spline_bump(s), np.zeros(grid.n)])


def kink_solution(t, x, v: float, x0: float, sign: int = 1):
    """Travelling kink (``sign=+1``) or antikink (``-1``) and its time derivative."""
    if abs(v) >= 1:
        raise ValueError("kink speed must satisfy |v| < 1")
    w = np.sqrt(1.0 - v * v)
    xi = sign * (np.asarray(x, dtype=float) - x0 - v * t) / w
    u = 4.0 * np.arctan(np.exp(xi))
    # d/dt 4 atan(e^xi) = 2 sech(xi) * dxi/dt
    ut = 2.0 / np.cosh(xi) * (-sign * v / w)
    return u, ut


def kink_state(grid: GridSpec, t: float, v: float, x0: float, sign: int = 1) -> np.ndarray:
    u, ut = kink_solution(t, grid.x, v, x0, sign)
    return np.concatenate([u, ut])
