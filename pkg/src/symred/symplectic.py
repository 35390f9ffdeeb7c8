"""Linear algebra on the canonical symplectic space R^{2n}.

The Poisson matrix ``J_{2n} = [[0, I], [-I, 0]]`` is never stored; every
product with it is the block swap-and-negate implemented by
:func:`poisson_apply`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TOL = 1e-10
NLP_TOL = 1e-8
EXTEND_NOISE = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with the symplectic structure."""


def _half(m: int, what: str) -> int:
    if m % 2:
        raise DimensionError(f"{what} has odd length {m}; expected 2n")
    return m // 2


def poisson_apply(v, axis: int = 0, transpose: bool = False) -> np.ndarray:
    """Apply ``J_{2n}`` (or its transpose) to ``v`` along ``axis``.

    For a vector ``v = [a; b]`` this returns ``[b; -a]``; with
    ``transpose=True`` it returns ``[-b; a]``.  Matrices are handled
    column-wise for ``axis=0`` and row-wise (``v @ J``) for ``axis=1``;
    note that ``v @ J`` equals ``(J^T v^T)^T``.
    """
    v = np.asarray(v)
    n = _half(v.shape[axis], "input")
    a = np.take(v, np.arange(n), axis=axis)
    b = np.take(v, np.arange(n, 2 * n), axis=axis)
    if axis == 1:
        # right multiplication: v @ J = [-b, a]
        transpose = not transpose
    if transpose:
        return np.concatenate([-b, a], axis=axis)
    return np.concatenate([b, -a], axis=axis)


def poisson_matrix(n: int) -> np.ndarray:
    """Dense ``J_{2n}``.  Only meant for tests and tiny reduced spaces."""
    return poisson_apply(np.eye(2 * n))


@dataclass(frozen=True)
class PoissonStructure:
    """The canonical structure on R^{2n}."""

    half_dim: int

    def __post_init__(self):
        if self.half_dim < 1:
            raise DimensionError("half_dim must be positive")

    def apply(self, v):
        v = np.asarray(v)
        if v.shape[0] != 2 * self.half_dim:
            raise DimensionError(f"expected length {2 * self.half_dim}, got {v.shape[0]}")
        return poisson_apply(v)

    def apply_transpose(self, v):
        v = np.asarray(v)
        if v.shape[0] != 2 * self.half_dim:
            raise DimensionError(f"expected length {2 * self.half_dim}, got {v.shape[0]}")
        return poisson_apply(v, transpose=True)

    def form(self, u, v) -> float:
        """Symplectic two-form ``u^T J v``."""
        return float(np.dot(u, self.apply(v)))


def symplectic_inverse(A) -> np.ndarray:
    """Return ``A^+ = J_{2k}^T A^T J_{2n}`` for a ``2n x 2k`` matrix ``A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError("symplectic_inverse expects a matrix")
    _half(A.shape[0], "row count")
    _half(A.shape[1], "column count")
    # A^T J_{2n} = (J_{2n}^T A)^T
    AtJ = poisson_apply(A, transpose=True).T
    return poisson_apply(AtJ, transpose=True)


def symplecticity_residual(A) -> float:
    """Frobenius norm of ``A^T J_{2n} A - J_{2k}``."""
    A = np.asarray(A, dtype=float)
    k = _half(A.shape[1], "column count")
    _half(A.shape[0], "row count")
    G = A.T @ poisson_apply(A)
    return float(np.linalg.norm(G - poisson_matrix(k)))


@dataclass(frozen=True, eq=False)
class SymplecticBasis:
    """A validated ``2n x 2k`` symplectic matrix with its cached symplectic inverse."""

    matrix: np.ndarray
    sympl_inverse: np.ndarray
    tolerance: float = DEFAULT_TOL
    residual: float = 0.0

    @property
    def half_dim_full(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def half_dim_reduced(self) -> int:
        return self.matrix.shape[1] // 2

    @property
    def shape(self):
        return self.matrix.shape

    def project(self, x):
        """``A A^+ x``."""
        return self.matrix @ (self.sympl_inverse @ x)

    def blocks(self):
        """Column split ``[A_1, A_2]`` at ``k``."""
        k = self.half_dim_reduced
        return self.matrix[:, :k], self.matrix[:, k:]


@dataclass(frozen=True)
class SymplecticityFailure:
    """Returned by :func:`check_symplectic` when the residual exceeds the tolerance."""

    residual: float
    tolerance: float
    reason: str = "A^T J A differs from J"

    def __bool__(self):
        return False


def check_symplectic(A, tol: float = DEFAULT_TOL):
    """Validate ``A`` as a symplectic matrix.

    Returns a :class:`SymplecticBasis` when ``||A^T J A - J||_F <= tol`` and a
    :class:`SymplecticityFailure` carrying the residual otherwise.  Shape
    problems are also reported as failures rather than raised.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] % 2 or A.shape[1] % 2:
        return SymplecticityFailure(np.inf, tol, f"shape {A.shape} is not 2n x 2k")
    if A.shape[1] > A.shape[0]:
        return SymplecticityFailure(np.inf, tol, "k > n")
    if not np.all(np.isfinite(A)):
        return SymplecticityFailure(np.inf, tol, "non-finite entries")
    r = symplecticity_residual(A)
    if r > tol:
        return SymplecticityFailure(r, tol)
    A.setflags(write=False)
    Ap = symplectic_inverse(A)
    Ap.setflags(write=False)
    return SymplecticBasis(A, Ap, tol, r)


def as_symplectic_basis(A, tol: float = DEFAULT_TOL) -> SymplecticBasis:
    """Like :func:`check_symplectic` but raises on failure."""
    out = check_symplectic(A, tol)
    if isinstance(out, SymplecticityFailure):
        raise ValueError(
            f"matrix is not symplectic: residual {out.residual:.3e} > {tol:.1e} ({out.reason})"
        )
    return out


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Matrix with orthonormal columns (POD basis)."""

    matrix: np.ndarray
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        Phi = np.asarray(self.matrix, dtype=float)
        r = np.linalg.norm(Phi.T @ Phi - np.eye(Phi.shape[1]))
        if r > self.tolerance:
            raise ValueError(f"columns are not orthonormal: residual {r:.3e}")

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class Extension:
    basis: SymplecticBasis
    extended: bool
    residual_norm: float = field(default=0.0)


def extend_basis_with_state(A: SymplecticBasis, x0, tol: float = DEFAULT_TOL) -> Extension:
    """Enlarge ``A`` by one symplectic pair so that ``x0`` lies in its range.

    With ``r0 = x0 - A A^+ x0`` and ``r = r0 / ||r0||`` the new basis is
    ``[A_1, r, A_2, f]`` with ``f = (I - A A^+) J^T r``.  For an orthosymplectic
    ``A`` the correction vanishes and ``f = J^T r``; for a general symplectic
    ``A`` it keeps ``f`` in the symplectic complement of ``Range(A)``.  If
    ``||r0|| <= 1e-12 ||x0||`` the state is already in range and ``A`` is
    returned unchanged (``extended=False``).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (A.matrix.shape[0],):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({A.matrix.shape[0]},)")
    r0 = x0 - A.project(x0)
    nr = float(np.linalg.norm(r0))
    if nr <= EXTEND_NOISE * np.linalg.norm(x0):
        return Extension(A, False, nr)
    rhat = r0 / nr
    A1, A2 = A.blocks()
    f = poisson_apply(rhat, transpose=True)
    f = f - A.project(f)
    Aext = np.column_stack([A1, rhat, A2, f])
    return Extension(as_symplectic_basis(Aext, tol), True, nr)


# --- matrix exchange format ---------------------------------------------


def save_matrix_csv(path, M) -> None:
    """Write ``M`` column-major: one line per column, preceded by a shape header."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# rows={rows} cols={cols}\n")
        for j in range(cols):
            fh.write(",".join(repr(float(v)) for v in M[:, j]) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing '# rows=.. cols=..' header")
    fields = dict(tok.split("=") for tok in text[0][1:].split())
    rows, cols = int(fields["rows"]), int(fields["cols"])
    body = [ln for ln in text[1:] if ln.strip()]
    if len(body) != cols:
        raise ValueError(f"{path}: header says {cols} columns, found {len(body)}")
    M = np.empty((rows, cols))
    for j, ln in enumerate(body):
        vals = np.array([float(v) for v in ln.split(",")])
        if vals.size != rows:
            raise ValueError(f"{path}: column {j} has {vals.size} entries, expected {rows}")
        M[:, j] = vals
    return M
