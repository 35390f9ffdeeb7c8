"""Randomized invariant checks shared by the ``verify`` command and the tests.

Each property draws a small random instance from a :class:`numpy.random.Generator`
and returns a nonnegative residual; the property holds when the residual is at
most its tolerance.  :func:`run_suite` runs every property a number of times and
reports the worst residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import complexify
from .symplectic import (
    check_symplectic,
    extend_basis_with_state,
    poisson_apply,
    poisson_matrix,
    symplectic_inverse,
    symplecticity_residual,
)

TOL = 1e-10


@dataclass(frozen=True)
class PropertyResult:
    name: str
    trials: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tol)


# --- random instances --------------------------------------------------------


def _dims(rng, n_max=6):
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, n + 1))
    return n, k


def random_complex_stiefel(rng, n, k):
    """``U`` in ``C^{n x k}`` with ``U^H U = I``."""
    Z = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    Q, _ = np.linalg.qr(Z)
    return Q


def random_symplectic_matrix(rng, n):
    """Square symplectic matrix built from shears and a block scaling."""
    B = rng.standard_normal((n, n))
    B = 0.25 * (B + B.T)
    C = rng.standard_normal((n, n))
    C = 0.25 * (C + C.T)
    G = np.eye(n) + 0.2 * rng.standard_normal((n, n))
    I, Z = np.eye(n), np.zeros((n, n))
    upper = np.block([[I, B], [Z, I]])
    lower = np.block([[I, Z], [C, I]])
    scale = np.block([[G, Z], [Z, np.linalg.inv(G).T]])
    return upper @ lower @ scale


def random_symplectic_basis(rng, n, k):
    """``2n x 2k`` symplectic matrix that is generally not orthonormal."""
    S = random_symplectic_matrix(rng, n)
    return S @ complexify(random_complex_stiefel(rng, n, k))


# --- lemma identities --------------------------------------------------------


def lemma_double_inverse(rng):
    n, k = _dims(rng)
    A = rng.standard_normal((2 * n, 2 * k))
    return float(np.abs(symplectic_inverse(symplectic_inverse(A)) - A).max())


def lemma_transpose_inverse(rng):
    n, k = _dims(rng)
    A = rng.standard_normal((2 * n, 2 * k))
    B = symplectic_inverse(symplectic_inverse(A).T).T
    return float(np.abs(B - A).max())


def lemma_exchange(rng):
    n, k = _dims(rng)
    A = rng.standard_normal((2 * n, 2 * k))
    lhs = poisson_apply(symplectic_inverse(A), axis=1)  # A^+ J_{2n}
    rhs = poisson_apply(A.T)  # J_{2k} A^T
    return float(np.abs(lhs - rhs).max())


def lemma_equivalence(rng):
    """Symplectic ``A``: ``(A^+)^T`` symplectic and ``A^+ A = I``; a generic
    random ``A`` fails all three tests together."""
    n, k = _dims(rng)
    A = random_symplectic_basis(rng, n, k)
    Ap = symplectic_inverse(A)
    r = max(symplecticity_residual(A), symplecticity_residual(Ap.T),
            float(np.abs(Ap @ A - np.eye(2 * k)).max()))
    G = rng.standard_normal((2 * n, 2 * k))
    Gp = symplectic_inverse(G)
    verdicts = {bool(check_symplectic(G, TOL)), bool(check_symplectic(Gp.T, TOL)),
                bool(np.abs(Gp @ G - np.eye(2 * k)).max() <= TOL)}
    return r if len(verdicts) == 1 else np.inf


def lemma_complex_image(rng):
    """``A(U)`` is symplectic for ``U`` in the complex Stiefel set, and the
    blocks of any such image recover a unitary-column ``U``."""
    n, k = _dims(rng)
    U = random_complex_stiefel(rng, n, k)
    A = complexify(U)
    Phi, Psi = A[:n, :k], A[n:, :k]
    V = Phi + 1j * Psi
    return max(symplecticity_residual(A), float(np.abs(V.conj().T @ V - np.eye(k)).max()),
               float(np.abs(V - U).max()))


def lemma_orthosymplectic(rng):
    """``A(U)`` has orthonormal columns and its second half is ``J^T`` times the first."""
    n, k = _dims(rng)
    A = complexify(random_complex_stiefel(rng, n, k))
    Aq, Ap = A[:, :k], A[:, k:]
    return max(float(np.abs(A.T @ A - np.eye(2 * k)).max()),
               float(np.abs(Ap - poisson_apply(Aq, transpose=True)).max()))


def lemma_homomorphism(rng):
    n1, n2, n3 = (int(v) for v in rng.integers(1, 6, size=3))
    C = rng.standard_normal((n1, n2)) + 1j * rng.standard_normal((n1, n2))
    D = rng.standard_normal((n2, n3)) + 1j * rng.standard_normal((n2, n3))
    return max(float(np.abs(complexify(C) @ complexify(D) - complexify(C @ D)).max()),
               float(np.abs(complexify(C.conj().T) - complexify(C).T).max()))


def lemma_block_diagonal(rng):
    """``diag(Phi, Psi)`` with ``Psi^T Phi = I`` is symplectic with inverse
    ``diag(Psi^T, Phi^T)``; ``Psi = Phi`` orthonormal gives an orthosymplectic basis."""
    n, k = _dims(rng)
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    G = np.eye(k) + 0.2 * rng.standard_normal((k, k))
    Phi = Q @ G
    Psi = Q @ np.linalg.inv(G).T  # Psi^T Phi = I
    Z = np.zeros((n, k))
    B = np.block([[Phi, Z], [Z, Psi]])
    Bp = np.block([[Psi.T, Z.T], [Z.T, Phi.T]])
    C = np.block([[Q, Z], [Z, Q]])
    return max(symplecticity_residual(B), float(np.abs(symplectic_inverse(B) - Bp).max()),
               symplecticity_residual(C), float(np.abs(C.T @ C - np.eye(2 * k)).max()))


LEMMAS: dict[str, Callable] = {
    "inverse_involution": lemma_double_inverse,
    "inverse_transpose": lemma_transpose_inverse,
    "inverse_exchange": lemma_exchange,
    "symplectic_equivalence": lemma_equivalence,
    "complex_image": lemma_complex_image,
    "orthosymplectic_image": lemma_orthosymplectic,
    "complex_homomorphism": lemma_homomorphism,
    "block_diagonal": lemma_block_diagonal,
}


# --- cross-module invariants -------------------------------------------------


def prop_poisson(rng):
    n = int(rng.integers(1, 8))
    J = poisson_matrix(n)
    v = rng.standard_normal(2 * n)
    return max(float(np.abs(J.T @ J - np.eye(2 * n)).max()),
               float(np.abs(J @ J + np.eye(2 * n)).max()),
               float(np.abs(poisson_apply(v) - J @ v).max()))


def prop_cotangent_symplectic(rng):
    from .basis import SnapshotEnsemble, cotangent_lift

    n = int(rng.integers(4, 12))
    N = int(rng.integers(3, 8))
    k = int(rng.integers(1, min(n, 2 * N) + 1))
    ens = SnapshotEnsemble(rng.standard_normal((2 * n, N)))
    A, _ = cotangent_lift(ens, k)
    return symplecticity_residual(A.matrix)


def prop_energy_conservation(rng):
    from .integrators import IntegratorSpec, integrate
    from .models import GridSpec, build_linear_wave

    n = int(rng.integers(8, 24))
    grid = GridSpec(n, 1.0)
    system = build_linear_wave(grid, c=float(rng.uniform(0.05, 1.0)))
    x0 = rng.standard_normal(2 * n)
    traj = integrate(system, x0, IntegratorSpec(dt=0.01), 1.0, stride=10, energy=system.energy)
    E = traj.energies
    return float(np.abs(E - E[0]).max() / abs(E[0]))


def prop_deim_exactness(rng):
    from .deim import deim_interpolate, greedy_indices

    m_rows = int(rng.integers(5, 30))
    m = int(rng.integers(1, min(m_rows, 8) + 1))
    Psi, _ = np.linalg.qr(rng.standard_normal((m_rows, m)))
    beta = greedy_indices(Psi)
    f = Psi @ rng.standard_normal(m)
    again = greedy_indices(Psi)
    if not np.array_equal(beta, again):
        return np.inf
    return float(np.abs(deim_interpolate(Psi, beta, f) - f).max() / max(np.abs(f).max(), 1e-300))


def prop_extension(rng):
    n, k = _dims(rng)
    if k == n:
        k = n - 1 if n > 1 else None
    if k is None:
        return 0.0
    from .symplectic import as_symplectic_basis

    A = as_symplectic_basis(complexify(random_complex_stiefel(rng, n, k)))
    x0 = rng.standard_normal(2 * n)
    ext = extend_basis_with_state(A, x0)
    B = ext.basis
    rec = B.matrix @ (B.sympl_inverse @ x0)
    return max(symplecticity_residual(B.matrix),
               float(np.linalg.norm(rec - x0) / np.linalg.norm(x0)))


def prop_reduced_hamiltonian(rng):
    from .models import GridSpec, build_linear_wave
    from .reduction import symplectic_galerkin_linear
    from .symplectic import as_symplectic_basis

    n = int(rng.integers(4, 16))
    k = int(rng.integers(1, n + 1))
    system = build_linear_wave(GridSpec(n, 1.0), c=0.5)
    A = as_symplectic_basis(random_symplectic_basis(rng, n, k), tol=1e-8)
    Kr = symplectic_galerkin_linear(system, A).K
    Lr = poisson_apply(Kr, transpose=True)  # J^T K~
    return float(np.abs(Lr - Lr.T).max() / max(np.abs(Lr).max(), 1.0))


INVARIANTS: dict[str, Callable] = {
    "poisson_identities": prop_poisson,
    "cotangent_symplectic": prop_cotangent_symplectic,
    "midpoint_energy_conservation": prop_energy_conservation,
    "deim_exactness": prop_deim_exactness,
    "energy_extension": prop_extension,
    "reduced_operator_hamiltonian": prop_reduced_hamiltonian,
}


def run_property(name, fn, rng, trials: int, tol: float = TOL) -> PropertyResult:
    worst = 0.0
    for _ in range(trials):
        r = float(fn(rng))
        if not r <= worst:
            worst = r
    return PropertyResult(name, trials, worst, tol)


def run_suite(seed: int = 0, trials: int = 100, include_invariants: bool = True):
    """Run every lemma (and optionally every invariant) ``trials`` times."""
    rng = np.random.default_rng(seed)
    props = dict(LEMMAS)
    if include_invariants:
        props.update(INVARIANTS)
    return [run_property(name, fn, rng, trials) for name, fn in props.items()]
