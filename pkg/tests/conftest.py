import numpy as np
import pytest

from symred.models import BoundaryCondition, GridSpec, build_linear_wave, build_sine_gordon
from symred.properties import random_complex_stiefel, random_symplectic_basis


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_wave():
    """Periodic linear wave on 16 points."""
    return build_linear_wave(GridSpec(16, 1.0), c=0.5)


@pytest.fixture
def small_sine_gordon():
    return build_sine_gordon(GridSpec(24, 12.0), BoundaryCondition.dirichlet(0.0, 2 * np.pi))


@pytest.fixture
def oscillator():
    """Harmonic oscillator ``H = (q^2 + p^2)/2`` as a one-degree-of-freedom wave-like system."""
    import scipy.sparse as sp

    from symred.models import HamiltonianSystem

    K = sp.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    return HamiltonianSystem(1, K, None, lambda y: 0.5 * float(y @ y))


@pytest.fixture
def orthosymplectic(rng):
    def make(n, k):
        from symred.basis import complexify

        return complexify(random_complex_stiefel(rng, n, k))

    return make


@pytest.fixture
def general_symplectic(rng):
    def make(n, k):
        return random_symplectic_basis(rng, n, k)

    return make


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA[number] = line
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
