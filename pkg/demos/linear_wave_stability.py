"""POD versus symplectic reduction of the periodic linear wave.

Builds the reference trajectory, then for a few basis widths prints the total
error of POD and cotangent-lift models, the POD instability pair (lambda*, a*)
and the relative energy drift of the symplectic model.

    python demos/linear_wave_stability.py
"""

import numpy as np

from symred import (
    IntegratorSpec,
    SnapshotEnsemble,
    assemble_weighted,
    build_linear_wave,
    cotangent_lift,
    energy_series,
    error_series,
    integrate,
    pod_basis,
    pod_galerkin,
    pod_spectral_stability,
    spline_bump_initial,
    symplectic_galerkin_linear,
)
from symred.models import GridSpec

GAMMA = 0.01


def main():
    grid = GridSpec(500, 1.0)
    system = build_linear_wave(grid, c=0.1)
    x0 = spline_bump_initial(grid)
    spec = IntegratorSpec(dt=0.01)
    ref = integrate(system, x0, spec, 50.0, stride=50)
    ens = SnapshotEnsemble.from_trajectory(ref)
    weighted = assemble_weighted(ens, GAMMA)

    # POD runs that diverge report an infinite total error
    print(f"{'k':>4} {'POD error':>12} {'lambda*':>10} {'|a*|':>8} {'PSD error':>12} {'PSD drift':>10}")
    for k in (10, 20, 40, 80):
        Phi, _ = pod_basis(weighted.states, k)
        pod = pod_galerkin(system, Phi, GAMMA)
        stab = pod_spectral_stability(pod, x0)
        run = integrate(pod, pod.restrict_state(x0), spec, 50.0, stride=50)
        pod_err = error_series(ref, run.states @ pod.lift.T, run.times, compare="q",
                               blowup_time=run.blowup_time).total_error

        A, _ = cotangent_lift(ens, k // 2, GAMMA)
        psd = symplectic_galerkin_linear(system, A, GAMMA)
        run = integrate(psd, psd.restrict_state(x0), spec, 50.0, stride=50)
        psd_err = error_series(ref, run.states @ psd.lift.T, run.times, compare="q").total_error
        E = energy_series(psd, run.states)
        drift = np.abs(E - E[0]).max() / E[0]
        print(f"{k:>4} {pod_err:>12.4g} {stab.lambda_star.real:>10.4g} {abs(stab.a_star):>8.3g} "
              f"{psd_err:>12.4g} {drift:>10.2e}")


if __name__ == "__main__":
    main()
