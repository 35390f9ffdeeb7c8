"""SDEIM on a travelling sine-Gordon kink, compared with the exact solution.

A coarser grid than the full experiment keeps this under a minute; pass
``--full`` for n=2000 and T=150.

    python demos/sine_gordon_sdeim.py [--full]
"""

import argparse
import time

from symred import (
    IntegratorSpec,
    SnapshotEnsemble,
    build_sdeim_model,
    build_sine_gordon,
    cotangent_lift,
    energy_series,
    error_series,
    integrate,
    kink_state,
    relative_energy_drift,
    time_online,
)
from symred.models import GridSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()
    n, T, ks = (2000, 150.0, (40, 80, 160)) if args.full else (500, 40.0, (20, 40, 80))

    grid = GridSpec(n, 50.0)
    system = build_sine_gordon(grid)
    x0 = kink_state(grid, 0.0, 0.2, 10.0)
    spec = IntegratorSpec(dt=0.0125)
    exact = lambda t: kink_state(grid, t, 0.2, 10.0)  # noqa: E731

    t0 = time.perf_counter()
    ref = integrate(system, x0, spec, T, stride=10)
    print(f"full model n={n}: {time.perf_counter() - t0:.1f} s, "
          f"error vs exact {error_series(exact, ref.states, ref.times).total_error:.3g}")
    ens = SnapshotEnsemble.from_trajectory(ref, system)
    full_step = time_online(system, x0, spec, n_steps=20, repeats=3)

    for k in ks:
        A, _ = cotangent_lift(ens, k // 2, include_nonlinear=True)
        model = build_sdeim_model(system, A)
        run = integrate(model, model.restrict_state(x0), spec, T, stride=10)
        lifted = run.states @ model.lift.T
        err = error_series(exact, lifted, run.times).total_error
        drift = relative_energy_drift(energy_series(system, lifted))
        step = time_online(model, x0, spec, n_steps=200, repeats=3, reduced_input=False)
        print(f"SDEIM k={k:>3}: error {err:.3g}, energy drift {drift:.1e}, "
              f"{1e6 * step:.0f} us/step ({full_step / step:.0f}x faster than full)")


if __name__ == "__main__":
    main()
