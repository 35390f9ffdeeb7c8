"""Command line experiment runner: ``simulate``, ``reduce``, ``run`` and ``verify``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 full-order solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .basis import (
    RANK_RTOL,
    RankError,
    RefinementError,
    SnapshotEnsemble,
    assemble_weighted,
    complex_svd_basis,
    cotangent_lift,
    nlp_refine,
    pod_basis,
)
from .config import PSD_METHODS, ConfigError, ExperimentConfig, build_config, load_config
from .deim import COND_WARN, ConstructionError, SelectionError, build_deim_model, build_sdeim_model, \
    deim_nonlinear_basis, time_online
from .diagnostics import error_series, spectral_stability
from .integrators import IntegratorSpec, StepError, integrate
from .models import (
    BoundaryCondition,
    GridSpec,
    UnsupportedError,
    build_linear_wave,
    build_sine_gordon,
    kink_state,
    spline_bump_initial,
)
from .properties import run_suite
from .reduction import pod_galerkin, symplectic_galerkin_linear, symplectic_galerkin_nonlinear
from .report import (
    write_csv,
    write_indices_csv,
    write_spectrum_csv,
    write_svg,
    write_trajectory_csv,
)
from .symplectic import (
    DEFAULT_TOL,
    NLP_TOL,
    load_matrix_csv,
    save_matrix_csv,
    symplecticity_residual,
)

log = logging.getLogger("symred")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

CONVENTIONS = {
    "k": "total reduced dimension; POD/DEIM bases have k columns, symplectic bases 2*(k/2)",
    "sdeim_m": "2*(k/2) greedy indices on the symplectic basis; samples in the p block are dropped",
    "deim_m": "collateral width m (default k); one index per collateral mode",
    "nlp_r": "source basis is the cotangent lift with half-width r",
    "sign_convention": "first nonzero entry of each singular vector is made real positive",
    "deim_tie_break": "smallest index wins exact argmax ties",
    "quadrature": "left Riemann sum of ||e||^2 on the recording grid",
    "eig_tie_break": "max real part, then larger |imag|, then lower index",
    "blowup": "state norm above blowup_factor*||x0|| or a failed step",
    "timing": "median of timing_repeats runs of the online phase only",
}


# --- problem setup -----------------------------------------------------------


def _boundary(cfg: ExperimentConfig) -> BoundaryCondition:
    b = cfg["boundary"]
    if b["kind"] == "periodic":
        return BoundaryCondition.periodic()
    if b["kind"] == "neumann":
        return BoundaryCondition.neumann()
    return BoundaryCondition.dirichlet(float(b.get("left", 0.0)), float(b.get("right", 0.0)))


def build_problem(cfg: ExperimentConfig):
    """System, initial state and (for the analytic reference) the exact solution."""
    grid = GridSpec(int(cfg["grid"]["n"]), float(cfg["grid"]["l"]))
    phys = cfg["physics"]
    c = float(phys["c"])
    bc = _boundary(cfg)
    nonlinear = cfg.model == "sine_gordon" or phys.get("nonlinearity") == "sine"
    system = build_sine_gordon(grid, bc, c) if nonlinear else build_linear_wave(grid, c, bc)
    if cfg["initial"]["kind"] == "kink":
        v, x0c = float(phys["v"]), float(phys["x0"])
        x0 = kink_state(grid, 0.0, v, x0c)
        exact = lambda t: kink_state(grid, t, v, x0c)
    else:
        x0 = spline_bump_initial(grid)
        exact = None
    return system, x0, exact


def integrator_spec(cfg: ExperimentConfig) -> IntegratorSpec:
    it = cfg["integration"]
    return IntegratorSpec(it["scheme"], float(it["dt"]), float(it["newton_tol"]),
                          int(it["newton_max_iters"]), it["newton_jacobian"], it["newton_guess"])


def _sim_key(cfg: ExperimentConfig) -> str:
    keys = ("model", "grid", "physics", "initial", "boundary", "integration", "snapshots")
    return json.dumps({k: cfg[k] for k in keys}, sort_keys=True)


# --- simulate ----------------------------------------------------------------


@dataclass
class Simulation:
    times: np.ndarray
    states: np.ndarray  # (records, 2n)
    energies: np.ndarray
    ensemble: SnapshotEnsemble


def cmd_simulate(cfg: ExperimentConfig, out: Path, write_trajectory: bool = True) -> Simulation:
    """Run the full model and store the trajectory and snapshot ensemble."""
    system, x0, _ = build_problem(cfg)
    spec = integrator_spec(cfg)
    stride = int(cfg["snapshots"]["stride"])
    log.info("full model: n=%d, %d steps of dt=%g", system.half_dim, cfg.n_steps, spec.dt)
    traj = integrate(system, x0, spec, float(cfg["integration"]["T"]), stride=stride,
                     energy=system.energy)
    ens = SnapshotEnsemble.from_trajectory(traj, system)
    out.mkdir(parents=True, exist_ok=True)
    if write_trajectory:
        write_trajectory_csv(out / "trajectory.csv", traj.times, traj.states)
    np.savez(out / "snapshots.npz", states=ens.states, times=traj.times,
             nonlinear=ens.nonlinear if ens.nonlinear is not None else np.zeros((0, 0)),
             energies=traj.energies, key=np.array(_sim_key(cfg)))
    return Simulation(traj.times, traj.states, traj.energies, ens)


def load_simulation(cfg: ExperimentConfig, out: Path) -> Optional[Simulation]:
    path = out / "snapshots.npz"
    if not path.exists():
        return None
    with np.load(path) as d:
        if str(d["key"]) != _sim_key(cfg):
            log.info("stored snapshots were made with different settings; re-simulating")
            return None
        F = d["nonlinear"] if d["nonlinear"].size else None
        ens = SnapshotEnsemble(d["states"], d["times"], F)
        return Simulation(d["times"], d["states"].T.copy(), d["energies"], ens)


def ensure_simulation(cfg, out) -> Simulation:
    sim = load_simulation(cfg, out)
    return sim if sim is not None else cmd_simulate(cfg, out)


# --- reduce ------------------------------------------------------------------


@dataclass
class BasisRecord:
    method: str
    k: int
    status: str = "ok"
    error: str = ""
    model: object = None
    matrix: Optional[np.ndarray] = None
    spectrum: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"{self.method}_k{self.k}"


_BASIS_ERRORS = (RankError, RefinementError, ConstructionError, SelectionError, UnsupportedError,
                 ValueError, np.linalg.LinAlgError)


def build_reduced(cfg: ExperimentConfig, system, ens: SnapshotEnsemble, method: str, k: int) -> BasisRecord:
    """Basis and reduced model for one ``(method, k)`` pair; failures are recorded."""
    rec = BasisRecord(method, k)
    gamma = float(cfg["snapshots"]["gamma"])
    linear = system.is_linear
    try:
        if method in PSD_METHODS and k % 2:
            raise ValueError("symplectic bases need even k")
        if method in ("deim", "sdeim") and system.nonlinearity is None:
            raise UnsupportedError(f"{method} needs a system with a nonlinear term")
        if method in ("pod", "deim"):
            Phi, spec = pod_basis(assemble_weighted(ens, gamma).states, k)
            rec.matrix, rec.spectrum = Phi.matrix, spec.values
            rec.info["orthonormality_residual"] = float(
                np.linalg.norm(Phi.matrix.T @ Phi.matrix - np.eye(k)))
            if method == "pod":
                rec.model = pod_galerkin(system, Phi, gamma)
            else:
                m = cfg["reduction"]["m"] or k
                Psi, nspec = deim_nonlinear_basis(ens, m)
                rec.model = build_deim_model(system, Phi, Psi, gamma=gamma)
                op = rec.model.meta["deim"]
                rec.indices = op.indices
                rec.info.update(m=int(m), cond=op.cond, footprint=op.footprint)
                rec.info["nonlinear_spectrum"] = [float(s) for s in nspec.values[:m]]
        else:
            half = k // 2
            if method == "cotangent":
                A, spec = cotangent_lift(ens, half, gamma)
            elif method == "complex_svd":
                A, spec = complex_svd_basis(ens, half, gamma)
            elif method == "sdeim":
                A, spec = cotangent_lift(ens, half, gamma, include_nonlinear=True)
            else:  # nlp
                r = int(cfg["reduction"]["r"])
                A1, spec = cotangent_lift(ens, r, gamma)
                res = nlp_refine(ens, A1, half, gamma)
                A = res.basis
                rec.info.update(r=r, nlp_objective=res.objective,
                                nlp_initial_objective=res.initial_objective,
                                nlp_accepted=res.accepted, nlp_mu=res.mu)
            rec.matrix, rec.spectrum = A.matrix, spec.values
            rec.info["symplecticity_residual"] = symplecticity_residual(A.matrix)
            if method == "sdeim":
                rec.model = build_sdeim_model(system, A, gamma)
                op = rec.model.meta["deim"]
                rec.indices = op.indices
                rec.info.update(m=int(op.indices.size), cond=op.cond, footprint=op.footprint)
            elif linear:
                rec.model = symplectic_galerkin_linear(system, A, gamma)
            else:
                rec.model = symplectic_galerkin_nonlinear(system, A, gamma)
    except _BASIS_ERRORS as exc:
        rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
        log.warning("%s: %s", rec.label, rec.error)
    return rec


def _manifest(cfg: ExperimentConfig, records, extra=None) -> dict:
    it = cfg["integration"]
    man = {
        "version": __version__,
        "config": cfg.data,
        "conventions": CONVENTIONS,
        "tolerances": {
            "symplecticity": DEFAULT_TOL,
            "nlp_symplecticity": NLP_TOL,
            "svd_rank_rtol": RANK_RTOL,
            "deim_cond_warning": COND_WARN,
            "newton_tol": it["newton_tol"],
            "newton_max_iters": it["newton_max_iters"],
            "newton_jacobian": it["newton_jacobian"],
            "newton_guess": it["newton_guess"],
            "blowup_factor": cfg["diagnostics"]["blowup_factor"],
        },
        "gamma": cfg["snapshots"]["gamma"],
        "bases": [],
    }
    for rec in records:
        entry = {"method": rec.method, "k": rec.k, "status": rec.status}
        if rec.error:
            entry["error"] = rec.error
        if rec.status == "ok":
            entry["basis_file"] = f"bases/{rec.label}.csv"
            entry["spectrum_file"] = f"spectra/{rec.label}.csv"
            if rec.indices is not None:
                entry["indices_file"] = f"indices/{rec.label}.csv"
        entry.update(rec.info)
        man["bases"].append(entry)
    if extra:
        man.update(extra)
    return man


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")


def cmd_reduce(cfg: ExperimentConfig, out: Path, sim: Optional[Simulation] = None):
    """Build every requested basis and persist bases, spectra, indices and a manifest."""
    system, _, _ = build_problem(cfg)
    sim = sim or ensure_simulation(cfg, out)
    records = []
    for method in cfg.methods:
        for k in cfg.k_values:
            rec = build_reduced(cfg, system, sim.ensemble, method, k)
            records.append(rec)
            if rec.status != "ok":
                continue
            (out / "bases").mkdir(parents=True, exist_ok=True)
            save_matrix_csv(out / "bases" / f"{rec.label}.csv", rec.matrix)
            write_spectrum_csv(out / "spectra" / f"{rec.label}.csv", rec.spectrum)
            if rec.indices is not None:
                write_indices_csv(out / "indices" / f"{rec.label}.csv", rec.indices)
            if "symplecticity_residual" in rec.info:
                log.info("%s: symplecticity residual %.3e", rec.label, rec.info["symplecticity_residual"])
    _write_json(out / "manifest.json", _manifest(cfg, records))
    return records


# --- run ---------------------------------------------------------------------


@dataclass
class RunResult:
    label: str
    method: str
    k: int
    times: np.ndarray
    error: np.ndarray
    energy: np.ndarray
    total_error: float
    blowup_time: float
    lambda_star: Optional[complex] = None
    a_star: Optional[complex] = None


def _pad(values, n):
    out = np.full(n, np.nan)
    out[: len(values)] = values
    return out


def _reference(cfg, sim, exact):
    if cfg["diagnostics"]["reference"] == "analytic":
        return exact
    return sim


def run_reduced(cfg, system, x0, rec: BasisRecord, reference, spec) -> RunResult:
    model = rec.model
    T = float(cfg["integration"]["T"])
    stride = int(cfg["snapshots"]["stride"])
    z0 = model.restrict_state(x0)
    with np.errstate(over="ignore", invalid="ignore"):
        traj = integrate(model, z0, spec, T, stride=stride,
                         blowup_factor=float(cfg["diagnostics"]["blowup_factor"]))
        lifted = traj.states @ model.lift.T
        ds = error_series(reference, lifted, traj.times, energy_fn=system.energy,
                          compare=cfg["diagnostics"]["compare"], dt=spec.dt * stride,
                          blowup_time=traj.blowup_time)
    lam = a = None
    if model.is_linear:
        st = spectral_stability(model.K, z0)
        lam, a = st.lambda_star, st.a_star
    if traj.blew_up:
        log.info("%s blew up at t=%g (%s)", rec.label, traj.blowup_time, traj.failure)
    return RunResult(rec.label, rec.method, rec.k, traj.times, ds.instant_error, ds.energy,
                     ds.total_error, traj.blowup_time, lam, a)


def _full_result(cfg, system, sim, reference) -> RunResult:
    ds = error_series(reference, sim.states, sim.times, compare=cfg["diagnostics"]["compare"],
                      dt=float(cfg["integration"]["dt"]) * int(cfg["snapshots"]["stride"]))
    return RunResult("full", "full", system.dim, sim.times, ds.instant_error, sim.energies,
                     ds.total_error, math.inf)


def _timings(cfg, system, x0, records, spec):
    steps = int(cfg["diagnostics"]["timing_steps"])
    reps = int(cfg["diagnostics"]["timing_repeats"])
    if steps == 0:
        return []
    total_steps = cfg.n_steps

    def measure(obj, state):
        try:
            with np.errstate(all="ignore"):
                return time_online(obj, state, spec, steps, reps)
        except StepError:
            return math.nan

    rows = [("full", system.dim, system.half_dim, measure(system, x0))]
    for rec in records:
        if rec.status == "ok":
            rows.append((rec.method, rec.k, system.half_dim,
                         measure(rec.model, rec.model.restrict_state(x0))))
    return [(m, k, n, t, t * total_steps) for m, k, n, t in rows]


def cmd_run(cfg: ExperimentConfig, out: Path):
    """Integrate every reduced model and write diagnostics, summary, runtime and plots."""
    system, x0, exact = build_problem(cfg)
    spec = integrator_spec(cfg)
    sim = ensure_simulation(cfg, out)
    records = cmd_reduce(cfg, out, sim)
    reference = _reference(cfg, sim, exact)
    results = [_full_result(cfg, system, sim, reference)]
    for rec in records:
        if rec.status == "ok":
            results.append(run_reduced(cfg, system, x0, rec, reference, spec))

    n = len(sim.times)
    header, cols = ["t"], [sim.times]
    for r in results:
        header += [f"err_{r.label}", f"energy_{r.label}"]
        cols += [_pad(r.error, n), _pad(r.energy, n)]
    write_csv(out / "diagnostics.csv", header, zip(*cols))

    summary = []  # reduced models only; the full-order reference lives in diagnostics.csv
    for r in results[1:]:
        lam = r.lambda_star
        summary.append([r.method, r.k, r.total_error, r.blowup_time,
                        None if lam is None else lam.real, None if lam is None else lam.imag,
                        r.a_star])
    for rec in records:
        if rec.status != "ok":
            summary.append([rec.method, rec.k, math.nan, math.nan, None, None, None])
    write_csv(out / "summary.csv",
              ["method", "k", "total_error", "blowup_time", "lambda_star_re", "lambda_star_im",
               "a_star"], summary)

    timings = _timings(cfg, system, x0, records, spec)
    if timings:
        write_csv(out / "runtime.csv", ["method", "k", "n", "per_step_seconds", "total_seconds"],
                  timings)

    if cfg["outputs"]["emit_svg"]:
        _plots(out / "plots", results, records, timings)
    runs = [{"label": r.label, "total_error": r.total_error, "blowup_time": r.blowup_time}
            for r in results]
    _write_json(out / "manifest.json", _manifest(cfg, records, {"runs": runs}))
    return results


def _plots(pdir: Path, results, records, timings):
    write_svg(pdir / "error_vs_t.svg", {r.label: (r.times, r.error) for r in results},
              "instant error", "t", "||e(t)||", logy=True)
    write_svg(pdir / "energy_vs_t.svg", {r.label: (r.times, r.energy) for r in results},
              "energy", "t", "E(t)", logy=True)
    by_method: dict = {}
    for r in results[1:]:
        by_method.setdefault(r.method, ([], []))
        by_method[r.method][0].append(r.k)
        by_method[r.method][1].append(r.total_error)
    write_svg(pdir / "total_error_vs_k.svg", by_method, "total error", "k", "||e||_2", logy=True)
    spectra = {}
    for rec in records:
        if rec.status == "ok" and rec.method not in spectra:
            s = np.asarray(rec.spectrum)[:200]
            spectra[rec.method] = (np.arange(1, s.size + 1), s / s[0])
    write_svg(pdir / "spectra.svg", spectra, "normalized singular values", "index",
              "sigma_i / sigma_1", logy=True)
    if timings:
        rt: dict = {}
        for m, k, _, t, _ in timings[1:]:
            rt.setdefault(m, ([], []))
            rt[m][0].append(k)
            rt[m][1].append(t)
        if timings[0][3] == timings[0][3]:
            ks = sorted({k for _, k, *_ in timings[1:]}) or [0]
            rt["full"] = (ks, [timings[0][3]] * len(ks))
        write_svg(pdir / "runtime_vs_k.svg", rt, "online time per step", "k", "seconds", logy=True)


# --- verify ------------------------------------------------------------------


def check_stored_bases(out: Path):
    """Symplecticity of every persisted symplectic basis under ``out/bases``."""
    results = []
    bdir = out / "bases"
    if not bdir.is_dir():
        return results
    for path in sorted(bdir.glob("*.csv")):
        method = path.stem.rsplit("_k", 1)[0]
        if method not in PSD_METHODS:
            continue
        tol = NLP_TOL if method == "nlp" else DEFAULT_TOL
        try:
            res = symplecticity_residual(load_matrix_csv(path))
        except ValueError as exc:
            results.append((path.name, math.inf, tol, str(exc)))
            continue
        results.append((path.name, res, tol, ""))
    return results


def cmd_verify(seed: int, out: Optional[Path] = None, trials: int = 200, stream=None) -> bool:
    stream = stream or sys.stdout
    ok = True
    for r in run_suite(seed, trials):
        status = "PASS" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{status} {r.name}: max residual {r.max_residual:.3e} (tol {r.tol:.0e}, "
              f"{r.trials} trials)", file=stream)
    if out is not None:
        for name, res, tol, err in check_stored_bases(out):
            passed = res <= tol
            ok &= passed
            msg = f" ({err})" if err else ""
            print(f"{'PASS' if passed else 'FAIL'} basis {name}: symplecticity residual "
                  f"{res:.3e} (tol {tol:.0e}){msg}", file=stream)
    return ok


# --- entry point -------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="symred", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run the full-order model and store snapshots"),
                        ("reduce", "build reduced bases for every (method, k)"),
                        ("run", "integrate reduced models and write diagnostics"),
                        ("verify", "run the randomized invariant suite")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, required=name != "verify",
                        help="JSON experiment configuration")
        sp.add_argument("--out", type=Path, help="output directory (overrides outputs.directory)")
        sp.add_argument("--seed", type=int, help="seed for randomized utilities")
        sp.add_argument("--emit-svg", action="store_true", help="write SVG plots")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            sp.add_argument("--trials", type=int, default=200, help="trials per property")
    return p


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else build_config({})
    data = json.loads(cfg.to_json())
    if args.out is not None:
        data["outputs"]["directory"] = str(args.out)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.emit_svg:
        data["outputs"]["emit_svg"] = True
    return build_config(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["outputs"]["directory"])
    try:
        if args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "reduce":
            cmd_reduce(cfg, out)
        elif args.command == "run":
            cmd_run(cfg, out)
        else:
            stored = out if args.out is not None or args.config is not None else None
            return EXIT_OK if cmd_verify(cfg["seed"], stored, args.trials) else EXIT_VERIFY
    except StepError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
