import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symred.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, check_stored_bases, cmd_simulate, cmd_verify, main
from symred.config import ConfigError, build_config, load_config
from symred.report import fmt, line_chart_svg, read_csv, read_indices_csv, write_csv, write_indices_csv
from symred.symplectic import load_matrix_csv, save_matrix_csv


def small_wave_config(tmp_path, **reduction):
    red = {"methods": ["pod", "cotangent", "complex_svd"], "k": [4, 6], "r": 8}
    red.update(reduction)
    return {
        "model": "linear_wave",
        "grid": {"n": 40, "l": 1.0},
        "physics": {"c": 0.1},
        "integration": {"dt": 0.01, "T": 2.0},
        "snapshots": {"stride": 10, "gamma": 0.01},
        "reduction": red,
        "diagnostics": {"timing_steps": 0},
        "outputs": {"directory": str(tmp_path / "out"), "emit_svg": False},
    }


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# --- config -------------------------------------------------------------------


def test_presets_resolve():
    lw = build_config({"model": "linear_wave"})
    assert lw.n_steps == 5000
    assert lw["snapshots"]["gamma"] == 0.01
    sg = build_config({"model": "sine_gordon"})
    assert sg.n_steps == 12000
    assert sg["boundary"]["right"] == pytest.approx(2 * math.pi)


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.json")):
        load_config(path)


@pytest.mark.parametrize("bad,match", [
    ({"grid": {"n": 10, "typo": 1}}, "unknown"),
    ({"colour": 1}, "unknown"),
    ({"reduction": {"methods": ["cotangent"], "k": [5]}}, "even"),
    ({"reduction": {"methods": ["magic"]}}, "method"),
    ({"integration": {"dt": 0.03, "T": 1.0}}, "multiple"),
    ({"integration": {"dt": 0.01, "T": 1.0}, "snapshots": {"stride": 7}}, "divide"),
    ({"model": "heat"}, "model"),
    ({"grid": "wide"}, "section"),
    ({"diagnostics": {"reference": "analytic"}}, "analytic"),
])
def test_invalid_configs(bad, match):
    with pytest.raises(ConfigError, match=match):
        build_config(bad)


def test_pod_only_allows_odd_k():
    assert build_config({"reduction": {"methods": ["pod"], "k": [5]}}).k_values == [5]


def test_config_round_trip_is_stable():
    cfg = build_config({"model": "sine_gordon", "seed": 3})
    again = build_config(json.loads(cfg.to_json()))
    assert again.to_json() == cfg.to_json()


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, {"grid": {"n": 10, "spacing": 2}})
    assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG
    assert "spacing" in capsys.readouterr().err


# --- report -------------------------------------------------------------------


def test_fmt():
    assert fmt(None) == ""
    assert fmt(3) == "3"
    assert fmt(np.int64(7)) == "7"
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(math.inf) == "inf"
    assert fmt(-math.inf) == "-inf"
    assert fmt(math.nan) == "nan"
    assert fmt(1 + 0j) == "1"
    assert fmt(1 - 2j) == "1-2j"


@given(st.floats(allow_nan=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_csv_and_indices_round_trip(tmp_path, rng):
    write_csv(tmp_path / "a" / "x.csv", ["a", "b"], [[1, 2.5], [None, "s"]])
    header, rows = read_csv(tmp_path / "a" / "x.csv")
    assert header == ["a", "b"] and rows == [["1", "2.5"], ["", "s"]]
    idx = np.array([0, 5, 3])
    write_indices_csv(tmp_path / "i.csv", idx)
    assert (tmp_path / "i.csv").read_text().splitlines() == ["index", "1", "6", "4"]
    np.testing.assert_array_equal(read_indices_csv(tmp_path / "i.csv"), idx)


def test_svg_is_wellformed():
    import xml.etree.ElementTree as ET

    svg = line_chart_svg({"a<b": ([1, 2, 3], [1e-3, 1e-1, math.inf]), "c": ([1, 2], [1.0, 2.0])},
                         "title & more", "x", "y", logy=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "a&lt;b" in svg


# --- pipeline -----------------------------------------------------------------


def test_simulate_zero_horizon(tmp_path):
    data = small_wave_config(tmp_path)
    data["integration"]["T"] = 0.0
    cfg = build_config(data)
    sim = cmd_simulate(cfg, tmp_path / "out")
    assert sim.states.shape == (1, 80)
    header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert len(rows) == 1 and len(header) == 81


def test_simulate_snapshot_count(tmp_path):
    cfg = build_config(small_wave_config(tmp_path))
    sim = cmd_simulate(cfg, tmp_path / "out")
    assert sim.ensemble.states.shape == (80, 21)
    assert sim.times[-1] == pytest.approx(2.0)


def _outputs(out):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file() and p.suffix in (".csv", ".svg", ".json")
            and p.name != "runtime.csv"}


def test_run_end_to_end_is_deterministic(tmp_path):
    data = small_wave_config(tmp_path)
    data["outputs"]["emit_svg"] = True
    path = write_config(tmp_path, data)
    assert main(["run", "--config", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    first = _outputs(out)
    header, rows = read_csv(out / "summary.csv")
    assert header == ["method", "k", "total_error", "blowup_time", "lambda_star_re",
                      "lambda_star_im", "a_star"]
    assert [(r[0], r[1]) for r in rows] == [(m, str(k)) for m in ("pod", "cotangent", "complex_svd")
                                            for k in (4, 6)]
    dh, drows = read_csv(out / "diagnostics.csv")
    assert dh[:3] == ["t", "err_full", "energy_full"]
    assert "err_cotangent_k4" in dh and len(drows) == 21
    for name in ("error_vs_t", "energy_vs_t", "total_error_vs_k", "spectra"):
        assert (out / "plots" / f"{name}.svg").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["gamma"] == 0.01
    assert {"quadrature", "sign_convention", "k"} <= set(man["conventions"])
    for entry in man["bases"]:
        if entry["method"] != "pod":
            assert entry["symplecticity_residual"] <= 1e-10

    # a fresh rerun in a clean directory gives the same bytes
    for p in sorted(out.rglob("*"), reverse=True):
        p.unlink() if p.is_file() else p.rmdir()
    assert main(["run", "--config", str(path)]) == EXIT_OK
    assert _outputs(out) == first


def test_reduce_single_basis(tmp_path):
    path = write_config(tmp_path, small_wave_config(tmp_path, methods=["cotangent"], k=[10]))
    assert main(["reduce", "--config", str(path)]) == EXIT_OK
    files = list((tmp_path / "out" / "bases").glob("*.csv"))
    assert [f.name for f in files] == ["cotangent_k10.csv"]
    assert load_matrix_csv(files[0]).shape == (80, 10)


def test_basis_failure_does_not_abort_sweep(tmp_path):
    # 200 columns cannot come from 21 snapshots
    path = write_config(tmp_path, small_wave_config(tmp_path, methods=["pod", "cotangent"], k=[4, 200]))
    assert main(["reduce", "--config", str(path)]) == EXIT_OK
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    status = {(b["method"], b["k"]): b["status"] for b in man["bases"]}
    assert status[("pod", 4)] == "ok" and status[("pod", 200)] == "failed"


def test_empty_method_list(tmp_path):
    path = write_config(tmp_path, small_wave_config(tmp_path, methods=[], k=[]))
    assert main(["run", "--config", str(path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "out" / "summary.csv")
    assert rows == [] and header[0] == "method"


# --- verify -------------------------------------------------------------------


def test_verify_default_seed_passes():
    buf = io.StringIO()
    assert cmd_verify(0, trials=20, stream=buf)
    lines = buf.getvalue().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_verify_verdicts_stable_across_seeds():
    verdicts = {cmd_verify(seed, trials=5, stream=io.StringIO()) for seed in range(10)}
    assert verdicts == {True}


def test_verify_flags_corrupted_basis(tmp_path, orthosymplectic, capsys):
    bases = tmp_path / "bases"
    bases.mkdir()
    A = orthosymplectic(6, 2)
    save_matrix_csv(bases / "cotangent_k4.csv", A)
    assert check_stored_bases(tmp_path)[0][1] <= 1e-12
    A[0, 0] += 1e-3
    save_matrix_csv(bases / "cotangent_k4.csv", A)
    assert main(["verify", "--out", str(tmp_path), "--trials", "3"]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "FAIL basis cotangent_k4.csv" in out and "residual" in out
