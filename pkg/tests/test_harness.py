import json
import math
from pathlib import Path

import numpy as np
import pytest

from mqwalk import analytic
from mqwalk.cli import main
from mqwalk.evolution import Mode
from mqwalk.gates import Layout, Mitigation
from mqwalk.harness import (
    SCALAR_COLUMNS,
    ConfigError,
    SweepConfig,
    compare,
    compare_report,
    emit_results,
    load_config,
    load_results,
    resolve_output_path,
    rows_to_csv,
    run_sweep,
)
from mqwalk.noise import NoiseModel

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def small_config(**kw):
    base = dict(sweep_variable="GAMMA", values=(1.0, 3.0, 5.0), tau=0.4, n_measurements=20)
    base.update(kw)
    return SweepConfig.from_mapping(base)


# ------------------------------------------------------------------ config
@pytest.mark.parametrize(
    "bad,field",
    [
        ({"values": []}, "values"),
        ({"values": [1.0, math.inf]}, "values"),
        ({"tau": 0.0}, "tau"),
        ({"shots": 100}, "seed"),
        ({"shots": -1}, "shots"),
        ({"sweep_variable": "omega"}, "sweep_variable"),
        ({"mode": "BOTHER"}, "mode"),
        ({"mitigation": "SECTOR_POSTSELECT"}, "mitigation"),
        ({"layout": "THREE_QUBIT"}, "layout"),
        ({"readout_flip": 2.0}, "noise"),
        ({"colour": "blue"}, "colour"),
        ({"n_measurements": 0}, "n_measurements"),
        ({"schema_version": 7}, "schema_version"),
        ({"delta_t": 0.3}, "delta_t"),
    ],
)
def test_invalid_config_names_field(bad, field):
    with pytest.raises(ConfigError) as info:
        small_config(**bad)
    assert info.value.field == field
    assert field in str(info.value)


def test_config_grid_and_shorthands():
    cfg = SweepConfig.from_mapping(
        dict(sweep_variable="u", sweep_start=0, sweep_stop=3.2, gamma=-1, tau=3, delta_t=0.1, readout_flip=0.03)
    )
    assert len(cfg.values) == 81 and cfg.values[-1] == 3.2
    assert cfg.trotter_steps == 30
    assert cfg.noise == NoiseModel(readout_flip_0to1=0.03, readout_flip_1to0=0.03)
    assert cfg.params_at(1.5).u == 1.5 and cfg.params_at(1.5).gamma == -1
    assert SweepConfig.from_mapping(cfg.to_dict()) == cfg


def test_flags_override_file(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text('sweep_variable = "GAMMA"\nsweep_start = 0\nsweep_stop = 1\ntau = 0.4\ndelta_t = 0.1\nreadout_flip_0to1 = 0.1\n')
    cfg = load_config(f, {"values": [2.0], "trotter_steps": 2, "readout_flip": 0.01})
    assert cfg.values == (2.0,)
    assert cfg.trotter_steps == 2
    assert cfg.noise.readout_flip_0to1 == 0.01
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_checked_in_configs_load(path):
    cfg = load_config(path)
    assert cfg.shots > 0 and cfg.seed is not None
    assert cfg.output.startswith(path.stem)
    assert cfg.name == path.stem


# ------------------------------------------------------------------ sweeps
def test_single_point_deterministic_only():
    rows = run_sweep(small_config(values=(3.0,)))
    assert len(rows) == 1
    r = rows[0]
    assert r.mean_sampled is None and r.standard_error is None and r.pmf_sampled is None
    assert r.mean_deterministic == pytest.approx(r.mean_analytic_truncated, abs=1e-10)
    assert "deterministic only" in compare_report(rows)


def test_fig2_shape():
    cfg = small_config(values=tuple(np.linspace(0, 16, 33)), n_measurements=40)
    means = {r.sweep_value: r.mean_deterministic for r in run_sweep(cfg)}
    assert means[0.0] == pytest.approx(1.0, abs=1e-12)
    assert means[4.0] == pytest.approx(2.0, abs=1e-3)
    for g_d in analytic.degenerate_potentials(0.0, 0.4, 2).gamma_degeneracies:
        assert analytic.mean_fdr(analytic.c_parameter(analytic.ModelParams(g_d, 0, 0.4))) == 1.0


def test_fig5_dips():
    cfg = SweepConfig.from_mapping(
        dict(sweep_variable="U", values=[0.31, 1.0, 1.84, 2.5, 2.98], gamma=-1, tau=3, n_measurements=40, trotter_steps=400)
    )
    m = [r.mean_deterministic for r in run_sweep(cfg)]
    assert m[0] < 1.2 and m[2] < 1.2 and m[4] < 1.2
    assert m[1] > 1.9 and m[3] > 1.9


def test_both_modes_two_qubit():
    cfg = small_config(layout="TWO_QUBIT", mode="BOTH", initial_state=0, trotter_steps=3)
    rows = run_sweep(cfg)
    assert [r.mode for r in rows] == ["FDR", "FDT"] * 3
    for r in rows:
        c = r.c_parameter
        mode = Mode(r.mode)
        # U = 0: every slice commutes, so Trotter is exact
        assert r.mean_deterministic == pytest.approx(analytic.truncated_moments(c, 20, mode).mean, abs=1e-10)


def test_noiseless_report_passes():
    rows = run_sweep(small_config(shots=32000, seed=1))
    summary = compare(rows)
    assert summary.passed and not summary.flagged
    assert all(abs(z) < 5 for z in summary.z_scores)
    assert summary.max_analytic_gap < 1e-9
    assert "PASS" in summary.text


def test_heavy_noise_report_flags_bias_without_raising(tmp_path, capsys):
    cfg = small_config(values=(3.0, 4.0), shots=32000, seed=2, readout_flip=0.25)
    rows = run_sweep(cfg)
    summary = compare(rows)
    assert summary.flagged and not summary.passed
    assert "BIAS" in summary.text
    path = emit_results(rows, "csv", tmp_path / "noisy.csv", cfg)
    assert main(["compare", str(path)]) == 0
    assert "BIAS" in capsys.readouterr().out


def test_postselect_rows_report_rejections():
    cfg = small_config(
        layout="TWO_QUBIT", mitigation="SECTOR_POSTSELECT", initial_state=0, shots=2000, seed=4, readout_flip=0.05
    )
    for r in run_sweep(cfg):
        assert 0 < r.rejected_shot_fraction < 1
        assert r.n_shots < 2000


def test_workers_do_not_change_rows():
    a = run_sweep(small_config(shots=3000, seed=5, mode="BOTH"))
    b = run_sweep(small_config(shots=3000, seed=5, mode="BOTH", workers=3))
    assert a == b


# ------------------------------------------------------------------ output
def test_csv_line_count_and_header():
    rows = run_sweep(small_config())
    text = rows_to_csv(rows)
    lines = text.splitlines()
    assert len(lines) == 4
    assert lines[0].split(",") == SCALAR_COLUMNS + [f"p_{n}" for n in range(1, 21)]


def test_json_round_trip(tmp_path):
    cfg = small_config(shots=500, seed=3, mode="BOTH")
    rows = run_sweep(cfg)
    path = emit_results(rows, "json", tmp_path / "out.json", cfg)
    assert load_results(path) == rows
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == 1
    assert SweepConfig.from_mapping(doc["config"]) == cfg


def test_csv_round_trip_and_sidecar(tmp_path):
    cfg = small_config(shots=500, seed=3)
    rows = run_sweep(cfg)
    path = emit_results(rows, "csv", tmp_path / "out.csv", cfg)
    assert load_results(path) == rows
    echo = json.loads((tmp_path / "out.config.json").read_text())
    assert SweepConfig.from_mapping(echo) == cfg


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], "csv", tmp_path / "x.csv")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit_results(run_sweep(small_config(values=(1.0,))), "csv", blocker / "x.csv")


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MQWALK_OUTPUT_DIR", str(tmp_path))
    assert resolve_output_path("a.csv") == tmp_path / "a.csv"
    assert resolve_output_path("/abs/a.csv") == Path("/abs/a.csv")
    monkeypatch.delenv("MQWALK_OUTPUT_DIR")
    assert resolve_output_path("a.csv") == Path("a.csv")


def test_byte_identical_reruns(tmp_path):
    cfg = small_config(shots=4000, seed=9, readout_flip=0.03, mitigation="REPETITION_MAJORITY")
    a = emit_results(run_sweep(cfg), "csv", tmp_path / "a.csv", cfg).read_bytes()
    b = emit_results(run_sweep(cfg), "csv", tmp_path / "b.csv", cfg).read_bytes()
    assert a == b


def test_golden_fig2():
    rows = run_sweep(load_config(CONFIGS / "fig2_fdr_u0_raw.toml"))
    assert rows_to_csv(rows) == (GOLDEN / "fig2_fdr_u0_raw.csv").read_text()


# ------------------------------------------------------------------ cli
def test_cli_sweep_writes_file(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MQWALK_OUTPUT_DIR", str(tmp_path))
    code = main(
        ["sweep", "--sweep-variable", "GAMMA", "--values", "1,2", "--tau", "0.4", "--n-measurements", "10",
         "--shots", "200", "--seed", "1", "--output", "run.csv", "--report"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "wrote 2 rows" in out and "PASS" in out
    assert len((tmp_path / "run.csv").read_text().splitlines()) == 3


def test_cli_config_with_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MQWALK_OUTPUT_DIR", str(tmp_path))
    code = main(["sweep", "--config", str(CONFIGS / "fig2_fdr_u0_raw.toml"), "--values", "3", "--shots", "100"])
    assert code == 0
    rows = load_results(tmp_path / "fig2_fdr_u0_raw.csv")
    assert len(rows) == 1 and rows[0].n_shots == 100


def test_cli_missing_seed_is_config_error(capsys):
    code = main(["sweep", "--sweep-variable", "GAMMA", "--values", "1", "--tau", "0.4", "--shots", "10"])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_cli_runtime_error(tmp_path, capsys):
    assert main(["compare", str(tmp_path / "nope.csv")]) == 1
    assert "nope.csv" in capsys.readouterr().err


def test_cli_analytic_and_degeneracies(capsys):
    assert main(["analytic", "--gamma", "1", "--tau", "0.4", "--pmf", "3"]) == 0
    out = capsys.readouterr().out
    assert "0.92106" in out and "6.59" in out and "pmf:" in out
    assert main(["degeneracies", "--gamma", "-1", "--tau", "3"]) == 0
    out = capsys.readouterr().out
    assert "0.3108" in out and "1.8402" in out and "2.9781" in out


def test_enums_accept_lowercase():
    cfg = small_config(layout="two_qubit", mitigation="sector_postselect", initial_state=0)
    assert cfg.layout is Layout.TWO_QUBIT and cfg.mitigation is Mitigation.SECTOR_POSTSELECT
