"""Parameter sweeps over gamma or U, result files and consistency reports.

Every sweep point is evaluated three ways:

* ``analytic``: closed-form truncated moments of the exact two-site model;
* ``deterministic``: amplitude propagation with the one-period unitary the
  circuit implements (Trotterised with ``trotter_steps`` slices);
* ``sampled``: Monte-Carlo shots through the protocol circuit, with the
  configured noise and mitigation.

Config files are flat TOML.  Keys mirror :class:`SweepConfig`; noise keys are
spelled out (``readout_flip_0to1``, ...).  A grid is given either as
``values = [...]`` or as ``sweep_start``/``sweep_stop``/``sweep_num``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .analytic import c_parameter, is_near_degenerate, return_amplitude, truncated_moments
from .evolution import DetectionProtocol, Mode, amplitude_distribution, sample_trajectories
from .gates import (
    Layout,
    Mitigation,
    TrotterPlan,
    build_protocol_circuit,
    check_compatible,
    sector_unitary,
    trotterized_unitary,
)
from .linalg import ModelParams
from .noise import NoiseModel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
DEFAULT_GRID_POINTS = 81
OUTPUT_DIR_ENV = "MQWALK_OUTPUT_DIR"

_NOISE_KEYS = {f.name for f in fields(NoiseModel)}


class ConfigError(ValueError):
    """Invalid sweep configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SweepConfig:
    sweep_variable: str
    values: tuple[float, ...]
    tau: float
    gamma: float = 0.0
    u: float = 0.0
    trotter_steps: int = 1
    n_measurements: int = 40
    shots: int = 0
    seed: int | None = None
    layout: Layout = Layout.SINGLE_QUBIT
    mode: str = "FDR"
    initial_state: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    mitigation: Mitigation = Mitigation.NONE
    output: str | None = None
    format: str = "csv"
    workers: int = 1
    z_threshold: float = 5.0
    analytic_tolerance: float = 1e-9
    name: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        _validate(self)

    @property
    def modes(self) -> tuple[Mode, ...]:
        return (Mode.FDR, Mode.FDT) if self.mode == "BOTH" else (Mode(self.mode),)

    def params_at(self, value: float) -> ModelParams:
        if self.sweep_variable == "GAMMA":
            return ModelParams(gamma=value, u=self.u, tau=self.tau)
        return ModelParams(gamma=self.gamma, u=value, tau=self.tau)

    def to_dict(self) -> dict[str, Any]:
        """Resolved, flat representation; inverse of :meth:`from_mapping`."""
        out: dict[str, Any] = {"schema_version": self.schema_version, "name": self.name}
        for f in fields(self):
            if f.name in ("schema_version", "name", "noise"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, (Layout, Mitigation)):
                v = v.value
            out[f.name] = v
        out.update(asdict(self.noise))
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SweepConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")

        noise_kwargs = {k: data.pop(k) for k in list(data) if k in _NOISE_KEYS}
        if "readout_flip" in data:
            p = data.pop("readout_flip")
            noise_kwargs.setdefault("readout_flip_0to1", p)
            noise_kwargs.setdefault("readout_flip_1to0", p)
        try:
            noise = NoiseModel(**noise_kwargs)
        except ValueError as exc:
            raise ConfigError("noise", str(exc)) from None

        start, stop, num = data.pop("sweep_start", None), data.pop("sweep_stop", None), data.pop("sweep_num", None)
        if "values" not in data:
            if start is None or stop is None:
                raise ConfigError("values", "give either 'values' or 'sweep_start' and 'sweep_stop'")
            n = DEFAULT_GRID_POINTS if num is None else num
            if int(n) != n or n < 1:
                raise ConfigError("sweep_num", f"must be a positive integer, got {n!r}")
            data["values"] = np.linspace(float(start), float(stop), int(n)).tolist()

        delta_t = data.pop("delta_t", None)
        if delta_t is not None:
            if "tau" not in data:
                raise ConfigError("tau", "required")
            try:
                plan = TrotterPlan.from_delta_t(float(data["tau"]), float(delta_t))
            except ValueError as exc:
                raise ConfigError("delta_t", str(exc)) from None
            if "trotter_steps" in data and data["trotter_steps"] != plan.k:
                raise ConfigError("delta_t", f"implies k={plan.k} but trotter_steps={data['trotter_steps']}")
            data["trotter_steps"] = plan.k

        known = {f.name for f in fields(cls)} - {"noise", "schema_version"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        for key in ("sweep_variable", "tau", "values"):
            if key not in data:
                raise ConfigError(key, "required")

        try:
            values = tuple(float(v) for v in data.pop("values"))
        except (TypeError, ValueError):
            raise ConfigError("values", "must be a list of numbers") from None
        kwargs: dict[str, Any] = {"values": values, "noise": noise, "schema_version": version}
        for key, v in data.items():
            kwargs[key] = v
        for key, enum_cls in (("layout", Layout), ("mitigation", Mitigation)):
            if key in kwargs:
                try:
                    kwargs[key] = enum_cls(str(kwargs[key]).upper())
                except ValueError:
                    raise ConfigError(key, f"unknown value {kwargs[key]!r}") from None
        for key in ("sweep_variable", "mode"):
            if key in kwargs:
                kwargs[key] = str(kwargs[key]).upper()
        return cls(**kwargs)


def _validate(cfg: SweepConfig) -> None:
    if cfg.sweep_variable not in ("GAMMA", "U"):
        raise ConfigError("sweep_variable", f"must be GAMMA or U, got {cfg.sweep_variable!r}")
    if not cfg.values:
        raise ConfigError("values", "sweep grid is empty")
    if not all(math.isfinite(v) for v in cfg.values):
        raise ConfigError("values", "sweep values must be finite")
    for key in ("gamma", "u"):
        if not math.isfinite(getattr(cfg, key)):
            raise ConfigError(key, "must be finite")
    if not (isinstance(cfg.tau, (int, float)) and cfg.tau > 0 and math.isfinite(cfg.tau)):
        raise ConfigError("tau", f"must be a positive number, got {cfg.tau!r}")
    if int(cfg.trotter_steps) != cfg.trotter_steps or cfg.trotter_steps < 1:
        raise ConfigError("trotter_steps", f"must be an integer >= 1, got {cfg.trotter_steps!r}")
    if int(cfg.n_measurements) != cfg.n_measurements or cfg.n_measurements < 1:
        raise ConfigError("n_measurements", f"must be an integer >= 1, got {cfg.n_measurements!r}")
    if int(cfg.shots) != cfg.shots or cfg.shots < 0:
        raise ConfigError("shots", f"must be a non-negative integer, got {cfg.shots!r}")
    if cfg.shots > 0 and cfg.seed is None:
        raise ConfigError("seed", "sampled runs (shots > 0) need an explicit seed")
    if cfg.seed is not None and (int(cfg.seed) != cfg.seed or cfg.seed < 0):
        raise ConfigError("seed", f"must be a non-negative integer, got {cfg.seed!r}")
    if cfg.mode not in ("FDR", "FDT", "BOTH"):
        raise ConfigError("mode", f"must be FDR, FDT or BOTH, got {cfg.mode!r}")
    if cfg.initial_state not in (0, 1):
        raise ConfigError("initial_state", f"must be 0 or 1, got {cfg.initial_state!r}")
    try:
        check_compatible(cfg.layout, cfg.mitigation)
    except ValueError as exc:
        raise ConfigError("mitigation", str(exc)) from None
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format", f"must be csv or json, got {cfg.format!r}")
    if int(cfg.workers) != cfg.workers or cfg.workers < 1:
        raise ConfigError("workers", f"must be an integer >= 1, got {cfg.workers!r}")


def load_config(path: str | os.PathLike, overrides: Mapping[str, Any] | None = None) -> SweepConfig:
    """Read a TOML config; ``overrides`` (already-parsed flags) win over file values."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    if overrides:
        # a flag replaces every file key that expresses the same setting
        linked = {
            "delta_t": ("trotter_steps",),
            "trotter_steps": ("delta_t",),
            "readout_flip": ("readout_flip_0to1", "readout_flip_1to0"),
            "values": ("sweep_start", "sweep_stop", "sweep_num"),
            "sweep_start": ("values",),
            "sweep_stop": ("values",),
        }
        for key in overrides:
            for other in linked.get(key, ()):
                if other not in overrides:
                    data.pop(other, None)
        data.update(overrides)
    return SweepConfig.from_mapping(data)


@dataclass
class SweepResultRow:
    sweep_value: float
    mode: str
    gamma: float
    u: float
    tau: float
    c_parameter: float
    near_degenerate: bool
    mean_analytic_truncated: float
    variance_analytic: float
    mean_deterministic: float
    variance_deterministic: float
    detection_probability: float
    mean_sampled: float | None = None
    variance_sampled: float | None = None
    standard_error: float | None = None
    detection_probability_sampled: float | None = None
    rejected_shot_fraction: float | None = None
    n_shots: int | None = None
    pmf_deterministic: list[float] = field(default_factory=list)
    pmf_sampled: list[float] | None = None

    @property
    def has_samples(self) -> bool:
        return self.mean_sampled is not None


SCALAR_COLUMNS = [f.name for f in fields(SweepResultRow) if not f.name.startswith("pmf_")]


def sweep_evolution(params: ModelParams, plan: TrotterPlan, layout: Layout) -> np.ndarray:
    """One-period unitary of the circuit in the logical (site) basis."""
    if Layout(layout) is Layout.SINGLE_QUBIT:
        return trotterized_unitary(params, plan, Layout.SINGLE_QUBIT)
    return sector_unitary(trotterized_unitary(params, plan, Layout.TWO_QUBIT))


def _run_point(cfg: SweepConfig, index: int, value: float) -> list[SweepResultRow]:
    params = cfg.params_at(value)
    plan = TrotterPlan.from_steps(cfg.tau, cfg.trotter_steps)
    c = c_parameter(params)
    r = return_amplitude(params)
    evolution = sweep_evolution(params, plan, cfg.layout)
    rows = []
    for mode in cfg.modes:
        protocol = DetectionProtocol.two_site(cfg.initial_state, mode, cfg.n_measurements)
        analytic = truncated_moments(r, cfg.n_measurements, mode)
        det = amplitude_distribution(evolution, protocol)
        dm = det.moments()
        row = SweepResultRow(
            sweep_value=value,
            mode=mode.value,
            gamma=params.gamma,
            u=params.u,
            tau=params.tau,
            c_parameter=c,
            near_degenerate=is_near_degenerate(c),
            mean_analytic_truncated=analytic.mean,
            variance_analytic=analytic.variance,
            mean_deterministic=dm.mean,
            variance_deterministic=dm.variance,
            detection_probability=dm.detection_probability,
            pmf_deterministic=det.probabilities.tolist(),
        )
        if cfg.shots > 0:
            circuit = build_protocol_circuit(params, plan, protocol, cfg.layout, cfg.mitigation)
            mode_index = 0 if mode is Mode.FDR else 1
            sampled = sample_trajectories(
                circuit, protocol, cfg.noise, cfg.mitigation,
                shots=cfg.shots, seed=cfg.seed, stream=(index, mode_index),
            )
            sm = sampled.moments()
            row.mean_sampled = sm.mean
            row.variance_sampled = sm.variance
            row.standard_error = sampled.standard_error()
            row.detection_probability_sampled = sm.detection_probability
            row.rejected_shot_fraction = sampled.rejected_fraction
            row.n_shots = sampled.n_shots
            row.pmf_sampled = sampled.probabilities.tolist()
        rows.append(row)
    return rows


def run_sweep(config: SweepConfig) -> list[SweepResultRow]:
    """Evaluate every grid point; rows are ordered by grid index, then mode."""
    jobs = list(enumerate(config.values))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(lambda iv: _run_point(config, *iv), jobs))
    else:
        parts = [_run_point(config, i, v) for i, v in jobs]
    return [row for part in parts for row in part]


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(name: str, text: str) -> Any:
    if text == "":
        return None
    if name == "mode":
        return text
    if name == "near_degenerate":
        return text == "true"
    if name == "n_shots":
        return int(text)
    return float(text)


def rows_to_csv(rows: list[SweepResultRow]) -> str:
    """Scalar columns, then ``p_1..p_N`` (deterministic pmf) and, for sampled
    runs, ``s_1..s_N`` (sampled pmf)."""
    n_max = max(len(r.pmf_deterministic) for r in rows)
    sampled = any(r.pmf_sampled is not None for r in rows)
    header = SCALAR_COLUMNS + [f"p_{n}" for n in range(1, n_max + 1)]
    if sampled:
        header += [f"s_{n}" for n in range(1, n_max + 1)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        cells = [_csv_cell(getattr(r, c)) for c in SCALAR_COLUMNS]
        cells += _pmf_cells(r.pmf_deterministic, n_max)
        if sampled:
            cells += _pmf_cells(r.pmf_sampled, n_max)
        writer.writerow(cells)
    return buf.getvalue()


def _pmf_cells(pmf: list[float] | None, n_max: int) -> list[str]:
    pmf = pmf or []
    return [repr(float(p)) for p in pmf] + [""] * (n_max - len(pmf))


def rows_to_json(rows: list[SweepResultRow], config: SweepConfig | None = None) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict() if config is not None else None,
        "rows": [asdict(r) for r in rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def resolve_output_path(path: str | os.PathLike) -> Path:
    """Relative paths land in ``$MQWALK_OUTPUT_DIR`` when it is set."""
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def emit_results(
    rows: list[SweepResultRow],
    fmt: str,
    path: str | os.PathLike,
    config: SweepConfig | None = None,
) -> Path:
    """Write rows as CSV or JSON and return the path written.

    CSV holds exactly one header line plus one line per row; the resolved
    config goes to a sidecar ``<name>.config.json``.  JSON embeds the config.
    """
    if not rows:
        raise ValueError("no rows to write")
    fmt = fmt.lower()
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path.write_text(rows_to_csv(rows), encoding="utf-8")
            if config is not None:
                sidecar = path.with_name(path.stem + ".config.json")
                sidecar.write_text(json.dumps(config.to_dict(), indent=1) + "\n", encoding="utf-8")
        elif fmt == "json":
            path.write_text(rows_to_json(rows, config), encoding="utf-8")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc
    return path


def load_results(path: str | os.PathLike) -> list[SweepResultRow]:
    """Read rows back from a CSV or JSON file written by :func:`emit_results`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return [SweepResultRow(**r) for r in json.loads(text)["rows"]]
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for record in reader:
        cells = dict(zip(header, record))
        kwargs = {c: _parse_cell(c, cells[c]) for c in SCALAR_COLUMNS}
        pmf = [float(cells[h]) for h in header if h.startswith("p_") and cells[h] != ""]
        sampled = [float(cells[h]) for h in header if h.startswith("s_") and cells[h] != ""]
        rows.append(SweepResultRow(**kwargs, pmf_deterministic=pmf, pmf_sampled=sampled or None))
    return rows


@dataclass(frozen=True)
class ComparisonSummary:
    z_scores: list[float | None]
    max_analytic_gap: float
    flagged: list[int]
    passed: bool
    deterministic_only: bool
    text: str


def compare(rows: list[SweepResultRow], z_threshold: float = 5.0, analytic_tolerance: float = 1e-9) -> ComparisonSummary:
    gaps = [abs(r.mean_analytic_truncated - r.mean_deterministic) for r in rows]
    max_gap = max(gaps) if gaps else 0.0
    lines = []
    z_scores: list[float | None] = []
    flagged: list[int] = []
    sampled = any(r.has_samples for r in rows)
    if sampled:
        lines.append(f"{'value':>10} {'mode':>4} {'deterministic':>14} {'sampled':>10} {'stderr':>9} {'z':>8}")
    for i, r in enumerate(rows):
        if not r.has_samples:
            z_scores.append(None)
            continue
        diff = r.mean_sampled - r.mean_deterministic
        se = r.standard_error or 0.0
        if se > 0:
            z = diff / se
        else:
            z = 0.0 if abs(diff) < 1e-12 else math.copysign(math.inf, diff)
        z_scores.append(z)
        mark = ""
        if abs(z) > z_threshold:
            flagged.append(i)
            mark = "  BIAS"
        lines.append(
            f"{r.sweep_value:10.4f} {r.mode:>4} {r.mean_deterministic:14.6f} {r.mean_sampled:10.6f} "
            f"{se:9.2e} {z:8.2f}{mark}"
        )
    gap_ok = max_gap < analytic_tolerance
    lines.append(
        f"max |analytic - deterministic| = {max_gap:.3e} "
        f"({'ok' if gap_ok else 'exceeds'} tolerance {analytic_tolerance:g})"
    )
    if not sampled:
        lines.append("deterministic only: no sampled columns to compare")
        passed = gap_ok
    else:
        lines.append(f"{len(flagged)} of {sum(z is not None for z in z_scores)} sampled rows exceed |z| > {z_threshold:g}")
        passed = gap_ok and not flagged
    lines.append("PASS" if passed else "FAIL")
    return ComparisonSummary(z_scores, max_gap, flagged, passed, not sampled, "\n".join(lines))


def compare_report(rows: list[SweepResultRow], z_threshold: float = 5.0, analytic_tolerance: float = 1e-9) -> str:
    """Human-readable z-score and discrepancy report; never raises on bias."""
    return compare(rows, z_threshold, analytic_tolerance).text


def summarize(rows: list[SweepResultRow]) -> str:
    out = []
    for mode in sorted({r.mode for r in rows}):
        sub = [r for r in rows if r.mode == mode]
        det = np.array([r.mean_deterministic for r in sub])
        line = f"{mode}: {len(sub)} points, deterministic <n> in [{det.min():.4f}, {det.max():.4f}]"
        if sub[0].has_samples:
            s = np.array([r.mean_sampled for r in sub])
            line += f", sampled <n> in [{s.min():.4f}, {s.max():.4f}]"
        out.append(line)
    return "\n".join(out)
