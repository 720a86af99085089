"""Command line entry point: ``mqwalk {sweep,analytic,degeneracies,compare}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analytic
from .evolution import Mode
from .harness import (
    ConfigError,
    SweepConfig,
    compare,
    emit_results,
    load_config,
    load_results,
    resolve_output_path,
    run_sweep,
    summarize,
)
from .linalg import ModelParams

# flag dest -> config key; only flags given on the command line override the file
_SWEEP_FLAGS = {
    "sweep_variable": "sweep_variable",
    "values": "values",
    "sweep_start": "sweep_start",
    "sweep_stop": "sweep_stop",
    "sweep_num": "sweep_num",
    "gamma": "gamma",
    "u": "u",
    "tau": "tau",
    "trotter_steps": "trotter_steps",
    "delta_t": "delta_t",
    "n_measurements": "n_measurements",
    "shots": "shots",
    "seed": "seed",
    "layout": "layout",
    "mode": "mode",
    "initial_state": "initial_state",
    "readout_flip": "readout_flip",
    "readout_flip_0to1": "readout_flip_0to1",
    "readout_flip_1to0": "readout_flip_1to0",
    "depolarizing_1q": "depolarizing_1q",
    "depolarizing_2q": "depolarizing_2q",
    "mitigation": "mitigation",
    "output": "output",
    "format": "format",
    "workers": "workers",
    "name": "name",
}


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a gamma or U sweep and write CSV/JSON")
    sw.add_argument("--config", type=Path, help="TOML config file; flags override its values")
    sw.add_argument("--sweep-variable", choices=["GAMMA", "U", "gamma", "u"])
    sw.add_argument("--values", type=_float_list, help="comma-separated grid")
    sw.add_argument("--sweep-start", type=float)
    sw.add_argument("--sweep-stop", type=float)
    sw.add_argument("--sweep-num", type=int)
    sw.add_argument("--gamma", type=float)
    sw.add_argument("--u", type=float)
    sw.add_argument("--tau", type=float)
    sw.add_argument("--trotter-steps", type=int)
    sw.add_argument("--delta-t", type=float)
    sw.add_argument("--n-measurements", type=int)
    sw.add_argument("--shots", type=int)
    sw.add_argument("--seed", type=int, help="required whenever shots > 0")
    sw.add_argument("--layout", choices=["SINGLE_QUBIT", "TWO_QUBIT"])
    sw.add_argument("--mode", choices=["FDR", "FDT", "BOTH"])
    sw.add_argument("--initial-state", type=int, choices=[0, 1])
    sw.add_argument("--readout-flip", type=float, help="symmetric readout flip probability")
    sw.add_argument("--readout-flip-0to1", type=float)
    sw.add_argument("--readout-flip-1to0", type=float)
    sw.add_argument("--depolarizing-1q", type=float)
    sw.add_argument("--depolarizing-2q", type=float)
    sw.add_argument("--mitigation", choices=["NONE", "REPETITION_MAJORITY", "SECTOR_POSTSELECT"])
    sw.add_argument("--output", help="output file (relative paths go to $MQWALK_OUTPUT_DIR)")
    sw.add_argument("--format", choices=["csv", "json"])
    sw.add_argument("--workers", type=int)
    sw.add_argument("--name")
    sw.add_argument("--report", action="store_true", help="print the comparison report after the run")

    an = sub.add_parser("analytic", help="closed-form statistics of the two-site model")
    an.add_argument("--gamma", type=float, required=True)
    an.add_argument("--u", type=float, default=0.0)
    an.add_argument("--tau", type=float, required=True)
    an.add_argument("--n-measurements", type=int, default=40)
    an.add_argument("--mode", choices=["FDR", "FDT", "BOTH"], default="BOTH")
    an.add_argument("--pmf", type=int, default=0, metavar="K", help="also print p_1..p_K")

    dg = sub.add_parser("degeneracies", help="degenerate potentials U_d and hoppings gamma_d")
    dg.add_argument("--gamma", type=float, required=True)
    dg.add_argument("--tau", type=float, required=True)
    dg.add_argument("--k-max", type=int, default=3)

    cp = sub.add_parser("compare", help="z-score report for a results file")
    cp.add_argument("results", type=Path)
    cp.add_argument("--z-threshold", type=float, default=5.0)
    cp.add_argument("--analytic-tolerance", type=float, default=1e-9)
    return parser


def _sweep_config(args: argparse.Namespace) -> SweepConfig:
    overrides = {key: getattr(args, dest) for dest, key in _SWEEP_FLAGS.items() if getattr(args, dest) is not None}
    if args.config is not None:
        return load_config(args.config, overrides)
    return SweepConfig.from_mapping(overrides)


def _cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    rows = run_sweep(cfg)
    print(summarize(rows))
    if cfg.output:
        path = emit_results(rows, cfg.format, resolve_output_path(cfg.output), cfg)
        print(f"wrote {len(rows)} rows to {path}")
    if args.report:
        print(compare(rows, cfg.z_threshold, cfg.analytic_tolerance).text)
    return 0


def _cmd_analytic(args) -> int:
    params = ModelParams(gamma=args.gamma, u=args.u, tau=args.tau)
    c = analytic.c_parameter(params)
    r = analytic.return_amplitude(params)
    print(
        f"c = {c:.12g}  c^2 = {c * c:.12g}  |<j|V|j>|^2 = {r * r:.12g}"
        + ("  (near-degenerate)" if analytic.is_near_degenerate(c) else "")
    )
    modes = [Mode.FDR, Mode.FDT] if args.mode == "BOTH" else [Mode(args.mode)]
    for mode in modes:
        m = analytic.truncated_moments(r, args.n_measurements, mode)
        inf_mean = analytic.mean_fdr(r) if mode is Mode.FDR else analytic.mean_fdt(r)
        print(
            f"{mode.value}: <n>_inf = {inf_mean:.10g}  "
            f"<n>_N = {m.mean:.10g}  var_N = {m.variance:.10g}  "
            f"P(detected by N={args.n_measurements}) = {m.detection_probability:.10g}"
        )
        if args.pmf:
            p = analytic.pmf(r, args.pmf, mode)
            print("  pmf: " + " ".join(f"{x:.6g}" for x in p))
    return 0


def _cmd_degeneracies(args) -> int:
    deg = analytic.degenerate_potentials(args.gamma, args.tau, args.k_max)
    print(f"gamma = {args.gamma:g}, tau = {args.tau:g}")
    for k, ud in zip(deg.orders, deg.potentials):
        print(f"  k={k}: U_d = {ud:.6f}")
    print("U = 0 hopping degeneracies: " + ", ".join(f"{g:.6f}" for g in deg.gamma_degeneracies))
    return 0


def _cmd_compare(args) -> int:
    rows = load_results(args.results)
    print(compare(rows, args.z_threshold, args.analytic_tolerance).text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "sweep": _cmd_sweep,
        "analytic": _cmd_analytic,
        "degeneracies": _cmd_degeneracies,
        "compare": _cmd_compare,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
