"""Command-line entry points: run, ensemble, sweep, oracle, report."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    PRESETS,
    RunConfig,
    build_report,
    run_ensemble,
    run_single,
    run_sweep,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named preset")
    parser.add_argument("--out", type=str, help="output directory")
    parser.add_argument("--method", choices=("tebd", "meanfield", "ed"))
    parser.add_argument("--excitation", type=str, help='"cavity" or "molecule:<i>"')
    parser.add_argument("--n-molecules", type=int)
    parser.add_argument("--nu", type=float)
    parser.add_argument("--lam", "--lambda", dest="lam", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--disorder-width", "-W", dest="disorder_width", type=float)
    parser.add_argument("--disorder-law", choices=("gaussian", "box"))
    parser.add_argument("--chi", type=int)
    parser.add_argument("--svd-cutoff", type=float)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--n-max-v", type=int)
    parser.add_argument("--record-every", type=int)
    parser.add_argument("--t-final", type=float)
    parser.add_argument("--realizations", type=int)
    parser.add_argument("--base-seed", type=int)
    parser.add_argument("--eta0", type=float)


def _merge_dict(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge_dict(out[k], v)
        else:
            out[k] = v
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.preset:
        data = _merge_dict(data, PRESETS[args.preset])
    if args.config:
        data = _merge_dict(data, json.loads(Path(args.config).read_text()))
    config = RunConfig.from_dict(data) if data else RunConfig()

    params = config.params
    for name in ("n_molecules", "nu", "lam", "delta", "disorder_width", "disorder_law"):
        val = getattr(args, name, None)
        if val is not None:
            params = replace(params, **{name: val})
    numerics = config.numerics
    for name in ("chi", "svd_cutoff", "dt", "n_max_v", "record_every"):
        val = getattr(args, name, None)
        if val is not None:
            numerics = replace(numerics, **{name: val})
    ensemble = config.ensemble
    if args.realizations is not None:
        ensemble = replace(ensemble, n_realizations=args.realizations)
    if args.base_seed is not None:
        ensemble = replace(ensemble, base_seed=args.base_seed)
    tail = config.tail
    if args.eta0 is not None:
        tail = type(tail)(eta0=args.eta0)
    config = replace(
        config, params=params, numerics=numerics, ensemble=ensemble, tail=tail
    )
    if args.method is not None:
        config = replace(config, method=args.method)
    if args.excitation is not None:
        config = replace(config, excitation=args.excitation)
    if args.t_final is not None:
        config = replace(config, t_final=args.t_final)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="htcsim",
        description="Exact and reference dynamics of cavity-coupled molecules",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one realization with the configured method")
    _add_common(p_run)
    p_oracle = sub.add_parser("oracle", help="one realization, exact diagonalization")
    _add_common(p_oracle)
    p_ens = sub.add_parser("ensemble", help="disorder ensemble plus average")
    _add_common(p_ens)
    p_sweep = sub.add_parser("sweep", help="scan one axis, summarizing the final time")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--axis", required=True, choices=("W", "lambda", "N", "chi", "dt", "n_max_v")
    )
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated axis values"
    )
    p_rep = sub.add_parser("report", help="bundle outputs into per-figure CSVs")
    p_rep.add_argument("--inputs", nargs="+", required=True)
    p_rep.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            written = build_report(args.inputs, args.out)
            for p in written:
                print(p)
            return 0
        config = build_config(args)
        if args.command == "oracle":
            config = replace(config, method="ed")
        if args.command in ("run", "oracle"):
            _, meta = run_single(config)
            print(json.dumps({"out_dir": config.out_dir, "n_steps": meta["n_steps"]}))
            return 0
        if args.command == "ensemble":
            meta = run_ensemble(config)
            print(json.dumps({"out_dir": config.out_dir, "n_ok": meta["n_ok"]}))
            return 0
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v]
            rows = run_sweep(config, args.axis, values)
            print(json.dumps({"out_dir": config.out_dir, "points": len(rows)}))
            return 0
        parser.error(f"unknown command {args.command}")
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as machine-readable JSON
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
