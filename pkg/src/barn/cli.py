"""Command line interface.

Subcommands:

* ``barn run``    benchmark one dataset with the requested methods
* ``barn synth``  generate a synthetic dataset and write it as CSV
* ``barn trace``  run the sampler once and export its iteration trace

``--data`` accepts a numeric CSV (with ``--target``), a synthetic-spec
JSON file, or the name of a bundled preset such as ``random``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import BigNNConfig
from .bench import METHODS, run_trials
from .datasets import PRESETS, Dataset, SynthSpec, generate, load_csv, save_csv
from .figures import phi_trace_plot
from .report import emit_report
from .sampler import SamplerConfig, run_barn
from .bench import prepare_trial_dataset


def _load_data(data: str, target: str | None) -> Dataset:
    if data in PRESETS:
        return replace(generate(PRESETS[data]), name=data)
    path = Path(data)
    if path.suffix.lower() == ".json":
        return generate(SynthSpec.from_json(path))
    if target is None:
        raise SystemExit("--target is required when --data is a CSV file")
    return load_csv(path, target)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True,
                   help="CSV file, synthetic-spec JSON, or preset name "
                        f"({', '.join(sorted(PRESETS))})")
    p.add_argument("--target", default=None, help="target column for CSV input")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barn", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="benchmark methods over repeated splits")
    _add_data_args(run_p)
    run_p.add_argument("--methods", default="barn,ols",
                       help=f"comma list from: {','.join(METHODS)}")
    run_p.add_argument("--trials", type=int, default=40)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--networks", type=int, default=10, help="ensemble size")
    run_p.add_argument("--activation", default="sigmoid", choices=["sigmoid", "relu"])
    run_p.add_argument("--max-iter", type=int, default=200, help="sampler iteration cap")
    run_p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    synth_p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth_p.add_argument("--spec", default=None, help="synthetic-spec JSON file")
    synth_p.add_argument("--preset", default=None, choices=sorted(PRESETS),
                         help="bundled spec to use instead of --spec")
    synth_p.add_argument("--out", required=True, help="output CSV path")

    trace_p = sub.add_parser("trace", help="export one run's iteration trace")
    _add_data_args(trace_p)
    trace_p.add_argument("--out", required=True, help="output CSV path")
    trace_p.add_argument("--networks", type=int, default=10)
    trace_p.add_argument("--activation", default="sigmoid", choices=["sigmoid", "relu"])
    trace_p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def cmd_run(args) -> int:
    raw = _load_data(args.data, args.target)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise SystemExit(f"unknown method {m!r}; choose from {','.join(METHODS)}")
    cfg = SamplerConfig(n_networks=args.networks, activation=args.activation,
                        max_iter=args.max_iter, min_iter=min(20, args.max_iter))
    reports = run_trials(raw, methods, n_trials=args.trials, seed=args.seed,
                         sampler_cfg=cfg, bignn_cfg=BigNNConfig(activation=args.activation))
    agg = emit_report(reports, args.out, dataset_name=raw.name,
                      prior_mean=cfg.prior_mean, render_figures=not args.no_figures)
    print(f"wrote report for {raw.name!r} ({args.trials} trials) to {args.out}")
    for name in agg["methods"]:
        s = agg["summary"][name]
        print(f"  {name:10s} mean scaled test RMSE {s['rmse_test_mean']:.4f}")
    return 0


def cmd_synth(args) -> int:
    if (args.spec is None) == (args.preset is None):
        raise SystemExit("give exactly one of --spec or --preset")
    spec = PRESETS[args.preset] if args.preset else SynthSpec.from_json(args.spec)
    ds = generate(spec)
    save_csv(ds, args.out)
    print(f"wrote {ds.n} x {ds.d} {spec.relationship} dataset to {args.out}")
    return 0


def cmd_trace(args) -> int:
    raw = _load_data(args.data, args.target)
    ds = prepare_trial_dataset(raw, args.seed)
    cfg = SamplerConfig(n_networks=args.networks, activation=args.activation, seed=args.seed)
    ensemble, trace = run_barn(ds, cfg)
    trace.to_csv(args.out)
    if not args.no_figures:
        phi_trace_plot(trace.phi, Path(args.out).with_suffix(".png"))
    rmse = float(np.sqrt(np.mean((ds.test_y - ensemble.predict(ds.test_X)) ** 2)))
    print(f"ran {len(trace)} iterations; final sizes {list(ensemble.neuron_counts)}; "
          f"test RMSE {rmse:.4f}; trace written to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "synth":
        return cmd_synth(args)
    return cmd_trace(args)


if __name__ == "__main__":
    sys.exit(main())
