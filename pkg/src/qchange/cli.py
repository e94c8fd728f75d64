"""Command-line interface.

Every data-producing subcommand writes its outputs into an output directory
(``--out``, else ``$QCHANGE_OUT_DIR``, else the working directory) together
with a ``*.manifest.json`` recording the tool version, the parameters, and
the produced files.  ``qchange replay MANIFEST`` re-runs a manifest and
regenerates byte-identical data files; ``--threads`` may be changed freely,
it never affects file contents.

Exit codes: 0 success, 2 bad usage or parameter values, 3 file-system
errors, 4 malformed input data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .events import (
    InvalidTrialError,
    StreamFormatError,
    TimingConfig,
    generate_stream,
    postselect_bins,
    read_events_csv,
    run_strategy_on_stream,
    write_bin_outcomes_csv,
    write_events_csv,
)
from .experiments import (
    distance_table,
    simulate_success,
    sweep_k,
    sweep_n,
    sweep_overlap,
    sweep_to_json_dict,
    trial_seed_words,
    write_sweep_csv,
)
from .strategies import ImpossibleOutcomeError, SourceConfig, bi_run, bl_run
from .qubit import BinaryMeasurement

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4

ENV_OUT_DIR = "QCHANGE_OUT_DIR"


def _float_list(text: str):
    try:
        values = [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _int_list(text: str):
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _add_common(parser, trials_default=20000):
    parser.add_argument("--trials", type=int, default=trials_default,
                        help="Monte Carlo trials per point (default %(default)s)")
    parser.add_argument("--epsilon", type=float, default=0.0,
                        help="symmetric readout flip probability (default %(default)s)")
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed (default %(default)s)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; never changes results (default %(default)s)")
    parser.add_argument("--out", default=None,
                        help=f"output directory (default ${ENV_OUT_DIR} or the working directory)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="data file format (default %(default)s)")


def _add_timing(parser):
    parser.add_argument("--trigger-interval-ns", type=int, default=100_000_000)
    parser.add_argument("--chopper-period-ns", type=int, default=5_000_000)
    parser.add_argument("--bin-width-ns", type=int, default=2_500_000)
    parser.add_argument("--window-ns", type=int, default=3,
                        help="coincidence window (strict |dt| < window)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qchange",
        description="Change-point detection in a stream of two-level quantum states",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trial", help="run and dump one fully recorded trial")
    p.add_argument("--strategy", choices=("BI", "BL"), default="BI")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--c2", type=float, default=0.604, help="squared overlap c^2")
    p.add_argument("--k", type=int, default=5, help="true change position")
    _add_common(p)

    p = sub.add_parser("sweep-k", help="success vs change position")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--c2", type=float, default=0.604)
    _add_common(p)

    p = sub.add_parser("sweep-overlap", help="averaged success vs squared overlap")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--grid", type=_float_list, default=None,
                   help="comma-separated c^2 values (default: built-in grid)")
    _add_common(p)

    p = sub.add_parser("sweep-n", help="averaged success vs sequence length")
    p.add_argument("--n-values", type=_int_list, default=[10, 20, 40])
    p.add_argument("--c2", type=float, required=True)
    _add_common(p)

    p = sub.add_parser("distances", help="strategy separations vs squared overlap")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--grid", type=_float_list, default=None)
    _add_common(p)

    p = sub.add_parser("pipeline", help="event-level synthesis and postselection")
    p.add_argument("mode", choices=("generate", "postselect", "run"))
    p.add_argument("--events", default=None,
                   help="input event CSV (postselect mode)")
    p.add_argument("--strategy", choices=("BI", "BL"), default="BL")
    p.add_argument("--n", type=int, default=20, help="photons per block = bins per trigger")
    p.add_argument("--c2", type=float, default=0.604)
    p.add_argument("--k", type=int, default=None,
                   help="change position (run mode: omit to average)")
    p.add_argument("--n-triggers", type=int, default=1)
    p.add_argument("--pairs-per-bin", type=float, default=1.0)
    p.add_argument("--background-per-ms", type=float, default=0.0)
    _add_timing(p)
    _add_common(p, trials_default=1000)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest", help="path to a *.manifest.json file")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--threads", type=int, default=None, help="override the worker count")

    return parser


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(ENV_OUT_DIR) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, stem: str, subcommand: str, params: dict,
                    outputs, started: float, result=None) -> Path:
    manifest = {
        "tool": "qchange",
        "version": __version__,
        "subcommand": subcommand,
        "params": params,
        "outputs": list(outputs),
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }
    if result is not None:
        manifest["result"] = result
    path = out / f"{stem}.manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _params(args, names):
    return {name: getattr(args, name) for name in names}


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _measurement_dict(meas: BinaryMeasurement) -> dict:
    return {
        "pi_0": [meas.pi_0.m00, meas.pi_0.m01, meas.pi_0.m11],
        "pi_1": [meas.pi_1.m00, meas.pi_1.m01, meas.pi_1.m11],
    }


def cmd_trial(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    config = SourceConfig(n=args.n, k=args.k, c_squared=args.c2)
    word = int(trial_seed_words(args.seed, 0, 1)[0])
    rng = np.random.default_rng(word)
    runner = bi_run if args.strategy == "BI" else bl_run
    record = runner(config, rng, epsilon=args.epsilon, seed=word)

    outputs = []
    if args.format == "json":
        payload = {
            "strategy": record.strategy,
            "config": {"n": config.n, "k": config.k, "c_squared": config.c_squared},
            "epsilon": args.epsilon,
            "seed": record.seed,
            "outcomes": list(record.outcomes),
            "bases": [_measurement_dict(m) for m in record.bases],
            "priors": [list(map(float, p.eta)) for p in record.prior_history],
            "guess": record.guess,
            "success": record.success,
        }
        _write_json(payload, out / "trial.json")
        outputs.append("trial.json")
    else:
        lines = ["step,outcome,pi0_m00,pi0_m01,pi0_m11,pi1_m00,pi1_m01,pi1_m11"]
        for step, (outcome, meas) in enumerate(zip(record.outcomes, record.bases), start=1):
            lines.append(",".join(
                [str(step), str(outcome)]
                + [_fmt(v) for v in (meas.pi_0.m00, meas.pi_0.m01, meas.pi_0.m11,
                                     meas.pi_1.m00, meas.pi_1.m01, meas.pi_1.m11)]
            ))
        with open(out / "trial_steps.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        outputs.append("trial_steps.csv")
        if record.prior_history:
            lines = ["step,k,eta"]
            for prior in record.prior_history:
                for k_idx, eta_k in enumerate(prior.eta, start=1):
                    lines.append(f"{prior.step},{k_idx},{_fmt(eta_k)}")
            with open(out / "trial_priors.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
            outputs.append("trial_priors.csv")

    _write_manifest(
        out, "trial", "trial",
        _params(args, ("strategy", "n", "c2", "k", "trials", "epsilon", "seed",
                       "threads", "format")),
        outputs, started,
        result={"guess": record.guess, "success": record.success},
    )
    print(f"trial: strategy={record.strategy} k={config.k} guess={record.guess} "
          f"success={record.success}")
    return EXIT_OK


def _emit_sweep(args, table, stem: str, subcommand: str, param_names, started) -> int:
    out = _out_dir(args)
    if args.format == "json":
        name = f"{stem}.json"
        _write_json(sweep_to_json_dict(table), out / name)
    else:
        name = f"{stem}.csv"
        write_sweep_csv(table, out / name)
    _write_manifest(out, stem, subcommand, _params(args, param_names), [name], started)
    print(f"{subcommand}: wrote {out / name} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_sweep_k(args) -> int:
    started = time.perf_counter()
    table = sweep_k(args.n, args.c2, trials_per_k=args.trials, epsilon=args.epsilon,
                    master_seed=args.seed, threads=args.threads)
    return _emit_sweep(args, table, "sweep_k", "sweep-k",
                       ("n", "c2", "trials", "epsilon", "seed", "threads", "format"),
                       started)


def cmd_sweep_overlap(args) -> int:
    started = time.perf_counter()
    table = sweep_overlap(args.n, grid=args.grid, trials=args.trials,
                          epsilon=args.epsilon, master_seed=args.seed,
                          threads=args.threads)
    return _emit_sweep(args, table, "sweep_overlap", "sweep-overlap",
                       ("n", "grid", "trials", "epsilon", "seed", "threads", "format"),
                       started)


def cmd_sweep_n(args) -> int:
    started = time.perf_counter()
    table = sweep_n(args.n_values, args.c2, trials=args.trials, epsilon=args.epsilon,
                    master_seed=args.seed, threads=args.threads)
    return _emit_sweep(args, table, "sweep_n", "sweep-n",
                       ("n_values", "c2", "trials", "epsilon", "seed", "threads", "format"),
                       started)


def cmd_distances(args) -> int:
    started = time.perf_counter()
    table = distance_table(args.n, grid=args.grid, trials=args.trials,
                           epsilon=args.epsilon, master_seed=args.seed,
                           threads=args.threads)
    return _emit_sweep(args, table, "distances", "distances",
                       ("n", "grid", "trials", "epsilon", "seed", "threads", "format"),
                       started)


_PIPELINE_PARAMS = (
    "mode", "events", "strategy", "n", "c2", "k", "n_triggers", "pairs_per_bin",
    "background_per_ms", "trigger_interval_ns", "chopper_period_ns",
    "bin_width_ns", "window_ns", "trials", "epsilon", "seed", "threads", "format",
)


def _timing_from_args(args, n_bins: int) -> TimingConfig:
    return TimingConfig(
        trigger_interval_ns=args.trigger_interval_ns,
        chopper_period_ns=args.chopper_period_ns,
        bin_width_ns=args.bin_width_ns,
        coincidence_window_ns=args.window_ns,
        n_bins=n_bins,
    )


def cmd_pipeline(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    timing = _timing_from_args(args, args.n)

    if args.mode == "generate":
        if args.k is None:
            raise ValueError("pipeline generate requires --k (one source setting per record)")
        source = SourceConfig(n=args.n, k=args.k, c_squared=args.c2)
        word = int(trial_seed_words(args.seed, 0, 1)[0])
        rng = np.random.default_rng(word)
        events = generate_stream(
            timing, source, rng,
            pairs_per_bin=args.pairs_per_bin,
            background_per_ms=args.background_per_ms,
            n_triggers=args.n_triggers,
        )
        write_events_csv(events, out / "events.csv")
        _write_manifest(out, "events", "pipeline", _params(args, _PIPELINE_PARAMS),
                        ["events.csv"], started)
        print(f"pipeline generate: wrote {out / 'events.csv'} ({len(events)} events)")
        return EXIT_OK

    if args.mode == "postselect":
        if not args.events:
            raise ValueError("pipeline postselect requires --events")
        events = read_events_csv(args.events)
        per_trigger = postselect_bins(events, timing)
        write_bin_outcomes_csv(per_trigger, out / "bins.csv")
        empty = sum(1 for bins in per_trigger for bo in bins if bo.outcome is None)
        _write_manifest(out, "bins", "pipeline", _params(args, _PIPELINE_PARAMS),
                        ["bins.csv"], started,
                        result={"triggers": len(per_trigger), "empty_bins": empty})
        print(f"pipeline postselect: wrote {out / 'bins.csv'} "
              f"({len(per_trigger)} triggers, {empty} empty bins)")
        return EXIT_OK

    # args.mode == "run": interleaved generation + strategy, many trials.
    words = trial_seed_words(args.seed, 0, args.trials)
    successes = 0
    invalid = 0
    for word in words:
        rng = np.random.default_rng(int(word))
        k = args.k if args.k is not None else int(rng.integers(1, args.n + 1))
        source = SourceConfig(n=args.n, k=k, c_squared=args.c2)
        try:
            record = run_strategy_on_stream(
                args.strategy, timing, source, rng,
                pairs_per_bin=args.pairs_per_bin,
                background_per_ms=args.background_per_ms,
                seed=int(word),
            )
        except InvalidTrialError:
            invalid += 1
            continue
        successes += int(record.success)
    valid = args.trials - invalid
    mean = successes / valid if valid else None
    std_error = (
        float(np.sqrt(mean * (1.0 - mean) / valid)) if valid and mean is not None else None
    )
    row = {
        "strategy": args.strategy,
        "n": args.n,
        "c2": args.c2,
        "k": args.k,
        "mean": mean,
        "std_error": std_error,
        "valid_trials": valid,
        "invalid_trials": invalid,
    }
    if args.format == "json":
        name = "pipeline_run.json"
        _write_json(row, out / name)
    else:
        name = "pipeline_run.csv"
        lines = ["strategy,n,c2,k,mean,std_error,valid_trials,invalid_trials"]
        lines.append(",".join([
            args.strategy, str(args.n), _fmt(args.c2),
            "" if args.k is None else str(args.k),
            "" if mean is None else _fmt(mean),
            "" if std_error is None else _fmt(std_error),
            str(valid), str(invalid),
        ]))
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    _write_manifest(out, "pipeline_run", "pipeline", _params(args, _PIPELINE_PARAMS),
                    [name], started, result={"mean": mean, "invalid_trials": invalid})
    print(f"pipeline run: {valid} valid trials, {invalid} invalid, mean="
          f"{'n/a' if mean is None else f'{mean:.4f}'}")
    return EXIT_OK


_DISPATCH = {
    "trial": cmd_trial,
    "sweep-k": cmd_sweep_k,
    "sweep-overlap": cmd_sweep_overlap,
    "sweep-n": cmd_sweep_n,
    "distances": cmd_distances,
    "pipeline": cmd_pipeline,
}


def cmd_replay(args) -> int:
    try:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        print(f"qchange: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"qchange: malformed manifest {args.manifest}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    subcommand = manifest.get("subcommand")
    params = manifest.get("params")
    if subcommand not in _DISPATCH or not isinstance(params, dict):
        print(f"qchange: manifest {args.manifest} does not describe a known subcommand",
              file=sys.stderr)
        return EXIT_PARSE
    replay_args = argparse.Namespace(**params)
    replay_args.out = args.out if args.out is not None else str(Path(args.manifest).parent)
    if args.threads is not None and hasattr(replay_args, "threads"):
        replay_args.threads = args.threads
    return _DISPATCH[subcommand](replay_args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        return _DISPATCH[args.command](args)
    except StreamFormatError as exc:
        print(f"qchange: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ImpossibleOutcomeError as exc:
        print(f"qchange: data contradicts the ideal model: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"qchange: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"qchange: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
