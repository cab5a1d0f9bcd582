"""Command-line front end: ``psnn simulate | sweep | iris | energy | list-scenarios``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from .config import DEFAULT_OUT_DIR, OUT_DIR_ENV, load_config, merge, validate
from .energy import compare_profiles, energy_of_run, get_profile
from .errors import ConfigError, PSNNError, ParseError, ProfileError, SchemaError
from .scenarios import SCENARIOS, SWEEP_PARAMS, RunRecord, replay, run_scenario, sweep_point, sweep_values

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_PROPERTY = 5
EXIT_MODEL = 6


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def _user_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    if args.seed is not None:
        cfg = merge(cfg, {"seed": args.seed})
    return cfg


def _report(record: RunRecord, started: float) -> int:
    status = "PASS" if record.passed else "FAIL"
    print(f"{record.scenario}: {status} ({time.perf_counter() - started:.1f} s)")
    for name, ok in record.properties.items():
        print(f"  {'ok  ' if ok else 'FAIL'} {name}")
    for name, art in record.artifacts.items():
        print(f"  wrote {art['path']}")
    return EXIT_OK if record.passed else EXIT_PROPERTY


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    if args.replay:
        old = RunRecord.read(args.replay)
        new, bad = replay(old, _out_dir(args) / "replay")
        if bad:
            print(f"replay of {old.scenario} differs in: {', '.join(bad)}")
            return EXIT_PROPERTY
        print(f"replay of {old.scenario}: {len(old.artifacts)} artifacts identical")
        return EXIT_OK
    record = run_scenario(args.scenario or "custom", _user_config(args), _out_dir(args))
    return _report(record, started)


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    user = _user_config(args)
    if args.param is None:
        record = run_scenario(args.scenario or "fig3", user, _out_dir(args))
        return _report(record, started)
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {args.param!r}; valid: {', '.join(SWEEP_PARAMS)}")
    base = SCENARIOS[args.scenario].config(user) if args.scenario else validate(user)
    rng = {k: v for k, v in (("start", args.start), ("stop", args.stop), ("num", args.num)) if v is not None}
    config = validate(merge(base, {"sweep": {"param": args.param, **rng}}))
    out = _out_dir(args) / "sweep"
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.param}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([args.param, "rate_hz", "spike_count"])
        for v in sweep_values(config):
            rate, n = sweep_point(config, args.param, float(v))
            w.writerow([f"{v:.9g}", f"{rate:.9g}", n])
    (out / f"sweep_{args.param}_config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {path} ({time.perf_counter() - started:.1f} s)")
    return EXIT_OK


def cmd_iris(args) -> int:
    started = time.perf_counter()
    user = _user_config(args)
    iris = {}
    if args.mode:
        iris["mode"] = args.mode
    if args.dataset:
        if not Path(args.dataset).is_file():
            raise FileNotFoundError(f"dataset not found: {args.dataset}")
        iris["dataset"] = str(args.dataset)
    record = run_scenario("fig9", merge(user, {"iris": iris}), _out_dir(args))
    s = record.summary
    print(
        f"iris ({record.config['iris']['mode']}): accuracy {s['accuracy']:.4f}, "
        f"recalls {', '.join(f'{r:.2f}' for r in s['recalls'])}, weights {s['weights']}"
    )
    return _report(record, started)


def _spike_sources(record: RunRecord) -> dict:
    """{source name: spike times in s} from the spike CSVs a run wrote."""
    sources = {}
    for name, art in record.artifacts.items():
        path = Path(art["path"])
        if path.suffix != ".csv":
            continue
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if "spike_time_ns" not in (reader.fieldnames or []):
                continue
            group = [c for c in ("preset", "sample_id") if c in reader.fieldnames]
            if not group:
                sources.setdefault(name, [])
            for row in reader:
                key = name + "".join(f":{row[c]}" for c in group)
                sources.setdefault(key, []).append(float(row["spike_time_ns"]) * 1e-9)
    return sources


def cmd_energy(args) -> int:
    started = time.perf_counter()
    if args.compare:
        profiles = None
        if args.profile:
            profiles = [get_profile(p) for p in args.profile.split(",")]
        table = compare_profiles(args.counts if args.counts is not None else 1, profiles)
        print(table.to_text())
        return EXIT_OK
    cfg = validate(_user_config(args))["energy"]
    profile = get_profile(args.profile or cfg["profile"])
    mode = args.energy_mode or cfg["mode"]
    baseline = args.baseline_power if args.baseline_power is not None else cfg["baseline_power"]
    if args.record:
        record = RunRecord.read(args.record)
        report = energy_of_run(_spike_sources(record), profile, mode, baseline_power=baseline)
    elif args.counts is not None:
        report = energy_of_run(int(args.counts), profile, "standard", baseline_power=baseline)
    else:
        raise UsageError("energy needs --compare, --record RUN_RECORD or --counts N")
    out = _out_dir(args) / "energy"
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "energy.json")
    report.write_csv(out / "energy.csv")
    print(f"{profile.name} {report.mode}: {report.total:.6g} J over {sum(report.spike_counts.values())} spikes")
    print(f"  wrote {out / 'energy.json'}\n  wrote {out / 'energy.csv'} ({time.perf_counter() - started:.2f} s)")
    return EXIT_OK


def cmd_list(args) -> int:
    for s in SCENARIOS.values():
        print(f"{s.name:6s} {s.figure:22s} {', '.join(s.properties)}")
        print(f"       input: {s.input_desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (see configs/example.yaml)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", help=f"artifact directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")

    p = argparse.ArgumentParser(prog="psnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run one scenario or a custom config")
    sim.add_argument("--scenario", choices=["custom", *SCENARIOS], help="built-in scenario (default: custom)")
    sim.add_argument("--replay", metavar="RUN_RECORD", help="re-run a run_record.json and compare artifacts")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", parents=[common], help="firing-rate sweep (default: the fig3 scenario)")
    sw.add_argument("--scenario", choices=list(SCENARIOS), help="scenario supplying the base config")
    sw.add_argument("--param", help=f"swept quantity: {', '.join(SWEEP_PARAMS)}")
    sw.add_argument("--start", type=float)
    sw.add_argument("--stop", type=float)
    sw.add_argument("--num", type=int)
    sw.set_defaults(func=cmd_sweep)

    ir = sub.add_parser("iris", parents=[common], help="train, program and evaluate the Iris pipeline")
    ir.add_argument("--mode", choices=["paper", "split"], help="paper: all 150 samples; split: seeded 80/20")
    ir.add_argument("--dataset", help="CSV with four feature columns and a label column (default: bundled Iris)")
    ir.set_defaults(func=cmd_iris)

    en = sub.add_parser("energy", parents=[common], help="energy accounting and the profile comparison table")
    en.add_argument("--compare", action="store_true", help="print the technology comparison table")
    en.add_argument("--profile", help="built-in name (Foundry45, ASAP7) or profile JSON; comma-separate two for --compare")
    en.add_argument("--record", help="run_record.json whose spike outputs are billed")
    en.add_argument("--counts", type=int, help="bill a bare spike count")
    en.add_argument("--mode", dest="energy_mode", choices=["standard", "extended"])
    en.add_argument("--baseline-power", type=float, help="static power in W added over the run")
    en.set_defaults(func=cmd_energy)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"psnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, SchemaError, ParseError) as exc:
        print(f"psnn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProfileError as exc:
        print(f"psnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"psnn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PSNNError as exc:
        print(f"psnn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
