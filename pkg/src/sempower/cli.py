"""Command-line entry point: ``sempower {allocate,experiment,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import metadata
from pathlib import Path

from . import alloc, checks, config, simkit
from .errors import InfeasibleError
from .link import fixed_realization, watts_to_dbm

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def fmt(x) -> str:
    """Nine significant digits for floats; everything else via ``str``."""
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def write_csv(path: Path, table: simkit.Table) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _parse_gains(text: str) -> list[float]:
    try:
        gains = [float(g) for g in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--fixed-gains needs comma-separated numbers, got {text!r}")
    if any(not g > 0 for g in gains):
        raise argparse.ArgumentTypeError("--fixed-gains values must be positive")
    return gains


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sempower", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("allocate", help="allocate power for one channel realization")
    a.add_argument("--config", type=Path)
    a.add_argument("--pbar", type=float, required=True, help="largest tolerated perceptual distance")
    a.add_argument("--method", choices=[*alloc.METHODS, "all"], default="bisection")
    g = a.add_mutually_exclusive_group()
    g.add_argument("--seed", type=_u64, default=0, help="draw Rayleigh fading from this seed")
    g.add_argument("--fixed-gains", type=_parse_gains, help="fading |h~|^2 per stream, e.g. 1.0,0.5")
    a.add_argument("--out", type=Path, help="also write the rows to this CSV file")

    e = sub.add_parser("experiment", help="run one experiment block to CSV")
    e.add_argument("--config", type=Path)
    e.add_argument("--name", required=True)
    e.add_argument("--out", type=Path, required=True, help="output directory")
    e.add_argument("--workers", type=int, default=1)

    v = sub.add_parser("validate", help="run the numerical self-checks")
    v.add_argument("--config", type=Path)
    v.add_argument("--suite", choices=list(checks.SUITES), action="append")
    return p


ALLOCATE_HEADER = (
    "method", "stream", "power_w", "power_dbm", "error", "achieved_perception", "total_power_w",
)


def cmd_allocate(args, cfg: config.Config) -> int:
    model = cfg.model()
    if args.fixed_gains is not None:
        if len(args.fixed_gains) != model.n:
            print(f"error: --fixed-gains needs {model.n} values", file=sys.stderr)
            return EXIT_USAGE
        real = fixed_realization(cfg.channel, args.fixed_gains)
    else:
        real = simkit.draw_realization(cfg.channel, model.n, simkit.rng_stream(args.seed, 0))
    problem = alloc.AllocationProblem(model, real, args.pbar)
    report = alloc.feasibility_report(problem)
    if not report.feasible:
        print(report.message, file=sys.stderr)
        return EXIT_FAIL
    methods = alloc.METHODS if args.method == "all" else (args.method,)
    rows = []
    print(f"scheme={model.scheme.value} metric={model.preset.metric.value} pbar={fmt(args.pbar)}")
    print(report.message)
    for method in methods:
        try:
            res = alloc.allocate(problem, method)
        except InfeasibleError as exc:
            print(f"{method}: {exc}", file=sys.stderr)
            return EXIT_FAIL
        if res.near_infeasible:
            print(f"warning: {method} hit the SNR cap; target is at the edge of feasibility")
        print(
            f"{method}: total {fmt(res.total_power)} W ({fmt(watts_to_dbm(res.total_power))} dBm), "
            f"perception {fmt(res.achieved_p)}"
        )
        for s, q, e in zip(model.streams, res.powers, res.errors):
            print(f"  {s.name}: q {fmt(q)} W ({fmt(watts_to_dbm(q))} dBm), error {fmt(e)}")
            rows.append((method, s.name, q, watts_to_dbm(q), e, res.achieved_p, res.total_power))
    if args.out is not None:
        try:
            write_csv(args.out, simkit.Table(ALLOCATE_HEADER, rows))
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_experiment(args, cfg: config.Config) -> int:
    spec = cfg.experiment(args.name)
    table = simkit.run_experiment(spec, cfg.scenario(spec), workers=args.workers)
    out = args.out / simkit.OUTPUT_FILES[spec.kind]
    manifest = {
        "config_sha256": cfg.sha256,
        "experiment": spec.name,
        "kind": spec.kind,
        "seed": spec.seed,
        "version": version(),
        "output": out.name,
    }
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(out, table)
        with open(args.out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write {exc.filename or args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out} ({len(table.rows)} rows)")
    if spec.kind == "LinkValidate":
        failed = [r for r in table.rows if not r[-1]]
        if failed:
            print(f"{len(failed)} link checks failed", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def cmd_validate(args, cfg: config.Config) -> int:
    ok = True
    for r in checks.run_suites(cfg, args.suite):
        ok &= r.passed
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: max residual {fmt(r.max_residual)} ({r.detail})")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"allocate": cmd_allocate, "experiment": cmd_experiment, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load(args.config)
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        return COMMANDS[args.command](args, cfg)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
