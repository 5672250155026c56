"""``parfem solve|classify|bench|export``."""
import argparse
import sys
from pathlib import Path

from .app.bench import bench_csv, run_bench
from .app.classify import classify_csv, run_classify
from .app.config import add_config_arguments, resolve_config
from .app.export import run_export
from .app.heat import run_heat


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _solve(cfg, args):
    res = run_heat(cfg)
    m = res.metrics
    lines = [
        f"ranks={cfg.ranks} dimension={cfg.dimension} levels={cfg.levels} dofs={res.n_global}",
        f"steps={cfg.n_steps} t_end={cfg.n_steps * cfg.dt:.6g} "
        f"cycles_per_step(max)={max(res.cycles, default=0)}",
        f"l2_error={res.l2_error:.6e} max_error={res.max_error:.6e}",
        f"time: initialization={m.initialization:.3f}s assembling={m.assembling:.3f}s "
        f"solving={m.solving:.3f}s communication={m.communication:.3f}s total={m.total:.3f}s",
    ]
    print("\n".join(lines))
    if args.output:
        _emit(bench_csv([m]), args.output)


def _classify(cfg, args):
    _emit(classify_csv(run_classify(cfg)), args.output)


def _bench(cfg, args):
    _emit(bench_csv([run_bench(cfg, args.reference)]), args.output)


def _export(cfg, args):
    path = Path(args.output or "system.mtx")
    written, _ = run_export(cfg, path)
    for p in written:
        print(p)


COMMANDS = {"solve": _solve, "classify": _classify, "bench": _bench, "export": _export}


def build_parser():
    parser = argparse.ArgumentParser(prog="parfem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = add_config_arguments(sub.add_parser(name))
        p.add_argument("-o", "--output", help="output file (CSV, or .mtx for export)")
        if name == "bench":
            p.add_argument("--reference", type=Path,
                           help="bench CSV of the reference run (default: this run)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (OSError, ValueError) as exc:
        print(f"parfem: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"parfem: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
