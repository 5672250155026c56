"""Phase timings, speedup and parallel efficiency against a reference run."""
import csv
import io
from pathlib import Path

from .heat import run_heat

__all__ = ["BENCH_COLUMNS", "TIMING_COLUMNS", "metrics_row", "read_reference", "run_bench",
           "bench_csv"]

TIMING_COLUMNS = ("initialization", "assembling", "solving", "communication", "total",
                  "speedup", "solve_speedup", "efficiency", "solve_efficiency")
BENCH_COLUMNS = ("ranks", "reference_ranks", "ideal_speedup") + TIMING_COLUMNS


def metrics_row(m):
    return {"ranks": m.ranks, "reference_ranks": m.reference_ranks,
            "ideal_speedup": m.ideal_speedup, "initialization": m.initialization,
            "assembling": m.assembling, "solving": m.solving, "communication": m.communication,
            "total": m.total, "speedup": m.speedup, "solve_speedup": m.solve_speedup,
            "efficiency": m.efficiency, "solve_efficiency": m.solve_efficiency}


def read_reference(path):
    """``(ranks, total, solving)`` from the first row of a bench CSV."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"reference run not found: {path}")
    with path.open(newline="") as fh:
        row = next(csv.DictReader(fh), None)
    if row is None:
        raise ValueError(f"reference file {path} has no data row")
    return int(row["ranks"]), float(row["total"]), float(row["solving"])


def run_bench(cfg, reference=None):
    """Run the heat problem and return its :class:`RunMetrics`.

    ``reference`` is a CSV written by an earlier bench run; without one the
    run is its own reference (speedup and efficiency 1).
    """
    ref = read_reference(reference) if reference is not None else None
    m = run_heat(cfg).metrics
    if ref is not None:
        m.relative_to(*ref)
    return m


def bench_csv(metrics):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for m in metrics:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v)
                    for k, v in metrics_row(m).items()})
    return buf.getvalue()
