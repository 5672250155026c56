"""Per-level, per-rank DOF class counts."""
import csv
import io

from ..femapper import build_mapper
from ..fespace import FEFamily, build_fespace
from ..mesh import generate_unit_mesh
from ..partition import Strategy, build_subdomain, partition_cells, refine_subdomain
from ..transport import run_ranks

__all__ = ["CLASS_COLUMNS", "classify_rank", "run_classify", "classify_csv", "level_totals"]

CLASS_COLUMNS = ("master", "slave", "independent", "dependent1", "dependent2", "halo1",
                 "halo2", "dirichlet", "interface", "dependent", "halo", "own",
                 "sent_halo1", "sent_halo2")


def classify_rank(transport, cfg):
    family = FEFamily.parse(cfg.family)
    coarse = generate_unit_mesh(cfg.dimension, cfg.n_coarse)
    pmap = partition_cells(coarse, transport.size, Strategy.parse(cfg.partition))
    rows = []
    sub = None
    for level in range(cfg.levels):
        sub = build_subdomain(coarse, pmap, transport.rank, family) if sub is None \
            else refine_subdomain(sub)
        space = build_fespace(sub, family, dirichlet=cfg.dirichlet)
        counts = build_mapper(space, transport, tag=("classify", level)).counts()
        rows.append((level, transport.rank, counts))
    return rows


def run_classify(cfg):
    """Rows ``(level, rank, class, count)`` sorted by level, rank, class order."""
    per_rank = run_ranks(cfg.ranks, classify_rank, cfg, timeout=cfg.timeout)
    rows = []
    for level in range(cfg.levels):
        for r in range(cfg.ranks):
            counts = per_rank[r][level][2]
            rows.extend((level, r, name, counts[name]) for name in CLASS_COLUMNS)
    return rows


def level_totals(rows):
    """``{level: {class: sum over ranks}}``."""
    totals = {}
    for level, _, name, count in rows:
        totals.setdefault(level, dict.fromkeys(CLASS_COLUMNS, 0))[name] += count
    return totals


def classify_csv(rows):
    """CSV text: per-rank rows, then one ``rank=all`` total row per level and class."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "rank", "class", "count"])
    w.writerows(rows)
    for level, counts in sorted(level_totals(rows).items()):
        w.writerows((level, "all", name, counts[name]) for name in CLASS_COLUMNS)
    return buf.getvalue()
