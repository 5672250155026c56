import csv
import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
import scipy.io
import sympy

from parfem.app.bench import BENCH_COLUMNS, bench_csv, read_reference, run_bench
from parfem.app.classify import CLASS_COLUMNS, classify_csv, level_totals, run_classify
from parfem.app.config import RunConfig, parse_config, read_config_file
from parfem.app.export import export_matrixmarket, run_export
from parfem.app.heat import ModelProblem, RunMetrics, run_heat
from parfem.linalg import CsrSparseMatrix
from parfem.mesh import cell_entity_keys, generate_unit_mesh
from parfem.partition import partition_cells

from conftest import global_level


# configuration

def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("dimension=2  # comment\nn_coarse=4\nranks=4\nlevels=3\npre_smooth=3\n"
                    "post_smooth=3\nlocal_sweeps=1\ndt=0.01\nend_time=5.0\nouter_tol=1e-9\n"
                    "smoother=gauss_seidel\ndirichlet = no\n")
    assert read_config_file(path)["dirichlet"] is False
    cfg = parse_config(["--config", str(path), "--ranks", "2", "--pre-smooth", "5"])
    assert (cfg.dimension, cfg.n_coarse, cfg.ranks, cfg.pre_smooth) == (2, 4, 2, 5)
    assert cfg.post_smooth == 3 and cfg.n_steps == 500
    assert parse_config(["--post_smooth", "1"]).post_smooth == 1
    mg = cfg.multigrid_config()
    assert mg.n_levels == 3 and mg.smoother.pre_sweeps == 5 and mg.outer_tol == 1e-9


def test_config_defaults():
    cfg = RunConfig()
    assert (cfg.pre_smooth, cfg.post_smooth, cfg.dt, cfg.end_time) == (3, 3, 0.01, 5.0)
    assert cfg.replace(steps=7).n_steps == 7


@pytest.mark.parametrize("text", ["bogus=1\n", "dimension=4\n", "dirichlet=maybe\n",
                                  "smoother=sor\n", "ranks=0\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ValueError):
        parse_config(["--config", str(path)])


# model problem

def test_exact_solution_values():
    p = ModelProblem(3)
    assert p.exact(0.0, [[0.5, 0.0, 0.0]])[0] == pytest.approx(1.0, abs=1e-15)
    ratio = p.exact(5.0, [[0.5, 0.0, 0.0]])[0] / p.exact(0.0, [[0.5, 0.0, 0.0]])[0]
    assert ratio == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert ratio == pytest.approx(0.6065, abs=5e-5)
    assert ModelProblem(2).exact(0.0, [[0.5, 1.0]])[0] == pytest.approx(-1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_source_matches_symbolic_pde(d):
    t, *xs = sympy.symbols("t x y z")[: d + 1]
    u = sympy.exp(-sympy.Rational(1, 10) * t) * sympy.sin(sympy.pi * xs[0])
    for x in xs[1:]:
        u *= sympy.cos(sympy.pi * x)
    f = sympy.diff(u, t) - sum(sympy.diff(u, x, 2) for x in xs)
    fn = sympy.lambdify((t, *xs), f)
    pts = np.random.default_rng(0).random((20, d))
    p = ModelProblem(d)
    np.testing.assert_allclose(p.source(0.3, pts), fn(0.3, *pts.T), rtol=1e-12)


def test_run_metrics_definitions():
    m = RunMetrics(ranks=4, solving=2.0, total=4.0).relative_to(1, 10.0, 6.0)
    assert m.speedup == pytest.approx(2.5)
    assert m.solve_speedup == pytest.approx(3.0)
    assert m.ideal_speedup == 4
    assert m.efficiency == pytest.approx(m.speedup / m.ideal_speedup)
    assert m.solve_efficiency == pytest.approx(0.75)


def test_heat_second_order_2d():
    base = RunConfig(dimension=2, n_coarse=2, steps=10, ranks=2)
    coarse = run_heat(base.replace(levels=3))
    fine = run_heat(base.replace(levels=4))
    assert 3.4 <= coarse.l2_error / fine.l2_error <= 4.6
    assert fine.n_global == 17 ** 2
    assert fine.max_error < coarse.max_error


def test_heat_rank_invariance_2d():
    base = RunConfig(dimension=2, n_coarse=4, levels=3, steps=3)
    ref = run_heat(base)
    for k in (2, 4):
        res = run_heat(base.replace(ranks=k))
        np.testing.assert_array_equal(res.keys, ref.keys)
        assert np.max(np.abs(res.solution - ref.solution)) < 1e-7


# classify

def _interface_keys(d, n, k, level):
    """Vertex keys touched by cells of at least two ranks (global-mesh oracle)."""
    coarse = generate_unit_mesh(d, n)
    pmap = partition_cells(coarse, k)
    mesh = global_level(coarse, level)
    owner = pmap.owner_of(mesh.gcn, level)
    keys = cell_entity_keys(mesh, "vertex")
    seen = {}
    for cell_keys, r in zip(keys.tolist(), owner.tolist()):
        for key in cell_keys:
            seen.setdefault(key, set()).add(r)
    return {key for key, rs in seen.items() if len(rs) > 1}


def test_classify_single_rank_has_no_interface():
    totals = level_totals(run_classify(RunConfig(dimension=2, n_coarse=2, levels=2)))
    for counts in totals.values():
        for name in ("master", "slave", "interface", "halo", "halo1", "halo2", "dependent"):
            assert counts[name] == 0


@pytest.mark.parametrize("d,k", [(2, 3), (2, 6), (3, 4)])
def test_classify_master_total_equals_interface_count(d, k):
    cfg = RunConfig(dimension=d, n_coarse=4 if d == 2 else 2, ranks=k, levels=2, dirichlet=False)
    totals = level_totals(run_classify(cfg))
    for level, counts in totals.items():
        assert counts["master"] == len(_interface_keys(d, cfg.n_coarse, k, level))


def test_classify_csv_shape():
    cfg = RunConfig(dimension=2, n_coarse=4, ranks=6, levels=4)
    rows = run_classify(cfg)
    text = classify_csv(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == ["level", "rank", "class", "count"]
    assert len(parsed) == 4 * (6 + 1) * len(CLASS_COLUMNS)
    totals = level_totals(rows)
    halo = [totals[lv]["halo"] for lv in range(4)]
    halo1 = [totals[lv]["halo1"] for lv in range(4)]
    assert all(a < b for a, b in zip(halo, halo[1:]))
    assert all(a < b for a, b in zip(halo1, halo1[1:]))
    for lv in (2, 3):
        assert halo1[lv] < halo[lv] and totals[lv]["halo2"] > 0


# bench

def test_bench_self_reference(tmp_path):
    cfg = RunConfig(dimension=2, n_coarse=2, levels=2, steps=2)
    m = run_bench(cfg)
    assert m.speedup == 1.0 and m.efficiency == 1.0
    text = bench_csv([m])
    row = next(csv.DictReader(io.StringIO(text)))
    assert list(row) == list(BENCH_COLUMNS)
    path = tmp_path / "ref.csv"
    path.write_text(text)
    ranks, total, solving = read_reference(path)
    assert ranks == 1 and total > 0 and solving > 0
    m2 = run_bench(cfg.replace(ranks=2), path)
    assert m2.ideal_speedup == 2
    assert m2.efficiency == pytest.approx(m2.speedup / 2)


def test_bench_missing_reference(tmp_path):
    with pytest.raises(FileNotFoundError):
        run_bench(RunConfig(dimension=2, n_coarse=2, levels=1, steps=1), tmp_path / "nope.csv")


def test_bench_empty_reference(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(",".join(BENCH_COLUMNS) + "\n")
    with pytest.raises(ValueError):
        read_reference(path)


# export

class _SoloTransport:
    rank, size = 0, 1

    def allreduce_sum(self, v):
        return v

    def barrier(self):
        pass


def test_export_identity(tmp_path):
    a = CsrSparseMatrix.from_scipy(np.eye(3))
    mapper = SimpleNamespace(owned_free_mask=np.ones(3, bool), owned_dirichlet_mask=np.zeros(3, bool),
                             global_of=np.arange(3), n_global=3)
    path = tmp_path / "eye.mtx"
    written = export_matrixmarket(a, np.array([1.0, 2.0, 3.0]), mapper, _SoloTransport(), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real general"
    assert lines[1:] == ["3 3 3", "1 1 1", "2 2 1", "3 3 1"]
    np.testing.assert_array_equal(scipy.io.mmread(written[1]).ravel(), [1, 2, 3])
    assert sorted(p.name for p in tmp_path.iterdir()) == ["eye.mtx", "eye_rhs.mtx"]


def _row_multisets(a):
    a = a.tocsr()
    return [tuple(sorted(a.data[a.indptr[i]:a.indptr[i + 1]].tolist())) for i in range(a.shape[0])]


def test_export_round_trip_and_relabeling(tmp_path):
    cfg = RunConfig(dimension=2, n_coarse=2, levels=3, outer_tol=1e-12)
    (p1, r1), x1 = run_export(cfg, tmp_path / "k1.mtx")
    (p2, r2), x2 = run_export(cfg.replace(ranks=2), tmp_path / "k2.mtx")
    a1, a2 = scipy.io.mmread(p1), scipy.io.mmread(p2)
    assert a1.shape == a2.shape == (81, 81) and a1.nnz == a2.nnz
    assert sorted(_row_multisets(a1)) == sorted(_row_multisets(a2))
    b2 = scipy.io.mmread(r2).ravel()
    np.testing.assert_allclose(np.linalg.solve(a2.toarray(), b2), x2, atol=1e-8)
    np.testing.assert_allclose(np.linalg.solve(a1.toarray(), scipy.io.mmread(r1).ravel()), x1,
                               atol=1e-8)
