import numpy as np
import pytest
import sympy

from parfem.assembly import (apply_dirichlet, assemble_load, assemble_matrices, element_matrices,
                             gauss_rule, reference_matrices)
from parfem.app.heat import ModelProblem
from parfem.fespace import FEFamily, build_fespace
from parfem.mesh import generate_unit_mesh, ref_vertex_offsets

from conftest import mapper_setup, ranks


def _symbolic_q1(d):
    xs = sympy.symbols(f"x0:{d}")
    basis = []
    for off in ref_vertex_offsets(d):
        f = sympy.Integer(1)
        for a, o in enumerate(off):
            f *= xs[a] if o else 1 - xs[a]
        basis.append(f)

    def integrate(expr):
        for x in xs:
            expr = sympy.integrate(expr, (x, 0, 1))
        return expr
    n = len(basis)
    mass = sympy.Matrix(n, n, lambda i, j: integrate(basis[i] * basis[j]))
    stiff = sympy.Matrix(n, n, lambda i, j: integrate(sum(sympy.diff(basis[i], x) * sympy.diff(basis[j], x)
                                                          for x in xs)))
    return np.array(mass, dtype=float), np.array(stiff, dtype=float)


def test_unit_square_matrices_match_closed_form_and_symbolic_oracle():
    mass, stiff = _symbolic_q1(2)
    ref_k = np.array([[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]) / 6
    ref_m = np.array([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]]) / 36
    np.testing.assert_allclose(stiff, ref_k, atol=1e-15)
    np.testing.assert_allclose(mass, ref_m, atol=1e-15)
    e = element_matrices(generate_unit_mesh(2, 1), 0)
    np.testing.assert_allclose(e.stiffness, ref_k, atol=1e-14)
    np.testing.assert_allclose(e.mass, ref_m, atol=1e-15)


def test_unit_cube_matches_symbolic_oracle():
    mass, stiff = _symbolic_q1(3)
    m_ref, k_ref = reference_matrices(3)
    np.testing.assert_allclose(m_ref, mass, atol=1e-15)
    np.testing.assert_allclose(k_ref.sum(axis=0), stiff, atol=1e-14)


@pytest.mark.parametrize("d,n", [(2, 3), (3, 2), (2, 7)])
def test_element_invariants(d, n):
    mesh = generate_unit_mesh(d, n)
    e = element_matrices(mesh, 0, f=lambda t, p: np.ones(len(p)), t=0.0)
    np.testing.assert_allclose(e.stiffness, e.stiffness.T, atol=1e-15)
    np.testing.assert_allclose(e.mass, e.mass.T, atol=1e-15)
    np.testing.assert_allclose(e.stiffness.sum(axis=1), 0.0, atol=1e-13)
    assert np.all(e.mass > 0)
    assert abs(e.mass.sum() - mesh.cell_volume) < 1e-15
    assert abs(e.load.sum() - mesh.cell_volume) < 1e-15


@pytest.mark.parametrize("d", [2, 3])
def test_gauss_rule_exactness(d):
    rule = gauss_rule(d, 2)
    assert abs(rule.weights.sum() - 1.0) < 1e-15
    # exact for x^3 per axis
    for a in range(d):
        assert abs(rule.weights @ rule.points[:, a] ** 3 - 0.25) < 1e-15


def _assembly(t, d, n, level):
    m, comm = mapper_setup(t, d, n, level)
    mass, stiff = assemble_matrices(m.space)
    own = np.flatnonzero(m.owned_free_mask | m.owned_dirichlet_mask)
    keys = m.space.dof_keys
    rows = {}
    for name, a in (("M", mass, ), ("K", stiff)):
        for i in own:
            cols, vals = a.row(i)
            rows[name, int(keys[i])] = sorted(zip(keys[cols].tolist(), vals.tolist()))
    f = assemble_load(m.space, comm, ModelProblem(d).source, 0.3)
    # Dirichlet load entries are partial sums; they are overwritten by boundary data
    free = np.flatnonzero(m.owned_free_mask)
    return rows, dict(zip(keys[free].tolist(), f[free].tolist())), float(mass.values.sum())


@pytest.mark.parametrize("d,n,level,k", [(2, 4, 0, 2), (2, 4, 1, 4), (3, 2, 1, 4), (3, 2, 1, 3)])
def test_distributed_assembly_equals_sequential(d, n, level, k):
    (ref_rows, ref_f, total), = ranks(1, _assembly, d, n, level)
    assert abs(total - 1.0) < 1e-12
    seen = set()
    for rows, f, _ in ranks(k, _assembly, d, n, level):
        for key, row in rows.items():
            assert row == ref_rows[key]  # exact, entry by entry
            seen.add(key)
        for key, v in f.items():
            assert abs(v - ref_f[key]) <= 1e-14 * max(1.0, abs(ref_f[key]))
    assert seen == set(ref_rows)


def test_zero_source_gives_zero_load():
    def body(t):
        m, comm = mapper_setup(t, 2, 4, 1)
        return assemble_load(m.space, comm, lambda t_, p: np.zeros(len(p)), 0.0)
    assert all(np.all(v == 0) for v in ranks(2, body))


def test_apply_dirichlet():
    def body(t):
        m, comm = mapper_setup(t, 2, 3, 1)
        mass, stiff = assemble_matrices(m.space)
        a = mass.combine(1.0, stiff, 1.0)
        rhs = np.ones(m.n_dofs)
        a0 = apply_dirichlet(a, rhs.copy(), m.space)
        rhs_zero = rhs.copy()
        apply_dirichlet(a, rhs_zero, m.space)
        g = ModelProblem(2).boundary
        rhs_g = rhs.copy()
        ag = apply_dirichlet(a, rhs_g, m.space, g, 0.0)
        bnd = m.space.dirichlet
        return a0, ag, rhs_zero[bnd], rhs_g[bnd], g(0.0, m.space.dof_coords[bnd]), bnd
    (a0, ag, z, rg, gv, bnd), = ranks(1, body)
    assert np.all(z == 0)
    np.testing.assert_array_equal(rg, gv)
    dense = ag.toarray()
    np.testing.assert_array_equal(dense[bnd], np.eye(dense.shape[0])[bnd])
    # rows-only: the columns of Dirichlet DOFs are kept in the other rows
    free = np.setdiff1d(np.arange(dense.shape[0]), bnd)
    assert np.any(dense[np.ix_(free, bnd)] != 0)
    # solving reproduces g on the boundary
    x = np.linalg.solve(dense, np.where(np.isin(np.arange(dense.shape[0]), bnd), 0.0, 1.0))
    np.testing.assert_allclose(x[bnd], 0.0, atol=1e-14)


def test_exact_solution_corner_value():
    assert ModelProblem(3).exact(0.0, [[0.0, 0.0, 0.0]])[0] == 0.0


def test_stiffness_is_spsd_and_definite_after_dirichlet():
    def body(t):
        m, _ = mapper_setup(t, 2, 3, 1)
        return assemble_matrices(m.space)[1].toarray(), m.space.dirichlet_mask
    (k, bnd), = ranks(1, body)
    ev = np.linalg.eigvalsh(k)
    assert ev.min() > -1e-12
    interior = k[np.ix_(~bnd, ~bnd)]
    assert np.linalg.eigvalsh(interior).min() > 0


def test_non_q1_assembly_rejected():
    from parfem.partition import build_subdomain, partition_cells
    m = generate_unit_mesh(2, 2)
    space = build_fespace(build_subdomain(m, partition_cells(m, 1), 0, FEFamily.Q0), FEFamily.Q0)
    with pytest.raises(ValueError):
        assemble_matrices(space)
