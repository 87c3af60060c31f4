import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodgecgo import container
from hodgecgo.boundary_calculus import faces_of
from hodgecgo.bvp_solver import (BoundaryMap, BvpSolver, DofTable, NearSingular,
                                 analytic_boundary_data, assemble_boundary_map, boundary_data,
                                 relative_data)
from hodgecgo.fields_and_grid import EndoField, FormField, FormFunction, Grid, random_smooth_form
from scalar_oracle import dirichlet_solve, normal_derivative


def test_affine_forms_reproduced_exactly():
    g = Grid.box(9)
    X = g.mesh()
    u = FormField.from_components(g, {(1,): 1 + X[1], (2,): X[0] - X[2], (3,): 2 * X[0]})
    for kind in ("relative", "absolute"):
        v = BvpSolver(g, None, kind, degrees=[1]).solve(boundary_data(u, kind))
        assert np.max(np.abs(v.data - u.data)) < 1e-10


def test_scalar_dirichlet_matches_oracle():
    m = 12
    g = Grid.box(m)
    X = g.mesh()
    q = 1 + X[0] * X[1]
    f = np.cos(X[0] + 2 * X[1]) * np.exp(X[2])
    u = dirichlet_solve(m, q, f)
    v = BvpSolver(g, EndoField.scalar(g, q), "relative", degrees=[0]).solve(
        relative_data(FormField.from_components(g, {(): f})))
    assert np.max(np.abs(v.data[0] - u)) <= 1e-8 * np.max(np.abs(u))


def test_scalar_dn_sign_convention():
    m = 10
    g = Grid.box(m)
    X = g.mesh()
    q = np.full(g.shape, 2.0)
    f = np.exp(X[0]) * np.sin(X[1] + X[2])
    u = dirichlet_solve(m, q, f)
    out = BoundaryMap(g, EndoField.scalar(g, q), "RA", degrees=[0]).apply(
        relative_data(FormField.from_components(g, {(): f})))
    slot = {0: 6, 1: 5, 2: 4}
    for a, side in faces_of(g):
        eps = (-1) ** a * (1 if side == 0 else -1)
        dn = normal_derivative(u, a, side)
        assert np.max(np.abs(out.g.faces[(a, side)][slot[a]] - eps * dn)) <= 1e-8 * np.max(np.abs(dn))


def test_manufactured_convergence_relative():
    c = 1.0
    p = np.array([np.pi, 0.5 * np.pi, 0.0])
    q = np.array([0.0, 0.0, np.sqrt(c + p @ p)])
    fn = FormFunction(lambda X: np.concatenate([np.zeros((1, X.shape[1])),
                                                np.stack([np.sin(np.roll(p, j) @ X) * np.exp(np.roll(q, j) @ X)
                                                          for j in range(3)]),
                                                np.zeros((4, X.shape[1]))]))
    errs = []
    for m in (9, 17):
        g = Grid.box(m)
        v = BvpSolver(g, EndoField.scalar(g, c), "relative", degrees=[1]).solve(
            analytic_boundary_data(fn, g, "relative"))
        errs.append(np.max(np.abs(v.data - fn.sample(g).data)))
    assert np.log2(errs[0] / errs[1]) > 1.7


def test_top_degree_neumann_problem_is_singular():
    g = Grid.box(7)
    with pytest.raises(NearSingular):
        BvpSolver(g, None, "relative", degrees=[3]).factorize()


def test_residual_of_solution_is_small():
    g = Grid.box(9)
    rng = np.random.default_rng(0)
    Q = EndoField.scalar(g, 1.0 + rng.uniform(size=g.shape))
    sol = BvpSolver(g, Q, "absolute")
    u = sol.solve(analytic_boundary_data(random_smooth_form(3, rng, modes=1), g, "absolute"))
    assert sol.residual(u) < 1e-8


def test_bad_kind_rejected():
    g = Grid.box(6)
    with pytest.raises(ValueError):
        BvpSolver(g, None, "dirichlet")
    with pytest.raises(ValueError):
        BoundaryMap(g, None, "DN")


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15)
def test_dof_table_roundtrip(seed):
    g = Grid.box(6)
    dt = DofTable(g)
    vec = np.random.default_rng(seed).standard_normal(dt.size) + 0j
    assert np.array_equal(dt.pack(dt.unpack(vec)), vec)


@pytest.fixture(scope="module")
def small_map():
    g = Grid.box(6)
    X = g.mesh()
    Q = EndoField.scalar(g, 1.0 + 0.5 * X[0])
    return assemble_boundary_map(g, Q, "RA", degrees=[0, 1])


def test_dense_map_matches_apply(small_map):
    bm = small_map
    rng = np.random.default_rng(3)
    vec = rng.standard_normal(bm.shape[0]) + 1j * rng.standard_normal(bm.shape[0])
    # only the live degrees carry data; zero the rest through a pack/unpack cycle
    data = bm.unpack(vec, "relative")
    for bf in (data.f, data.g):
        for arr in bf.faces.values():
            arr[4:] = 0
    v = bm.pack(data)
    lazy = bm.pack(bm.apply(data))
    assert np.allclose(bm.matrix @ v, lazy, atol=1e-10)


def test_boundary_map_container_roundtrip(small_map, tmp_path):
    path = tmp_path / "map.hcgo"
    container.save(path, small_map)
    head, M = container.load(path)
    assert head["kind"] == "BoundaryMap" and head["map_kind"] == "RA"
    assert np.array_equal(M, small_map.matrix)
    assert head["dofs"] == small_map.dofs.table()
