import numpy as np
import pytest

from hodgecgo.boundary_calculus import (BoundaryField, CylinderWall, GammaSplit, faces_of, green_boundary_terms,
                                        greens_residual, inward_sign, owned_mask, t_delta_expand, t_i_nu,
                                        t_iN_d_expand, trace_t, weitzenbock_residual)
from hodgecgo.fields_and_grid import FormField, Grid, random_smooth_form


def test_faces_and_signs():
    g = Grid.box(6)
    assert faces_of(g) == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    assert inward_sign((0, 0)) == 1 and inward_sign((2, 1)) == -1


def test_owned_masks_partition_boundary_points():
    g = Grid.box(7)
    count = np.zeros(g.shape, dtype=int)
    for f in faces_of(g):
        m = owned_mask(g, f)
        sl = [slice(None)] * 3
        sl[f[0]] = 0 if f[1] == 0 else -1
        view = count[tuple(sl)]
        view += m.astype(int)
    interior = np.zeros(g.shape, dtype=bool)
    interior[1:-1, 1:-1, 1:-1] = True
    assert np.all(count[~interior] == 1)
    assert np.all(count[interior] == 0)


def test_tangential_trace_drops_normal_slots():
    g = Grid.box(6)
    u = FormField(g, np.ones((8,) + g.shape))
    tu = trace_t(u)
    for f, arr in tu.faces.items():
        a = f[0]
        for i, s in enumerate(g.alg.slots):
            assert np.all(arr[i] == (0 if a in s else 1))


def test_t_i_nu_uses_outward_normal():
    g = Grid.box(6)
    u = FormField.from_components(g, {(1,): np.ones(g.shape)})
    out = t_i_nu(u)
    # i_nu dx1 = nu_1: -1 on x1 = 0, +1 on x1 = 1
    assert np.allclose(out.faces[(0, 0)][0], -1)
    assert np.allclose(out.faces[(0, 1)][0], 1)


def test_green_terms_exact_for_linear_forms():
    g = Grid.box(9)
    X = g.mesh()
    # -Delta vanishes on affine forms, so the boundary pairings must cancel
    u = FormField.from_components(g, {(2,): X[0] + 2 * X[1]})
    v = FormField.from_components(g, {(2,): 1 + X[2], (1, 3): X[0]})
    assert abs(greens_residual(u, v)) < 1e-12
    assert set(green_boundary_terms(u, v)) == {"tu|ti_nu dv", "tdelta*u|ti_nu *v", "t*u|ti_nu d*v",
                                                "tdelta u|ti_nu v"}


@pytest.mark.parametrize("expand", [t_delta_expand, t_iN_d_expand])
def test_flat_face_expansions_converge(expand):
    f = random_smooth_form(3, np.random.default_rng(5), modes=1)
    errs = []
    for m in (12, 24):
        g = Grid.box(m)
        u = f.sample(g)
        errs.append(max(float(np.max(np.abs(expand(u, fc, f)))) for fc in faces_of(g)))
    assert errs[1] < errs[0] / 2.5


def test_weitzenbock_residual_converges():
    f = random_smooth_form(3, np.random.default_rng(6), modes=1)
    r = [weitzenbock_residual(f.sample(Grid.box(m)), f) for m in (12, 24)]
    assert r[1]["interior"] < r[0]["interior"] / 2.5


def test_gamma_split_labels():
    g = Grid.box(9)
    gs = GammaSplit(g, alpha=(1.0, 0, 0), width=2)
    assert gs.dnu_phi[(0, 1)] == 1.0 and gs.dnu_phi[(0, 0)] == -1.0
    plus, minus = gs.gamma_plus(), gs.gamma_minus()
    assert np.all(plus[(0, 1)]) and not np.any(plus[(0, 0)][2:-2, 2:-2])
    # the grown band on the minus face is width cells wide
    assert np.all(plus[(0, 0)][:2]) and np.all(plus[(0, 0)][:, -2:])
    # collar faces belong to both sets
    assert np.all(plus[(1, 0)]) and np.all(minus[(1, 0)])
    comp = GammaSplit.complement(plus)
    assert not np.any(comp[(0, 1)] & plus[(0, 1)])


def test_cylinder_wall_curvature():
    w = CylinderWall(radius=2.0)
    assert w.kappa == pytest.approx(0.25)
    S = w.shape_derivation()
    # derivation on 1-forms: the angular covector scales by -1/R
    e2 = np.zeros(8)
    e2[2] = 1
    assert np.allclose(S @ e2, -0.5 * e2)


def test_boundary_field_arithmetic():
    g = Grid.box(6)
    a = BoundaryField.zeros(g)
    a.faces[(0, 0)][0] = 1.0
    b = a * 2 - a
    assert np.isclose(b.inner(a), a.inner(a))
    assert a.max_abs() == 1.0
