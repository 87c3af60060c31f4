import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodgecgo.ray_transform import (DiskGrid, NotSimple, RayError, SimpleSurface, Tensor2Field,
                                    attenuated_transform, circle_bundle_u, cutoff_bump, fourier_components,
                                    frame_inner_products, kernel_tensor, lift, trace_geodesic,
                                    trace_geodesics, tracefree_combinations, transport_residual)

angles = st.floats(0, 2 * np.pi)
rels = st.floats(-1.5, 1.5)


@given(angles, rels)
def test_flat_chord_length(a, rel):
    geo = trace_geodesic(SimpleSurface(), a, a + np.pi + rel)
    assert abs(geo.length[0] - 2 * np.cos(rel)) < 1e-9


@given(rels, st.floats(0.05, 2.0))
def test_attenuated_constant_closed_form(rel, lam):
    geo = trace_geodesics(SimpleSurface(), [0.3], [0.3 + np.pi + rel])
    L = 2 * np.cos(rel)
    got = attenuated_transform(SimpleSurface(), lambda p, v: np.ones(p.shape[1:]), lam, geo)
    assert abs(got[0] - (1 - np.exp(-2 * lam * L)) / (2 * lam)) < 1e-8


def test_one_form_along_diameter():
    # f = dx^2 along the diameter in direction e_2 integrates to its length
    geo = trace_geodesic(SimpleSurface(), -np.pi / 2, np.pi / 2)
    v = attenuated_transform(SimpleSurface(), lambda p, u: u[1], 0.0, geo)
    assert abs(v[0] - 2.0) < 1e-9


def test_curved_geodesics_have_unit_speed():
    S = SimpleSurface(0.05)
    geo = trace_geodesics(S, [0.0, 1.0], [np.pi + 0.3, 1.0 + np.pi - 0.5])
    assert np.all(geo.length > 0)
    end = geo.points[-1]
    assert np.allclose(np.hypot(end[0], end[1]), 1.0, atol=1e-8)


def test_non_simple_metric_is_rejected():
    # boundary curvature is e^{-mu}(1 - 2c) for mu = c(1 - |x|^2)
    with pytest.raises(NotSimple):
        SimpleSurface(0.6)


def test_lift_and_fourier_modes():
    g = DiskGrid(16)
    X, Y = g.mesh()
    T = Tensor2Field(g, X, Y, 1 + 0 * X)
    modes = fourier_components(lift(T, 32))
    assert set(modes) <= {-2, 0, 2}
    one = fourier_components(lift(np.array([X, Y]), 32))
    assert set(one) == {-1, 1}


def test_kernel_certificate_converges():
    r = [transport_residual(SimpleSurface(), DiskGrid(m), cutoff_bump(DiskGrid(m)), 0.5)[1] for m in (64, 128)]
    assert r[1] < 1e-4 and r[1] < r[0]


def test_kernel_tensor_closed_form():
    lam = 0.5
    g = DiskGrid(128)
    X, Y = g.mesh()
    w = 1 - X ** 2 - Y ** 2
    T = kernel_tensor(SimpleSurface(), g, cutoff_bump(g), lam)
    # f = -Hess(u0)/(2 lam) + 2 lam u0 g for u0 = w^2
    exact = -(8 * X ** 2 - 4 * w) / (2 * lam) + 2 * lam * w ** 2
    assert np.max(np.abs(T.f22 - exact)[g.inside()]) < 1e-3


def test_circle_bundle_u_shape():
    g = DiskGrid(16)
    u = circle_bundle_u(g, cutoff_bump(g), 0.5, n_angles=8)
    assert u.shape == (16, 16, 8)


@given(st.integers(0, 2 ** 32 - 1))
def test_tracefree_combinations_are_scalar(seed):
    q = np.random.default_rng(seed).standard_normal((2, 2, 2)) @ np.array([1, 1j])
    for M in tracefree_combinations(q):
        assert np.array_equal(M, M[0, 0] * np.eye(2))


def test_tracefree_dict_input():
    a, b = tracefree_combinations({(2, 2): 1.0, (3, 3): 2.0, (2, 3): 0.5})
    assert a[0, 0] == 3.0 and b[0, 0] == 0.5


@given(angles)
def test_frame_inner_products_orthogonal(t):
    T = frame_inner_products(np.array([np.cos(t), np.sin(t)]))
    assert np.allclose(T @ T.T, np.eye(8), atol=1e-12)


def test_frame_rejects_non_unit():
    with pytest.raises(RayError):
        frame_inner_products([1.0, 1.0])
