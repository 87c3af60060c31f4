import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodgecgo.fields_and_grid import EndoField, Grid
from hodgecgo.reconstruction import (CoverageError, FaddeevCell, FourierSliceSet, FrameError, Potential,
                                     admissible_frame, cgo_parameters, contraction_polynomial_degree,
                                     fourier_slice_recover, index_class, integral_identity, invert_fourier,
                                     lattice_ball, matrix_elements)

vecs = st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@given(vecs)
def test_frame_and_exponents(k):
    k = np.asarray(k)
    a, ell = admissible_frame(k)
    assert abs(a @ k) < 1e-10 and abs(ell @ k) < 1e-10 and abs(a @ ell) < 1e-12
    h = 0.5 / (1 + np.linalg.norm(k))
    p = cgo_parameters(k, h, a, ell)
    for z in (p["zeta1"], p["zeta2"]):
        assert abs(np.sum(z * z)) < 1e-9 / h ** 2
    # zeta1 + conj(zeta2) = 2ik puts e^{-2ik.x} into the pairing
    assert np.allclose(p["zeta1"] + np.conj(p["zeta2"]), 2j * k)


def test_frame_errors():
    with pytest.raises(FrameError):
        admissible_frame([1.0, 0, 0], alpha_hint=[2.0, 0, 0])
    a, ell = admissible_frame([1.0, 0, 0])
    with pytest.raises(FrameError):
        cgo_parameters([1.0, 0, 0], 1.0, a, ell)


def test_lattice_ball():
    M = lattice_ball(2 * np.pi, 1.0)
    assert np.all(np.linalg.norm(2 * np.pi * M, axis=1) <= 4 * np.pi + 1e-9)
    assert len(M) == 33  # lattice points with |m| <= 2


def test_faddeev_solve_residual():
    cell = FaddeevCell(16)
    rng = np.random.default_rng(0)
    zeta = np.array([2.0, 2j, 0.0])
    q = 0.5 * np.exp(-sum(y ** 2 for y in cell.Y) / 0.02)
    src = rng.standard_normal(q.shape) + 0j
    r = cell.solve(q, zeta, src)
    tw = cell.twist
    apply_p = lambda f: tw * np.fft.ifftn(np.fft.fftn(f / tw) * cell.symbol(zeta))
    assert np.max(np.abs(apply_p(r) + q * r - src)) < 1e-8 * np.max(np.abs(src))


def test_inversion_of_analytic_slices():
    # oracle: Fourier transform of a Gaussian
    pot = Potential("gaussian", amp=1.0, matrix=np.diag([1.0] + [0.0] * 7))
    M = lattice_ball(4 * np.pi, 1.0)
    xi = 2 * np.pi * M
    vals = (2 * np.pi * pot.sigma ** 2) ** 1.5 * np.exp(-pot.sigma ** 2 * np.sum(xi ** 2, 1) / 2)
    fs = FourierSliceSet(1.0, M, {(0, 0): vals + 0j})
    err = invert_fourier(fs, 32, truth=pot)["errors"][(0, 0)]
    assert err < 1e-2


def test_inversion_needs_room():
    fs = FourierSliceSet(1.0, lattice_ball(4 * np.pi, 1.0), {(0, 0): np.zeros(1)})
    with pytest.raises(CoverageError):
        invert_fourier(fs, 7)


def test_zero_frequency_slice_is_integral():
    pot = Potential("gaussian", amp=0.05, matrix=np.diag([1.0] + [0.0] * 7))
    fs = fourier_slice_recover(Potential("zero"), pot, kmax=0.5, n=16)
    i0 = next(i for i, m in enumerate(fs.modes) if not np.any(m))
    exact = 0.05 * (2 * np.pi * pot.sigma ** 2) ** 1.5
    assert abs(fs.values[(0, 0)][i0] - exact) < 0.01 * exact


def test_equal_potentials_give_zero_slices():
    pot = Potential("gaussian", amp=1.0)
    fs = fourier_slice_recover(pot, pot, kmax=np.pi, n=16, entries=[(0, 0), (1, 1)])
    assert max(np.max(np.abs(v)) for v in fs.values.values()) == 0.0


def test_integral_identity_direct_is_linear():
    g = Grid.box(7)
    rng = np.random.default_rng(0)
    sh = (8, 8) + g.shape
    Q1 = EndoField(g, rng.standard_normal(sh) + 0j)
    Q2 = EndoField(g, rng.standard_normal(sh) + 0j)
    from hodgecgo.fields_and_grid import FormField
    Z1 = FormField(g, rng.standard_normal((8,) + g.shape))
    Z2 = FormField(g, rng.standard_normal((8,) + g.shape))
    assert integral_identity(Q1, Q1, Z1, Z2) == 0
    assert np.isclose(integral_identity(Q1, Q2, Z1, Z2), (Q2 - Q1).apply(Z1).inner(Z2))
    with pytest.raises(ValueError):
        integral_identity(Q1, Q2, Z1, Z2, via="boundary_maps")


def test_matrix_elements_of_separable_potential():
    g = Grid.box(41, (-1.0, -0.5, -0.5), (1.0, 0.5, 0.5))
    X = g.mesh()
    q = np.exp(-X[0] ** 2 / 0.1) * (1 + X[1])
    Q = EndoField.scalar(g, q)
    met = matrix_elements(Q, 2.0)
    # int e^{-2 i x} e^{-x^2/0.1} dx = sqrt(0.1 pi) e^{-0.1}
    exact = np.sqrt(0.1 * np.pi) * np.exp(-0.1) * (1 + met.y2)[:, None]
    assert np.allclose(met.qhat[3, 3], exact, atol=1e-4)
    assert np.all(met.qhat[3, 4] == 0)


def test_index_classes_and_contraction_degree():
    assert [index_class(i) for i in range(8)] == ["scalar", "scalar", "vector", "vector",
                                                   "vector", "vector", "scalar", "scalar"]
    # dx^1 contracts without angular weight, dr ^ dr carries modes up to 2
    assert contraction_polynomial_degree(1, 1) == 0
    assert contraction_polynomial_degree(2, 2) == 2
