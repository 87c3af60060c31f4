"""Pipelines built on CGO solutions.

* :func:`integral_identity` evaluates ((Q2 - Q1) Z1 | Z2)_M directly or
  from the boundary maps.
* :func:`fourier_slice_recover` and :func:`invert_fourier` recover a
  Euclidean potential from CGO pairs.  With Q1 = 0 the first solution is
  the exact exponential; the correction of the second solves the
  Faddeev-type equation

      (-Delta - 2 zeta . grad + Q*) r = -Q* A

  on a periodic cell with a half-lattice Bloch shift along Re zeta, which
  keeps the symbol away from zero.  Each frequency uses a cell rotated so
  that Re zeta is the first axis.
* :func:`matrix_elements` forms the x1-Fourier transforms of frame
  matrix elements and contracts them along geodesics for the disk
  cylinder.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import linalg as spla

from .boundary_calculus import t_i_nu
from .bvp_solver import BoundaryData, BoundaryMap, relative_data
from .cgo import CgoSolution
from .exterior_algebra import algebra
from .fields_and_grid import EndoField, FormField, Grid, ext_d, hodge_star, trapezoid_weights

log = logging.getLogger(__name__)


class FrameError(ValueError):
    pass


class CoverageError(ValueError):
    pass


# integral identity -----------------------------------------------------------

def _field(z) -> FormField:
    return z.Z if isinstance(z, CgoSolution) else z


def boundary_pairing_absolute(w_abs: BoundaryData, z2: FormField) -> complex:
    """(t*W | t i_nu d*Z2) + (t delta*W | t i_nu *Z2) with outward nu."""
    if w_abs.kind != "absolute":
        raise ValueError("expected absolute traces")
    sz = hodge_star(z2)
    return w_abs.f.inner(t_i_nu(ext_d(sz))) + w_abs.g.inner(t_i_nu(sz))


def integral_identity(Q1: EndoField | None, Q2: EndoField | None, Z1, Z2, via: str = "direct",
                      maps: tuple | None = None) -> complex:
    """((Q2 - Q1) Z1 | Z2)_M.

    ``Z1`` solves the Q1 problem and ``Z2`` the problem with Q2*.
    ``via="boundary_maps"`` needs ``maps = (RA_1, RA_2)`` and pairs
    (RA_1 - RA_2)(t Z1, t delta Z1) against the traces of Z2; the two
    modes agree up to discretization error.
    """
    if isinstance(Z1, CgoSolution) and isinstance(Z2, CgoSolution):
        s1, s2 = Z1.spec.vanish_side, Z2.spec.vanish_side
        if (s1, s2) != ("minus", "plus") and not (s1 is None and s2 is None):
            raise ValueError(f"Z1 must vanish on the minus side and Z2 on the plus side, got {s1}, {s2}")
    z1, z2 = _field(Z1), _field(Z2)
    if via == "direct":
        g = z1.grid
        D = EndoField.zeros(g)
        if Q2 is not None:
            D = D + Q2
        if Q1 is not None:
            D = D - Q1
        return D.apply(z1).inner(z2)
    if via != "boundary_maps":
        raise ValueError("via must be 'direct' or 'boundary_maps'")
    if maps is None:
        raise ValueError("boundary_maps mode needs (RA_1, RA_2)")
    ra1, ra2 = maps
    if not (isinstance(ra1, BoundaryMap) and ra1.kind == "RA" and ra2.kind == "RA"):
        raise ValueError("maps must be RA boundary maps")
    data = relative_data(z1)
    w_abs = ra1.apply(data) - ra2.apply(data)
    return boundary_pairing_absolute(w_abs, z2)


# potentials ------------------------------------------------------------------

@dataclass
class Potential:
    """Q(x) = profile(x) * matrix with an analytic profile.

    ``kind`` is "gaussian" (width ``sigma``) or "ball" (radius ``r0``,
    tanh mollifier of width ``width``), centered at ``center``.
    """
    kind: str = "gaussian"
    amp: complex = 1.0
    sigma: float = 0.15
    r0: float = 0.3
    width: float = 0.08
    center: tuple = (0.0, 0.0, 0.0)
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "ball", "zero"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        self.matrix = np.eye(8, dtype=complex) if self.matrix is None else \
            np.asarray(self.matrix, dtype=complex)

    def profile(self, X) -> np.ndarray:
        r2 = sum((np.asarray(x) - c) ** 2 for x, c in zip(X, self.center))
        if self.kind == "zero":
            return np.zeros_like(r2, dtype=complex)
        if self.kind == "gaussian":
            return self.amp * np.exp(-r2 / (2 * self.sigma ** 2))
        return self.amp * 0.5 * (1 - np.tanh((np.sqrt(r2) - self.r0) / self.width))

    def endo(self, grid: Grid) -> EndoField:
        p = self.profile(grid.mesh())
        return EndoField(grid, self.matrix[:, :, None, None, None] * p[None, None])


# periodic Faddeev correction ---------------------------------------------------

class FaddeevCell:
    """Periodic cell [-L/2, L/2)^3 with n points per axis in a rotated frame.

    Unknowns are r(y) = e^{i pi y1 / L} p(y) with p periodic, so the
    Fourier variable is 2 pi (m + e1/2) / L and |Re zeta . xi| >= pi |Re zeta| / L.
    """

    def __init__(self, n: int = 32, L: float = 1.0):
        self.n = n
        self.L = L
        self.y = (np.arange(n) - n // 2) * (L / n)
        self.Y = np.meshgrid(self.y, self.y, self.y, indexing="ij")
        m = np.fft.fftfreq(n, 1.0 / n)
        M = np.meshgrid(m, m, m, indexing="ij")
        self.xi = [2 * np.pi * (M[0] + 0.5) / L, 2 * np.pi * M[1] / L, 2 * np.pi * M[2] / L]
        self.twist = np.exp(1j * np.pi * self.Y[0] / L)
        self.dV = (L / n) ** 3

    def symbol(self, zeta) -> np.ndarray:
        """Symbol of -Delta - 2 zeta . grad on the shifted lattice."""
        xi2 = sum(x * x for x in self.xi)
        return xi2 - 2j * sum(z * x for z, x in zip(zeta, self.xi))

    def points(self, R: np.ndarray) -> list:
        """Physical coordinates x = R y of the cell points."""
        return [sum(R[i, j] * self.Y[j] for j in range(3)) for i in range(3)]

    def solve(self, q: np.ndarray, zeta, source: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
        """r with (-Delta - 2 zeta . grad + q) r = source, zeta in cell coordinates."""
        P = self.symbol(zeta)
        if np.min(np.abs(P)) == 0:
            raise FrameError("Faddeev symbol vanishes on the lattice")
        tw = self.twist
        G = lambda f: tw * np.fft.ifftn(np.fft.fftn(f / tw) / P)
        shape = q.shape
        b = G(source).ravel()
        op = spla.LinearOperator((b.size, b.size), dtype=complex,
                                 matvec=lambda x: x + G(q * x.reshape(shape)).ravel())
        x, info = spla.gmres(op, b, rtol=rtol, atol=0.0, restart=40, maxiter=200)
        if info != 0:
            raise RuntimeError(f"Faddeev GMRES did not converge (info={info})")
        return x.reshape(shape)


def admissible_frame(k, alpha_hint=None) -> tuple:
    """Orthonormal (alpha, ell) with both orthogonal to k."""
    k = np.asarray(k, dtype=float)
    nk = np.linalg.norm(k)
    if alpha_hint is not None:
        a = np.asarray(alpha_hint, dtype=float)
        a = a / np.linalg.norm(a)
        if nk > 0 and np.linalg.norm(np.cross(a, k / nk)) < 1e-8:
            raise FrameError("k is parallel to alpha")
    if nk == 0:
        a = np.array([1.0, 0, 0]) if alpha_hint is None else a
        trial = np.eye(3)[np.argmin(np.abs(a))]
        ell = trial - (trial @ a) * a
        return a, ell / np.linalg.norm(ell)
    kh = k / nk
    if alpha_hint is None:
        a = np.eye(3)[np.argmin(np.abs(kh))]
    a = a - (a @ kh) * kh
    a = a / np.linalg.norm(a)
    ell = np.cross(kh, a)
    return a, ell / np.linalg.norm(ell)


def cgo_parameters(k, h: float, alpha, ell) -> dict:
    """beta_1,2 = ell sqrt(1 - h^2|k|^2) +/- h k and the two exponents."""
    k = np.asarray(k, dtype=float)
    hk = h * np.linalg.norm(k)
    if hk >= 1:
        raise FrameError(f"h |k| = {hk:.3f} must be below 1")
    c = np.sqrt(1 - hk ** 2)
    b1 = ell * c + h * k
    b2 = ell * c - h * k
    return {"beta1": b1, "beta2": b2,
            "zeta1": (-alpha + 1j * b1) / h, "zeta2": (alpha + 1j * b2) / h}


@dataclass
class FourierSliceSet:
    """Slices S[m] for frequencies xi = 2 pi m / L; values[(J, I)] per matrix entry."""
    L: float
    modes: np.ndarray                 # (K, 3) integer lattice vectors
    values: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    alphas: list = field(default_factory=list)
    h0: float = 0.5

    @property
    def frequencies(self) -> np.ndarray:
        return 2 * np.pi * self.modes / self.L


def lattice_ball(kmax: float, L: float) -> np.ndarray:
    """Integer m with |2 pi m / L| <= 2 kmax, i.e. |k| <= kmax for xi = 2k."""
    r = int(np.floor(2 * kmax * L / (2 * np.pi) + 1e-9))
    ax = np.arange(-r, r + 1)
    M = np.array(np.meshgrid(ax, ax, ax, indexing="ij")).reshape(3, -1).T
    keep = np.linalg.norm(2 * np.pi * M / L, axis=1) <= 2 * kmax + 1e-9
    return M[keep]


def _slices_at(pot2: Potential, cell: FaddeevCell, xi, h: float, alpha_hint, entries) -> dict:
    """S_{JI}(xi) = int q e^{-i xi.x} [M_JI + sum_a M_aI conj(r^J_a)] dx at one h."""
    k = -0.5 * np.asarray(xi, dtype=float)
    alpha, ell = admissible_frame(k, alpha_hint)
    par = cgo_parameters(k, h, alpha, ell)
    # cell frame: first axis along alpha = Re zeta2
    R = np.stack([alpha, ell, np.cross(alpha, ell)], axis=1)
    X = cell.points(R)
    q = pot2.profile(X)
    M = pot2.matrix
    Mh = M.conj().T
    zeta2 = R.T @ par["zeta2"]
    phase = np.exp(2j * sum(kk * x for kk, x in zip(k, X)))
    # r^J solves (-Delta - 2 zeta.grad + conj(q) M^H) r = -conj(q) M^H dx^J
    evals, V = np.linalg.eig(Mh)
    Vinv = np.linalg.inv(V)
    uniq = []
    for ev in evals:
        if not any(abs(ev - u) < 1e-12 for u in uniq):
            uniq.append(ev)
    rho = {}
    for u in uniq:
        if abs(u) < 1e-14:
            rho[u] = np.zeros_like(q)
        else:
            qs = np.conj(q) * u
            rho[u] = cell.solve(qs, zeta2, -qs)
    base = np.sum(q * phase) * cell.dV
    out = {}
    for J, I in entries:
        coef = Vinv[:, J]
        corr = 0.0
        for j, ev in enumerate(evals):
            if coef[j] == 0:
                continue
            key = next(u for u in uniq if abs(ev - u) < 1e-12)
            # r^J = sum_j V[:, j] coef_j rho_j ; contract with M[:, I]
            w = np.sum(M[:, I] * np.conj(V[:, j])) * np.conj(coef[j])
            if w != 0:
                corr = corr + w * np.sum(q * phase * np.conj(rho[key])) * cell.dV
        out[(J, I)] = M[J, I] * base + corr
    return out


def fourier_slice_recover(pot1: Potential, pot2: Potential, kmax: float = 4 * np.pi, n: int = 32,
                          L: float = 1.0, h0: float = 0.5, alpha_hint=None, entries=None,
                          richardson: bool = True) -> FourierSliceSet:
    """Slices of Q2 - Q1 at xi = 2k for |k| <= kmax, from CGO pairs.

    With Q1 = 0 the exact exponential solves the first problem.  A nonzero
    Q1 is handled by linearity: the slices of each potential against zero
    are recovered with the same frames and subtracted, so Q1 = Q2 gives
    identically zero slices.  Per frequency h = h0 / (1 + |k|); with
    ``richardson`` the estimate is 2 S(h/2) - S(h).
    """
    if pot1.kind != "zero":
        zero = Potential("zero")
        kw = dict(kmax=kmax, n=n, L=L, h0=h0, alpha_hint=alpha_hint, richardson=richardson)
        if entries is None:
            entries = [(J, I) for J in range(8) for I in range(8)
                       if pot1.matrix[J, I] != 0 or pot2.matrix[J, I] != 0]
        s2 = fourier_slice_recover(zero, pot2, entries=entries, **kw)
        s1 = fourier_slice_recover(zero, pot1, entries=entries, **kw)
        for e in entries:
            s2.values[e] = s2.values[e] - s1.values[e]
            s2.raw[e] = list(np.asarray(s2.raw[e]) - np.asarray(s1.raw[e]))
        return s2
    cell = FaddeevCell(n, L)
    q = np.abs(pot2.profile(cell.Y))
    edge = max(q[0].max(), q[:, 0].max(), q[:, :, 0].max())
    if edge > 1e-2 * q.max():
        log.warning("potential is %.2g of its peak on the cell boundary; periodic images will leak",
                    edge / q.max())
    modes = lattice_ball(kmax, L)
    if entries is None:
        M = pot2.matrix
        entries = [(J, I) for J in range(8) for I in range(8) if M[J, I] != 0]
    fs = FourierSliceSet(L, modes, {e: np.zeros(len(modes), complex) for e in entries}, h0=h0)
    for i, m in enumerate(modes):
        xi = 2 * np.pi * m / L
        h = h0 / (1 + 0.5 * np.linalg.norm(xi))
        s1 = _slices_at(pot2, cell, xi, h, alpha_hint, entries)
        if richardson:
            s2 = _slices_at(pot2, cell, xi, h / 2, alpha_hint, entries)
        for e in entries:
            v = 2 * s2[e] - s1[e] if richardson else s1[e]
            fs.values[e][i] = v
            fs.raw.setdefault(e, []).append(s1[e])
        fs.alphas.append(admissible_frame(-0.5 * xi, alpha_hint)[0])
    return fs


def invert_fourier(slices: FourierSliceSet, grid_n: int = 32, truth: Potential | None = None) -> dict:
    """Inverse DFT of each entry's slices on the grid_n^3 cell grid.

    Returns ``{"fields": {(J, I): array}, "errors": {...}}``; errors are
    relative L^2 against ``truth`` when supplied.
    """
    modes = slices.modes
    r = int(np.max(np.abs(modes))) if len(modes) else 0
    if len(modes) == 0 or 2 * r + 1 > grid_n:
        raise CoverageError("frequency set is empty or exceeds the grid")
    L = slices.L
    y = (np.arange(grid_n) - grid_n // 2) * (L / grid_n)
    X = np.meshgrid(y, y, y, indexing="ij")
    # q(x) = L^-3 sum_m S(xi_m) e^{i xi_m . x}; direct synthesis keeps the origin explicit
    B = [np.exp(2j * np.pi * np.outer(modes[:, a], y) / L) for a in range(3)]
    fields = {}
    for e, vals in slices.values.items():
        f = np.einsum("k,ki,kj,kl->ijl", vals, B[0], B[1], B[2])
        fields[e] = f / L ** 3
    out = {"fields": fields, "errors": {}}
    if truth is not None:
        p = truth.profile(X)
        for e, f in fields.items():
            ref = truth.matrix[e] * p
            out["errors"][e] = float(np.linalg.norm(f - ref) / np.linalg.norm(ref))
    return out


# cylinder matrix elements --------------------------------------------------------

@dataclass
class MatrixElementTransform:
    xi1: float
    qhat: np.ndarray     # (8, 8, m2, m3): x1-transform of <Q eps^I, eps^J>
    y2: np.ndarray
    y3: np.ndarray


def matrix_elements(Q: EndoField, xi1: float) -> MatrixElementTransform:
    """q-hat_{I,J}(xi1, x') = int e^{-i x1 xi1} <Q eps^I, eps^J> dx1 by trapezoid quadrature.

    Q is sampled on a Euclidean box grid whose first axis is x1 and which
    contains the support of Q in x1.
    """
    g = Q.grid
    w1 = trapezoid_weights(g.shape[0], g.spacing[0])
    x1 = g.coords(0)
    ph = np.exp(-1j * x1 * xi1) * w1
    # <Q eps^I, eps^J> = Q[J, I] in the orthonormal Euclidean frame
    qIJ = np.swapaxes(Q.mats, 0, 1)
    qhat = np.tensordot(qIJ, ph, axes=([2], [0]))
    return MatrixElementTransform(xi1, qhat, g.coords(1), g.coords(2))


def contracted_integrand(met: MatrixElementTransform, table: np.ndarray, I: int, J: int,
                         values_at) -> np.ndarray:
    """sum_{I',J'} qhat_{I'J'} <eta^I, eps^I'> <eta^J, eps^J'> at sampled points.

    ``table`` is the (8, 8) frame table; ``values_at(arr)`` interpolates a
    transversal array to the sample points.
    """
    out = 0.0
    for Ip in range(8):
        a = table[I, Ip]
        if a == 0:
            continue
        for Jp in range(8):
            b = table[J, Jp]
            if b == 0:
                continue
            out = out + a * b * values_at(met.qhat[Ip, Jp])
    return out


def contraction_polynomial_degree(I: int, J: int, n_angles: int = 64, tol: float = 1e-12) -> int:
    """Highest angular Fourier mode of the weight of q-hat_{I', J'} in the (I, J) contraction."""
    from .ray_transform import frame_inner_products
    t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    tabs = np.array([frame_inner_products((np.cos(a), np.sin(a))) for a in t])
    W = tabs[:, I, :, None] * tabs[:, J, None, :]
    c = np.fft.fft(W, axis=0) / n_angles
    ks = np.abs(np.fft.fftfreq(n_angles, 1.0 / n_angles)).astype(int)
    mags = np.max(np.abs(c).reshape(n_angles, -1), axis=1)
    live = ks[mags > tol]
    return int(live.max()) if live.size else 0


def index_class(I: int) -> str:
    """'scalar' for slots {0, 1, 23, 123}, 'vector' for {2, 3, 12, 13}."""
    s = algebra(3).slots[I]
    scalar = {(), (0,), (1, 2), (0, 1, 2)}
    return "scalar" if s in scalar else "vector"
