"""Attenuated geodesic ray transform on the transversal unit disk.

The disk carries the isothermal metric ``e^{2 mu} delta``.  Tangent
vectors are described by their Euclidean direction angle ``theta``; in
the orthonormal frame ``e_j = e^{-mu} d/dx^j`` a unit vector is
``(cos theta, sin theta)``.  With ``g``-arclength ``r`` the geodesic
equations are

    x' = e^{-mu} (cos theta, sin theta),
    theta' = e^{-mu} (-sin theta d1 mu + cos theta d2 mu).

Geodesics are traced in batches with fixed-step RK4.  A first pass finds
the exit length, a second pass retraces each curve with an even number
of equal steps so Simpson's rule applies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import interpolate, ndimage

from .exterior_algebra import algebra


class NotSimple(RuntimeError):
    pass


class RayError(ValueError):
    pass


@dataclass
class DiskGrid:
    """Square grid of ``m x m`` points covering [-1, 1]^2 (axis 0 is x2)."""
    m: int = 128

    @property
    def spacing(self) -> float:
        return 2.0 / (self.m - 1)

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.m)

    def mesh(self):
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    def inside(self) -> np.ndarray:
        X, Y = self.mesh()
        return X ** 2 + Y ** 2 <= 1.0

    def interpolate(self, arr: np.ndarray, pts: np.ndarray, order: int = 1) -> np.ndarray:
        """Tensor spline interpolation of degree ``order`` at points ``(2, ...)``.

        Order 1 is bilinear; order 3 uses not-a-knot cubic splines, which
        avoids the boundary artifacts of prefiltered image splines.
        """
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            return self.interpolate(arr.real, pts, order) + 1j * self.interpolate(arr.imag, pts, order)
        x = np.clip(pts[0], -1.0, 1.0)
        y = np.clip(pts[1], -1.0, 1.0)
        spl = interpolate.RectBivariateSpline(self.coords, self.coords, arr, kx=order, ky=order)
        return spl.ev(x, y)


class SimpleSurface:
    """Unit disk with metric e^{2 mu} delta.

    ``mu`` and ``grad_mu`` are callables of ``(x2, x3)`` arrays.  The
    default ``mu = c (1 - |x|^2)`` covers the flat case ``c = 0``.
    """

    def __init__(self, c: float = 0.0, mu=None, grad_mu=None):
        if mu is None:
            self.c = float(c)
            mu = lambda x, y: self.c * (1.0 - x ** 2 - y ** 2)
            grad_mu = lambda x, y: (-2 * self.c * x, -2 * self.c * y)
        elif grad_mu is None:
            raise RayError("a custom mu needs grad_mu")
        self.mu = mu
        self.grad_mu = grad_mu
        if self.boundary_curvature().min() <= 0:
            raise NotSimple("boundary circle is not strictly convex")

    @property
    def flat(self) -> bool:
        return getattr(self, "c", None) == 0.0

    def boundary_curvature(self, n: int = 360) -> np.ndarray:
        """Geodesic curvature e^{-mu}(1 + d_r mu) of the unit circle."""
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        x, y = np.cos(t), np.sin(t)
        gx, gy = self.grad_mu(x, y)
        return np.exp(-self.mu(x, y)) * (1.0 + gx * x + gy * y)

    def rhs(self, state: np.ndarray) -> np.ndarray:
        x, y, th = state
        e = np.exp(-self.mu(x, y))
        gx, gy = self.grad_mu(x, y)
        c, s = np.cos(th), np.sin(th)
        return np.stack([e * c, e * s, e * (-s * gx + c * gy)])

    def unit_speed_error(self, state: np.ndarray, velocity: np.ndarray) -> np.ndarray:
        x, y = state[0], state[1]
        return np.abs(np.exp(self.mu(x, y)) * np.hypot(velocity[0], velocity[1]) - 1.0)


@dataclass
class Geodesic:
    """Samples of one or many geodesics (leading axis: sample index)."""
    r: np.ndarray          # (K, B) arclength
    points: np.ndarray     # (K, 2, B)
    theta: np.ndarray      # (K, B) Euclidean direction angle
    length: np.ndarray     # (B,)

    @property
    def velocity_frame(self) -> np.ndarray:
        """gamma-dot in the orthonormal frame, shape (K, 2, B)."""
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1)


def _rk4(surf: SimpleSurface, y: np.ndarray, h) -> np.ndarray:
    k1 = surf.rhs(y)
    k2 = surf.rhs(y + 0.5 * h * k1)
    k3 = surf.rhs(y + 0.5 * h * k2)
    k4 = surf.rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _exit_lengths(surf, y0, h, max_length):
    """Arclength at which each geodesic leaves the disk."""
    B = y0.shape[1]
    y = y0.copy()
    r = np.zeros(B)
    L = np.full(B, np.nan)
    active = np.ones(B, dtype=bool)
    # leave the entry point before testing for exit
    while active.any():
        if np.max(r[active]) > max_length:
            raise NotSimple("geodesic did not exit within 10 diameters")
        ya = y[:, active]
        yn = _rk4(surf, ya, h)
        out = yn[0] ** 2 + yn[1] ** 2 >= 1.0
        started = r[active] > 0.5 * h
        hit = out & started
        if np.any(hit):
            # bisect the step length to the boundary
            lo = np.zeros(hit.sum())
            hi = np.full(hit.sum(), h)
            ys = ya[:, hit]
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                ym = _rk4(surf, ys, mid)
                o = ym[0] ** 2 + ym[1] ** 2 >= 1.0
                hi = np.where(o, mid, hi)
                lo = np.where(o, lo, mid)
            ids = np.flatnonzero(active)[hit]
            L[ids] = r[ids] + 0.5 * (lo + hi)
        idx = np.flatnonzero(active)
        y[:, idx] = yn
        r[idx] += h
        active[idx[hit]] = False
    return L


def trace_geodesics(surf: SimpleSurface, entry_angle, direction, step: float = 2.0 / 127 / 2,
                    samples: int | None = None) -> Geodesic:
    """Trace geodesics entering at ``(cos a, sin a)`` with Euclidean direction angle ``direction``.

    Arrays broadcast.  ``step`` defaults to half the 128^2 grid spacing.
    Flat disks use exact chords.
    """
    a, d = np.broadcast_arrays(np.atleast_1d(np.asarray(entry_angle, float)),
                               np.atleast_1d(np.asarray(direction, float)))
    a, d = a.ravel(), d.ravel()
    inward = np.cos(d - a) < -1e-12
    if not np.all(inward):
        raise RayError("direction must point into the disk")
    p0 = np.stack([np.cos(a), np.sin(a)])
    if surf.flat:
        L = -2.0 * np.cos(d - a)
        n = samples or max(2, int(np.ceil(L.max() / step)))
        n += n % 2
        r = np.linspace(0, 1, n + 1)[:, None] * L[None]
        pts = p0[None] + r[:, None] * np.stack([np.cos(d), np.sin(d)])[None]
        return Geodesic(r, pts, np.broadcast_to(d, r.shape).copy(), L)
    y0 = np.stack([p0[0], p0[1], d])
    L = _exit_lengths(surf, y0, step, 10 * 2 * np.exp(np.max(np.abs(surf.mu(p0[0], p0[1])))))
    n = samples or max(2, int(np.ceil(L.max() / step)))
    n += n % 2
    hs = L / n
    ys = [y0]
    y = y0
    for _ in range(n):
        y = _rk4(surf, y, hs)
        ys.append(y)
    Y = np.stack(ys)
    r = np.arange(n + 1)[:, None] * hs[None]
    return Geodesic(r, Y[:, :2], Y[:, 2], L)


def trace_geodesic(surf: SimpleSurface, entry_angle: float, direction: float, **kw) -> Geodesic:
    return trace_geodesics(surf, [entry_angle], [direction], **kw)


def _simpson(vals: np.ndarray, length: np.ndarray) -> np.ndarray:
    n = vals.shape[0] - 1
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return (w @ vals) * length / (3 * n)


# fields --------------------------------------------------------------------

@dataclass
class Tensor2Field:
    """Symmetric 2-tensor (f22, f23, f33) in the orthonormal frame, on a DiskGrid."""
    grid: DiskGrid
    f22: np.ndarray
    f23: np.ndarray
    f33: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.array([[self.f22, self.f23], [self.f23, self.f33]])

    def evaluate(self, pts, v, order: int = 1) -> np.ndarray:
        """f(v, v) at points ``pts`` (2, ...) for unit vectors ``v`` (2, ...)."""
        a = self.grid.interpolate(self.f22, pts, order)
        b = self.grid.interpolate(self.f23, pts, order)
        c = self.grid.interpolate(self.f33, pts, order)
        return a * v[0] ** 2 + 2 * b * v[0] * v[1] + c * v[1] ** 2


def _integrand(field, grid: DiskGrid | None, geo: Geodesic, order: int):
    pts = np.moveaxis(geo.points, 1, 0)          # (2, K, B)
    v = np.moveaxis(geo.velocity_frame, 1, 0)    # (2, K, B)
    if isinstance(field, Tensor2Field):
        return field.evaluate(pts, v, order)
    if callable(field):
        return field(pts, v)
    arr = np.asarray(field)
    if grid is None:
        raise RayError("sampled fields need a DiskGrid")
    if arr.shape == (grid.m, grid.m):
        return grid.interpolate(arr, pts, order)
    if arr.shape == (2, grid.m, grid.m):
        return (grid.interpolate(arr[0], pts, order) * v[0]
                + grid.interpolate(arr[1], pts, order) * v[1])
    raise RayError(f"unsupported field shape {arr.shape}")


def attenuated_transform(surf: SimpleSurface, field, lam: float, geo: Geodesic,
                         grid: DiskGrid | None = None, order: int = 1) -> np.ndarray:
    """int_0^L e^{-2 lam r} m(gamma(r), gamma-dot(r)) dr for each geodesic.

    ``field`` is a scalar ``(m, m)`` array, a 1-tensor ``(2, m, m)`` in the
    orthonormal frame, a :class:`Tensor2Field`, or a callable
    ``m(points, unit_vectors)``.
    """
    vals = _integrand(field, grid, geo, order) * np.exp(-2 * lam * geo.r)
    return _simpson(vals, geo.length)


def fan(n_entry: int = 180, n_dir: int = 180, margin: float = 1e-3):
    """Uniform (entry angle, direction angle) fan of inward geodesics."""
    a = np.linspace(0, 2 * np.pi, n_entry, endpoint=False)
    rel = np.linspace(-np.pi / 2 + margin, np.pi / 2 - margin, n_dir)
    A, R = np.meshgrid(a, rel, indexing="ij")
    return A, A + np.pi + R


def sinogram(surf: SimpleSurface, field, lam: float, grid: DiskGrid | None = None,
             n_entry: int = 180, n_dir: int = 180, order: int = 1, chunk: int = 4096):
    A, D = fan(n_entry, n_dir)
    out = np.empty(A.size, dtype=complex)
    a, d = A.ravel(), D.ravel()
    for i in range(0, a.size, chunk):
        geo = trace_geodesics(surf, a[i:i + chunk], d[i:i + chunk])
        out[i:i + chunk] = attenuated_transform(surf, field, lam, geo, grid, order)
    return A, D, out.reshape(A.shape)


# Fourier components on the circle bundle ---------------------------------------

def lift(field, n_angles: int = 64) -> np.ndarray:
    """Sample a scalar, 1-tensor (2, ...) or 2x2 tensor (2, 2, ...) on velocity angles.

    Returns an array with the angle as last axis.
    """
    t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    c, s = np.cos(t), np.sin(t)
    f = np.asarray(field)
    if isinstance(field, Tensor2Field):
        f = field.matrix()
    if f.ndim >= 2 and f.shape[:2] == (2, 2):
        return (f[0, 0][..., None] * c ** 2 + (f[0, 1] + f[1, 0])[..., None] * c * s
                + f[1, 1][..., None] * s ** 2)
    if f.ndim >= 1 and f.shape[0] == 2:
        return f[0][..., None] * c + f[1][..., None] * s
    return np.repeat(f[..., None], n_angles, axis=-1)


def fourier_components(u: np.ndarray, tol: float = 1e-12) -> dict:
    """Velocity-angle Fourier modes ``{k: u_k(x)}`` with u = sum_k u_k(x) e^{ik theta}.

    Modes whose max magnitude is below ``tol`` times the largest are dropped.
    """
    u = np.asarray(u)
    n = u.shape[-1]
    c = np.fft.fft(u, axis=-1) / n
    ks = np.fft.fftfreq(n, 1.0 / n).astype(int)
    mags = np.max(np.abs(c.reshape(-1, n)), axis=0)
    top = mags.max() if mags.size else 0.0
    return {int(k): c[..., i] for i, k in enumerate(ks) if mags[i] > tol * max(top, 1e-300)}


def mode_part(modes: dict, ks, n_angles: int) -> np.ndarray:
    t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    return sum(modes[k][..., None] * np.exp(1j * k * t) for k in ks if k in modes)


# transport identity ------------------------------------------------------------

def cutoff_bump(grid: DiskGrid, base=None) -> np.ndarray:
    """u0 = base(x) (1 - |x|^2)^2 sampled on the grid (base defaults to 1)."""
    X, Y = grid.mesh()
    w = (1.0 - X ** 2 - Y ** 2) ** 2
    return w if base is None else w * base(X, Y)


# fourth-order stencils: central, then one-sided rows for the first two layers
_D1 = ([-1, 8, 0, -8, 1], [[-25, 48, -36, 16, -3, 0], [-3, -10, 18, -6, 1, 0]])
_D2 = ([-1, 16, -30, 16, -1], [[45, -154, 214, -156, 61, -10], [10, -15, -4, 14, -6, 1]])


def _fd4(arr: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """Fourth-order derivative of ``order`` 1 or 2 along ``axis``."""
    central, edge = _D1 if order == 1 else _D2
    scale = 12 * h ** order
    a = np.moveaxis(np.asarray(arr), axis, 0)
    out = np.empty_like(a, dtype=np.result_type(a, float))
    # central coefficients are listed for offsets +2 .. -2
    out[2:-2] = sum(c * a[4 - k:a.shape[0] - k] for k, c in enumerate(central)) / scale
    sign = 1 if order == 2 else -1
    for i, row in enumerate(edge):
        out[i] = sum(c * a[j] for j, c in enumerate(row)) / scale
        out[-1 - i] = sign * sum(c * a[-1 - j] for j, c in enumerate(row)) / scale
    return np.moveaxis(out, 0, axis)


def covariant_hessian(surf: SimpleSurface, grid: DiskGrid, u0: np.ndarray) -> np.ndarray:
    """nabla^2 u0 in the orthonormal frame, shape (2, 2, m, m).

    Fourth-order differences in coordinates: d_i d_j u - Gamma^k_ij d_k u with
    Gamma^k_ij = delta_ik d_j mu + delta_jk d_i mu - delta_ij d_k mu,
    then divided by e^{2 mu}.
    """
    h = grid.spacing
    X, Y = grid.mesh()
    du = [_fd4(u0, h, 0, 1), _fd4(u0, h, 1, 1)]
    H = np.empty((2, 2) + u0.shape, dtype=np.result_type(u0, float))
    H[0, 0] = _fd4(u0, h, 0, 2)
    H[1, 1] = _fd4(u0, h, 1, 2)
    H[0, 1] = H[1, 0] = _fd4(du[0], h, 1, 1)
    gm = surf.grad_mu(X, Y)
    gm = [np.broadcast_to(g, X.shape) for g in gm]
    for i in range(2):
        for j in range(2):
            G = gm[j] * du[i] + gm[i] * du[j]
            if i == j:
                G = G - (gm[0] * du[0] + gm[1] * du[1])
            H[i, j] = H[i, j] - G
    return H * np.exp(-2 * surf.mu(X, Y))


def kernel_tensor(surf: SimpleSurface, grid: DiskGrid, u0: np.ndarray, lam: float) -> Tensor2Field:
    """f = -nabla^2 u0 / (2 lam) + 2 lam u0 g, the transform-kernel certificate."""
    if lam == 0:
        raise RayError("lambda must be nonzero")
    H = covariant_hessian(surf, grid, u0)
    f = -H / (2 * lam)
    f[0, 0] = f[0, 0] + 2 * lam * u0
    f[1, 1] = f[1, 1] + 2 * lam * u0
    return Tensor2Field(grid, f[0, 0], 0.5 * (f[0, 1] + f[1, 0]), f[1, 1])


def transport_residual(surf: SimpleSurface, grid: DiskGrid, u0: np.ndarray, lam: float,
                       n_geodesics: int = 100, seed: int = 0, order: int = 3) -> tuple:
    """(f, max |attenuated transform of f|) over random geodesics."""
    if lam == 0:
        raise RayError("lambda must be nonzero")
    f = kernel_tensor(surf, grid, u0, lam)
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 2 * np.pi, n_geodesics)
    d = a + np.pi + rng.uniform(-np.pi / 2 + 1e-2, np.pi / 2 - 1e-2, n_geodesics)
    geo = trace_geodesics(surf, a, d)
    vals = attenuated_transform(surf, f, lam, geo, order=order)
    return f, float(np.max(np.abs(vals))) if vals.size else 0.0


def circle_bundle_u(grid: DiskGrid, u0: np.ndarray, lam: float, n_angles: int = 64,
                    surf: SimpleSurface | None = None) -> np.ndarray:
    """u = u0 + X u0 / (2 lam) on (x, angle); X u0 = du0(v) = e^{-mu} grad u0 . v."""
    du = np.array(np.gradient(u0, grid.spacing, edge_order=2))
    if surf is not None:
        X, Y = grid.mesh()
        du = du * np.exp(-surf.mu(X, Y))
    return lift(u0, n_angles) + lift(du, n_angles) / (2 * lam)


# frame algebra -------------------------------------------------------------------

def tracefree_combinations(qhat) -> tuple:
    """(f22 + f33, f23 - f32) from q22, q23, q32, q33.

    ``qhat`` is a 2x2 array [[q22, q23], [q32, q33]] or a dict keyed by
    (2,2), (2,3), (3,2), (3,3).  Both results are scalar matrices.
    """
    if isinstance(qhat, dict):
        q22, q23 = qhat.get((2, 2), 0), qhat.get((2, 3), 0)
        q32, q33 = qhat.get((3, 2), 0), qhat.get((3, 3), 0)
    else:
        (q22, q23), (q32, q33) = np.asarray(qhat)
    sym = 0.5 * (q23 + q32)
    skew = 0.5 * (q33 - q22)
    f22 = np.array([[q22, sym], [sym, q33]], dtype=complex)
    f23 = np.array([[q23, skew], [skew, -q32]], dtype=complex)
    f32 = np.array([[q32, skew], [skew, -q23]], dtype=complex)
    f33 = np.array([[q33, -sym], [-sym, q22]], dtype=complex)
    return f22 + f33, f23 - f32


def frame_inner_products(gamma_dot) -> np.ndarray:
    """8x8 table T[I, J] = <eta^I, eps^J> in degree-lex slot order.

    eta^1 = dx^1, eta^2 = dr, eta^3 = *dr; higher degrees follow by minors.
    """
    v = np.asarray(gamma_dot, dtype=float)
    if v.shape != (2,) or abs(np.hypot(*v) - 1) > 1e-12:
        raise RayError("gamma_dot must be a unit 2-vector")
    c, s = v
    R = np.array([[1.0, 0, 0], [0, c, s], [0, -s, c]])
    return algebra(3).induced(R)


# scalar inversion ---------------------------------------------------------------

def parallel_sinogram(surf: SimpleSurface, field, grid: DiskGrid | None = None,
                      n_angles: int = 180, n_offsets: int = 180, order: int = 1) -> tuple:
    """Unattenuated transform on parallel lines in the layout of ``skimage.transform.radon``.

    Angle ``t`` (degrees) and detector bin ``j`` give the line with
    direction (cos t, sin t) at signed offset ``p_j = (j - n/2) dp`` along
    (-sin t, cos t), where dp = 2/n_offsets is one detector pixel.
    Returns ``(angles, sinogram)`` with shape (n_offsets, n_angles).
    """
    if not surf.flat:
        raise RayError("parallel geometry is only defined for the flat disk")
    angles = np.linspace(0.0, 180.0, n_angles, endpoint=False)
    p = (np.arange(n_offsets) - n_offsets // 2) * (2.0 / n_offsets)
    T, P = np.meshgrid(np.deg2rad(angles), p, indexing="xy")
    n_vec = np.stack([-np.sin(T), np.cos(T)])
    d_vec = np.stack([np.cos(T), np.sin(T)])
    inside = np.abs(P) < 1.0 - 1e-9
    half = np.sqrt(np.clip(1.0 - P ** 2, 0, None))
    start = n_vec * P - d_vec * half
    entry = np.arctan2(start[1], start[0])
    direction = np.arctan2(d_vec[1], d_vec[0])
    out = np.zeros(P.shape, dtype=complex)
    geo = trace_geodesics(surf, entry[inside], direction[inside])
    out[inside] = attenuated_transform(surf, field, 0.0, geo, grid, order)
    return angles, out


def fbp(sino: np.ndarray, angles: np.ndarray, grid: DiskGrid, filter_name: str = "ramp") -> np.ndarray:
    """Filtered backprojection with ``skimage.transform.iradon``, resampled onto ``grid``."""
    from skimage.transform import iradon
    n = sino.shape[0]
    dp = 2.0 / n
    rec = iradon(np.real(sino) / dp, theta=angles, output_size=n,
                 filter_name=filter_name, circle=True)
    X, Y = grid.mesh()
    idx = np.stack([X / dp + n // 2, Y / dp + n // 2])
    return ndimage.map_coordinates(rec, idx, order=3, mode="nearest")
