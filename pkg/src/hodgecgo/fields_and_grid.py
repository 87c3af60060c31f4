"""Grid-sampled graded forms and finite-difference exterior calculus.

A :class:`FormField` stores ``data`` with shape ``(2**n, *grid.shape)``;
slot order follows :mod:`hodgecgo.exterior_algebra`.  Metrics are
diagonal in chart coordinates:

* ``euclidean``: identity,
* ``product``: ``diag(1, e^{2mu}, e^{2mu})`` in coordinates (x1, y2, y3),
* ``isothermal``: ``e^{2mu} * identity`` on a 2D transversal chart.

First derivatives use :func:`numpy.gradient` with ``edge_order=2``
(central inside, second-order one-sided at the edges).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exterior_algebra import algebra, codiff_sign

MODES = ("euclidean", "product", "isothermal")


class GridError(ValueError):
    pass


def trapezoid_weights(m: int, step: float) -> np.ndarray:
    w = np.full(m, step)
    w[0] = w[-1] = 0.5 * step
    return w


class Grid:
    """Uniform collocated grid on a box, with an optional isothermal factor."""

    def __init__(self, shape, spacing, origin=None, mode: str = "euclidean", mu=None):
        self.shape = tuple(int(s) for s in shape)
        self.n = len(self.shape)
        sp = np.broadcast_to(np.asarray(spacing, dtype=float), (self.n,))
        self.spacing = tuple(float(s) for s in sp)
        org = np.zeros(self.n) if origin is None else np.broadcast_to(
            np.asarray(origin, dtype=float), (self.n,))
        self.origin = tuple(float(o) for o in org)
        if mode not in MODES:
            raise GridError(f"unknown mode {mode!r}")
        if any(s < 5 for s in self.shape):
            raise GridError("need at least 5 points per axis")
        if any(h <= 0 for h in self.spacing):
            raise GridError("spacing must be positive")
        if mode == "product" and self.n != 3:
            raise GridError("product mode needs n = 3")
        if mode == "isothermal" and self.n != 2:
            raise GridError("isothermal mode needs n = 2")
        self.mode = mode
        self.mu_ref = None
        if mu is None or mode == "euclidean":
            self.mu = np.zeros(self.shape)
        elif callable(mu):
            self.mu_ref = getattr(mu, "__name__", "callable")
            X = self.mesh()
            trans = X[1:] if mode == "product" else X
            self.mu = np.broadcast_to(np.asarray(mu(*trans), dtype=float), self.shape).copy()
        else:
            self.mu = np.broadcast_to(np.asarray(mu, dtype=float), self.shape).copy()
            self.mu_ref = "array"
        self.alg = algebra(self.n)
        self._cache = {}

    @classmethod
    def box(cls, m: int, lower=0.0, upper=1.0, n: int = 3, **kw) -> "Grid":
        lo = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
        ms = np.broadcast_to(np.asarray(m), (n,))
        return cls(tuple(ms), (hi - lo) / (ms - 1), lo, **kw)

    # geometry -------------------------------------------------------------
    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def mesh(self) -> list:
        return np.meshgrid(*[self.coords(a) for a in range(self.n)], indexing="ij")

    def upper(self) -> tuple:
        return tuple(o + h * (m - 1) for o, h, m in zip(self.origin, self.spacing, self.shape))

    def points(self) -> np.ndarray:
        return np.stack([x.ravel() for x in self.mesh()])

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    def transversal_axes(self) -> tuple:
        if self.mode == "product":
            return (1, 2)
        if self.mode == "isothermal":
            return (0, 1)
        return ()

    def metric_diag(self) -> np.ndarray:
        """Diagonal of g at every point, shape ``(n, *shape)``."""
        g = np.ones((self.n,) + self.shape)
        for a in self.transversal_axes():
            g[a] = np.exp(2 * self.mu)
        return g

    def sqrtdet(self) -> np.ndarray:
        return np.sqrt(np.prod(self.metric_diag(), axis=0))

    def slot_gram(self) -> np.ndarray:
        """Induced inverse metric on each slot (diagonal metric), ``(size, *shape)``."""
        if "gram" not in self._cache:
            ginv = 1.0 / self.metric_diag()
            G = np.ones((self.alg.size,) + self.shape)
            for i, s in enumerate(self.alg.slots):
                for j in s:
                    G[i] = G[i] * ginv[j]
            self._cache["gram"] = G
        return self._cache["gram"]

    def star_scale(self) -> np.ndarray:
        if "star" not in self._cache:
            self._cache["star"] = self.slot_gram() * self.sqrtdet()[None]
        return self._cache["star"]

    def volume_weights(self) -> np.ndarray:
        """Trapezoid weights times the volume density."""
        if "vol" not in self._cache:
            w = np.ones(self.shape)
            for a in range(self.n):
                sh = [1] * self.n
                sh[a] = -1
                w = w * trapezoid_weights(self.shape[a], self.spacing[a]).reshape(sh)
            self._cache["vol"] = w * self.sqrtdet()
        return self._cache["vol"]

    def interior_slice(self, layers: int = 2) -> tuple:
        return tuple(slice(layers, m - layers) for m in self.shape)

    def christoffel(self) -> np.ndarray | None:
        """Gamma[k, i, j] = Gamma^k_{ij} (chart axes) or None if flat."""
        T = self.transversal_axes()
        if not T or not np.any(self.mu):
            return None
        if "gamma" not in self._cache:
            dmu = {a: np.gradient(self.mu, self.spacing[a], axis=a, edge_order=2) for a in T}
            G = np.zeros((self.n, self.n, self.n) + self.shape)
            for k in T:
                for i in T:
                    for j in T:
                        val = np.zeros(self.shape)
                        if i == k:
                            val = val + dmu[j]
                        if j == k:
                            val = val + dmu[i]
                        if i == j:
                            val = val - dmu[k]
                        G[k, i, j] = val
            self._cache["gamma"] = G
        return self._cache["gamma"]

    def header(self) -> dict:
        return {"shape": list(self.shape), "spacing": list(self.spacing),
                "origin": list(self.origin), "mode": self.mode, "mu_ref": self.mu_ref}

    def transversal(self) -> "Grid":
        """The 2D isothermal grid of the (y2, y3) factor in product mode."""
        if self.mode not in ("product", "euclidean") or self.n != 3:
            raise GridError("transversal grid needs a 3D grid")
        mode = "isothermal" if self.mode == "product" else "euclidean"
        return Grid(self.shape[1:], self.spacing[1:], self.origin[1:], mode=mode,
                    mu=self.mu[0] if mode == "isothermal" else None)

    def same_as(self, other: "Grid") -> bool:
        return (self.shape == other.shape and np.allclose(self.spacing, other.spacing)
                and np.allclose(self.origin, other.origin) and self.mode == other.mode
                and np.allclose(self.mu, other.mu))


class FormField:
    """Graded form sampled on a grid."""

    def __init__(self, grid: Grid, data):
        data = np.asarray(data, dtype=complex)
        if data.shape != (grid.alg.size,) + grid.shape:
            raise GridError(f"data shape {data.shape} does not match grid")
        self.grid = grid
        self.data = data

    @classmethod
    def zeros(cls, grid: Grid) -> "FormField":
        return cls(grid, np.zeros((grid.alg.size,) + grid.shape, dtype=complex))

    @classmethod
    def from_components(cls, grid: Grid, comps: dict) -> "FormField":
        """``comps`` maps 1-based index tuples to arrays or scalars."""
        u = cls.zeros(grid)
        for idx, val in comps.items():
            u.data[grid.alg.index[tuple(i - 1 for i in idx)]] = val
        return u

    def copy(self) -> "FormField":
        return FormField(self.grid, self.data.copy())

    def part(self, k: int) -> "FormField":
        mask = self.grid.alg.degree_mask(k)
        return FormField(self.grid, self.data * mask.reshape((-1,) + (1,) * self.grid.n))

    def comp(self, idx) -> np.ndarray:
        return self.data[self.grid.alg.index[tuple(i - 1 for i in idx)]]

    def _other(self, other):
        if isinstance(other, FormField):
            return other.data
        return other

    def __add__(self, other):
        return FormField(self.grid, self.data + self._other(other))

    def __sub__(self, other):
        return FormField(self.grid, self.data - self._other(other))

    def __neg__(self):
        return FormField(self.grid, -self.data)

    def __mul__(self, c):
        c = np.asarray(c)
        if c.ndim == self.grid.n:
            return FormField(self.grid, self.data * c[None])
        return FormField(self.grid, self.data * c)

    __rmul__ = __mul__

    def pointwise_inner(self, other: "FormField", conj: bool = True) -> np.ndarray:
        v = np.conj(other.data) if conj else other.data
        return np.sum(self.grid.slot_gram() * self.data * v, axis=0)

    def inner(self, other: "FormField") -> complex:
        """(u | v)_M = int <u, conj v> dV with the trapezoid rule."""
        return complex(np.sum(self.grid.volume_weights() * self.pointwise_inner(other)))

    def norm(self) -> float:
        return float(np.sqrt(abs(self.inner(self))))

    def max_abs(self, layers: int = 0) -> float:
        sl = (slice(None),) + self.grid.interior_slice(layers)
        return float(np.max(np.abs(self.data[sl])))


class EndoField:
    """Pointwise endomorphism of the exterior algebra, ``mats[i, j, *shape]``."""

    def __init__(self, grid: Grid, mats):
        mats = np.asarray(mats, dtype=complex)
        size = grid.alg.size
        if mats.shape == (size, size):
            mats = np.broadcast_to(mats.reshape((size, size) + (1,) * grid.n),
                                   (size, size) + grid.shape).copy()
        if mats.shape != (size, size) + grid.shape:
            raise GridError(f"mats shape {mats.shape} does not match grid")
        self.grid = grid
        self.mats = mats

    @classmethod
    def zeros(cls, grid: Grid) -> "EndoField":
        s = grid.alg.size
        return cls(grid, np.zeros((s, s) + grid.shape, dtype=complex))

    @classmethod
    def scalar(cls, grid: Grid, q, matrix=None) -> "EndoField":
        """``q(x) * matrix`` with ``matrix`` defaulting to the identity."""
        s = grid.alg.size
        M = np.eye(s) if matrix is None else np.asarray(matrix)
        q = np.broadcast_to(np.asarray(q, dtype=complex), grid.shape)
        return cls(grid, M.reshape((s, s) + (1,) * grid.n) * q[None, None])

    def apply(self, u: FormField) -> FormField:
        return FormField(self.grid, np.einsum("ij...,j...->i...", self.mats, u.data))

    def __add__(self, other):
        return EndoField(self.grid, self.mats + other.mats)

    def __sub__(self, other):
        return EndoField(self.grid, self.mats - other.mats)

    def __mul__(self, c):
        return EndoField(self.grid, self.mats * c)

    __rmul__ = __mul__

    def adjoint(self) -> "EndoField":
        """Pointwise adjoint with respect to the metric pairing."""
        G = self.grid.slot_gram()
        mh = np.conj(np.swapaxes(self.mats, 0, 1))
        return EndoField(self.grid, mh * G[None, :] / G[:, None])

    def star_conjugate(self) -> "EndoField":
        """The endomorphism  * Q *^{-1}."""
        S = star_operator_matrix(self.grid)
        Sinv = np.linalg.inv(np.moveaxis(S, (0, 1), (-2, -1)))
        Sinv = np.moveaxis(Sinv, (-2, -1), (0, 1))
        t = np.einsum("ij...,jk...->ik...", S, self.mats)
        return EndoField(self.grid, np.einsum("ij...,jk...->ik...", t, Sinv))

    def degree_blocks(self) -> bool:
        """True when Q maps each degree into itself."""
        deg = self.grid.alg.degrees
        off = deg[:, None] != deg[None, :]
        return not np.any(np.abs(self.mats[off]) > 0)

    def max_norm(self) -> float:
        m = np.moveaxis(self.mats, (0, 1), (-2, -1))
        return float(np.max(np.linalg.norm(m, ord=2, axis=(-2, -1))))


# pointwise algebra on fields ---------------------------------------------

def _slots(M, data):
    M = np.asarray(M)
    if M.ndim == 2:
        return np.tensordot(M, data, axes=(1, 0))
    return np.einsum("ij...,j...->i...", M, data)


def star_operator_matrix(grid: Grid) -> np.ndarray:
    """Pointwise Hodge star as a matrix field ``(size, size, *shape)``."""
    alg = grid.alg
    S = np.zeros((alg.size, alg.size) + grid.shape)
    sc = grid.star_scale()
    for j in range(alg.size):
        S[alg.comp[j], j] = alg.comp_sign[j] * sc[j]
    return S


def hodge_star(u: FormField) -> FormField:
    alg = u.grid.alg
    out = np.zeros_like(u.data)
    out[alg.comp] = (alg.comp_sign.reshape((-1,) + (1,) * u.grid.n)
                     * u.grid.star_scale() * u.data)
    return FormField(u.grid, out)


def wedge_covector(c, u: FormField) -> FormField:
    """xi ^ u for a covector field with components ``c[j]`` (arrays or scalars)."""
    alg = u.grid.alg
    out = np.zeros_like(u.data)
    for j, cj in enumerate(c):
        if np.any(cj != 0):
            out = out + cj * _slots(alg.ext[j], u.data)
    return FormField(u.grid, out)


def interior_covector(c, u: FormField) -> FormField:
    """i_xi u with xi = sum_j c[j] dx^j, contracted through the metric."""
    alg = u.grid.alg
    ginv = 1.0 / u.grid.metric_diag()
    out = np.zeros_like(u.data)
    for j, cj in enumerate(c):
        if np.any(cj != 0):
            out = out + (cj * ginv[j]) * _slots(alg.con[j], u.data)
    return FormField(u.grid, out)


def interior_vector(X, u: FormField) -> FormField:
    alg = u.grid.alg
    out = np.zeros_like(u.data)
    for j, Xj in enumerate(X):
        if np.any(Xj != 0):
            out = out + Xj * _slots(alg.con[j], u.data)
    return FormField(u.grid, out)


# differential operators ----------------------------------------------------

def partial(u: FormField, axis: int) -> FormField:
    g = u.grid
    return FormField(g, np.gradient(u.data, g.spacing[axis], axis=axis + 1, edge_order=2))


def ext_d(u: FormField) -> FormField:
    alg = u.grid.alg
    out = np.zeros_like(u.data)
    for a in range(u.grid.n):
        out += _slots(alg.ext[a], partial(u, a).data)
    return FormField(u.grid, out)


def codiff(u: FormField) -> FormField:
    """delta = (-1)^{k(n-k)-n+k-1} * d * on each degree k."""
    g = u.grid
    n = g.n
    w = hodge_star(ext_d(hodge_star(u)))
    # output degree k-1 carries the sign of input degree k
    sgn = np.array([codiff_sign(d + 1, n) for d in g.alg.degrees], dtype=float)
    return FormField(g, w.data * sgn.reshape((-1,) + (1,) * n))


def hodge_laplacian(u: FormField) -> FormField:
    """Delta u = -(d delta + delta d) u."""
    return -(ext_d(codiff(u)) + codiff(ext_d(u)))


def second_partial(u: FormField, axis: int) -> FormField:
    """Compact 3-point second difference; 4-point one-sided at the ends."""
    g = u.grid
    h2 = g.spacing[axis] ** 2
    d = np.moveaxis(u.data, axis + 1, 0)
    out = np.empty_like(d)
    out[1:-1] = (d[2:] - 2 * d[1:-1] + d[:-2]) / h2
    out[0] = (2 * d[0] - 5 * d[1] + 4 * d[2] - d[3]) / h2
    out[-1] = (2 * d[-1] - 5 * d[-2] + 4 * d[-3] - d[-4]) / h2
    return FormField(g, np.moveaxis(out, 0, axis + 1))


def rough_laplacian(u: FormField) -> FormField:
    """Componentwise sum of compact second differences (flat grids)."""
    if u.grid.christoffel() is not None:
        raise GridError("rough_laplacian is implemented for flat metrics only")
    out = FormField.zeros(u.grid)
    for a in range(u.grid.n):
        out = out + second_partial(u, a)
    return out


def connection_matrix(grid: Grid, X) -> np.ndarray | None:
    """Derivation matrix field of the Christoffel part of nabla_X, or None."""
    Gam = grid.christoffel()
    if Gam is None:
        return None
    alg = grid.alg
    n = grid.n
    D = np.zeros((alg.size, alg.size) + grid.shape)
    for l in range(n):
        for k in range(n):
            C = -sum(Gam[l, j, k] * X[j] for j in range(n))
            if np.any(C != 0):
                D += (alg.ext[k] @ alg.con[l]).reshape((alg.size, alg.size) + (1,) * n) * C
    return D


def covariant_dir(X: Sequence, u: FormField) -> FormField:
    """nabla_X u for a vector field with chart components ``X[j]``."""
    g = u.grid
    out = np.zeros_like(u.data)
    for a, Xa in enumerate(X):
        if np.any(Xa != 0):
            out = out + Xa * partial(u, a).data
    D = connection_matrix(g, X)
    if D is not None:
        out = out + _slots(D, u.data)
    return FormField(g, out)


# weights and conjugated operators -----------------------------------------

@dataclass
class Weight:
    """Linear Carleman weight phi = x_axis, optionally convexified."""

    h: float
    eps: float = 1.0
    convexified: bool = False
    axis: int = 0
    strict: bool = False

    def __post_init__(self):
        if self.h <= 0 or self.eps <= 0:
            raise ValueError("h and eps must be positive")
        if self.strict and not (self.h <= self.eps / 10 <= 0.01):
            raise ValueError("strict weight needs h <= eps/10 <= 0.01")

    def phi(self, grid: Grid) -> np.ndarray:
        x = grid.mesh()[self.axis]
        if self.convexified:
            return x + self.h * x ** 2 / (2 * self.eps)
        return x

    def dphi_coeff(self, grid: Grid) -> np.ndarray:
        """c with d(phi_c) = c dx^axis."""
        x = grid.mesh()[self.axis]
        if self.convexified:
            return 1.0 + self.h * x / self.eps
        return np.ones_like(x)

    def dphi(self, grid: Grid) -> list:
        c = [0.0] * grid.n
        c[self.axis] = self.dphi_coeff(grid)
        return c

    def dphi_sq(self, grid: Grid) -> np.ndarray:
        return self.dphi_coeff(grid) ** 2 / grid.metric_diag()[self.axis]

    def lap_phi(self, grid: Grid) -> np.ndarray:
        val = self.h / self.eps if self.convexified else 0.0
        return np.full(grid.shape, val)

    def grad_phi(self, grid: Grid) -> list:
        X = [0.0] * grid.n
        X[self.axis] = self.dphi_coeff(grid) / grid.metric_diag()[self.axis]
        return X

    def _check(self, grid: Grid):
        if grid.mode != "euclidean" and self.axis in grid.transversal_axes():
            raise GridError("weight axis must be the Euclidean factor")


def conj_d(u: FormField, w: Weight) -> FormField:
    w._check(u.grid)
    return w.h * ext_d(u) - wedge_covector(w.dphi(u.grid), u)


def conj_codiff(u: FormField, w: Weight) -> FormField:
    w._check(u.grid)
    return w.h * codiff(u) + interior_covector(w.dphi(u.grid), u)


def conj_laplacian(u: FormField, w: Weight) -> FormField:
    """-Delta_phi u = (d_phi delta_phi + delta_phi d_phi) u."""
    return conj_d(conj_codiff(u, w), w) + conj_codiff(conj_d(u, w), w)


def A_op(u: FormField, w: Weight) -> FormField:
    return -(w.h ** 2) * hodge_laplacian(u) - u * w.dphi_sq(u.grid)


def B_op(u: FormField, w: Weight, symmetric: bool = False) -> FormField:
    """(h/i)[2 nabla_{grad phi} + Delta phi] u.

    ``symmetric=True`` uses the equivalent form (h/i)[X + X^T] with
    X = nabla_{grad phi}, which is exactly skew for the discrete inner
    product on interior-supported fields.
    """
    g = u.grid
    X = w.grad_phi(g)
    if symmetric:
        c = X[w.axis]
        return (covariant_dir(X, u) + partial(u * c, w.axis)) * (w.h / 1j)
    return (2 * covariant_dir(X, u) + u * w.lap_phi(g)) * (w.h / 1j)


def conjugation_residual(u: FormField, s: complex, axis: int = 0) -> FormField:
    """LHS - RHS of the conjugated Hodge Laplacian identity with rho = x_axis.

    e^{s rho}(-Delta)(e^{-s rho} u) = -s^2<d rho, d rho>u + s[2 nabla_{grad rho} + Delta rho]u - Delta u
    """
    g = u.grid
    rho = g.mesh()[axis]
    e = np.exp(-s * rho)
    lhs = -hodge_laplacian(u * e) * (1.0 / e)
    X = [0.0] * g.n
    X[axis] = 1.0 / g.metric_diag()[axis]
    drho2 = 1.0 / g.metric_diag()[axis]
    rhs = -(s ** 2) * (u * drho2) + s * (2 * covariant_dir(X, u)) - hodge_laplacian(u)
    return lhs - rhs


# product structure -----------------------------------------------------------

def product_split(u: FormField) -> tuple:
    """u = dx^1 ^ u' + u''; returns (u', u'') on the transversal grid (x1 = first plane)."""
    g = u.grid
    tg = g.transversal()
    alg, talg = g.alg, tg.alg
    up = FormField.zeros(tg)
    upp = FormField.zeros(tg)
    for i, s in enumerate(alg.slots):
        if s and s[0] == 0:
            up.data[talg.index[tuple(j - 1 for j in s[1:])]] = u.data[i, 0]
        else:
            upp.data[talg.index[tuple(j - 1 for j in s)]] = u.data[i, 0]
    return up, upp


def product_join(up: FormField, upp: FormField, grid: Grid) -> FormField:
    """dx^1 ^ u' + u'' broadcast along x1."""
    alg, talg = grid.alg, up.grid.alg
    out = FormField.zeros(grid)
    for i, s in enumerate(alg.slots):
        if s and s[0] == 0:
            src = up.data[talg.index[tuple(j - 1 for j in s[1:])]]
        else:
            src = upp.data[talg.index[tuple(j - 1 for j in s)]]
        out.data[i] = src[None]
    return out


# analytic form functions ---------------------------------------------------

class FormFunction:
    """A graded form given by a callable on points.

    ``fn(X)`` takes an array ``(n, m)`` of points and returns ``(2**n, m)``.
    Derivatives are taken by 4th-order central differences with step
    ``step``; this is the reference for boundary expansion checks.
    """

    def __init__(self, fn: Callable, n: int = 3, step: float = 1e-3):
        self.fn = fn
        self.n = n
        self.step = step

    def __call__(self, X) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(X, dtype=float)), dtype=complex)

    def sample(self, grid: Grid) -> FormField:
        vals = self(grid.points())
        return FormField(grid, vals.reshape((grid.alg.size,) + grid.shape))

    def derivative(self, X, direction) -> np.ndarray:
        """Directional derivative along constant vector(s) ``direction``."""
        X = np.asarray(X, dtype=float)
        v = np.asarray(direction, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        e = self.step
        f = self
        return (-f(X + 2 * e * v) + 8 * f(X + e * v) - 8 * f(X - e * v) + f(X - 2 * e * v)) / (12 * e)

    def second_derivative(self, X, direction) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        v = np.asarray(direction, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        e = 10 * self.step
        f = self
        return (-f(X + 2 * e * v) + 16 * f(X + e * v) - 30 * f(X)
                + 16 * f(X - e * v) - f(X - 2 * e * v)) / (12 * e * e)


def random_smooth_form(n: int, rng: np.random.Generator, modes: int = 2, amp: float = 1.0,
                       complex_valued: bool = True, degrees=None) -> FormFunction:
    """Low-frequency trigonometric synthesis, one random series per slot."""
    size = 2 ** n
    K = rng.integers(0, modes + 1, size=(size, 3, n)) * np.pi
    ph = rng.uniform(0, 2 * np.pi, size=(size, 3))
    c = rng.standard_normal((size, 3))
    if complex_valued:
        c = c + 1j * rng.standard_normal((size, 3))
    if degrees is not None:
        keep = np.isin(algebra(n).degrees, list(degrees))
        c = c * keep[:, None]

    def fn(X):
        out = np.zeros((size, X.shape[1]), dtype=complex)
        for t in range(3):
            arg = np.einsum("sj,jm->sm", K[:, t], X) + ph[:, t:t + 1]
            out += c[:, t:t + 1] * np.cos(arg)
        return amp * out

    return FormFunction(fn, n)
