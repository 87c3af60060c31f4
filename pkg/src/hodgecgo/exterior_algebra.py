"""Pointwise exterior algebra of R^n with a metric.

Slots of a graded coefficient vector are ordered by degree, then
lexicographically within a degree.  For n = 3 the order is

    (), (1,), (2,), (3,), (1,2), (1,3), (2,3), (1,2,3)

Indices are 1-based in :class:`MultiIndex` and 0-based internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

MAX_DIM = 5


class DimensionError(ValueError):
    pass


def _perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class MultiIndex:
    indices: tuple
    n: int = 3

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 1 or idx[-1] > self.n):
            raise ValueError(f"indices out of range 1..{self.n}: {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def degree(self) -> int:
        return len(self.indices)

    @property
    def slot(self) -> int:
        return algebra(self.n).index[tuple(i - 1 for i in self.indices)]


class Algebra:
    """Cached structure tables for the exterior algebra of R^n."""

    def __init__(self, n: int):
        if not 1 <= n <= MAX_DIM:
            raise DimensionError(f"n must be in 1..{MAX_DIM}, got {n}")
        self.n = n
        self.slots = [c for k in range(n + 1) for c in combinations(range(n), k)]
        self.size = len(self.slots)
        self.index = {s: i for i, s in enumerate(self.slots)}
        self.degrees = np.array([len(s) for s in self.slots])

        # wedge[c, a, b]: coefficient of slot c in e_a ^ e_b
        W = np.zeros((self.size, self.size, self.size))
        for a, sa in enumerate(self.slots):
            for b, sb in enumerate(self.slots):
                if set(sa) & set(sb):
                    continue
                merged = sa + sb
                W[self.index[tuple(sorted(merged))], a, b] = _perm_sign(merged)
        self.wedge_tensor = W

        # left wedge by dx^j and contraction with d/dx^j
        self.ext = np.zeros((n, self.size, self.size))
        self.con = np.zeros((n, self.size, self.size))
        for j in range(n):
            self.ext[j] = W[:, self.index[(j,)], :]
            for b, sb in enumerate(self.slots):
                if j in sb:
                    p = sb.index(j)
                    rest = sb[:p] + sb[p + 1:]
                    self.con[j, self.index[rest], b] = (-1) ** p

        # complement permutation with sign(I, I^c)
        self.comp = np.zeros(self.size, dtype=int)
        self.comp_sign = np.zeros(self.size)
        for a, sa in enumerate(self.slots):
            rest = tuple(i for i in range(n) if i not in sa)
            self.comp[a] = self.index[rest]
            self.comp_sign[a] = _perm_sign(sa + rest)

    def degree_slots(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.degrees == k)

    def degree_mask(self, k: int) -> np.ndarray:
        return self.degrees == k

    def slots_without(self, axis: int) -> np.ndarray:
        """Boolean mask of slots whose index set omits ``axis`` (0-based)."""
        return np.array([axis not in s for s in self.slots])

    def induced(self, R: np.ndarray) -> np.ndarray:
        """Matrix of the map induced on the exterior algebra by ``R``.

        ``R`` acts on covector components; the block for degree k holds
        the k x k minors ``det R[J, I]``.
        """
        R = np.asarray(R)
        out = np.zeros((self.size, self.size), dtype=np.result_type(R, float))
        out[0, 0] = 1.0
        for k in range(1, self.n + 1):
            sl = self.degree_slots(k)
            for a in sl:
                J = list(self.slots[a])
                for b in sl:
                    out[a, b] = np.linalg.det(R[np.ix_(J, list(self.slots[b]))])
        return out

    def slot_label(self, a: int) -> str:
        s = self.slots[a]
        return "1" if not s else "dx" + "".join(str(i + 1) for i in s)


@lru_cache(maxsize=None)
def algebra(n: int) -> Algebra:
    return Algebra(n)


@dataclass
class GradedCoeff:
    comps: np.ndarray
    dim: int = 3

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=complex)
        if self.comps.shape != (2 ** self.dim,):
            raise DimensionError(
                f"expected {2 ** self.dim} components, got shape {self.comps.shape}")

    @classmethod
    def zeros(cls, n: int = 3) -> "GradedCoeff":
        return cls(np.zeros(2 ** n), n)

    @classmethod
    def basis(cls, indices, n: int = 3, coeff: complex = 1.0) -> "GradedCoeff":
        """``coeff * dx^I`` for 1-based ``indices``."""
        c = np.zeros(2 ** n, dtype=complex)
        c[MultiIndex(tuple(indices), n).slot] = coeff
        return cls(c, n)

    @classmethod
    def covector(cls, v, n: int | None = None) -> "GradedCoeff":
        v = np.asarray(v, dtype=complex)
        n = len(v) if n is None else n
        c = np.zeros(2 ** n, dtype=complex)
        c[1:n + 1] = v
        return cls(c, n)

    def part(self, k: int) -> "GradedCoeff":
        c = np.where(algebra(self.dim).degree_mask(k), self.comps, 0)
        return GradedCoeff(c, self.dim)

    def vector(self) -> np.ndarray:
        """Degree-1 components as an n-vector."""
        return self.comps[1:self.dim + 1].copy()

    def is_pure(self, k: int, tol: float = 0.0) -> bool:
        mask = algebra(self.dim).degree_mask(k)
        return bool(np.all(np.abs(self.comps[~mask]) <= tol))

    def _check(self, other):
        if not isinstance(other, GradedCoeff) or other.dim != self.dim:
            raise DimensionError("dimension mismatch")

    def __add__(self, other):
        self._check(other)
        return GradedCoeff(self.comps + other.comps, self.dim)

    def __sub__(self, other):
        self._check(other)
        return GradedCoeff(self.comps - other.comps, self.dim)

    def __neg__(self):
        return GradedCoeff(-self.comps, self.dim)

    def __mul__(self, c):
        return GradedCoeff(self.comps * c, self.dim)

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)


@dataclass
class PointMetric:
    g: np.ndarray
    ginv: np.ndarray = field(default=None)
    sqrtdet: float = field(default=None)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.ndim != 2 or self.g.shape[0] != self.g.shape[1]:
            raise DimensionError("metric must be square")
        if not np.allclose(self.g, self.g.T, atol=1e-14):
            raise ValueError("metric must be symmetric")
        if self.ginv is None:
            self.ginv = np.linalg.inv(self.g)
        det = np.linalg.det(self.g)
        if det <= 0 or np.any(np.linalg.eigvalsh(self.g) <= 0):
            raise ValueError("metric must be positive definite")
        if self.sqrtdet is None:
            self.sqrtdet = float(np.sqrt(det))

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @classmethod
    def euclidean(cls, n: int = 3) -> "PointMetric":
        return cls(np.eye(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, spread: float = 0.5) -> "PointMetric":
        """Random SPD metric with eigenvalues roughly in [1-spread, 1+spread]."""
        Qm, _ = np.linalg.qr(rng.standard_normal((n, n)))
        ev = 1.0 + spread * rng.uniform(-1, 1, n)
        g = (Qm * ev) @ Qm.T
        return cls(0.5 * (g + g.T))


def _metric_for(m, n):
    if m is None:
        return PointMetric.euclidean(n)
    if m.n != n:
        raise DimensionError("metric dimension mismatch")
    return m


def wedge(a: GradedCoeff, b: GradedCoeff) -> GradedCoeff:
    a._check(b)
    W = algebra(a.dim).wedge_tensor
    return GradedCoeff(np.einsum("cab,a,b->c", W, a.comps, b.comps), a.dim)


def gram_matrix(m: PointMetric) -> np.ndarray:
    """Induced metric on all slots: block diagonal minors of ``ginv``."""
    return algebra(m.n).induced(m.ginv)


def star_matrix(m: PointMetric) -> np.ndarray:
    """Matrix S with ``(*u).comps = S @ u.comps``.

    Built from ``*dx^J = sqrtdet * sum_I G[I, J] sign(I, I^c) dx^{I^c}``
    so that ``eta ^ *zeta = <eta, zeta> dV``.
    """
    alg = algebra(m.n)
    G = gram_matrix(m)
    S = np.zeros((alg.size, alg.size))
    for i in range(alg.size):
        S[alg.comp[i], :] += m.sqrtdet * alg.comp_sign[i] * G[i, :]
    return S


def hodge_star(u: GradedCoeff, m: PointMetric | None = None) -> GradedCoeff:
    m = _metric_for(m, u.dim)
    return GradedCoeff(star_matrix(m) @ u.comps, u.dim)


def sharp(xi, m: PointMetric | None = None) -> np.ndarray:
    v = xi.vector() if isinstance(xi, GradedCoeff) else np.asarray(xi)
    m = _metric_for(m, len(v))
    return m.ginv @ v


def flat(X, m: PointMetric | None = None) -> GradedCoeff:
    X = np.asarray(X)
    m = _metric_for(m, len(X))
    return GradedCoeff.covector(m.g @ X)


def contraction_matrix(X) -> np.ndarray:
    """Matrix of i_X for a vector X (components in the coordinate frame)."""
    X = np.asarray(X)
    return np.tensordot(X, algebra(len(X)).con, axes=(0, 0))


def interior(xi: GradedCoeff, u: GradedCoeff, m: PointMetric | None = None) -> GradedCoeff:
    """i_xi u, contraction with the vector metrically dual to ``xi``."""
    xi._check(u)
    if not xi.is_pure(1, tol=1e-14):
        raise ValueError("xi must have pure degree 1")
    X = sharp(xi, _metric_for(m, u.dim))
    return GradedCoeff(contraction_matrix(X) @ u.comps, u.dim)


def inner(a: GradedCoeff, b: GradedCoeff, m: PointMetric | None = None) -> complex:
    """Complex bilinear metric pairing <a, b>."""
    a._check(b)
    return complex(a.comps @ gram_matrix(_metric_for(m, a.dim)) @ b.comps)


def inner_sesq(a: GradedCoeff, b: GradedCoeff, m: PointMetric | None = None) -> complex:
    """Sesquilinear pairing <a, conj(b)> used inside integrals."""
    a._check(b)
    return complex(a.comps @ gram_matrix(_metric_for(m, a.dim)) @ np.conj(b.comps))


def xieta_identity_residual(xi, eta, u, m: PointMetric | None = None) -> float:
    """Max-abs residual of the symmetrized product identity.

    xi ^ i_eta u + i_xi(eta ^ u) + eta ^ i_xi u + i_eta(xi ^ u) = 2 <xi, eta> u
    """
    m = _metric_for(m, u.dim)
    lhs = (wedge(xi, interior(eta, u, m)) + interior(xi, wedge(eta, u), m)
           + wedge(eta, interior(xi, u, m)) + interior(eta, wedge(xi, u), m))
    rhs = u * (2 * inner(xi, eta, m))
    return float(np.max(np.abs((lhs - rhs).comps)))


def codiff_sign(k: int, n: int) -> int:
    """Sign in delta = sign * (* d *) on k-forms of an n-manifold."""
    return (-1) ** ((k * (n - k) - n + k - 1) % 2)


def star_star_sign(k: int, n: int) -> int:
    return (-1) ** ((k * (n - k)) % 2)
