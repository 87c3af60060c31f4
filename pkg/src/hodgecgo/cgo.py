"""Complex geometrical optics solutions.

Solutions are stored in conjugated form ``Z = e^psi (A + R)`` with the
exponent ``psi`` kept as metadata; :attr:`CgoSolution.Z` materializes the
product only while ``|Re psi|`` stays below :data:`EXP_GUARD`.

Euclidean mode: ``psi = zeta . x`` with ``zeta = (alpha + i beta)/h`` and
a constant amplitude ``dx^I``.

Cylinder mode: ``psi = -s x1`` on a box inside ``R x D`` (D the unit
disk), with the quasimode amplitude

    A = e^{i s r} r^{-1/2} sum_I b_I(theta) eta^I,

where (r, theta) are polar coordinates about a point ``omega`` outside
D, ``eta^2 = dr`` and ``eta^3 = r dtheta``.  In polar coordinates
``|g_0|^{-1/4} = r^{-1/2}``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .boundary_calculus import GammaSplit
from .bvp_solver import BvpSolver
from .exterior_algebra import MultiIndex, algebra
from .fields_and_grid import (EndoField, FormField, Grid, hodge_laplacian, product_join,
                              product_split)

EXP_GUARD = 30.0


class CgoError(ValueError):
    pass


class DecayViolation(UserWarning):
    pass


# trigonometric series in theta, coefficients indexed by m = -M..M -----------

class TrigSeries:
    def __init__(self, coeffs: dict | None = None):
        self.c = {int(m): complex(v) for m, v in (coeffs or {}).items() if v != 0}

    @classmethod
    def cos(cls):
        return cls({1: 0.5, -1: 0.5})

    @classmethod
    def sin(cls):
        return cls({1: -0.5j, -1: 0.5j})

    def __add__(self, other):
        out = dict(self.c)
        for m, v in other.c.items():
            out[m] = out.get(m, 0) + v
        return TrigSeries(out)

    def __neg__(self):
        return TrigSeries({m: -v for m, v in self.c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TrigSeries):
            return TrigSeries({m: v * other for m, v in self.c.items()})
        out = {}
        for m, v in self.c.items():
            for k, w in other.c.items():
                out[m + k] = out.get(m + k, 0) + v * w
        return TrigSeries(out)

    __rmul__ = __mul__

    def __call__(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        out = np.zeros(th.shape, dtype=complex)
        for m, v in self.c.items():
            out += v * np.exp(1j * m * th)
        return out

    def weighted(self, fn) -> "TrigSeries":
        """Coefficientwise map c_m -> fn(m) c_m."""
        return TrigSeries({m: fn(m) * v for m, v in self.c.items()})


def _frame_series():
    """Cartesian components (dx1, dy2, dy3) of eta^1, eta^2, eta^3."""
    one, zero = TrigSeries({0: 1.0}), TrigSeries()
    c, s = TrigSeries.cos(), TrigSeries.sin()
    return [[one, zero, zero], [zero, c, s], [zero, -s, c]]


def frame_components(I) -> list:
    """Cartesian slot components of eta^I as trig series (length 8 list)."""
    alg = algebra(3)
    frame = _frame_series()
    comps = [TrigSeries() for _ in range(alg.size)]
    comps[0] = TrigSeries({0: 1.0})
    for i in I:
        new = [TrigSeries() for _ in range(alg.size)]
        for j in range(3):
            coef = frame[i - 1][j]
            if not coef.c:
                continue
            # left wedge by dx^j, then reorder: eta^I = eta^{i1} ^ ... built right to left
            for b in range(alg.size):
                if not comps[b].c:
                    continue
                for a in np.flatnonzero(alg.ext[j][:, b]):
                    new[a] = new[a] + comps[b] * (coef * alg.ext[j][a, b])
        comps = new
    return comps


# specs and solutions -----------------------------------------------------------

@dataclass
class CgoSpec:
    mode: str = "euclidean"
    s: complex = 10.0
    h: float = 0.1
    alpha: tuple = (1.0, 0.0, 0.0)
    beta: tuple = (0.0, 1.0, 0.0)
    I: tuple = (1,)
    b: dict = field(default_factory=lambda: {(2,): {0: 1.0}})
    omega: tuple = (-1.25, 0.0)
    disk_radius: float = 1.0
    vanish_side: str | None = None
    # reference direction of phi = w . x for the Gamma split; defaults to
    # the weight of this solution's own exponent
    weight_dir: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("euclidean", "cylinder"):
            raise CgoError(f"unknown mode {self.mode!r}")
        if self.vanish_side not in (None, "plus", "minus"):
            raise CgoError("vanish_side must be None, 'plus' or 'minus'")
        if self.mode == "euclidean":
            a = np.asarray(self.alpha, dtype=float)
            b = np.asarray(self.beta, dtype=float)
            if abs(np.linalg.norm(a) - 1) > 1e-12 or abs(np.linalg.norm(b) - 1) > 1e-12:
                raise CgoError("alpha and beta must be unit vectors")
            if abs(a @ b) > 1e-12:
                raise CgoError(f"alpha . beta = {a @ b:.3e} must vanish")
            if self.h <= 0:
                raise CgoError("h must be positive")
            MultiIndex(tuple(self.I), len(a))
        else:
            if np.hypot(*self.omega) <= self.disk_radius:
                raise CgoError("omega must lie outside the transversal disk")

    @property
    def tau(self) -> float:
        return 1.0 / self.h if self.mode == "euclidean" else float(np.real(self.s))

    @property
    def zeta(self) -> np.ndarray:
        return (np.asarray(self.alpha) + 1j * np.asarray(self.beta)) / self.h

    def psi(self, grid: Grid) -> np.ndarray:
        X = grid.mesh()
        if self.mode == "euclidean":
            return sum(z * x for z, x in zip(self.zeta, X))
        return -self.s * X[0]

    def weight_alpha(self) -> np.ndarray:
        """Direction defining the Gamma split (see ``weight_dir``)."""
        if self.weight_dir is not None:
            return np.asarray(self.weight_dir, dtype=float)
        if self.mode == "euclidean":
            return np.asarray(self.alpha, dtype=float)
        return -np.sign(np.real(self.s)) * np.eye(3)[0]


@dataclass
class CgoSolution:
    spec: CgoSpec
    psi: np.ndarray
    amplitude: FormField
    correction: FormField
    residual_norm: float = 0.0
    boundary_residual: float = 0.0
    designated: dict | None = None

    @property
    def tau(self) -> float:
        return self.spec.tau

    @property
    def total(self) -> FormField:
        return self.amplitude + self.correction

    @property
    def Z(self) -> FormField:
        guard = float(np.max(np.abs(np.real(self.psi))))
        if guard > EXP_GUARD:
            raise OverflowError(f"|Re psi| reaches {guard:.1f} > {EXP_GUARD}; keep Z conjugated")
        return self.total * np.exp(self.psi)


def pair_conjugated(Q: EndoField | None, z1: CgoSolution, z2: CgoSolution) -> complex:
    """(Q Z1 | Z2)_M evaluated without materializing the exponentials."""
    g = z1.amplitude.grid
    w = np.exp(z1.psi + np.conj(z2.psi))
    u = z1.total if Q is None else Q.apply(z1.total)
    return complex(np.sum(g.volume_weights() * w * u.pointwise_inner(z2.total)))


# Euclidean mode -----------------------------------------------------------------

def euclidean_amplitude(spec: CgoSpec, grid: Grid) -> FormField:
    return FormField.from_components(grid, {tuple(spec.I): 1.0})


def euclidean_amplitude_residual(spec: CgoSpec, Q: EndoField | None, grid: Grid | None = None) -> FormField:
    """e^{-zeta.x} h^2 (-Delta + Q)(e^{zeta.x} dx^I), evaluated analytically.

    With zeta = (alpha + i beta)/h this is h^2 (-zeta.zeta + Q) dx^I.
    """
    if spec.mode != "euclidean":
        raise CgoError("euclidean residual needs a euclidean spec")
    grid = Q.grid if grid is None else grid
    A = euclidean_amplitude(spec, grid)
    zz = complex(np.sum(spec.zeta ** 2))
    out = A * (-(spec.h ** 2) * zz)
    if Q is not None:
        out = out + Q.apply(A) * spec.h ** 2
    return out


# cylinder mode --------------------------------------------------------------------

def polar_about(spec: CgoSpec, y2, y3):
    dy2 = np.asarray(y2) - spec.omega[0]
    dy3 = np.asarray(y3) - spec.omega[1]
    return np.hypot(dy2, dy3), np.arctan2(dy3, dy2)


def eikonal_residual(spec: CgoSpec, grid: Grid) -> float:
    """max | |dr|^2 - 1 | with dr from the analytic gradient of the distance."""
    X = grid.mesh()
    r, _ = polar_about(spec, X[-2], X[-1])
    g2 = (X[-2] - spec.omega[0]) / r
    g3 = (X[-1] - spec.omega[1]) / r
    return float(np.max(np.abs(g2 ** 2 + g3 ** 2 - 1)))


def _cartesian_series(spec: CgoSpec) -> list:
    """Cartesian slot components of sum_I b_I(theta) eta^I as trig series."""
    alg = algebra(3)
    total = [TrigSeries() for _ in range(alg.size)]
    for I, coeffs in spec.b.items():
        bI = TrigSeries(coeffs)
        if not bI.c:
            continue
        for a, comp in enumerate(frame_components(tuple(I))):
            if comp.c:
                total[a] = total[a] + comp * bI
    return total


def _quasimode_arrays(spec: CgoSpec, y2, y3, residual: bool):
    r, th = polar_about(spec, y2, y3)
    f = np.exp(1j * spec.s * r) / np.sqrt(r)
    out = []
    for c in _cartesian_series(spec):
        if not c.c:
            out.append(np.zeros_like(f))
        elif residual:
            # (-Delta_y - s^2)(f c) = -f (c/4 + c'') / r^2
            out.append(-f * c.weighted(lambda m: 0.25 - m * m)(th) / r ** 2)
        else:
            out.append(f * c(th))
    return np.stack(out)


def cylinder_quasimode(spec: CgoSpec, grid: Grid) -> FormField:
    """Quasimode amplitude on a 3D grid (x1, y2, y3) or a 2D grid (y2, y3)."""
    if spec.mode != "cylinder":
        raise CgoError("quasimode needs a cylinder spec")
    X = grid.mesh()
    vals = _quasimode_arrays(spec, X[-2], X[-1], residual=False)
    return _embed(grid, vals)


def quasimode_residual(spec: CgoSpec, grid: Grid) -> FormField:
    """(-Delta_{x'} - s^2) A exactly, sampled on the grid."""
    X = grid.mesh()
    return _embed(grid, _quasimode_arrays(spec, X[-2], X[-1], residual=True))


def _embed(grid: Grid, vals) -> FormField:
    if grid.n == 3:
        return FormField(grid, vals)
    # 2D transversal grid: keep the slots without dx1, relabeled
    alg3, alg2 = algebra(3), grid.alg
    out = FormField.zeros(grid)
    for a, s in enumerate(alg3.slots):
        if 0 in s:
            if np.any(vals[a]):
                raise CgoError("amplitude has dx1 components; use a 3D grid")
            continue
        out.data[alg2.index[tuple(j - 1 for j in s)]] = vals[a]
    return out


def quasimode_ratio(spec: CgoSpec, grid: Grid) -> float:
    """||(-Delta_{x'} - s^2) A|| / ||A|| on the grid."""
    return quasimode_residual(spec, grid).norm() / cylinder_quasimode(spec, grid).norm()


# correction solve -----------------------------------------------------------------

def _designated_masks(spec: CgoSpec, grid: Grid, width: int = 2):
    if spec.vanish_side is None:
        return None
    gs = GammaSplit(grid, alpha=spec.weight_alpha(), width=width)
    base = gs.gamma_minus() if spec.vanish_side == "minus" else gs.gamma_plus()
    return GammaSplit.complement(base)


def amplitude_of(spec: CgoSpec, grid: Grid) -> FormField:
    return euclidean_amplitude(spec, grid) if spec.mode == "euclidean" else cylinder_quasimode(spec, grid)


def analytic_residual(spec: CgoSpec, Q: EndoField | None, grid: Grid) -> FormField:
    """F = e^{-psi}(-Delta + Q)(e^{psi} A) from closed forms."""
    A = amplitude_of(spec, grid)
    if spec.mode == "euclidean":
        F = A * (-complex(np.sum(spec.zeta ** 2)))
    else:
        F = quasimode_residual(spec, grid)
    if Q is not None:
        F = F + Q.apply(A)
    return F


def solve_correction(spec: CgoSpec, Q: EndoField | None, grid: Grid, bc: str = "relative",
                     residual: str = "analytic", method: str = "lstsq", width: int = 2,
                     degrees=None, check_condition: bool = True) -> CgoSolution:
    """Solve e^{-psi}(-Delta + Q)(e^{psi} R) = -F with explicit boundary rows.

    On the designated set (the complement of Gamma_-/Gamma_+ for
    ``vanish_side`` minus/plus) the relative (or absolute) values of
    Z = e^psi (A + R) vanish.

    ``method="lstsq"`` imposes nothing else and returns the minimal-norm
    R, a concrete stand-in for the duality construction.  ``"direct"``
    adds zero boundary values for R everywhere else and solves the
    square system; its inverse grows like e^{tau diam}, so it is only
    usable at small tau.  ``residual="discrete"`` takes F from the
    discrete operator applied to A, so Z solves the discrete problem.
    """
    if method not in ("lstsq", "direct"):
        raise ValueError("method must be 'lstsq' or 'direct'")
    if residual not in ("analytic", "discrete"):
        raise ValueError("residual must be 'analytic' or 'discrete'")
    A = amplitude_of(spec, grid)
    psi = spec.psi(grid)
    if degrees is None and (Q is None or Q.degree_blocks()):
        live = np.any(A.data.reshape(A.data.shape[0], -1) != 0, axis=1)
        degrees = sorted({int(d) for d in grid.alg.degrees[live]})
    solver = BvpSolver(grid, Q, bc, rho=-psi, degrees=degrees, check_condition=check_condition)
    rows_A = solver.operator_rows(A)
    bmask = solver.boundary_row_mask()
    masks = _designated_masks(spec, grid, width)
    keep = np.zeros_like(bmask) if masks is None else solver.boundary_row_mask(masks)
    rhs = np.where(keep, -rows_A.data, 0.0)
    F = analytic_residual(spec, Q, grid) if residual == "analytic" else \
        FormField(grid, np.where(bmask, 0.0, rows_A.data))
    rhs = np.where(bmask, rhs, -F.data)
    if method == "direct":
        R = solver.solve_rows(FormField(grid, rhs))
    else:
        R, _ = solver.lstsq_rows(FormField(grid, rhs), keep | ~bmask)
    sel = keep & bmask
    bres = float(np.max(np.abs(solver.operator_rows(A + R).data[sel]))) if np.any(sel) else 0.0
    return CgoSolution(spec, psi, A, R, residual_norm=F.norm(), boundary_residual=bres,
                       designated=masks)


def decay_sweep(make_spec, taus, Q: EndoField | None, grid: Grid, **kw) -> list:
    """Rows (tau, ||A||, ||F||, ||R||, ||R|| tau / ||A||, boundary residual).

    Warns with :class:`DecayViolation` when the normalized ratio grows
    monotonically by more than a factor 10 across the sweep.
    """
    rows = []
    for tau in taus:
        sol = solve_correction(make_spec(tau), Q, grid, **kw)
        a = sol.amplitude.norm()
        r = sol.correction.norm()
        rows.append({"tau": tau, "A": a, "F": sol.residual_norm, "R": r,
                     "ratio": r * tau / a, "boundary": sol.boundary_residual})
    ratios = [row["ratio"] for row in rows]
    if len(ratios) > 1 and all(b > a for a, b in zip(ratios, ratios[1:])) \
            and ratios[-1] > 10 * ratios[0]:
        warnings.warn(f"correction ratio grew from {ratios[0]:.3g} to {ratios[-1]:.3g}",
                      DecayViolation)
    return rows


def product_split_residual(spec: CgoSpec, grid: Grid, Q: EndoField | None = None,
                           layers: int = 2) -> float:
    """Max interior gap between the grid residual and its degreewise split.

    Compares e^{s x1}(-Delta + Q)(e^{-s x1} A), built with grid operators
    on the 3D box, against dx^1 ^ (-Delta' - s^2)A' + (-Delta' - s^2)A'' + QA
    assembled on the transversal grid.  Needs moderate ``s`` since the
    exponential is materialized.
    """
    if spec.mode != "cylinder" or grid.n != 3:
        raise CgoError("product split needs a cylinder spec on a 3D grid")
    A = cylinder_quasimode(spec, grid)
    e = np.exp(-spec.s * grid.mesh()[0])
    if np.max(np.abs(np.log(np.abs(e)))) > EXP_GUARD:
        raise OverflowError("s too large to materialize the weight")
    lhs = -hodge_laplacian(A * e) * (1.0 / e)
    Ap, App = product_split(A)
    s2 = spec.s ** 2
    Fp = -hodge_laplacian(Ap) - Ap * s2
    Fpp = -hodge_laplacian(App) - App * s2
    rhs = product_join(Fp, Fpp, grid)
    if Q is not None:
        lhs = lhs + Q.apply(A)
        rhs = rhs + Q.apply(A)
    return (lhs - rhs).max_abs(layers) / max(A.max_abs(), 1e-300)
