"""Identity suites shared by the CLI and the acceptance tests.

Each suite returns plain dicts of residuals so results can be written to
JSON directly.  Convergence suites report errors per grid and the
observed orders log2(e_coarse / e_fine) / log2(m_fine / m_coarse).
"""
from __future__ import annotations

import numpy as np

from . import exterior_algebra as ea
from .boundary_calculus import faces_of, greens_residual, t_delta_expand, t_iN_d_expand, weitzenbock_residual
from .fields_and_grid import Grid, conjugation_residual, random_smooth_form


def _rand_coeff(rng, n, k=None) -> ea.GradedCoeff:
    c = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    u = ea.GradedCoeff(c, n)
    return u.part(k) if k is not None else u


def algebra_suite(n: int, draws: int = 1000, seed: int = 0) -> dict:
    """Max residuals over random metrics and coefficients.

    * ``star_star``: ** u - (-1)^{k(n-k)} u on pure k-forms;
    * ``codiff_symbol``: sign(k) * (xi ^ *u) starred back, against -i_xi u,
      i.e. the principal symbol of delta = sign * d * one degree at a time;
    * ``xieta``: the symmetrized product identity.
    """
    rng = np.random.default_rng(seed)
    out = {"star_star": 0.0, "codiff_symbol": 0.0, "xieta": 0.0}
    for _ in range(draws):
        m = ea.PointMetric.random(n, rng)
        k = int(rng.integers(0, n + 1))
        u = _rand_coeff(rng, n, k)
        scale = max(np.max(np.abs(u.comps)), 1.0)
        ss = ea.hodge_star(ea.hodge_star(u, m), m) - u * ea.star_star_sign(k, n)
        out["star_star"] = max(out["star_star"], float(np.max(np.abs(ss.comps))) / scale)
        xi = _rand_coeff(rng, n, 1)
        if k >= 1:
            sgn = ea.codiff_sign(k, n)
            lhs = ea.hodge_star(ea.wedge(xi, ea.hodge_star(u, m)), m) * sgn
            rhs = -ea.interior(xi, u, m)
            out["codiff_symbol"] = max(out["codiff_symbol"],
                                       float(np.max(np.abs((lhs - rhs).comps))) / scale)
        eta = _rand_coeff(rng, n, 1)
        w = _rand_coeff(rng, n)
        out["xieta"] = max(out["xieta"], ea.xieta_identity_residual(xi, eta, w, m)
                           / max(np.max(np.abs(w.comps)), 1.0))
    return out


def observed_orders(ms, errs) -> list:
    ms = np.asarray(ms, dtype=float)
    e = np.asarray(errs, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log((ms[i + 1] - 1) / (ms[i] - 1)))
            for i in range(len(e) - 1)]


def conjugation_suite(ms=(16, 32, 64), n_forms: int = 5, s: complex = 2 + 1j, seed: int = 0,
                      layers: int = 2) -> dict:
    """Interior max residual of the conjugated Laplacian identity per form and grid."""
    rng = np.random.default_rng(seed)
    fns = [random_smooth_form(3, rng, modes=2) for _ in range(n_forms)]
    errs = np.zeros((n_forms, len(ms)))
    for j, m in enumerate(ms):
        g = Grid.box(m)
        for i, f in enumerate(fns):
            errs[i, j] = conjugation_residual(f.sample(g), s).max_abs(layers)
    return {"ms": list(ms), "errors": errs.tolist(),
            "orders": [observed_orders(ms, e) for e in errs]}


def boundary_suite(ms=(16, 32, 64), seed: int = 3) -> dict:
    """Boundary expansion residuals (against analytic jets) and the Green identity."""
    rng = np.random.default_rng(seed)
    f = random_smooth_form(3, rng)
    v = random_smooth_form(3, rng)
    rows = {"t_delta": [], "t_iN_d": [], "weitzenbock_boundary": [], "weitzenbock_interior": [],
            "green": []}
    for m in ms:
        g = Grid.box(m)
        u = f.sample(g)
        rows["t_delta"].append(max(float(np.max(np.abs(t_delta_expand(u, fc, f)))) for fc in faces_of(g)))
        rows["t_iN_d"].append(max(float(np.max(np.abs(t_iN_d_expand(u, fc, f)))) for fc in faces_of(g)))
        w = weitzenbock_residual(u, f)
        rows["weitzenbock_boundary"].append(w["boundary"])
        rows["weitzenbock_interior"].append(w["interior"])
        rows["green"].append(abs(greens_residual(u, v.sample(g))))
    return {"ms": list(ms), "errors": rows,
            "orders": {k: observed_orders(ms, e) for k, e in rows.items()
                       if min(e) > 1e-13}}


def product_split_suite(ms=(17, 33, 65), s: complex = 2.0 + 0.5j) -> dict:
    """Degreewise split of the conjugated residual for a mixed-degree quasimode."""
    from .cgo import CgoSpec, product_split_residual
    spec = CgoSpec("cylinder", s=s, b={(2,): {0: 1.0, 1: 0.3}, (1,): {0: 1.0}, (2, 3): {-1: 0.5}})
    errs = []
    for m in ms:
        g = Grid.box(m, lower=(0.0, -0.6, -0.6), upper=(1.0, 0.6, 0.6))
        errs.append(product_split_residual(spec, g))
    return {"ms": list(ms), "errors": errs, "orders": observed_orders(ms, errs)}
