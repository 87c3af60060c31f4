"""Command-line entry point.

Every subcommand reads one JSON config, writes ``<subcommand>.json`` (a
summary with status, metrics, config hash and library version) and one or
more CSV tables into the output directory.  Exit codes: 0 pass, 1 the run
completed but a check failed, 2 config error, 3 numerical failure.  Errors
are also written as ``error.json``.

Flags and their environment overrides (flags win)::

    --config PATH   HODGECGO_CONFIG
    --out DIR       HODGECGO_OUT      (default ./hodgecgo-out)
    --threads N     HODGECGO_THREADS
    --seed U64      HODGECGO_SEED     (default: config "seed", else 0)
    --verbose       HODGECGO_VERBOSE  (any non-empty value other than 0)
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("hodgecgo")

SUBCOMMANDS = ("check-identities", "solve-bvp", "boundary-map", "cgo-residual",
               "ray-transform", "reconstruct", "carleman-sweep")


class ConfigError(ValueError):
    pass


# config helpers ----------------------------------------------------------------

def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _get(cfg: dict, key: str, default, kind=None):
    val = cfg.get(key, default)
    if kind is not None and val is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key!r}: {exc}") from None
    return val


def _check_keys(cfg: dict, allowed: set, where: str):
    extra = set(cfg) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def make_grid(spec: dict | None, default_m: int, lower=0.0, upper=1.0):
    from .fields_and_grid import Grid
    spec = dict(spec or {})
    _check_keys(spec, {"m", "lower", "upper"}, "grid")
    m = _get(spec, "m", default_m, int)
    try:
        return Grid.box(m, spec.get("lower", lower), spec.get("upper", upper))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


POTENTIAL_FAMILIES = ("zero", "scalar-ball", "gaussian-matrix", "random-seeded")


def make_potential(spec: dict | None, seed: int, center=(0.5, 0.5, 0.5)):
    """Named analytic families as :class:`~hodgecgo.reconstruction.Potential`."""
    from .reconstruction import Potential
    spec = dict(spec or {"family": "zero"})
    _check_keys(spec, {"family", "amp", "r0", "width", "sigma", "center", "matrix", "entries"},
                "potential")
    fam = spec.get("family", "zero")
    if fam not in POTENTIAL_FAMILIES:
        raise ConfigError(f"unknown potential family {fam!r}; choose from {POTENTIAL_FAMILIES}")
    c = tuple(spec.get("center", center))
    amp = _complex(spec.get("amp", 1.0))
    if fam == "zero":
        return Potential("zero", center=c)
    if fam == "scalar-ball":
        return Potential("ball", amp=amp, r0=float(spec.get("r0", 0.3)),
                         width=float(spec.get("width", 0.08)), center=c)
    if fam == "gaussian-matrix":
        M = spec.get("matrix")
        if M is None:
            M = np.eye(8)
        else:
            M = np.array([[_complex(x) for x in row] for row in M])
            if M.shape != (8, 8):
                raise ConfigError("potential matrix must be 8 x 8")
        return Potential("gaussian", amp=amp, sigma=float(spec.get("sigma", 0.15)), center=c, matrix=M)
    rng = np.random.default_rng(seed)
    M = np.zeros((8, 8), dtype=complex)
    blk = slice(1, 4)
    M[blk, blk] = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    M[0, 0] = rng.standard_normal()
    return Potential("gaussian", amp=amp, sigma=float(spec.get("sigma", 0.15)), center=c, matrix=M)


# output -----------------------------------------------------------------------

class Run:
    def __init__(self, sub: str, cfg: dict, out: Path, seed: int):
        self.sub = sub
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.hash = config_hash({"subcommand": sub, "config": cfg, "seed": seed})
        self.files = []

    def csv(self, name: str, rows: list, fields: list | None = None):
        if not rows:
            return
        fields = fields or list(rows[0])
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["# config_hash=" + self.hash, "version=" + __version__])
            w.writerow(fields)
            for r in rows:
                w.writerow([_fmt(r[k]) for k in fields])
        self.files.append(name)

    def summary(self, metrics: dict, checks: dict) -> int:
        ok = all(bool(v) for v in checks.values())
        doc = {"subcommand": self.sub, "status": "pass" if ok else "fail",
               "checks": {k: bool(v) for k, v in checks.items()}, "metrics": _jsonable(metrics),
               "config_hash": self.hash, "version": __version__, "seed": self.seed,
               "files": self.files}
        with open(self.out / f"{self.sub}.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("%s: %s", self.sub, doc["status"])
        return 0 if ok else 1


def _fmt(v):
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# subcommands -------------------------------------------------------------------

def cmd_check_identities(run: Run) -> int:
    from .suites import algebra_suite, boundary_suite, conjugation_suite, product_split_suite
    cfg = run.cfg
    _check_keys(cfg, {"draws", "dims", "grids", "split_grids", "forms", "s", "tol", "min_order", "seed"},
                "check-identities")
    draws = _get(cfg, "draws", 1000, int)
    tol = _get(cfg, "tol", 1e-12, float)
    min_order = _get(cfg, "min_order", {"conjugation": 1.8, "boundary": 0.9, "split": 1.8})
    grids = tuple(cfg.get("grids", (16, 32, 64)))
    metrics, checks, rows = {}, {}, []
    for n in cfg.get("dims", (3, 4)):
        r = algebra_suite(int(n), draws, run.seed)
        metrics[f"algebra_n{n}"] = r
        for k, v in r.items():
            checks[f"algebra_n{n}_{k}"] = v <= tol
            rows.append({"suite": "algebra", "name": f"n{n}_{k}", "m": "", "value": v})
    conj = conjugation_suite(grids, _get(cfg, "forms", 5, int), _complex(cfg.get("s", [2, 1])), run.seed)
    metrics["conjugation"] = conj
    checks["conjugation_order"] = min(min(o) for o in conj["orders"]) >= min_order["conjugation"]
    for i, e in enumerate(conj["errors"]):
        rows += [{"suite": "conjugation", "name": f"form{i}", "m": m, "value": v} for m, v in zip(grids, e)]
    bd = boundary_suite(grids, run.seed + 3)
    metrics["boundary"] = bd
    checks["boundary_order"] = min(min(o) for o in bd["orders"].values()) >= min_order["boundary"]
    for k, e in bd["errors"].items():
        rows += [{"suite": "boundary", "name": k, "m": m, "value": v} for m, v in zip(grids, e)]
    sp = product_split_suite(tuple(cfg.get("split_grids", (17, 33, 65))))
    metrics["product_split"] = sp
    checks["split_order"] = min(sp["orders"]) >= min_order["split"]
    rows += [{"suite": "product_split", "name": "residual", "m": m, "value": v}
             for m, v in zip(sp["ms"], sp["errors"])]
    run.csv("identities.csv", rows, ["suite", "name", "m", "value"])
    return run.summary(metrics, checks)


def _boundary_source(grid, seed: int):
    from .fields_and_grid import random_smooth_form
    return random_smooth_form(3, np.random.default_rng(seed), modes=1)


def cmd_solve_bvp(run: Run) -> int:
    from .bvp_solver import BvpSolver, boundary_data
    from .container import save
    cfg = run.cfg
    _check_keys(cfg, {"grid", "kind", "potential", "degrees", "tol", "seed", "save"}, "solve-bvp")
    kind = cfg.get("kind", "relative")
    if kind not in ("relative", "absolute"):
        raise ConfigError("kind must be 'relative' or 'absolute'")
    g = make_grid(cfg.get("grid"), 17)
    Q = make_potential(cfg.get("potential", {"family": "gaussian-matrix"}), run.seed).endo(g)
    data = boundary_data(_boundary_source(g, run.seed).sample(g), kind)
    sol = BvpSolver(g, Q, kind, degrees=cfg.get("degrees"))
    u = sol.solve(data)
    res = sol.residual(u)
    rows = [{"slot": "".join(str(i + 1) for i in s) or "0", "l2": float(np.sqrt(abs(np.sum(
        g.volume_weights() * np.abs(u.data[j]) ** 2))))} for j, s in enumerate(g.alg.slots)]
    run.csv("solution_norms.csv", rows)
    if cfg.get("save", True):
        save(run.out / "solution.hcgo", u)
        run.files.append("solution.hcgo")
    return run.summary({"residual": res, "grid": g.header(), "kind": kind},
                       {"residual": res <= _get(cfg, "tol", 1e-8, float)})


def cmd_boundary_map(run: Run) -> int:
    from .bvp_solver import assemble_boundary_map
    from .container import save
    cfg = run.cfg
    _check_keys(cfg, {"grid", "kind", "potential", "seed"}, "boundary-map")
    kind = cfg.get("kind", "RA")
    if kind not in ("RA", "AR"):
        raise ConfigError("kind must be 'RA' or 'AR'")
    g = make_grid(cfg.get("grid"), 7)
    Q = make_potential(cfg.get("potential", {"family": "gaussian-matrix"}), run.seed).endo(g)
    bm = assemble_boundary_map(g, Q, kind)
    M = bm.matrix
    save(run.out / "boundary_map.hcgo", bm)
    run.files.append("boundary_map.hcgo")
    run.csv("dofs.csv", [{"face_axis": r["face"][0], "face_side": r["face"][1], "slot": r["slot"],
                          "offset": r["offset"], "count": r["count"]} for r in bm.dofs.table()])
    finite = bool(np.all(np.isfinite(M)))
    return run.summary({"shape": list(M.shape), "fro_norm": float(np.linalg.norm(M)), "kind": kind},
                       {"finite": finite})


def cmd_cgo_residual(run: Run) -> int:
    from .cgo import (CgoSpec, decay_sweep, euclidean_amplitude_residual, quasimode_ratio)
    from .fields_and_grid import Grid
    cfg = run.cfg
    _check_keys(cfg, {"grid", "taus", "potential", "quasimode_taus", "quasimode_m", "seed",
                      "max_variation"}, "cgo-residual")
    g = make_grid(cfg.get("grid"), 25)
    Q = make_potential(cfg.get("potential", {"family": "gaussian-matrix"}), run.seed).endo(g)
    taus = [float(t) for t in cfg.get("taus", (10, 20, 40))]
    amp0 = euclidean_amplitude_residual(CgoSpec(h=1 / taus[0]), None, g).max_abs()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = decay_sweep(lambda t: CgoSpec(h=1 / t), taus, Q, g)
    ratios = [r["ratio"] for r in rows]
    var = max(ratios) / min(ratios)
    qt = [float(t) for t in cfg.get("quasimode_taus", (20, 40, 80))]
    qm = _get(cfg, "quasimode_m", 96, int)
    g2 = Grid.box(qm, -0.6, 0.6, n=2)
    qrows = [{"s": t, "ratio": quasimode_ratio(CgoSpec("cylinder", s=t), g2)} for t in qt]
    qr = [r["ratio"] for r in qrows]
    run.csv("decay.csv", rows)
    run.csv("quasimode.csv", qrows)
    lim = _get(cfg, "max_variation", 10.0, float)
    return run.summary({"euclidean_q0_residual": amp0, "ratio_variation": var,
                        "quasimode_variation": max(qr) / min(qr),
                        "warnings": [str(w.message) for w in caught]},
                       {"euclidean_q0": amp0 <= 1e-12, "decay": var < lim,
                        "quasimode": max(qr) / min(qr) <= 3.0})


def cmd_ray_transform(run: Run) -> int:
    from .ray_transform import DiskGrid, SimpleSurface, sinogram
    cfg = run.cfg
    _check_keys(cfg, {"m", "lam", "field", "c", "n_entry", "n_dir", "seed"}, "ray-transform")
    grid = DiskGrid(_get(cfg, "m", 128, int))
    lam = _get(cfg, "lam", 0.0, float)
    surf = SimpleSurface(_get(cfg, "c", 0.0, float))
    kind = cfg.get("field", "one")
    X, Y = grid.mesh()
    if kind == "one":
        f = np.ones_like(X)
    elif kind == "bump":
        f = np.exp(-((X - 0.2) ** 2 + Y ** 2) / 0.05)
    else:
        raise ConfigError("field must be 'one' or 'bump'")
    ne, nd = _get(cfg, "n_entry", 36, int), _get(cfg, "n_dir", 37, int)
    A, D, S = sinogram(surf, f, lam, grid, ne, nd)
    rows = [{"entry": float(a), "direction": float(d), "value": complex(v)}
            for a, d, v in zip(A.ravel(), D.ravel(), S.ravel())]
    run.csv("sinogram.csv", rows)
    metrics = {"max": float(np.max(np.abs(S)))}
    checks = {"finite": bool(np.all(np.isfinite(S)))}
    if kind == "one" and surf.flat and nd % 2 == 1:
        # the middle direction of each fan is the diameter
        diam = S[:, nd // 2]
        exact = 2.0 if lam == 0 else (1 - np.exp(-4 * lam)) / (2 * lam)
        err = float(np.max(np.abs(diam - exact)))
        metrics.update({"diameter_value": complex(diam[0]), "diameter_exact": exact, "diameter_error": err})
        checks["diameter"] = err <= 1e-6
    return run.summary(metrics, checks)


def cmd_reconstruct(run: Run) -> int:
    from .reconstruction import fourier_slice_recover, invert_fourier
    cfg = run.cfg
    _check_keys(cfg, {"potential1", "potential2", "kmax", "n", "h0", "richardson", "tol", "seed",
                      "max_error", "alpha_hint"}, "reconstruct")
    p1 = make_potential(cfg.get("potential1"), run.seed, center=(0, 0, 0))
    cfg.setdefault("potential2", {"family": "gaussian-matrix", "amp": 2.0,
                                  "matrix": np.diag([1.0] + [0.0] * 7).tolist()})
    p2 = make_potential(cfg["potential2"], run.seed, center=(0, 0, 0))
    n = _get(cfg, "n", 32, int)
    kmax = _get(cfg, "kmax", 4 * np.pi, float)
    hint = cfg.get("alpha_hint")
    if hint is not None and (len(hint) != 3 or not np.any(hint)):
        raise ConfigError("alpha_hint must be a nonzero 3-vector")
    fs = fourier_slice_recover(p1, p2, kmax=kmax, n=n, h0=_get(cfg, "h0", 0.5, float), alpha_hint=hint,
                               richardson=bool(cfg.get("richardson", True)))
    rows = []
    for e, vals in fs.values.items():
        for m, v in zip(fs.modes, vals):
            rows.append({"J": e[0], "I": e[1], "m1": int(m[0]), "m2": int(m[1]), "m3": int(m[2]),
                         "value": complex(v)})
    run.csv("slices.csv", rows)
    smax = max(float(np.max(np.abs(v))) for v in fs.values.values())
    metrics = {"n_frequencies": int(len(fs.modes)), "slice_max": smax}
    checks = {}
    if p1.kind == "zero":
        inv = invert_fourier(fs, n, truth=p2)
        metrics["relative_l2"] = {f"{J},{I}": v for (J, I), v in inv["errors"].items()}
        checks["error"] = max(inv["errors"].values()) <= _get(cfg, "max_error", 0.1, float)
    elif cfg.get("potential1") == cfg.get("potential2"):
        checks["identical"] = smax <= _get(cfg, "tol", 1e-10, float)
    return run.summary(metrics, checks)


def cmd_carleman_sweep(run: Run) -> int:
    from .carleman_checker import carleman_sweep, carleman_family
    cfg = run.cfg
    _check_keys(cfg, {"grid", "bc", "hs", "potential", "factor", "seed"}, "carleman-sweep")
    g = make_grid(cfg.get("grid"), 24)
    bc = cfg.get("bc", "absolute")
    hs = [float(h) for h in cfg.get("hs", (0.1, 0.05, 0.025))]
    Q = make_potential(cfg.get("potential"), run.seed).endo(g)
    if not np.any(Q.mats):
        Q = None
    rep = carleman_sweep(lambda h: carleman_family(g, h, bc, run.seed), Q, bc, hs,
                         factor=_get(cfg, "factor", 0.5, float))
    run.csv("sweep.csv", rep.rows())
    return run.summary({"min_ratio": {m: rep.min_ratio(m) for m in rep.members},
                        "largest_h_ratio": {m: rep.ratio[m][0] for m in rep.members}},
                       {m: rep.passed(m) for m in rep.members})


COMMANDS = {
    "check-identities": cmd_check_identities,
    "solve-bvp": cmd_solve_bvp,
    "boundary-map": cmd_boundary_map,
    "cgo-residual": cmd_cgo_residual,
    "ray-transform": cmd_ray_transform,
    "reconstruct": cmd_reconstruct,
    "carleman-sweep": cmd_carleman_sweep,
}


# entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hodgecgo", description=__doc__.split("\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", default=os.environ.get("HODGECGO_CONFIG"))
    p.add_argument("--out", default=os.environ.get("HODGECGO_OUT", "hodgecgo-out"))
    p.add_argument("--threads", type=int, default=_env_int("HODGECGO_THREADS"))
    p.add_argument("--seed", type=int, default=_env_int("HODGECGO_SEED"))
    p.add_argument("--verbose", action="store_true",
                   default=os.environ.get("HODGECGO_VERBOSE", "") not in ("", "0"))
    p.add_argument("--version", action="version", version=__version__)
    return p


def _env_int(name):
    v = os.environ.get(name)
    return int(v) if v not in (None, "") else None


def _error(out: Path, code: int, exc: BaseException) -> int:
    doc = {"status": "error", "exit_code": code, "error_type": type(exc).__name__,
           "message": str(exc), "version": __version__}
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "error.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        pass
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(cfg, dict):
                raise ConfigError("config must be a JSON object")
        sub = cfg.pop("subcommand", args.subcommand)
        if sub != args.subcommand:
            raise ConfigError(f"config is for {sub!r}, not {args.subcommand!r}")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if seed < 0 or seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").unlink(missing_ok=True)
        run = Run(args.subcommand, cfg, out, seed)
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=max(1, args.threads)):
                return COMMANDS[args.subcommand](run)
        return COMMANDS[args.subcommand](run)
    except ConfigError as exc:
        return _error(out, 2, exc)
    except (KeyError, TypeError) as exc:
        return _error(out, 2, ConfigError(f"malformed config: {exc}"))
    except Exception as exc:  # numerical failures of any stage
        from .bvp_solver import NearSingular
        from .cgo import CgoError
        if isinstance(exc, CgoError) and "must" in str(exc):
            return _error(out, 2, exc)
        if isinstance(exc, (NearSingular, ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError)):
            return _error(out, 3, exc)
        raise


if __name__ == "__main__":
    sys.exit(main())
