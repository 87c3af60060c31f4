"""Relative and absolute boundary value problems for -Delta + Q on the box.

The unknown vector is slot-major: entry ``slot * N + p`` holds component
``slot`` at flat grid point ``p`` (C order).  Interior rows carry
``-L + Q`` with ``L`` the compact 7-point componentwise Laplacian, which
is the Hodge Laplacian of the flat metric.  Rows at face points are
replaced by boundary conditions on the owning face:

* relative: ``t u = f`` and ``t delta u = g``,
* absolute: ``t *u = f`` and ``t delta *u = g``,

where ``delta`` is the same sparse operator as :func:`codiff` (one-sided
second-order normal stencils at the faces).  Each degree is solved
separately when ``Q`` preserves degrees.

Boundary degrees of freedom are laid out face by face in
:data:`~hodgecgo.boundary_calculus.FACE_ORDER`, owned points in C order
of the face array, and slots without the face normal in ascending slot
order.  The ``f`` block comes first, then the ``g`` block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary_calculus import (BoundaryField, face_index, faces_of, owned_mask, trace_t)
from .fields_and_grid import EndoField, FormField, FormFunction, Grid, codiff, hodge_star

KINDS = ("relative", "absolute")
RCOND_MIN = 1e-12


class NearSingular(RuntimeError):
    """The discrete problem has (numerically) zero as an eigenvalue."""


# sparse building blocks ------------------------------------------------------

def gradient_matrix_1d(m: int, step: float) -> sp.csr_matrix:
    """Matrix of ``np.gradient(., step, edge_order=2)`` on m points."""
    D = sp.lil_matrix((m, m))
    for i in range(1, m - 1):
        D[i, i - 1] = -0.5
        D[i, i + 1] = 0.5
    D[0, 0:3] = [-1.5, 2.0, -0.5]
    D[m - 1, m - 3:m] = [0.5, -2.0, 1.5]
    return (D / step).tocsr()


def second_matrix_1d(m: int, step: float) -> sp.csr_matrix:
    e = np.ones(m)
    L = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]).tolil()
    L[0, 0:4] = [2, -5, 4, -1]
    L[m - 1, m - 4:m] = [-1, 4, -5, 2]
    return (L / step ** 2).tocsr()


def _along(grid: Grid, M: sp.spmatrix, axis: int) -> sp.csr_matrix:
    out = None
    for a in range(grid.n):
        f = M if a == axis else sp.identity(grid.shape[a], format="csr")
        out = f if out is None else sp.kron(out, f, format="csr")
    return out


class Discretization:
    """Sparse operators on a Euclidean box grid, cached per grid."""

    def __init__(self, grid: Grid):
        if grid.mode != "euclidean":
            raise NotImplementedError("the BVP solver supports Euclidean grids only")
        self.grid = grid
        self.N = grid.npoints
        self.alg = grid.alg
        self.D = [_along(grid, gradient_matrix_1d(grid.shape[a], grid.spacing[a]), a)
                  for a in range(grid.n)]
        self.L = sum(_along(grid, second_matrix_1d(grid.shape[a], grid.spacing[a]), a)
                     for a in range(grid.n)).tocsr()
        alg = self.alg
        # delta = -sum_b i_b d_b in flat coordinates
        self.delta = (-sum(sp.kron(sp.csr_matrix(alg.con[b]), self.D[b]) for b in range(grid.n))).tocsr()
        self.d = sum(sp.kron(sp.csr_matrix(alg.ext[b]), self.D[b]) for b in range(grid.n)).tocsr()
        S = np.zeros((alg.size, alg.size))
        S[alg.comp, np.arange(alg.size)] = alg.comp_sign
        self.star_small = S
        self.star = sp.kron(sp.csr_matrix(S), sp.identity(self.N), format="csr")
        self.delta_star = (self.delta @ self.star).tocsr()
        self._faces = None

    def face_table(self) -> list:
        """[(face, owned face-array indices, owned flat grid indices)]."""
        if self._faces is None:
            g = self.grid
            flat = np.arange(self.N).reshape(g.shape)
            out = []
            for f in faces_of(g):
                mask = owned_mask(g, f)
                loc = np.flatnonzero(mask.ravel())
                idx = flat[face_index(g, f)].ravel()[loc]
                out.append((f, loc, idx))
            self._faces = out
        return self._faces

    def boundary_points(self) -> np.ndarray:
        return np.concatenate([t[2] for t in self.face_table()])


# boundary data ---------------------------------------------------------------

@dataclass
class BoundaryData:
    kind: str
    f: BoundaryField
    g: BoundaryField

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")

    def __sub__(self, other):
        return BoundaryData(self.kind, self.f - other.f, self.g - other.g)

    def __add__(self, other):
        return BoundaryData(self.kind, self.f + other.f, self.g + other.g)

    def __mul__(self, c):
        return BoundaryData(self.kind, self.f * c, self.g * c)

    __rmul__ = __mul__

    def restrict(self, masks: dict) -> "BoundaryData":
        return BoundaryData(self.kind, self.f.restrict(masks), self.g.restrict(masks))


def relative_data(u: FormField) -> BoundaryData:
    """(t u, t delta u) from grid operators."""
    return BoundaryData("relative", trace_t(u), trace_t(codiff(u)))


def absolute_data(u: FormField) -> BoundaryData:
    su = hodge_star(u)
    return BoundaryData("absolute", trace_t(su), trace_t(codiff(su)))


def boundary_data(u: FormField, kind: str) -> BoundaryData:
    return relative_data(u) if kind == "relative" else absolute_data(u)


def _function_codiff(fn: FormFunction, X):
    from .exterior_algebra import algebra
    alg = algebra(fn.n)
    return -sum(alg.con[b] @ fn.derivative(X, np.eye(fn.n)[b]) for b in range(fn.n))


def analytic_boundary_data(fn: FormFunction, grid: Grid, kind: str) -> BoundaryData:
    """Boundary data of an analytic form, with jets from ``fn`` (Euclidean)."""
    from .boundary_calculus import face_axes, face_points, _drop_normal
    alg = grid.alg
    S = np.zeros((alg.size, alg.size))
    S[alg.comp, np.arange(alg.size)] = alg.comp_sign
    fs, gs = {}, {}
    for f in faces_of(grid):
        X = face_points(grid, f)
        shp = (alg.size,) + tuple(grid.shape[b] for b in face_axes(grid, f))
        if kind == "relative":
            a = fn(X)
            b = _function_codiff(fn, X)
        else:
            star_fn = FormFunction(lambda Y: S @ fn(Y), fn.n, fn.step)
            a = star_fn(X)
            b = _function_codiff(star_fn, X)
        fs[f] = _drop_normal(grid, f, a.reshape(shp))
        gs[f] = _drop_normal(grid, f, b.reshape(shp))
    return BoundaryData(kind, BoundaryField(grid, fs), BoundaryField(grid, gs))


# solver ----------------------------------------------------------------------

def _q_block(Q: EndoField | None, slots: np.ndarray, N: int) -> sp.csr_matrix:
    n = len(slots)
    if Q is None:
        return sp.csr_matrix((n * N, n * N), dtype=complex)
    rows, cols, vals = [], [], []
    base = np.arange(N)
    for i, si in enumerate(slots):
        for j, sj in enumerate(slots):
            q = Q.mats[si, sj].ravel()
            nz = np.flatnonzero(q)
            if nz.size:
                rows.append(i * N + base[nz])
                cols.append(j * N + base[nz])
                vals.append(q[nz])
    if not rows:
        return sp.csr_matrix((n * N, n * N), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n * N, n * N))


class _Block:
    """One degree block: the assembled matrix and its solver.

    A single slot is factorized directly.  Coupled slots are solved by
    GMRES preconditioned with direct factorizations of the per-slot
    diagonal blocks; the slots interact only through boundary rows and
    the off-diagonal entries of Q, so few iterations are needed.  A
    monolithic factorization of the coupled block fills in badly.
    """

    def __init__(self, slots, matrix, interior, segments, N, check_condition=True):
        self.slots = slots
        self.matrix = matrix
        self.interior = interior
        # (label "f"|"g", slot, face, face-local points, row positions)
        self.segments = segments
        self.N = N
        self.iterations = 0
        nb = len(slots)
        self.lus = []
        rconds = []
        for i in range(nb):
            D = matrix[i * N:(i + 1) * N, i * N:(i + 1) * N].tocsc()
            try:
                lu = spla.splu(D)
            except RuntimeError as exc:
                raise NearSingular(str(exc)) from exc
            self.lus.append(lu)
            if check_condition:
                rconds.append(_rcond(D, lu))
        self.rcond = min(rconds) if rconds else None
        if self.rcond is not None and (not np.isfinite(self.rcond) or self.rcond < RCOND_MIN):
            raise NearSingular(
                f"reciprocal condition estimate {self.rcond:.2e} for slots {list(slots)}")

    def _prec(self, x):
        N = self.N
        return np.concatenate([lu.solve(x[i * N:(i + 1) * N]) for i, lu in enumerate(self.lus)])

    def solve(self, b: np.ndarray, rtol: float = 1e-12, maxiter: int = 200) -> np.ndarray:
        if len(self.slots) == 1:
            return self.lus[0].solve(b)
        n = self.matrix.shape[0]
        P = spla.LinearOperator((n, n), matvec=self._prec, dtype=complex)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(self.matrix, b, x0=self._prec(b), M=P, rtol=rtol, atol=0.0,
                             restart=50, maxiter=maxiter, callback=cb, callback_type="pr_norm")
        self.iterations = count[0]
        rel = np.linalg.norm(self.matrix @ x - b) / max(np.linalg.norm(b), 1e-300)
        if info != 0 or rel > 1e3 * rtol:
            raise NearSingular(f"iterative solve stagnated at relative residual {rel:.2e}")
        return x


class BvpSolver:
    """Factorized discrete problem for one Q and one boundary condition kind.

    ``rho`` (array on the grid, optional) conjugates the whole system:
    the matrix becomes ``diag(e^rho) A diag(e^-rho)``, which is the
    problem satisfied by ``e^rho u`` when ``u`` solves the original one.
    """

    def __init__(self, grid: Grid, Q: EndoField | None, kind: str = "relative",
                 rho: np.ndarray | None = None, degrees=None, check_condition: bool = True):
        if kind not in KINDS:
            raise ValueError(f"unknown boundary condition kind {kind!r}")
        self.grid = grid
        self.Q = Q
        self.kind = kind
        self.disc = Discretization(grid)
        self.rho = None if rho is None else np.broadcast_to(
            np.asarray(rho, dtype=complex), grid.shape).ravel()
        self.check_condition = check_condition
        alg = grid.alg
        if Q is None or Q.degree_blocks():
            ks = range(grid.n + 1) if degrees is None else degrees
            self.blocks_slots = [alg.degree_slots(k) for k in ks]
        else:
            if degrees is not None:
                raise ValueError("Q couples degrees; cannot solve selected degrees only")
            self.blocks_slots = [np.arange(alg.size)]
        self._blocks = {}
        self._assembled = {}

    def _build(self, slots):
        disc, alg = self.disc, self.grid.alg
        N = disc.N
        nb = len(slots)
        A = (-sp.kron(sp.identity(nb), disc.L) + _q_block(self.Q, slots, N)).tocsr()
        cols = np.concatenate([s * N + np.arange(N) for s in slots])
        f_op = sp.identity(alg.size * N, format="csr") if self.kind == "relative" else disc.star
        g_op = disc.delta if self.kind == "relative" else disc.delta_star
        rows, positions, segments = [], [], []
        for face, loc, idx in disc.face_table():
            a = face[0]
            free = list(range(nb))
            for lab, op in (("f", f_op), ("g", g_op)):
                for s in np.flatnonzero(alg.slots_without(a)):
                    r = op[s * N + idx][:, cols]
                    if r.nnz == 0:
                        continue
                    # put the row on the unknown it controls at its own point,
                    # which keeps the diagonal nonzero for the factorization
                    diag = [abs(r[0, j * N + idx[0]]) for j in free]
                    if not free or max(diag) == 0:
                        raise RuntimeError("boundary rows do not determine the unknowns per point")
                    j = free.pop(int(np.argmax(diag)))
                    pos = j * N + idx
                    rows.append(r)
                    positions.append(pos)
                    segments.append((lab, int(s), face, loc, pos))
            if free:
                raise RuntimeError("boundary row count does not match the unknowns per point")
        R = sp.vstack(rows).tocsr()
        P = np.concatenate(positions)
        keep = np.ones(nb * N)
        keep[P] = 0.0
        place = sp.csr_matrix((np.ones(len(P)), (P, np.arange(len(P)))), shape=(nb * N, len(P)))
        M = (sp.diags(keep) @ A + place @ R).tocoo()
        if self.rho is not None:
            rho_u = np.tile(self.rho, nb)
            M = sp.coo_matrix((M.data * np.exp(rho_u[M.row] - rho_u[M.col]), (M.row, M.col)),
                              shape=M.shape)
        return M.tocsc(), np.flatnonzero(keep), segments

    def assemble(self, bi: int) -> tuple:
        """(matrix, interior positions, boundary segments) of block ``bi``, unfactorized."""
        if bi not in self._assembled:
            self._assembled[bi] = self._build(self.blocks_slots[bi])
        return self._assembled[bi]

    def block(self, bi: int) -> _Block:
        if bi not in self._blocks:
            slots = self.blocks_slots[bi]
            M, interior, segments = self.assemble(bi)
            self._blocks[bi] = _Block(slots, M, interior, segments, self.disc.N,
                                      self.check_condition)
        return self._blocks[bi]

    def factorize(self) -> "BvpSolver":
        for bi in range(len(self.blocks_slots)):
            self.block(bi)
        return self

    def _rhs(self, blk: _Block, data, interior_vals) -> np.ndarray:
        b = np.zeros(blk.matrix.shape[0], dtype=complex)
        if interior_vals is not None:
            b[blk.interior] = interior_vals[blk.interior]
        if data is not None:
            if data.kind != self.kind:
                raise ValueError("boundary data kind does not match the problem")
            for lab, s, face, loc, pos in blk.segments:
                src = data.f if lab == "f" else data.g
                arr = src.faces[face]
                b[pos] = arr[s].ravel()[loc]
        return b

    def solve(self, data: BoundaryData | None = None, source: FormField | None = None) -> FormField:
        """Solve with boundary ``data`` and interior right side ``source``.

        For a conjugated system both are given in the conjugated frame.
        """
        N = self.disc.N
        out = FormField.zeros(self.grid)
        for bi, slots in enumerate(self.blocks_slots):
            iv = None
            if source is not None:
                iv = np.concatenate([source.data[s].ravel() for s in slots])
                if not np.any(iv):
                    iv = None
            if iv is None and (data is None or not _touches(data, slots, self.kind, self.grid)):
                continue
            blk = self.block(bi)
            b = self._rhs(blk, data, iv)
            if not np.any(b):
                continue
            x = blk.solve(b)
            for i, s in enumerate(slots):
                out.data[s] = x[i * N:(i + 1) * N].reshape(self.grid.shape)
        return out

    def operator_rows(self, u: FormField) -> FormField:
        """Apply the assembled (interior and boundary) rows to ``u``."""
        N = self.disc.N
        out = FormField.zeros(self.grid)
        for bi, slots in enumerate(self.blocks_slots):
            M = self.assemble(bi)[0]
            x = np.concatenate([u.data[s].ravel() for s in slots])
            y = M @ x
            for i, s in enumerate(slots):
                out.data[s] = y[i * N:(i + 1) * N].reshape(self.grid.shape)
        return out

    def solve_rows(self, rows: FormField) -> FormField:
        """Solve with right side given by row values.

        ``rows.data[slot]`` at point ``p`` is the value of the row stored at
        that position, the layout produced by :meth:`operator_rows`.
        """
        N = self.disc.N
        out = FormField.zeros(self.grid)
        for bi, slots in enumerate(self.blocks_slots):
            b = np.concatenate([rows.data[s].ravel() for s in slots])
            if not np.any(b):
                continue
            x = self.block(bi).solve(b)
            for i, s in enumerate(slots):
                out.data[s] = x[i * N:(i + 1) * N].reshape(self.grid.shape)
        return out

    def lstsq_rows(self, rows: FormField, active: np.ndarray, tol: float = 1e-12,
                   maxiter: int = 50000) -> tuple:
        """Minimal-norm solution of the rows marked ``active``.

        Rows outside ``active`` (row layout, as from
        :meth:`boundary_row_mask`) are dropped, so the system is
        underdetermined and LSMR started at zero returns its minimal
        Euclidean-norm solution.  Returns ``(u, relative residual)``.
        """
        N = self.disc.N
        out = FormField.zeros(self.grid)
        num = den = 0.0
        for bi, slots in enumerate(self.blocks_slots):
            b = np.concatenate([rows.data[s].ravel() for s in slots])
            keep = np.concatenate([active[s].ravel() for s in slots])
            if not np.any(b[keep]):
                continue
            M = self.assemble(bi)[0].tocsr()[keep]
            # row equilibration leaves the solution set unchanged
            d = 1.0 / np.sqrt(np.asarray(abs(M).power(2).sum(axis=1)).ravel())
            M = sp.diags(d) @ M
            bk = d * b[keep]
            x = spla.lsmr(M, bk, atol=tol, btol=tol, maxiter=maxiter)[0]
            num += np.linalg.norm(M @ x - bk) ** 2
            den += np.linalg.norm(bk) ** 2
            for i, s in enumerate(slots):
                out.data[s] = x[i * N:(i + 1) * N].reshape(self.grid.shape)
        return out, float(np.sqrt(num / den)) if den else 0.0

    def boundary_row_mask(self, masks: dict | None = None) -> np.ndarray:
        """Boolean row-layout array marking boundary rows at points in ``masks``.

        ``masks=None`` marks every boundary row.
        """
        N = self.disc.N
        out = np.zeros((self.grid.alg.size, N), dtype=bool)
        for bi, slots in enumerate(self.blocks_slots):
            for lab, s, face, loc, pos in self.assemble(bi)[2]:
                sel = np.ones(len(loc), dtype=bool) if masks is None else \
                    np.asarray(masks[face]).ravel()[loc]
                j, p = np.divmod(pos[sel], N)
                out[np.asarray(slots)[j], p] = True
        return out.reshape((self.grid.alg.size,) + self.grid.shape)

    def residual(self, u: FormField) -> float:
        """Max interior residual of (-L + Q) u relative to max |u| (unconjugated)."""
        disc = self.disc
        r = -np.stack([disc.L @ u.data[s].ravel() for s in range(self.grid.alg.size)])
        if self.Q is not None:
            r = r + self.Q.apply(u).data.reshape(r.shape)
        mask = np.ones(disc.N, dtype=bool)
        mask[disc.boundary_points()] = False
        return float(np.abs(r[:, mask]).max() / max(np.abs(u.data).max(), 1e-300))


def _touches(data: BoundaryData, slots, kind: str, grid: Grid) -> bool:
    """Whether any data slot drives the unknowns in ``slots``."""
    deg = set(int(d) for d in grid.alg.degrees[slots])
    n = grid.n
    for lab, src in (("f", data.f), ("g", data.g)):
        for arr in src.faces.values():
            for s in np.flatnonzero(np.any(np.abs(arr.reshape(arr.shape[0], -1)) > 0, axis=1)):
                k = int(grid.alg.degrees[s])
                if kind == "relative":
                    target = k if lab == "f" else k + 1
                else:
                    target = n - k if lab == "f" else n - k - 1
                if target in deg:
                    return True
    return False


def _rcond(M, lu) -> float:
    """1 / (||M||_1 ||M^-1||_1) with a one-norm estimate of the inverse."""
    n = M.shape[0]
    op = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"),
                             dtype=complex)
    try:
        inv_norm = spla.onenormest(op)
    except Exception:  # pragma: no cover - estimator failure means trouble
        return 0.0
    Mnorm = abs(M).sum(axis=0).max()
    return float(1.0 / (Mnorm * inv_norm))


@dataclass
class BvpProblem:
    grid: Grid
    Q: EndoField | None
    bc_kind: str
    data: BoundaryData
    source: FormField | None = None


def solve_bvp(p: BvpProblem) -> FormField:
    return BvpSolver(p.grid, p.Q, p.bc_kind).solve(p.data, p.source)


# boundary maps ---------------------------------------------------------------

class DofTable:
    """Boundary degrees of freedom of one trace type (see module docstring)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.entries = []
        disc = Discretization(grid)
        off = 0
        for face, loc, idx in disc.face_table():
            for s in np.flatnonzero(grid.alg.slots_without(face[0])):
                self.entries.append((face, int(s), loc, off))
                off += len(loc)
        self.size = off

    def pack(self, bf: BoundaryField) -> np.ndarray:
        out = np.zeros(self.size, dtype=complex)
        for face, s, loc, off in self.entries:
            out[off:off + len(loc)] = bf.faces[face][s].ravel()[loc]
        return out

    def unpack(self, vec: np.ndarray) -> BoundaryField:
        bf = BoundaryField.zeros(self.grid)
        for face, s, loc, off in self.entries:
            arr = bf.faces[face][s].reshape(-1)
            arr[loc] = vec[off:off + len(loc)]
        return bf

    def mask(self, masks: dict) -> np.ndarray:
        """Boolean dof mask from per-face point masks."""
        out = np.zeros(self.size, dtype=bool)
        for face, s, loc, off in self.entries:
            m = masks.get(face)
            if m is not None:
                out[off:off + len(loc)] = np.asarray(m).ravel()[loc]
        return out

    def table(self) -> list:
        """Serializable description: one record per (face, slot) run."""
        return [{"face": list(f), "slot": s, "offset": off, "count": len(loc)}
                for f, s, loc, off in self.entries]


MAP_KINDS = {"RA": ("relative", "absolute"), "AR": ("absolute", "relative")}


class BoundaryMap:
    """RA_Q or AR_Q between stacked (f, g) boundary dof vectors.

    Columns are applied by solves with a shared factorization; call
    :meth:`dense` to assemble the full matrix (small grids only).
    """

    def __init__(self, grid: Grid, Q: EndoField | None, kind: str = "RA", degrees=None):
        if kind not in MAP_KINDS:
            raise ValueError(f"unknown boundary map kind {kind!r}")
        self.grid = grid
        self.Q = Q
        self.kind = kind
        self.in_kind, self.out_kind = MAP_KINDS[kind]
        self.solver = BvpSolver(grid, Q, self.in_kind, degrees=degrees)
        self.dofs = DofTable(grid)
        self.matrix = None

    @property
    def shape(self) -> tuple:
        return (2 * self.dofs.size, 2 * self.dofs.size)

    def solution(self, data: BoundaryData) -> FormField:
        return self.solver.solve(data)

    def apply(self, data: BoundaryData) -> BoundaryData:
        return boundary_data(self.solver.solve(data), self.out_kind)

    def pack(self, data: BoundaryData) -> np.ndarray:
        return np.concatenate([self.dofs.pack(data.f), self.dofs.pack(data.g)])

    def unpack(self, vec: np.ndarray, kind: str) -> BoundaryData:
        n = self.dofs.size
        return BoundaryData(kind, self.dofs.unpack(vec[:n]), self.dofs.unpack(vec[n:]))

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ vec
        return self.pack(self.apply(self.unpack(vec, self.in_kind)))

    def dense(self, max_dofs: int = 6000) -> np.ndarray:
        if self.matrix is None:
            n = self.shape[0]
            if n > max_dofs:
                raise MemoryError(f"{n} boundary dofs exceed the dense limit {max_dofs}")
            M = np.zeros((n, n), dtype=complex)
            e = np.zeros(n, dtype=complex)
            for j in range(n):
                e[j] = 1.0
                M[:, j] = self.pack(self.apply(self.unpack(e, self.in_kind)))
                e[j] = 0.0
            self.matrix = M
        return self.matrix

    def restricted(self, in_masks: dict | None = None, out_masks: dict | None = None) -> np.ndarray:
        """Dense matrix with dofs outside the labeled sets zeroed."""
        M = self.dense().copy()
        if out_masks is not None:
            keep = np.tile(self.dofs.mask(out_masks), 2)
            M[~keep] = 0.0
        if in_masks is not None:
            keep = np.tile(self.dofs.mask(in_masks), 2)
            M[:, ~keep] = 0.0
        return M


def assemble_boundary_map(grid: Grid, Q: EndoField | None, kind: str = "RA",
                          dense: bool = True, degrees=None) -> BoundaryMap:
    bm = BoundaryMap(grid, Q, kind, degrees)
    bm.solver.factorize()
    if dense:
        bm.dense()
    return bm
