"""Standalone scalar Schroedinger solver on the unit box.

Written against plain scipy with no package internals; it is the oracle
for the 0-form sector of the form-valued solver.  Interior rows are the
7-point stencil of -Delta + q, boundary rows are Dirichlet values or the
outward normal derivative by the second-order one-sided stencil.  Edge
and corner points belong to the first face in the order
x1=0, x1=1, x2=0, x2=1, x3=0, x3=1.
"""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

FACES = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


def _owner(m):
    own = -np.ones((m, m, m), dtype=int)
    for k, (a, side) in enumerate(FACES):
        idx = [slice(None)] * 3
        idx[a] = 0 if side == 0 else m - 1
        sub = own[tuple(idx)]
        sub[sub < 0] = k
    return own


def _lap(m, h):
    e = np.ones(m)
    D = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]) / h ** 2
    I = sp.identity(m)
    return (sp.kron(sp.kron(D, I), I) + sp.kron(sp.kron(I, D), I) + sp.kron(sp.kron(I, I), D)).tocsr()


def _normal_rows(m, h, a, side):
    """Sparse rows of the outward normal derivative at every point of one face."""
    N = m ** 3
    idx = np.arange(N).reshape(m, m, m)
    sl = [slice(None)] * 3
    rows, cols, vals = [], [], []
    for j, c in enumerate((-3.0, 4.0, -1.0)):
        sl[a] = j if side == 0 else m - 1 - j
        pts = idx[tuple(sl)].ravel()
        sl2 = [slice(None)] * 3
        sl2[a] = 0 if side == 0 else m - 1
        base = idx[tuple(sl2)].ravel()
        rows.append(base)
        cols.append(pts)
        # lower face: outward is -x_a; upper face: outward is +x_a
        vals.append(np.full(base.size, -c / (2 * h)))
    return rows, cols, vals


def dirichlet_solve(m, q, f):
    """u with (-Delta + q) u = 0 inside and u = f on the boundary (arrays on the m^3 grid)."""
    h = 1.0 / (m - 1)
    N = m ** 3
    A = (-_lap(m, h) + sp.diags(np.asarray(q, dtype=complex).ravel())).tolil()
    bnd = (_owner(m) >= 0).ravel()
    A[np.flatnonzero(bnd), :] = 0
    A = A.tocsr() + sp.diags(bnd.astype(float))
    b = np.where(bnd, np.asarray(f, dtype=complex).ravel(), 0)
    return spla.spsolve(A.tocsc(), b).reshape(m, m, m)


def normal_derivative(u, a, side):
    """Outward normal derivative on the face, one-sided second order."""
    m = u.shape[0]
    h = 1.0 / (m - 1)
    sl = lambda j: tuple([slice(None)] * a + [j if side == 0 else m - 1 - j])
    d = (-3 * u[sl(0)] + 4 * u[sl(1)] - u[sl(2)]) / (2 * h)
    return -d


def neumann_solve(m, q, g):
    """u with (-Delta + q) u = 0 inside and d_nu u = g on each point's owning face.

    ``g`` is a dict face -> array of the face shape.
    """
    h = 1.0 / (m - 1)
    N = m ** 3
    A = (-_lap(m, h) + sp.diags(np.asarray(q, dtype=complex).ravel())).tolil()
    own = _owner(m)
    bnd = np.flatnonzero(own.ravel() >= 0)
    A[bnd, :] = 0
    A = A.tocsr()
    b = np.zeros(N, dtype=complex)
    extra = []
    for k, (a, side) in enumerate(FACES):
        rows, cols, vals = _normal_rows(m, h, a, side)
        sl = [slice(None)] * 3
        sl[a] = 0 if side == 0 else m - 1
        keep = (own[tuple(sl)] == k).ravel()
        for r, c, v in zip(rows, cols, vals):
            extra.append(sp.csr_matrix((v[keep], (r[keep], c[keep])), shape=(N, N)))
        b[rows[0][keep]] = np.asarray(g[(a, side)]).ravel()[keep]
    A = A + sum(extra)
    return spla.spsolve(A.tocsc(), b).reshape(m, m, m)
