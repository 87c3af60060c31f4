"""Binary container for fields and boundary maps.

Layout (all integers little-endian)::

    offset  size  content
    0       4     magic b"HCGO"
    4       2     format version (uint16), currently 1
    6       2     reserved, zero
    8       8     header length N in bytes (uint64)
    16      N     UTF-8 JSON header, sorted keys, separators (",", ":")
    16+N    P     zero padding so the payload starts on a 16-byte boundary
    16+N+P  ...   payload: C-order array of dtype "<c16" or "<c8"

Header keys common to every kind: ``kind``, ``dtype``, ``payload_shape``,
``slot_order``, ``version``.  Field kinds add ``grid`` (shape, spacing,
origin, mode, mu_ref).  ``BoundaryField`` adds ``faces``: a list of
[axis, side, *face_shape] records; the payload is the concatenation of the
per-face arrays of shape (2^n, *face_shape) in that order, and
``payload_shape`` is [total_length].  ``BoundaryMap`` adds ``map_kind`` and
``dofs`` (the dof table); its payload is the dense matrix.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from . import SLOT_ORDER, __version__
from .boundary_calculus import BoundaryField, faces_of
from .fields_and_grid import EndoField, FormField, Grid

MAGIC = b"HCGO"
FORMAT_VERSION = 1
DTYPES = {"complex128": "<c16", "complex64": "<c8"}


class ContainerError(ValueError):
    pass


def _grid_header(g: Grid) -> dict:
    return g.header()


def _grid_from(h: dict, grid: Grid | None = None) -> Grid:
    if grid is not None:
        if list(grid.shape) != list(h["shape"]) or grid.mode != h["mode"]:
            raise ContainerError("supplied grid does not match the stored header")
        return grid
    if h.get("mu_ref") is not None:
        raise ContainerError("grids with a conformal factor must be passed to loads(grid=...)")
    return Grid(h["shape"], h["spacing"], h["origin"], mode=h["mode"])


def encode(header: dict, payload: np.ndarray, dtype: str = "complex128") -> bytes:
    if dtype not in DTYPES:
        raise ContainerError(f"unsupported dtype {dtype!r}")
    arr = np.ascontiguousarray(payload, dtype=DTYPES[dtype])
    head = dict(header, dtype=dtype, payload_shape=list(arr.shape), slot_order=SLOT_ORDER,
                version=__version__)
    hb = json.dumps(head, sort_keys=True, separators=(",", ":")).encode("utf-8")
    pad = (-(16 + len(hb))) % 16
    return MAGIC + struct.pack("<HHQ", FORMAT_VERSION, 0, len(hb)) + hb + b"\0" * pad + arr.tobytes()


def decode(buf: bytes) -> tuple:
    if buf[:4] != MAGIC:
        raise ContainerError("bad magic")
    ver, _, n = struct.unpack("<HHQ", buf[4:16])
    if ver != FORMAT_VERSION:
        raise ContainerError(f"unsupported format version {ver}")
    head = json.loads(buf[16:16 + n].decode("utf-8"))
    if head.get("slot_order") != SLOT_ORDER:
        raise ContainerError(f"slot order {head.get('slot_order')!r} is not {SLOT_ORDER!r}")
    start = 16 + n + (-(16 + n)) % 16
    dt = np.dtype(DTYPES[head["dtype"]])
    count = int(np.prod(head["payload_shape"]))
    arr = np.frombuffer(buf, dtype=dt, count=count, offset=start).reshape(head["payload_shape"])
    return head, arr.astype(complex)


def dumps(obj, dtype: str = "complex128") -> bytes:
    from .bvp_solver import BoundaryMap
    if isinstance(obj, FormField):
        return encode({"kind": "FormField", "grid": _grid_header(obj.grid)}, obj.data, dtype)
    if isinstance(obj, EndoField):
        return encode({"kind": "EndoField", "grid": _grid_header(obj.grid)}, obj.mats, dtype)
    if isinstance(obj, BoundaryField):
        faces = [f for f in faces_of(obj.grid) if f in obj.faces]
        recs = [[f[0], f[1], *obj.faces[f].shape[1:]] for f in faces]
        flat = np.concatenate([obj.faces[f].ravel() for f in faces])
        return encode({"kind": "BoundaryField", "grid": _grid_header(obj.grid), "faces": recs},
                      flat, dtype)
    if isinstance(obj, BoundaryMap):
        if obj.matrix is None:
            raise ContainerError("assemble the dense matrix before saving a BoundaryMap")
        return encode({"kind": "BoundaryMap", "grid": _grid_header(obj.grid), "map_kind": obj.kind,
                       "dofs": obj.dofs.table()}, obj.matrix, dtype)
    raise ContainerError(f"cannot serialize {type(obj).__name__}")


def loads(buf: bytes, grid: Grid | None = None):
    """Inverse of :func:`dumps`; a BoundaryMap comes back as (header, matrix)."""
    head, arr = decode(buf)
    kind = head["kind"]
    if kind == "BoundaryMap":
        return head, arr
    g = _grid_from(head["grid"], grid)
    if kind == "FormField":
        return FormField(g, arr.copy())
    if kind == "EndoField":
        return EndoField(g, arr.copy())
    if kind == "BoundaryField":
        faces, off = {}, 0
        for rec in head["faces"]:
            shp = (g.alg.size, *rec[2:])
            k = int(np.prod(shp))
            faces[(rec[0], rec[1])] = arr[off:off + k].reshape(shp).copy()
            off += k
        return BoundaryField(g, faces)
    raise ContainerError(f"unknown kind {kind!r}")


def save(path, obj, dtype: str = "complex128") -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(obj, dtype))


def load(path, grid: Grid | None = None):
    with open(path, "rb") as fh:
        return loads(fh.read(), grid)
