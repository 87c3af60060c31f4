import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodgecgo import SLOT_ORDER, container
from hodgecgo.boundary_calculus import BoundaryField
from hodgecgo.fields_and_grid import EndoField, FormField, Grid


def _field(seed, m=5):
    g = Grid.box(m, -0.5, 0.7)
    rng = np.random.default_rng(seed)
    return FormField(g, rng.standard_normal((8,) + g.shape) + 1j * rng.standard_normal((8,) + g.shape))


def test_layout_bytes():
    u = _field(0)
    buf = container.dumps(u)
    assert buf[:4] == b"HCGO"
    ver, res, n = struct.unpack("<HHQ", buf[4:16])
    assert (ver, res) == (1, 0)
    head = json.loads(buf[16:16 + n])
    assert head["kind"] == "FormField" and head["slot_order"] == SLOT_ORDER
    assert head["payload_shape"] == [8, 5, 5, 5]
    start = 16 + n + (-(16 + n)) % 16
    assert start % 16 == 0 and set(buf[16 + n:start]) <= {0}
    assert len(buf) - start == u.data.size * 16
    payload = np.frombuffer(buf[start:], dtype="<c16").reshape(u.data.shape)
    assert np.array_equal(payload, u.data)
    # the header JSON is canonical
    assert buf[16:16 + n] == json.dumps(head, sort_keys=True, separators=(",", ":")).encode()


@given(st.integers(0, 2 ** 32 - 1))
def test_form_field_roundtrip_is_bit_exact(seed):
    u = _field(seed)
    v = container.loads(container.dumps(u))
    assert np.array_equal(v.data, u.data)
    assert v.grid.shape == u.grid.shape and v.grid.spacing == u.grid.spacing
    assert container.dumps(v) == container.dumps(u)


def test_complex64_payload():
    u = _field(1)
    v = container.loads(container.dumps(u, "complex64"))
    assert np.array_equal(v.data, u.data.astype(np.complex64).astype(complex))


def test_endo_and_boundary_roundtrip(tmp_path):
    g = Grid.box(5)
    Q = EndoField.scalar(g, np.arange(125.0).reshape(g.shape))
    container.save(tmp_path / "q.hcgo", Q)
    assert np.array_equal(container.load(tmp_path / "q.hcgo").mats, Q.mats)
    bf = BoundaryField.zeros(g)
    for i, arr in enumerate(bf.faces.values()):
        arr[...] = i + 1j
    back = container.loads(container.dumps(bf))
    for f in bf.faces:
        assert np.array_equal(back.faces[f], bf.faces[f])


def test_rejects_corruption():
    buf = bytearray(container.dumps(_field(2)))
    with pytest.raises(container.ContainerError):
        container.loads(b"XXXX" + bytes(buf[4:]))
    bad = bytearray(buf)
    bad[4] = 9
    with pytest.raises(container.ContainerError):
        container.loads(bytes(bad))


def test_conformal_grid_needs_explicit_grid():
    g = Grid((5, 5), 0.25, mode="isothermal", mu=lambda x, y: 0.1 * x)
    u = FormField.zeros(g)
    buf = container.dumps(u)
    with pytest.raises(container.ContainerError):
        container.loads(buf)
    assert container.loads(buf, grid=g).grid is g
