import struct
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfplab.fileio import (
    SnapshotError,
    csv_text,
    read_snapshot,
    read_snapshot_bytes,
    snapshot_bytes,
    svg_lines,
    write_snapshot,
    write_svg,
)
from kfplab.mesh import BoxDomain, Field, build_grid


def _field(m=1, seed=0):
    dom = BoxDomain.cube(m, (-1.0, 0.5), (-2.0, 2.0), (0.0, 0.75))
    g = build_grid(dom, 5, 4, 3)
    return Field(g, np.random.default_rng(seed).standard_normal(g.shape))


@pytest.mark.parametrize("m", [1, 2])
def test_snapshot_round_trip(m, tmp_path):
    f = _field(m)
    back = read_snapshot(write_snapshot(f, tmp_path / "u.kfp1"))
    assert back.grid == f.grid and np.array_equal(back.values, f.values)


def test_snapshot_layout():
    f = _field()
    data = snapshot_bytes(f)
    assert data[:4] == b"KFP1"
    assert struct.unpack_from("<4I", data, 4) == (1, 5, 4, 3)
    assert np.frombuffer(data, "<f8", 6, 20).tolist() == [-1.0, 0.5, -2.0, 2.0, 0.0, 0.75]
    assert len(data) == 20 + 6 * 8 + 60 * 8


def test_snapshot_rejects_bad_bytes():
    data = snapshot_bytes(_field())
    with pytest.raises(SnapshotError):
        read_snapshot_bytes(b"XXXX" + data[4:])
    with pytest.raises(SnapshotError):
        read_snapshot_bytes(data[:-8])
    with pytest.raises(SnapshotError):
        read_snapshot_bytes(data[:30])


def test_csv_header_only_and_formatting():
    assert csv_text([], ["a", "b"]) == "a,b\n"
    text = csv_text([{"a": 0.1, "b": True, "c": (1, 2.5)}, {"a": 3}], ["a", "b", "c"])
    assert text == "a,b,c\n0.1,true,1 2.5\n3,,\n"
    with pytest.raises(KeyError):
        csv_text([{"zzz": 1}], ["a"])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=10))
def test_csv_floats_round_trip(xs):
    lines = csv_text([{"x": x} for x in xs], ["x"]).splitlines()[1:]
    assert [float(s) for s in lines] == xs


def test_svg_is_well_formed(tmp_path):
    text = svg_lines({"err <a&b>": ([1, 2, 3], [1.0, 0.1, 0.01])}, title="t & u", logy=True)
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 1
    assert write_svg({"a": ([0], [0])}, tmp_path / "p.svg") is not None
    assert write_svg({"a": ([0], [0])}, tmp_path / "missing" / "p.svg") is None
