import numpy as np
import pytest

from nlacoustics.errors import ValidationError
from nlacoustics.grids import Field, GridSpec, bounded_axis, make_grid, periodic_axis
from nlacoustics.snapshot import read_snapshot, write_snapshot

from helpers import random_band_limited


def test_round_trip_bit_exact(tmp_path, rng):
    g = make_grid(GridSpec((periodic_axis("t", 2 * np.pi, 16), bounded_axis("x", 3.0, 9))))
    f = random_band_limited(g, rng)
    path = tmp_path / "frame.nlac"
    write_snapshot(path, f, stamp=1.25)
    back, stamp = read_snapshot(path)
    assert stamp == 1.25
    np.testing.assert_array_equal(back.values, f.values)
    assert [a.kind for a in back.grid.axes] == ["periodic", "bounded"]
    assert [a.points for a in back.grid.axes] == [16, 9]
    assert [a.extent for a in back.grid.axes] == [2 * np.pi, 3.0]


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.nlac"
    path.write_bytes(b"JUNKxxxxxxxxxxxxxxxx")
    with pytest.raises(ValidationError):
        read_snapshot(path)


def test_truncated_payload_rejected(tmp_path):
    g = make_grid(GridSpec((periodic_axis("x", 1.0, 8),)))
    f = Field(g, np.arange(8.0))
    path = tmp_path / "frame.nlac"
    write_snapshot(path, f)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValidationError):
        read_snapshot(path)
