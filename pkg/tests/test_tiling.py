import numpy as np
import pytest

from floratile.errors import ImageTooSmallError, InputError
from floratile.tiling import GridSpec, make_grid, parse_grid_spec


def test_2000_square_4x4_gives_16_tiles_of_500():
    tiles = make_grid(2000, 2000, GridSpec(4, 4))
    assert len(tiles) == 16
    for t in tiles:
        assert t.x1 - t.x0 == 500
        assert t.y1 - t.y0 == 500


def test_identity_grid_covers_whole_image():
    (tile,) = make_grid(7, 7, GridSpec(1, 1))
    assert (tile.x0, tile.y0, tile.x1, tile.y1) == (0, 0, 7, 7)
    assert (tile.row, tile.col) == (0, 0)


def test_balanced_remainder_goes_to_leading_tiles():
    tiles = make_grid(10, 10, GridSpec(3, 3))
    widths = [t.x1 - t.x0 for t in tiles if t.row == 0]
    heights = [t.y1 - t.y0 for t in tiles if t.col == 0]
    assert widths == [4, 3, 3]
    assert heights == [4, 3, 3]


def test_row_major_ordering():
    spec = GridSpec(3, 5)
    tiles = make_grid(37, 23, spec)
    for k, t in enumerate(tiles):
        assert t.row == k // spec.cols
        assert t.col == k % spec.cols


def test_partition_properties_random():
    rng = np.random.default_rng(42)
    for _ in range(300):
        rows = int(rng.integers(1, 9))
        cols = int(rng.integers(1, 9))
        width = int(rng.integers(cols, 200))
        height = int(rng.integers(rows, 200))
        tiles = make_grid(width, height, GridSpec(rows, cols))
        assert len(tiles) == rows * cols
        # exact cover: areas sum to the image area and cells don't overlap
        area = sum((t.x1 - t.x0) * (t.y1 - t.y0) for t in tiles)
        assert area == width * height
        covered = np.zeros((height, width), dtype=np.int32)
        for t in tiles:
            covered[t.y0 : t.y1, t.x0 : t.x1] += 1
        assert covered.min() == 1 and covered.max() == 1
        widths = {t.x1 - t.x0 for t in tiles}
        heights = {t.y1 - t.y0 for t in tiles}
        assert max(widths) - min(widths) <= 1
        assert max(heights) - min(heights) <= 1


def test_image_smaller_than_grid_rejected():
    with pytest.raises(ImageTooSmallError):
        make_grid(3, 10, GridSpec(2, 4))
    with pytest.raises(ImageTooSmallError):
        make_grid(10, 1, GridSpec(2, 4))


def test_grid_spec_validation():
    with pytest.raises(InputError):
        GridSpec(0, 4)
    with pytest.raises(InputError):
        GridSpec(4, -1)


def test_parse_grid_spec():
    assert parse_grid_spec("4x4") == GridSpec(4, 4)
    assert parse_grid_spec("3x5") == GridSpec(3, 5)
    for bad in ("", "4", "4x", "x4", "axb", "4x4x4"):
        with pytest.raises(InputError):
            parse_grid_spec(bad)


def test_determinism():
    a = make_grid(123, 457, GridSpec(5, 3))
    b = make_grid(123, 457, GridSpec(5, 3))
    assert a == b
