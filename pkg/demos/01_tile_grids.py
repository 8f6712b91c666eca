"""
Planning balanced tile grids
============================

An image is cut into an N x M grid of tiles before classification. Pixel
counts rarely divide evenly, so the tiler hands the remainder out one
pixel at a time: tile sizes within a row or column never differ by more
than one, and together the tiles cover the image exactly.
"""

import numpy as np

from floratile import GridSpec, make_grid

# the canonical case first: a 2000 x 2000 quadrat photo on a 4x4 grid
tiles = make_grid(2000, 2000, GridSpec(4, 4))
print(f"2000x2000 into 4x4 -> {len(tiles)} tiles")
for t in tiles[:4]:
    print(f"  row {t.row} col {t.col}: x [{t.x0}, {t.x1}) y [{t.y0}, {t.y1})")
print("  ...")

# a size that does not divide: 10 columns of width 3 or 4
tiles = make_grid(10, 7, GridSpec(2, 3))
widths = sorted({t.x1 - t.x0 for t in tiles})
heights = sorted({t.y1 - t.y0 for t in tiles})
print(f"\n10x7 into 2x3 -> tile widths {widths}, heights {heights}")

# prove the exact-cover property by painting tiles onto a counter image:
# every pixel must be painted exactly once
paint = np.zeros((7, 10), dtype=int)
for t in tiles:
    paint[t.y0:t.y1, t.x0:t.x1] += 1
print("every pixel covered exactly once:", bool(np.all(paint == 1)))
print(paint)
