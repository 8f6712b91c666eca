"""
Top-K voting across tiles
=========================

Each tile carries a sparse probability vector over species. A species
earns one vote from every tile that ranks it among the tile's top K
entries. Species with enough votes form the image's multi-label
prediction, ordered by vote count with summed probability as the
tiebreaker.
"""

from floratile import TilePrediction, select_labels, tally_votes

# four tiles of one image; dense indices stand in for species.
# index 3 appears everywhere, 7 in half the tiles, the rest are one-offs.
tiles = [
    TilePrediction("quadrat-1", 0, 0, [(3, 0.6), (7, 0.3), (11, 0.1)], complete=True),
    TilePrediction("quadrat-1", 0, 1, [(3, 0.5), (7, 0.4), (12, 0.1)], complete=True),
    TilePrediction("quadrat-1", 1, 0, [(3, 0.7), (13, 0.2), (14, 0.1)], complete=True),
    TilePrediction("quadrat-1", 1, 1, [(3, 0.8), (15, 0.2)], complete=True),
]

tally = tally_votes(tiles, k=2)  # only the top-2 entries of each tile vote
print("votes per species:", dict(sorted(tally.votes.items())))
print("probability mass: ", {i: round(m, 3) for i, m in sorted(tally.mass.items())})

# min_votes=2 keeps only species seen in at least two tiles
labels = select_labels(tally, min_votes=2, max_labels=10)
print("\nprediction with min_votes=2:", labels)

# dropping the threshold floods the prediction with one-off species
labels = select_labels(tally, min_votes=1, max_labels=10)
print("prediction with min_votes=1:", labels)

# if nothing reaches the threshold the best single species survives,
# so an image never ends up with an empty label set
lonely = [TilePrediction("quadrat-2", 0, 0, [(5, 0.9), (6, 0.1)], complete=True)]
labels = select_labels(tally_votes(lonely, k=2), min_votes=2, max_labels=10)
print("single-tile fallback:", labels)
