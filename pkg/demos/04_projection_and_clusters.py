"""
Projecting embeddings and clustering them
=========================================

High-dimensional image embeddings are squeezed to 2-D with a three-phase
pairwise optimizer (near pairs attract strongly, mid-near pairs pull
clusters together early, far pairs repel), then k-means groups the 2-D
points into visual clusters. The run below plants three Gaussian blobs
in 64-D and watches both steps recover them.
"""

from pathlib import Path

import numpy as np

from floratile import EmbeddingMatrix, ProjectorConfig, fit, kmeans, save_projection_plot

rng = np.random.default_rng(42)

# three blobs of 40 points, centered on scaled unit axes of a 64-D space
blobs = []
truth = []
for c in range(3):
    center = np.zeros(64)
    center[c] = 12.0
    blobs.append(center + rng.normal(size=(40, 64)))
    truth += [c] * 40
data = np.vstack(blobs)

emb = EmbeddingMatrix([f"img{i:03d}" for i in range(len(data))], data)
projection = fit(emb, ProjectorConfig(seed=42))
print("projected", projection.points.shape[0], "embeddings to 2-D")

model = kmeans(projection.points, 3, seed=42)
print("k-means inertia:", round(model.inertia, 3))
print("inertia history:", [round(h, 1) for h in model.inertia_history[:6]], "...")

# the discovered clusters should line up with the generating blobs
# (cluster numbering is arbitrary, so compare partition agreement)
agree = 0
for c in range(3):
    members = model.assignments[np.asarray(truth) == c]
    values, counts = np.unique(members, return_counts=True)
    agree += counts.max()
print(f"partition agreement: {agree}/{len(truth)}")

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
save_projection_plot(
    out / "clusters.svg",
    projection.points,
    labels=model.assignments,
    title="three blobs after projection",
)
print("wrote", out / "clusters.svg")
