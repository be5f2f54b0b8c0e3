"""t-SNE diagnostic projection on a two-class synthetic embedding cloud.

Projects 100 points (two well-separated Gaussian clusters standing in
for bonafide vs spoof embeddings) to 2-D and writes an SVG scatter plot
next to this script.

Run: python3 demos/tsne_demo.py
"""

from pathlib import Path

import numpy as np

from spoofbench.projection import TsneConfig, render_plot, tsne


def main():
    rng = np.random.default_rng(0)
    bona = rng.normal(0.0, 0.5, (50, 16))
    spoof = rng.normal(3.0, 0.5, (50, 16))
    X = np.vstack([bona, spoof])
    groups = ["bonafide"] * 50 + ["spoof"] * 50

    coords = tsne(X, TsneConfig(perplexity=20.0, iterations=800, seed=0))
    out = Path(__file__).with_name("tsne_demo.svg")
    render_plot(coords, groups, out)

    within = np.linalg.norm(coords[:50] - coords[:50].mean(axis=0), axis=1).mean()
    between = np.linalg.norm(coords[:50].mean(axis=0) - coords[50:].mean(axis=0))
    print(f"projected {X.shape[0]} points from {X.shape[1]}-D to 2-D")
    print(f"mean within-cluster radius {within:.1f}, between-centroid distance {between:.1f}")
    print(f"plot written to {out}")


if __name__ == "__main__":
    main()
