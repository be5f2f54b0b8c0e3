"""Exact O(n^2) t-SNE for desk-scale diagnostic plots, with an SVG
scatter renderer.

The affinity step binary-searches a per-row Gaussian bandwidth until the
row's perplexity (2^entropy) hits the target, then symmetrizes and
normalizes the matrix. The embedding step is plain gradient descent on
KL(P||Q) with a Student-t Q, momentum 0.5 (0.8 after iteration 250) and
early exaggeration 12 for the first 250 iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingStore
from .manifest import ManifestEntry

MAX_POINTS = 5000
EXAGGERATION_ITERS = 250
MOMENTUM_SWITCH_ITER = 250


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    seed: int = 0

    def __post_init__(self):
        if self.perplexity <= 0:
            raise ProjectionError("perplexity must be > 0")
        if self.iterations < 1:
            raise ProjectionError("iterations must be >= 1")


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    """Exact pairwise squared Euclidean distances, computed per pair (no
    norm-expansion trick). Squared differences are accumulated in sorted
    order, so the matrix is bit-identical under any orthogonal map that is
    exactly representable (signed coordinate permutations)."""
    n = X.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        sq = np.sort((X[i + 1 :] - X[i]) ** 2, axis=1)
        row = np.add.reduce(sq, axis=1)
        D[i, i + 1 :] = row
        D[i + 1 :, i] = row
    return D


def conditional_affinities(
    distances: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 200
) -> np.ndarray:
    """Row-stochastic conditional affinity matrix from squared distances.

    Per row, bisect the Gaussian precision beta until the row's perplexity
    (2^entropy) matches the target within ``tol``.
    """
    D = np.asarray(distances, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ProjectionError("distance matrix must be square")
    if not np.allclose(D, D.T):
        raise ProjectionError("distance matrix must be symmetric")
    if np.any(np.diagonal(D) != 0.0):
        raise ProjectionError("distance matrix must have a zero diagonal")
    target_entropy = np.log2(perplexity)

    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        row = None
        for _ in range(max_steps):
            w = np.exp(-(d - d.min()) * beta)
            total = w.sum()
            row = w / total
            # Shannon entropy in bits of the conditional row
            nz = row[row > 0.0]
            entropy = float(-(nz * np.log2(nz)).sum())
            if abs(2.0**entropy - perplexity) < tol:
                break
            if entropy > target_entropy:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (lo + beta) / 2.0
        else:
            raise ProjectionError(
                f"perplexity calibration did not converge for row {i}"
            )
        P[i, np.arange(n) != i] = row
    return P


def perplexity_calibration(
    distances: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 200
) -> np.ndarray:
    """Joint affinity matrix: symmetrized, normalized conditionals,
    P = (P_cond + P_cond^T) / (2n)."""
    P = conditional_affinities(distances, perplexity, tol, max_steps)
    return (P + P.T) / (2.0 * P.shape[0])


def _student_t_q(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Y is 2-D and only feeds the descent, so the fast norm-expansion
    # distance form is fine here (exactness only matters on the input side).
    sq = np.einsum("ij,ij->i", Y, Y)
    D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T), 0.0)
    inv = 1.0 / (1.0 + D)
    np.fill_diagonal(inv, 0.0)
    Q = inv / inv.sum()
    return Q, inv


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0.0
    q = np.clip(Q[mask], 1e-300, None)
    return float((P[mask] * np.log(P[mask] / q)).sum())


def tsne(
    store_or_matrix, config: TsneConfig = TsneConfig(), return_kl: bool = False
):
    """Project pooled embeddings to 2-D. Deterministic per seed.

    Returns an (n, 2) coordinate array, or (coords, kl_trace) when
    ``return_kl`` is set.
    """
    if isinstance(store_or_matrix, EmbeddingStore):
        X = store_or_matrix.matrix()
    else:
        X = np.asarray(store_or_matrix, dtype=np.float64)
    n = X.shape[0]
    if n < 10:
        raise ProjectionError(f"need at least 10 points, got {n}")
    if n > MAX_POINTS:
        raise ProjectionError(f"exact t-SNE capped at {MAX_POINTS} points, got {n}")
    if config.perplexity >= n / 3:
        raise ProjectionError(
            f"perplexity {config.perplexity} too large for {n} points (need < n/3)"
        )

    # bit-identical input rows embed once and share coordinates; duplicates
    # would otherwise also force a perplexity floor of 2 on every other row
    first_of: dict[bytes, int] = {}
    origin = np.empty(n, dtype=int)
    keep: list[int] = []
    for i in range(n):
        key = X[i].tobytes()
        if key not in first_of:
            first_of[key] = len(keep)
            keep.append(i)
        origin[i] = first_of[key]
    if len(keep) < n:
        coords = tsne(X[keep], config, return_kl=return_kl)
        if return_kl:
            coords, kl = coords
            return coords[origin], kl
        return coords[origin]

    P = perplexity_calibration(pairwise_sq_distances(X), config.perplexity)

    rng = np.random.default_rng(config.seed)
    Y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)  # per-coordinate step adaptation, min 0.01
    kl_trace = []
    for it in range(1, config.iterations + 1):
        P_eff = P * config.early_exaggeration if it <= EXAGGERATION_ITERS else P
        Q, inv = _student_t_q(Y)
        # gradient: 4 * sum_j (p_ij - q_ij) (y_i - y_j) / (1 + ||y_i - y_j||^2)
        A = (P_eff - Q) * inv
        grad = 4.0 * ((np.diag(A.sum(axis=1)) - A) @ Y)
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.clip(gains, 0.01, None, out=gains)
        momentum = 0.5 if it <= MOMENTUM_SWITCH_ITER else 0.8
        velocity = momentum * velocity - config.learning_rate * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
        if return_kl:
            kl_trace.append(kl_divergence(P, _student_t_q(Y)[0]))
    return (Y, np.asarray(kl_trace)) if return_kl else Y


def write_coordinates(trial_ids: list[str], coords: np.ndarray, path) -> None:
    """Coordinate TSV: ``trial_id\tx\ty``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for tid, (x, y) in zip(trial_ids, coords):
            fh.write(f"{tid}\t{float(x)!r}\t{float(y)!r}\n")


_PALETTE = (
    "#d62728", "#2ca02c", "#9467bd", "#1f1f1f",
    "#1f77b4", "#ff7f0e", "#8c564b", "#e377c2",
)


def render_plot(
    coords: np.ndarray,
    groups: list[str],
    path,
    width: int = 640,
    height: int = 480,
) -> None:
    """Scatter plot of the projection as a self-contained SVG, one color
    and legend entry per distinct group (empty groups never appear)."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (len(groups), 2):
        raise ProjectionError(
            f"coords/groups misaligned: {coords.shape} vs {len(groups)} groups"
        )
    distinct = sorted(set(groups))
    color = {g: _PALETTE[i % len(_PALETTE)] for i, g in enumerate(distinct)}

    margin = 40
    xmin, ymin = coords.min(axis=0)
    xmax, ymax = coords.max(axis=0)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def to_px(pt):
        px = margin + (pt[0] - xmin) / xspan * (width - 2 * margin)
        py = height - margin - (pt[1] - ymin) / yspan * (height - 2 * margin)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for pt, g in zip(coords, groups):
        px, py = to_px(pt)
        parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color[g]}" fill-opacity="0.7"/>')
    for i, g in enumerate(distinct):
        ly = 20 + 18 * i
        parts.append(f'<circle cx="{width - 150}" cy="{ly}" r="5" fill="{color[g]}"/>')
        parts.append(
            f'<text x="{width - 138}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{g}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts) + "\n")


def plot_groups(manifest: list[ManifestEntry], split_of=None) -> list[str]:
    """Group tag per entry, ``<split>-<label>`` when a split mapping is
    given (the four-group coloring of the diagnostic figures)."""
    groups = []
    for e in manifest:
        if split_of is None:
            groups.append(e.label)
        else:
            groups.append(f"{split_of[e.trial_id]}-{e.label}")
    return groups
