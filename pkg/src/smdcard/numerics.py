"""Geometry and histogram utilities shared by the metric modules.

Everything here is exact (no approximate neighbor indexes) and deterministic;
randomized callers pass explicit seeds and record them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError
from .model import EmbeddingSet


_BLOCK_ELEMENTS = 1 << 22  # cap on the temporary (rows x m x d) difference block


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance matrix between rows of ``a`` and ``b``.

    Computed from explicit coordinate differences (no dot-product shortcut,
    so no cancellation) in row blocks to keep peak memory bounded; blocking
    does not change any result bit.
    """
    n_a, d = a.shape
    n_b = b.shape[0]
    out = np.empty((n_a, n_b))
    rows_per_block = max(1, _BLOCK_ELEMENTS // max(1, n_b * d))
    for start in range(0, n_a, rows_per_block):
        stop = min(start + rows_per_block, n_a)
        diff = a[start:stop, None, :] - b[None, :, :]
        out[start:stop] = np.sqrt(np.sum(diff * diff, axis=2))
    return out


def knn_distances(query: EmbeddingSet, reference: EmbeddingSet, k: int,
                  exclude_self: bool | None = None) -> np.ndarray:
    """(n_query, k) matrix of distances to the 1st..kth nearest reference rows.

    ``exclude_self`` defaults to True when query and reference are the same
    object. Ties are broken toward the lower reference row index (stable sort).
    """
    if exclude_self is None:
        exclude_self = query is reference
    limit = reference.n - 1 if exclude_self else reference.n
    if k < 1 or k > limit:
        raise EvaluationError(
            f"k={k} out of range: reference set supports at most k={limit}"
            + (" (self-match excluded)" if exclude_self else ""))
    dists = pairwise_distances(query.data, reference.data)
    if exclude_self:
        np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")
    return np.take_along_axis(dists, order[:, :k], axis=1)


def nearest_distances(query: EmbeddingSet, reference: EmbeddingSet,
                      exclude_self: bool | None = None) -> np.ndarray:
    return knn_distances(query, reference, 1, exclude_self)[:, 0]


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray        # (target_dim, d), zero rows where padded
    explained_ratio: tuple[float, ...]
    padded: int                   # components added as zeros past the rank

    def transform(self, data: np.ndarray) -> np.ndarray:
        return (data - self.mean) @ self.components.T


def pca_fit(data: np.ndarray, target_dim: int) -> PcaBasis:
    """Principal-component basis of mean-centered ``data``.

    Sign convention: the largest-magnitude loading of each component is made
    positive (first occurrence wins on ties), so the basis is reproducible.
    Rank deficiency below ``target_dim`` pads with zero components.
    """
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    if not (1 <= target_dim <= d):
        raise EvaluationError(f"target_dim={target_dim} must be in [1, {d}]")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = (centered.T @ centered) / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    total = float(eigvals.sum())
    rank_tol = max(total, 1.0) * 1e-12
    rank = int(np.sum(eigvals > rank_tol))

    components = np.zeros((target_dim, d))
    usable = min(target_dim, rank)
    for i in range(usable):
        vec = eigvecs[:, i]
        pivot = int(np.argmax(np.abs(vec)))
        if vec[pivot] < 0:
            vec = -vec
        components[i] = vec
    ratios = tuple(float(v / total) if total > 0 else 0.0
                   for v in eigvals[:target_dim])
    if len(ratios) < target_dim:
        ratios = ratios + (0.0,) * (target_dim - len(ratios))
    return PcaBasis(mean=mean, components=components,
                    explained_ratio=ratios, padded=target_dim - usable)


def pca_reduce(eset: EmbeddingSet, target_dim: int, seed: int = 0,
               basis: PcaBasis | None = None,
               fit_data: np.ndarray | None = None) -> tuple[EmbeddingSet, PcaBasis]:
    """Project an embedding set onto its top principal components.

    When real and synthetic sets are evaluated together, pass the union of
    both as ``fit_data`` (or a prefit ``basis``) so they share one basis.
    The eigensolve is exact; ``seed`` is recorded by callers for provenance
    only.
    """
    del seed
    if basis is None:
        basis = pca_fit(eset.data if fit_data is None else fit_data, target_dim)
    reduced = basis.transform(eset.data)
    return EmbeddingSet(ids=eset.ids, data=reduced, subgroup=eset.subgroup,
                        region=eset.region), basis


def w1_distance_1d(x: np.ndarray, y: np.ndarray) -> float:
    """1-D Wasserstein-1 distance between two empirical distributions.

    Merged-CDF formulation, exact for unequal sample counts: integrate
    |F_x - F_y| over the pooled support.
    """
    x = np.sort(np.asarray(x, dtype=np.float64))
    y = np.sort(np.asarray(y, dtype=np.float64))
    if x.size == 0 or y.size == 0:
        raise EvaluationError("empty sample in 1-D transport distance")
    pooled = np.concatenate([x, y])
    pooled.sort(kind="stable")
    deltas = np.diff(pooled)
    cdf_x = np.searchsorted(x, pooled[:-1], side="right") / x.size
    cdf_y = np.searchsorted(y, pooled[:-1], side="right") / y.size
    return float(np.sum(np.abs(cdf_x - cdf_y) * deltas))


def freedman_diaconis_bins(values: np.ndarray, floor: int = 8,
                           cap: int = 64) -> int:
    """Bin count via the Freedman–Diaconis rule, clamped to [floor, cap]."""
    values = np.asarray(values, dtype=np.float64)
    span = float(values.max() - values.min()) if values.size else 0.0
    if span <= 0:
        return floor
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    if iqr <= 0:
        return floor
    width = 2.0 * iqr * values.size ** (-1.0 / 3.0)
    bins = int(np.ceil(span / width)) if width > 0 else cap
    return max(floor, min(cap, bins))


def histogram_masses(values: np.ndarray, lo: float, hi: float,
                     bins: int) -> np.ndarray:
    """Probability masses of ``values`` over ``bins`` equal bins on [lo, hi]."""
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return counts / values.size


def smooth_masses(p: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Add ``eps`` mass to every bin, then renormalize."""
    p = p + eps
    return p / p.sum()


def jsd_masses(p: np.ndarray, q: np.ndarray, eps: float = 1e-12) -> float:
    """Jensen-Shannon divergence between two mass vectors, base-2 logs.

    Bounded by 1; zero exactly when the inputs match. Empty bins receive
    ``eps`` smoothing mass before renormalization.
    """
    p = smooth_masses(np.asarray(p, dtype=np.float64), eps)
    q = smooth_masses(np.asarray(q, dtype=np.float64), eps)
    m = 0.5 * (p + q)
    kl_pm = float(np.sum(p * np.log2(p / m)))
    kl_qm = float(np.sum(q * np.log2(q / m)))
    return 0.5 * kl_pm + 0.5 * kl_qm


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy of a mass vector in nats; zero-mass bins contribute nothing."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))
