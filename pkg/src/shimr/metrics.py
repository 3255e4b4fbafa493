"""Ensemble observables: weight/opinion-distance correlation, histograms, moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FinalState:
    opinions: np.ndarray
    weights: np.ndarray
    is_influencer: np.ndarray

    @classmethod
    def of(cls, result) -> FinalState:
        return cls(result.opinions, result.weights, result.is_influencer)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray


@dataclass(frozen=True)
class EnsembleSummary:
    runs: int
    pooled_r: float | None
    mean_run_r: float | None
    std_run_r: float | None
    missing_run_r: int
    opinion_mean: float
    opinion_variance: float
    opinion_skewness: float
    mean_abs_opinion: float
    mean_weight: float
    run_r: tuple


def pearson(x, y) -> float | None:
    """Pearson correlation, or None when either sample has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("samples must have equal length")
    if x.size < 2 or np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def pair_samples(opinions, weights, is_influencer=None, include_influencers=False,
                 directed=True):
    """(weights, |opinion differences|) over agent pairs m != n.

    Directed pairs use every ordered (m, n); undirected pairs use m < n with
    the mean of the two directed weights.
    """
    o = np.asarray(opinions, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = np.ones(o.shape[0], dtype=bool)
    if is_influencer is not None and not include_influencers:
        keep = ~np.asarray(is_influencer, dtype=bool)
    idx = np.flatnonzero(keep)
    o = o[idx]
    w = w[np.ix_(idx, idx)]
    dist = np.abs(o[:, None] - o[None, :])
    if directed:
        mask = ~np.eye(len(idx), dtype=bool)
        return w[mask], dist[mask]
    iu = np.triu_indices(len(idx), k=1)
    return 0.5 * (w[iu] + w.T[iu]), dist[iu]


def weight_opinion_correlation(opinions, weights, is_influencer=None,
                               include_influencers=False, directed=True) -> float | None:
    w, d = pair_samples(opinions, weights, is_influencer, include_influencers, directed)
    return pearson(w, d)


def build_histogram(samples, lo: float, hi: float, bins: int) -> Histogram:
    """Uniform bins over [lo, hi]; out-of-range samples land in the end bins."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not lo < hi:
        raise ValueError("lo must be < hi")
    x = np.clip(np.asarray(samples, dtype=float).ravel(), lo, hi)
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    total = counts.sum()
    if total:
        densities = counts / (total * np.diff(edges))
    else:
        densities = np.zeros(bins)
    return Histogram(edges, counts, densities)


def moments(x) -> tuple[float, float, float]:
    """Mean, population variance and skewness (0 for a degenerate sample)."""
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    dev = x - mean
    var = float(np.mean(dev * dev))
    skew = float(np.mean(dev**3)) / var**1.5 if var > 0 else 0.0
    return mean, var, skew


def _normal_opinions(state: FinalState, include_influencers=False):
    if include_influencers:
        return np.asarray(state.opinions)
    return np.asarray(state.opinions)[~np.asarray(state.is_influencer, dtype=bool)]


def pooled_opinions(runs, include_influencers=False) -> np.ndarray:
    return np.concatenate([_normal_opinions(s, include_influencers) for s in runs])


def pooled_weights(runs, include_influencers=False, directed=True) -> np.ndarray:
    return np.concatenate([
        pair_samples(s.opinions, s.weights, s.is_influencer, include_influencers, directed)[0]
        for s in runs
    ])


def pooled_correlation(runs, include_influencers=False, directed=True) -> EnsembleSummary:
    """Pool pair samples across runs (in the given order) and summarise."""
    runs = list(runs)
    if not runs:
        raise ValueError("need at least one run")
    ws, ds, per_run = [], [], []
    for s in runs:
        w, d = pair_samples(s.opinions, s.weights, s.is_influencer, include_influencers,
                            directed)
        ws.append(w)
        ds.append(d)
        per_run.append(pearson(w, d))
    pooled = pearson(np.concatenate(ws), np.concatenate(ds))
    found = np.array([r for r in per_run if r is not None])
    mean_r = float(found.mean()) if found.size else None
    std_r = float(found.std(ddof=1)) if found.size > 1 else (0.0 if found.size else None)

    ops = pooled_opinions(runs, include_influencers)
    mean, var, skew = moments(ops)
    return EnsembleSummary(
        runs=len(runs),
        pooled_r=pooled,
        mean_run_r=mean_r,
        std_run_r=std_r,
        missing_run_r=sum(r is None for r in per_run),
        opinion_mean=mean,
        opinion_variance=var,
        opinion_skewness=skew,
        mean_abs_opinion=float(np.mean(np.abs(ops))),
        mean_weight=float(np.concatenate(ws).mean()) if sum(map(len, ws)) else math.nan,
        run_r=tuple(per_run),
    )
