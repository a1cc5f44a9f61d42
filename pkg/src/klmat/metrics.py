"""Accuracy and fairness readouts: MAE, KL divergences, Degree of Matthew Effect."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RatingsDataset
from .errors import ConfigError, DegenerateEstimator, EmptyEvaluation, SupportError
from .factorization import FactorModel, predict_ratings
from .rank_alpha import recommendation_counts, ranks_from_counts


@dataclass(frozen=True, eq=False)
class PopularityDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) < 1:
            raise ConfigError("distribution must be a non-empty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError("probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return len(self.probs)

    @classmethod
    def uniform(cls, n: int) -> "PopularityDistribution":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    matthew_s: float
    sym_kl_to_uniform: float
    skipped_cold_start: int
    matthew_degenerate: bool = False
    matthew_s_max: float = math.nan
    matthew_s_min: float = math.nan


def _probs(d):
    return d.probs if isinstance(d, PopularityDistribution) else PopularityDistribution(d).probs


def kl_divergence(p, q) -> float:
    """``sum p * ln(p / q)`` with ``0 * ln(0 / q) = 0``."""
    p, q = _probs(p), _probs(q)
    if len(p) != len(q):
        raise ConfigError("distributions differ in length")
    support = p > 0
    if np.any(q[support] <= 0):
        raise SupportError("p has mass where q is zero")
    ps, qs = p[support], q[support]
    return math.fsum(ps * np.log(ps / qs))


def symmetric_kl(p, q) -> float:
    return kl_divergence(p, q) + kl_divergence(q, p)


def popularity_distribution_from_counts(counts, smoothing: float = 0.0) -> PopularityDistribution:
    """Normalize appearance counts; ``smoothing`` adds a pseudo-count to every item."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ConfigError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise EmptyEvaluation("all counts are zero")
    counts = counts + smoothing
    return PopularityDistribution(counts / counts.sum())


def degree_of_matthew(ranks, mode: str = "max") -> float:
    """``1 + n / sum_i ln(rank_i / rank_ref)`` with rank_ref the max (or min) rank.

    With ``mode="max"`` every log term is <= 0, so the estimate is below 1
    and typically negative. ``mode="min"`` gives the usual power-law MLE form
    (> 1).
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0 or np.any(ranks < 1):
        raise ConfigError("ranks must be non-empty and >= 1")
    if mode == "max":
        ref = ranks.max()
    elif mode == "min":
        ref = ranks.min()
    else:
        raise ConfigError(f"unknown rank mode {mode!r}")
    total = math.fsum(np.log(ranks / ref))
    if total == 0.0:
        raise DegenerateEstimator("all ranks equal; estimator undefined")
    return 1.0 + len(ranks) / total


def evaluable_mask(test: RatingsDataset, train: RatingsDataset | None) -> np.ndarray:
    """Test triplets whose user and item both appear in training."""
    if train is None:
        return np.ones(len(test), dtype=bool)
    seen_u = np.zeros(test.num_users, dtype=bool)
    seen_i = np.zeros(test.num_items, dtype=bool)
    seen_u[train.users] = True
    seen_i[train.items] = True
    return seen_u[test.users] & seen_i[test.items]


def mae(model: FactorModel, test: RatingsDataset, train: RatingsDataset | None = None,
        raw_dot: bool = False) -> float:
    """Mean ``|r - r_max * cos|`` over evaluable test triplets.

    ``raw_dot=True`` scores with the unnormalized ``U_i . V_j`` instead.
    """
    return _mae(model, test, train, raw_dot)[0]


def _mae(model, test, train, raw_dot):
    keep = evaluable_mask(test, train)
    if not keep.any():
        raise EmptyEvaluation("no evaluable test triplets")
    users, items, r = test.users[keep], test.items[keep], test.ratings[keep]
    if raw_dot:
        pred = np.einsum("ij,ij->i", model.U[users], model.V[items])
    else:
        pred = predict_ratings(model, users, items, test.r_max)
    return math.fsum(np.abs(r - pred)) / len(r), int((~keep).sum())


def global_mean_mae(train: RatingsDataset, test: RatingsDataset) -> float:
    """MAE of predicting the training mean rating for every evaluable test triplet."""
    keep = evaluable_mask(test, train)
    mu = float(np.mean(train.ratings))
    return math.fsum(np.abs(test.ratings[keep] - mu)) / int(keep.sum())


def evaluate(model: FactorModel, train: RatingsDataset, test: RatingsDataset, top_k: int = 10,
             rank_mode: str = "max", smoothing: float = 1.0, raw_dot: bool = False) -> MetricsReport:
    """MAE on ``test`` plus popularity readouts of the top-k output lists.

    Only items observed in ``train`` can be recommended. The symmetric KL to
    uniform uses add-``smoothing`` counts over those items so that it stays
    finite when some items are never recommended.
    """
    err, skipped = _mae(model, test, train, raw_dot)
    candidates = np.zeros(model.num_items, dtype=bool)
    candidates[train.items] = True
    counts = recommendation_counts(model, top_k, candidates)[candidates]
    p = popularity_distribution_from_counts(counts, smoothing)
    sym = symmetric_kl(p, PopularityDistribution.uniform(len(p)))
    ranked = ranks_from_counts(counts)[counts > 0]
    s = {}
    for mode in ("max", "min"):
        try:
            s[mode] = degree_of_matthew(ranked, mode)
        except DegenerateEstimator:
            s[mode] = math.nan
    if rank_mode not in s:
        raise ConfigError(f"unknown rank mode {rank_mode!r}")
    return MetricsReport(
        mae=err,
        matthew_s=s[rank_mode],
        sym_kl_to_uniform=sym,
        skipped_cold_start=skipped,
        matthew_degenerate=math.isnan(s[rank_mode]),
        matthew_s_max=s["max"],
        matthew_s_min=s["min"],
    )
