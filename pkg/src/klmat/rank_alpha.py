"""Item popularity ranks from top-k lists, and the non-negative Lasso fit of
per-user weights that approximates those ranks from factor dot products."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericError
from .factorization import FactorModel

_CHUNK = 1024

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AlphaModel:
    alpha: np.ndarray
    target_ranks: np.ndarray
    lam: float
    sweeps: int = 0
    objective_trace: np.ndarray | None = None

    def objective(self, U, V) -> float:
        return lasso_objective(design_matrix(U, V), self.target_ranks, self.alpha, self.lam)


def top_k_items(model: FactorModel, top_k: int, candidates=None) -> np.ndarray:
    """(m, top_k) item indices ordered by descending cosine score.

    Ties go to the lower item index. Items outside ``candidates`` (boolean
    mask over items) are never recommended.
    """
    n = model.num_items
    if candidates is not None:
        candidates = np.asarray(candidates, dtype=bool)
        n_cand = int(candidates.sum())
    else:
        n_cand = n
    if top_k < 1 or top_k > n_cand:
        raise ConfigError(f"top_k must lie in [1, {n_cand}], got {top_k}")
    out = np.empty((model.num_users, top_k), dtype=np.int64)
    for start in range(0, model.num_users, _CHUNK):
        scores = model.scores(np.arange(start, min(start + _CHUNK, model.num_users)))
        if candidates is not None:
            scores[:, ~candidates] = -np.inf
        # stable sort on -score keeps ascending index order among ties
        out[start:start + len(scores)] = np.argsort(-scores, axis=1, kind="stable")[:, :top_k]
    return out


def recommendation_counts(model: FactorModel, top_k: int, candidates=None) -> np.ndarray:
    """How many users' top-k lists contain each item."""
    lists = top_k_items(model, top_k, candidates)
    return np.bincount(lists.ravel(), minlength=model.num_items)


def ranks_from_counts(counts) -> np.ndarray:
    """Rank 1 for the most frequent item; ties by ascending index.

    Items with a zero count share the sentinel rank ``(#nonzero) + 1``.
    """
    counts = np.asarray(counts)
    order = np.lexsort((np.arange(len(counts)), -counts))
    ranks = np.empty(len(counts), dtype=np.float64)
    ranks[order] = np.arange(1, len(counts) + 1)
    n_ranked = int(np.count_nonzero(counts))
    ranks[counts == 0] = n_ranked + 1
    return ranks


def item_popularity_ranks(model: FactorModel, top_k: int = 10, candidates=None) -> np.ndarray:
    return ranks_from_counts(recommendation_counts(model, top_k, candidates))


def design_matrix(U, V) -> np.ndarray:
    """``D[j, i] = U_i . V_j`` (raw dot products, n x m)."""
    return np.asarray(V) @ np.asarray(U).T


def lasso_objective(D, target, alpha, lam) -> float:
    r = D @ alpha - target
    return float(r @ r + lam * np.sum(np.abs(alpha)))


def fit_alpha(U, V, target_ranks, lam: float = 0.1, tol: float = 1e-8,
              max_sweeps: int = 10_000) -> AlphaModel:
    """Solve ``min_{alpha >= 0} ||D alpha - ranks||^2 + lam * sum(alpha)``.

    Cyclic coordinate descent on the Gram form; each coordinate update is a
    shifted least-squares step clamped at zero. Stops when the largest
    coordinate change in a sweep drops below ``tol``.
    """
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    target = np.asarray(target_ranks, dtype=np.float64)
    if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1] or len(target) != V.shape[0]:
        raise ConfigError("shape mismatch between U, V and target_ranks")
    D = design_matrix(U, V)
    if not np.all(np.isfinite(D)) or not np.all(np.isfinite(target)):
        raise NumericError("non-finite entries in design matrix or targets")
    gram = D.T @ D
    corr = D.T @ target
    alpha = np.zeros(U.shape[0])
    trace = np.empty(max_sweeps)
    sweeps = _kernels.coordinate_descent_nnl1(
        gram, corr, float(lam), alpha, tol, max_sweeps, trace, float(target @ target)
    )
    if sweeps == max_sweeps:
        logger.warning("coordinate descent stopped at the %d-sweep cap", max_sweeps)
    return AlphaModel(alpha, target, float(lam), sweeps, trace[:sweeps].copy())


def approx_rank(alpha_model: AlphaModel, U, V, j: int) -> float:
    """``sum_i alpha_i U_i . V_j``."""
    return float(alpha_model.alpha @ (np.asarray(U) @ np.asarray(V)[j]))


def approx_ranks(alpha_model: AlphaModel, U, V) -> np.ndarray:
    return design_matrix(U, V) @ alpha_model.alpha


def dump_rank_diagnostics(path, counts, ranks, approx) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "count", "rank", "approx_rank"])
        for j, (c, r, a) in enumerate(zip(counts, ranks, approx)):
            w.writerow([j, int(c), f"{r:.17g}", f"{a:.17g}"])
