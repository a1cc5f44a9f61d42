"""Cosine-normalized matrix factorization trained by per-sample SGD.

The model scores a (user, item) pair by the cosine between the two factor
rows and fits it to ``rating / r_max``. Training sums the squared residual
over observed ratings only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .data import RatingsDataset
from .errors import ConfigError, DegenerateFactor, NumericError, ParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both training phases.

    ``klmat_epochs`` and ``klmat_learning_rate`` default to ``epochs`` and
    ``learning_rate`` when left as None.
    """

    k: int = 10
    learning_rate: float = 0.01
    beta: float = 0.0
    epochs: int = 30
    seed: int = 0
    epsilon_guard: float = 1e-8
    init_scale: float = 0.1
    klmat_epochs: int | None = None
    klmat_learning_rate: float | None = None

    def __post_init__(self):
        checks = [
            (isinstance(self.k, (int, np.integer)) and self.k >= 1, "k must be an int >= 1"),
            (math.isfinite(self.learning_rate) and self.learning_rate > 0, "learning_rate must be > 0"),
            (math.isfinite(self.beta) and self.beta >= 0, "beta must be >= 0"),
            (isinstance(self.epochs, (int, np.integer)) and self.epochs >= 1, "epochs must be >= 1"),
            (int(self.seed) >= 0, "seed must be unsigned"),
            (math.isfinite(self.epsilon_guard) and self.epsilon_guard > 0, "epsilon_guard must be > 0"),
            (math.isfinite(self.init_scale) and self.init_scale > 0, "init_scale must be > 0"),
            (self.klmat_epochs is None or self.klmat_epochs >= 0, "klmat_epochs must be >= 0"),
            (
                self.klmat_learning_rate is None
                or (math.isfinite(self.klmat_learning_rate) and self.klmat_learning_rate > 0),
                "klmat_learning_rate must be > 0",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def phase2_epochs(self) -> int:
        return self.epochs if self.klmat_epochs is None else self.klmat_epochs

    @property
    def phase2_learning_rate(self) -> float:
        return self.learning_rate if self.klmat_learning_rate is None else self.klmat_learning_rate

    def with_beta(self, beta) -> "TrainConfig":
        return replace(self, beta=float(beta))


@dataclass(eq=False)
class FactorModel:
    """User factors ``U`` (m x k) and item factors ``V`` (n x k).

    ``epochs_trained`` counts SGD passes applied so far; it keys the
    per-epoch shuffle so that training can be resumed deterministically.
    """

    U: np.ndarray
    V: np.ndarray
    epochs_trained: int = 0
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def num_users(self) -> int:
        return self.U.shape[0]

    @property
    def num_items(self) -> int:
        return self.V.shape[0]

    def copy(self) -> "FactorModel":
        return FactorModel(self.U.copy(), self.V.copy(), self.epochs_trained, list(self.history))

    def equals(self, other: "FactorModel") -> bool:
        """Bitwise equality of the factor matrices."""
        return (
            self.U.shape == other.U.shape
            and self.V.shape == other.V.shape
            and self.U.tobytes() == other.U.tobytes()
            and self.V.tobytes() == other.V.tobytes()
        )

    def scores(self, users=None) -> np.ndarray:
        """Cosine score matrix for ``users`` (all users by default) against all items."""
        U = self.U if users is None else self.U[users]
        nu = np.linalg.norm(U, axis=1)
        nv = np.linalg.norm(self.V, axis=1)
        if np.any(nu == 0) or np.any(nv == 0):
            raise DegenerateFactor("zero-norm factor row")
        return (U / nu[:, None]) @ (self.V / nv[:, None]).T


def init_model(m: int, n: int, config: TrainConfig) -> FactorModel:
    """Uniform positive initialization on (0, init_scale]."""
    if m < 1 or n < 1:
        raise ConfigError("m and n must be >= 1")
    rng = np.random.default_rng(config.seed)
    # 1 - U[0,1) lies in (0, 1]
    U = config.init_scale * (1.0 - rng.random((m, config.k)))
    V = config.init_scale * (1.0 - rng.random((n, config.k)))
    return FactorModel(U, V)


def predict_score(model: FactorModel, i: int, j: int) -> float:
    u = model.U[i]
    v = model.V[j]
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateFactor(f"zero-norm row for user {i} or item {j}")
    return min(1.0, max(-1.0, float(u @ v) / (nu * nv)))


def predict_rating(model: FactorModel, i: int, j: int, r_max: float) -> float:
    return min(r_max, max(0.0, r_max * predict_score(model, i, j)))


def predict_ratings(model: FactorModel, users, items, r_max: float) -> np.ndarray:
    """Vectorized ``predict_rating`` over index arrays."""
    U = model.U[users]
    V = model.V[items]
    nu = np.linalg.norm(U, axis=1)
    nv = np.linalg.norm(V, axis=1)
    if np.any(nu == 0) or np.any(nv == 0):
        raise DegenerateFactor("zero-norm factor row")
    cos = np.einsum("ij,ij->i", U, V) / (nu * nv)
    return np.clip(r_max * cos, 0.0, r_max)


def vanilla_loss(model: FactorModel, ds: RatingsDataset) -> float:
    """Sum over observed ratings of ``(r / r_max - cos(U_i, V_j))**2``."""
    U = model.U[ds.users]
    V = model.V[ds.items]
    nu = np.linalg.norm(U, axis=1)
    nv = np.linalg.norm(V, axis=1)
    if np.any(nu == 0) or np.any(nv == 0):
        raise DegenerateFactor("zero-norm factor row")
    cos = np.einsum("ij,ij->i", U, V) / (nu * nv)
    return float(np.sum((ds.ratings / ds.r_max - cos) ** 2))


def vanilla_gradients(u, v, target, epsilon_guard=1e-8):
    """Loss and gradients of ``(target - cos(u, v))**2`` for one sample."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    gu = np.empty_like(u)
    gv = np.empty_like(v)
    loss = _kernels.sample_loss_grad(u, v, float(target), 0.0, 1.0, 0.0, epsilon_guard, gu, gv)
    if math.isnan(loss):
        raise DegenerateFactor("row norm below epsilon_guard")
    return loss, gu, gv


def sgd_step_vanilla(model: FactorModel, triplet, learning_rate: float, r_max: float,
                     epsilon_guard: float = 1e-8) -> FactorModel:
    """Apply one SGD update for ``triplet = (i, j, rating)`` in place and return the model."""
    i, j, rating = triplet
    _, gu, gv = vanilla_gradients(model.U[i], model.V[j], rating / r_max, epsilon_guard)
    new_u = model.U[i] - learning_rate * gu
    new_v = model.V[j] - learning_rate * gv
    if np.linalg.norm(new_u) < epsilon_guard or np.linalg.norm(new_v) < epsilon_guard:
        raise DegenerateFactor(f"update would collapse row of user {i} or item {j}")
    model.U[i] = new_u
    model.V[j] = new_v
    return model


def epoch_order(n_samples: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n_samples)


def run_epochs(model: FactorModel, ds: RatingsDataset, config: TrainConfig, epochs: int,
               learning_rate: float, beta: float = 0.0, alpha=None, label="vanilla") -> FactorModel:
    """Continue SGD on ``model`` in place for ``epochs`` passes.

    The shuffle of epoch ``e`` depends only on ``(config.seed, e)``, where
    ``e`` counts from ``model.epochs_trained``.
    """
    if ds.num_users > model.num_users or ds.num_items > model.num_items:
        raise ConfigError("dataset index space exceeds model shape")
    targets = np.ascontiguousarray(ds.ratings / ds.r_max)
    if alpha is None:
        alpha = np.zeros(model.num_users)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    n = float(model.num_items)
    for _ in range(epochs):
        epoch = model.epochs_trained
        order = epoch_order(len(ds), config.seed, epoch)
        jitter_seed = int(np.random.SeedSequence([config.seed, epoch, 1]).generate_state(1)[0])
        status, pos, loss_sum, jitters = _kernels.sgd_epoch(
            model.U, model.V, ds.users, ds.items, targets, order, alpha, n,
            float(beta), float(learning_rate), config.epsilon_guard,
            config.init_scale / 100.0, jitter_seed,
        )
        if status != _kernels.OK:
            s = order[pos]
            where = (f"{label} epoch {epoch}, sample {pos} "
                     f"(user {ds.users[s]}, item {ds.items[s]})")
            if status == _kernels.DEGENERATE:
                raise DegenerateFactor(f"zero-norm factor row at {where}")
            raise NumericError(f"non-finite loss or update at {where}")
        if jitters:
            logger.warning("%s epoch %d: re-jittered %d collapsing rows", label, epoch, jitters)
        model.epochs_trained += 1
        model.history.append(loss_sum / max(len(ds), 1))
        logger.debug("%s epoch %d mean loss %.6g", label, epoch, model.history[-1])
    return model


def train_vanilla(train: RatingsDataset, config: TrainConfig) -> FactorModel:
    """Initialize and train the unregularized model for ``config.epochs``."""
    model = init_model(train.num_users, train.num_items, config)
    return run_epochs(model, train, config, config.epochs, config.learning_rate)


def save_model(model: FactorModel, path) -> None:
    """Write ``m n k`` then U and V rows as 17-significant-digit decimal text."""
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{model.num_users} {model.num_items} {model.k}\n")
        for row in np.vstack([model.U, model.V]):
            fh.write(" ".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def load_model(path) -> FactorModel:
    with open(Path(path), encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ParseError("model header must be 'm n k'", 1)
        m, n, k = (int(x) for x in header)
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (m + n, k):
        raise ParseError(f"expected {m + n} rows of {k} values, got {data.shape}")
    return FactorModel(np.ascontiguousarray(data[:m]), np.ascontiguousarray(data[m:]))
