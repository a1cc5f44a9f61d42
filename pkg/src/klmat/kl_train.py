"""KL-regularized training phase.

Per observed rating the loss is

    (r / r_max - cos(U_i, V_j))**2 + beta * (p - q) * (ln p - ln q)

with ``p = 1 / (alpha_i * U_i . V_j)`` and ``q = 1 / n``. The product
``(p - q)(ln p - ln q)`` is the pointwise symmetrized KL pair, so it is
non-negative and vanishes only at ``p = q``. When ``alpha_i * U_i . V_j``
falls to ``epsilon_guard`` or below, the penalty is held at its value at
``epsilon_guard`` and contributes no gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import RatingsDataset
from .errors import ConfigError, DegenerateFactor, NumericError
from .factorization import FactorModel, TrainConfig, run_epochs
from .rank_alpha import AlphaModel


@dataclass(frozen=True)
class KlmatSampleContext:
    i: int
    j: int
    r: float
    alpha_i: float
    n: int
    beta: float
    r_max: float
    epsilon_guard: float = 1e-8

    def __post_init__(self):
        vals = (self.r, self.alpha_i, self.beta, self.r_max, self.epsilon_guard)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("sample context values must be finite")
        if self.n < 1 or self.alpha_i < 0 or self.beta < 0:
            raise ConfigError("need n >= 1, alpha_i >= 0, beta >= 0")


def regularizer(x, n, epsilon_guard=1e-8):
    """``(p - q)(ln p - ln q)`` for ``p = 1/x``, ``q = 1/n``, clamped at x <= epsilon_guard."""
    x = max(float(x), epsilon_guard)
    p, q = 1.0 / x, 1.0 / n
    return (p - q) * (math.log(p) - math.log(q))


def _evaluate(ctx: KlmatSampleContext, U_i, V_j):
    u = np.ascontiguousarray(U_i, dtype=np.float64)
    v = np.ascontiguousarray(V_j, dtype=np.float64)
    gu = np.empty_like(u)
    gv = np.empty_like(v)
    loss = _kernels.sample_loss_grad(
        u, v, ctx.r / ctx.r_max, float(ctx.alpha_i), float(ctx.n), float(ctx.beta),
        ctx.epsilon_guard, gu, gv,
    )
    if math.isnan(loss):
        raise DegenerateFactor(f"zero-norm row at user {ctx.i}, item {ctx.j}")
    if not (math.isfinite(loss) and np.all(np.isfinite(gu)) and np.all(np.isfinite(gv))):
        raise NumericError(f"non-finite loss/gradient at user {ctx.i}, item {ctx.j}")
    return loss, gu, gv


def klmat_sample_loss(ctx: KlmatSampleContext, U_i, V_j) -> float:
    return _evaluate(ctx, U_i, V_j)[0]


def klmat_gradients(ctx: KlmatSampleContext, U_i, V_j):
    """Analytic ``(d loss / d U_i, d loss / d V_j)`` for one sample.

    With ``x = alpha_i * U_i . V_j``, the penalty ``f(x)`` has
    ``f'(x) = -p**2 * ln(p/q) - p * (p - q)``, which is chained through
    ``dx/dU_i = alpha_i * V_j`` and ``dx/dV_j = alpha_i * U_i``.
    """
    _, gu, gv = _evaluate(ctx, U_i, V_j)
    return gu, gv


def train_klmat(train: RatingsDataset, config: TrainConfig, alpha: AlphaModel,
                warm_start: FactorModel) -> FactorModel:
    """SGD on the regularized loss starting from a copy of ``warm_start``.

    Runs ``config.phase2_epochs`` passes; epoch shuffles continue the
    numbering of ``warm_start`` so that ``beta = 0`` reproduces continued
    vanilla training exactly.
    """
    if len(alpha.alpha) != warm_start.num_users:
        raise ConfigError("alpha length does not match number of users")
    model = warm_start.copy()
    return run_epochs(
        model, train, config, config.phase2_epochs, config.phase2_learning_rate,
        beta=config.beta, alpha=alpha.alpha, label="klmat",
    )
