"""Compiled per-sample loss/gradient and the SGD epoch loop.

Vanilla and KL-regularized training share ``sgd_epoch``; with ``beta == 0``
the regularizer branch is skipped entirely, so both paths execute identical
arithmetic.
"""

import math

import numpy as np
from numba import njit

OK = 0
NONFINITE = 1
DEGENERATE = 2


@njit(cache=True)
def sample_loss_grad(u, v, target, alpha, n, beta, eps, gu, gv):
    """Loss of one observed rating; writes d/du into ``gu`` and d/dv into ``gv``.

    ``target`` is the rating already divided by r_max. Returns NaN when a
    row norm is below ``eps``.
    """
    k = u.shape[0]
    dot = 0.0
    nu2 = 0.0
    nv2 = 0.0
    for d in range(k):
        dot += u[d] * v[d]
        nu2 += u[d] * u[d]
        nv2 += v[d] * v[d]
    nu = math.sqrt(nu2)
    nv = math.sqrt(nv2)
    if nu < eps or nv < eps:
        return np.nan
    norm_prod = nu * nv
    cos = dot / norm_prod
    e = target - cos
    loss = e * e
    for d in range(k):
        gu[d] = -2.0 * e * (v[d] / norm_prod - cos * u[d] / nu2)
        gv[d] = -2.0 * e * (u[d] / norm_prod - cos * v[d] / nv2)
    if beta != 0.0:
        q = 1.0 / n
        x = alpha * dot
        if x > eps:
            p = 1.0 / x
            log_ratio = math.log(p) - math.log(q)
            loss += beta * (p - q) * log_ratio
            # f(x) = (1/x - q)(ln(1/x) - ln q);  f'(x) = -p^2 ln(p/q) - p (p - q)
            coef = beta * alpha * (-(p * p) * log_ratio - p * (p - q))
            for d in range(k):
                gu[d] += coef * v[d]
                gv[d] += coef * u[d]
        else:
            p = 1.0 / eps
            loss += beta * (p - q) * (math.log(p) - math.log(q))
    return loss


@njit(cache=True)
def sgd_epoch(U, V, users, items, targets, order, alpha, n, beta, lr, eps,
              jitter_scale, jitter_seed):
    """One pass of per-sample SGD in the given order, updating U and V in place.

    Returns ``(status, position, loss_sum, jitters)``; on a non-OK status the
    sample at ``position`` was not applied.
    """
    np.random.seed(jitter_seed)
    k = U.shape[1]
    gu = np.empty(k)
    gv = np.empty(k)
    new_u = np.empty(k)
    new_v = np.empty(k)
    loss_sum = 0.0
    jitters = 0
    for pos in range(order.shape[0]):
        s = order[pos]
        i = users[s]
        j = items[s]
        ui = U[i]
        vj = V[j]
        loss = sample_loss_grad(ui, vj, targets[s], alpha[i], n, beta, eps, gu, gv)
        if not math.isfinite(loss):
            if math.isnan(loss):
                return DEGENERATE, pos, loss_sum, jitters
            return NONFINITE, pos, loss_sum, jitters
        loss_sum += loss
        nu2 = 0.0
        nv2 = 0.0
        for d in range(k):
            new_u[d] = ui[d] - lr * gu[d]
            new_v[d] = vj[d] - lr * gv[d]
            nu2 += new_u[d] * new_u[d]
            nv2 += new_v[d] * new_v[d]
        if not (math.isfinite(nu2) and math.isfinite(nv2)):
            return NONFINITE, pos, loss_sum, jitters
        if math.sqrt(nu2) < eps:
            for d in range(k):
                new_u[d] = ui[d] + jitter_scale * (2.0 * np.random.random() - 1.0)
            jitters += 1
        if math.sqrt(nv2) < eps:
            for d in range(k):
                new_v[d] = vj[d] + jitter_scale * (2.0 * np.random.random() - 1.0)
            jitters += 1
        for d in range(k):
            ui[d] = new_u[d]
            vj[d] = new_v[d]
    return OK, -1, loss_sum, jitters


@njit(cache=True)
def coordinate_descent_nnl1(gram, corr, lam, alpha, tol, max_sweeps, objective_trace,
                            const):
    """Cyclic coordinate descent for min_{a>=0} a'Ga - 2c'a + const + lam*sum(a).

    ``gram = D'D``, ``corr = D'r``, ``const = r'r``. ``alpha`` is updated in
    place; per-sweep objectives go to ``objective_trace``. Returns the number
    of sweeps run.
    """
    m = alpha.shape[0]
    sweeps = 0
    for sweep in range(max_sweeps):
        max_change = 0.0
        for i in range(m):
            if gram[i, i] <= 0.0:
                new = 0.0
            else:
                s = corr[i]
                for l in range(m):
                    if l != i:
                        s -= gram[i, l] * alpha[l]
                new = (s - 0.5 * lam) / gram[i, i]
                if new < 0.0:
                    new = 0.0
            change = abs(new - alpha[i])
            if change > max_change:
                max_change = change
            alpha[i] = new
        obj = const + lam * np.sum(alpha)
        for i in range(m):
            obj -= 2.0 * corr[i] * alpha[i]
            for l in range(m):
                obj += alpha[i] * gram[i, l] * alpha[l]
        objective_trace[sweep] = obj
        sweeps = sweep + 1
        if max_change < tol:
            break
    return sweeps
