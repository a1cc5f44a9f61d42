"""MovieLens-shaped synthetic ratings with Zipf item popularity.

Used for smoke runs and tests when the real MovieLens files are not at hand.
"""

from __future__ import annotations

import numpy as np

from .data import RatingsDataset


def synthetic_ratings(num_users=200, num_items=500, mean_per_user=40, zipf_exponent=1.0,
                      k=5, noise=0.5, seed=0):
    """Return a list of ``(user_id, item_id, rating)`` with half-star ratings in [0.5, 5]."""
    rng = np.random.default_rng(seed)
    popularity = 1.0 / np.arange(1, num_items + 1) ** zipf_exponent
    popularity /= popularity.sum()
    item_perm = rng.permutation(num_items)
    user_f = rng.normal(size=(num_users, k)) / np.sqrt(k)
    item_f = rng.normal(size=(num_items, k)) / np.sqrt(k)
    item_bias = rng.normal(scale=0.4, size=num_items) + 0.8 * np.log(popularity * num_items) / 5
    rows = []
    for u in range(num_users):
        count = int(np.clip(rng.lognormal(np.log(mean_per_user), 0.6), 5, num_items // 2))
        picks = rng.choice(num_items, size=count, replace=False, p=popularity)
        raw = 3.5 + item_bias[picks] + 1.5 * item_f[picks] @ user_f[u] + rng.normal(scale=noise, size=count)
        stars = np.clip(np.round(raw * 2) / 2, 0.5, 5.0)
        rows.extend((u + 1, int(item_perm[j]) + 1, float(r)) for j, r in zip(picks, stars))
    return rows


def synthetic_dataset(**kwargs) -> RatingsDataset:
    return RatingsDataset.from_triplets(synthetic_ratings(**kwargs))


def write_csv_small(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for t, (u, i, r) in enumerate(rows):
            fh.write(f"{u},{i},{r:g},{t}\n")
