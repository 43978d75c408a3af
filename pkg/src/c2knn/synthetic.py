"""Synthetic user/item datasets for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset


def random_profiles(n_users: int, n_items: int, max_size: int = 30, min_size: int = 1,
                    seed: int = 0) -> Dataset:
    """Uniformly random profiles with sizes in ``[min_size, max_size]``."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(min_size, max_size + 1, size=n_users)
    profiles = [rng.choice(n_items, size=min(int(s), n_items), replace=False) for s in sizes]
    return Dataset.from_profiles(profiles, n_items=n_items)


def planted_clusters(n_users: int, n_items: int, n_groups: int, core: int = 60,
                     take: int = 30, noise: int = 5, seed: int = 0) -> Dataset:
    """Users drawn from ``n_groups`` taste groups.

    Each group owns ``core`` items; a user takes ``take`` of its group's
    items plus ``noise`` uniformly random ones.
    """
    rng = np.random.default_rng(seed)
    cores = [rng.choice(n_items, size=core, replace=False) for _ in range(n_groups)]
    profiles = []
    for u in range(n_users):
        g = cores[u % n_groups]
        p = np.concatenate((rng.choice(g, size=take, replace=False),
                            rng.integers(0, n_items, size=noise)))
        profiles.append(p)
    return Dataset.from_profiles(profiles, n_items=n_items)


def movielens_like(n_users: int = 6038, n_items: int = 3533, mean_profile: float = 95.0,
                   n_tastes: int = 40, taste_weight: float = 0.6, zipf: float = 0.9,
                   seed: int = 0) -> Dataset:
    """Skewed, moderately dense ratings resembling a binarized MovieLens.

    Item popularity follows a power law; each user mixes global popularity
    with a few latent taste groups, so neighborhoods have real structure.
    """
    rng = np.random.default_rng(seed)
    pop = 1.0 / np.arange(1, n_items + 1) ** zipf
    pop = pop[rng.permutation(n_items)]
    pop /= pop.sum()
    tastes = []
    for _ in range(n_tastes):
        w = rng.gamma(0.3, size=n_items) * pop
        tastes.append(w / w.sum())
    sigma = 0.9
    mu = np.log(mean_profile) - sigma ** 2 / 2
    sizes = np.clip(rng.lognormal(mu, sigma, size=n_users).astype(int), 20, n_items // 2)
    profiles = []
    for u in range(n_users):
        picks = rng.choice(n_tastes, size=2, replace=False)
        mix = taste_weight * (0.7 * tastes[picks[0]] + 0.3 * tastes[picks[1]]) \
            + (1 - taste_weight) * pop
        profiles.append(rng.choice(n_items, size=int(sizes[u]), replace=False, p=mix))
    return Dataset.from_profiles(profiles, n_items=n_items)
