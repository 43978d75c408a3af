"""Monte Carlo checks of the FastRandomHash collision guarantees.

Generative functions are modeled as independent uniform maps from items to
``1..b``. Each trial draws its own function from a splitmix64 stream seeded
by ``(seed, trial index)``, so results do not depend on batching.

For one drawn function ``h`` the co-hashing probability over all functions
with the same collision pattern is ``|h(P1) & h(P2)| / |h(P1 | P2)|``; the
per-trial bounds are checked against that value.
"""

from __future__ import annotations

import itertools
import math

import numba
import numpy as np

from .hashing import derive_seed
from .similarity import jaccard

# Offsets below/above J at l=256, b=4096 (threshold and 3x threshold at d=1.5):
# J - 0.078 <= P <= J + 0.234 with probability 0.998.
REFERENCE_INTERVAL = (0.078, 0.234)


@numba.njit(inline="always")
def _sm64(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def _trial_state(base, trial):
    _, s = _sm64(base ^ (np.uint64(trial) * np.uint64(0xD1B54A32D192ED03)))
    return s


@numba.njit(inline="always")
def _draw(state, b):
    state, z = _sm64(state)
    return state, np.int64(((z >> np.uint64(32)) * np.uint64(b)) >> np.uint64(32)) + 1


@numba.njit(cache=True)
def _theorem1_trials(in1, in2, b, trials, base):
    # per trial: H1 == H2, collision count, and |h(P1) & h(P2)| / |h(P1 | P2)|
    ell = in1.shape[0]
    eq = np.zeros(trials, dtype=np.bool_)
    kappa = np.zeros(trials, dtype=np.int64)
    p_h = np.zeros(trials, dtype=np.float64)
    h = np.empty(ell, dtype=np.int64)
    flag = np.empty(ell, dtype=np.int64)
    for x in range(ell):
        flag[x] = (1 if in1[x] else 0) | (2 if in2[x] else 0)
    for t in range(trials):
        st = _trial_state(base, t)
        m1 = b + 1
        m2 = b + 1
        for x in range(ell):
            st, h[x] = _draw(st, b)
            if in1[x] and h[x] < m1:
                m1 = h[x]
            if in2[x] and h[x] < m2:
                m2 = h[x]
        order = np.argsort(h)
        distinct = 0
        both = 0
        x = 0
        while x < ell:
            v = h[order[x]]
            acc = 0
            while x < ell and h[order[x]] == v:
                acc |= flag[order[x]]
                x += 1
            distinct += 1
            if acc == 3:
                both += 1
        eq[t] = m1 == m2
        kappa[t] = ell - distinct
        p_h[t] = both / distinct
    return eq, kappa, p_h


@numba.njit(cache=True)
def _kappa_trials(ell, b, trials, base):
    kappa = np.zeros(trials, dtype=np.int64)
    h = np.empty(ell, dtype=np.int64)
    for t in range(trials):
        st = _trial_state(base, t)
        for x in range(ell):
            st, h[x] = _draw(st, b)
        h.sort()
        distinct = 1
        for x in range(1, ell):
            if h[x] != h[x - 1]:
                distinct += 1
        kappa[t] = ell - distinct
    return kappa


def _union_masks(p1, p2):
    a, b = set(int(x) for x in p1), set(int(x) for x in p2)
    if not a or not b:
        raise ValueError("profiles must be non-empty")
    union = sorted(a | b)
    return (np.array([x in a for x in union]), np.array([x in b for x in union]))


def collision_threshold(ell: int, b: int, d: float) -> float:
    """``(1 + d)(l - 1) / (2b)``: the collision-density level of the concentration bound."""
    return (1.0 + d) * (ell - 1) / (2.0 * b)


def chernoff_bound(ell: int, b: int, d: float) -> float:
    """Lower bound on P[kappa/l < (1+d)(l-1)/(2b)]."""
    if d <= 0:
        raise ValueError("d must be > 0")
    mu = ell * (ell - 1) / (2.0 * b)
    log_base = d - (1.0 + d) * math.log1p(d)
    return 1.0 - math.exp(mu * log_base)


def upper_bound(j: float, x: float) -> float:
    """``(J + x)(1 + 2x)`` expanded: J + 3x plus the explicit quadratic remainder."""
    return j + 3.0 * x + 2.0 * x * x


def check_theorem1(p1, p2, b: int, trials: int = 100_000, seed: int = 0,
                   d: float | None = None, interval: tuple[float, float] | None = None) -> dict:
    """Co-hashing frequency of two profiles against the Jaccard-based bounds.

    Per trial, records the collision count ``kappa`` and checks
    ``J - kappa/l <= p_h`` and, when ``kappa <= l/2``,
    ``p_h <= J + 3 kappa/l + 2 (kappa/l)**2``. ``interval`` (offsets below
    and above J) or ``d`` adds a containment frequency for a fixed interval.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    in1, in2 = _union_masks(p1, p2)
    ell = in1.size
    J = jaccard(sorted(set(int(x) for x in p1)), sorted(set(int(x) for x in p2)))
    base = np.uint64(derive_seed(seed, 0x7E01))
    eq, kappa, p_h = _theorem1_trials(in1, in2, b, trials, base)
    x = kappa / ell
    p_hat = float(eq.mean())
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / trials)
    lower = J - x
    upper_ok = x <= 0.5
    upper = upper_bound(J, x)
    lower_viol = int(np.count_nonzero(p_h < lower - 1e-12))
    upper_viol = int(np.count_nonzero(upper_ok & (p_h > upper + 1e-12)))
    report = {
        "J": J,
        "ell_union": ell,
        "b": b,
        "trials": trials,
        "mean_collision_density": float(x.mean()),
        "max_collision_density": float(x.max()),
        "p_hat": p_hat,
        "p_hat_stderr": se,
        "mean_p_h": float(p_h.mean()),
        "lower_bound": float(lower.mean()),
        "upper_bound": float(upper.mean()),
        "lower_violations": lower_viol,
        "upper_violations": upper_viol,
        "upper_not_applicable": int(np.count_nonzero(~upper_ok)),
        "violations": lower_viol + upper_viol,
        "per_trial_hold_rate": 1.0 - (lower_viol + upper_viol) / trials,
        "aggregate_lower_holds": bool(p_hat >= float(lower.mean()) - 3 * se),
    }
    if d is not None and interval is None:
        xm = collision_threshold(ell, b, d)
        interval = (xm, 3 * xm)
        report["d"] = d
        report["chernoff_bound"] = chernoff_bound(ell, b, d)
        report["density_below_threshold"] = float(np.mean(x < xm))
    if interval is not None:
        lo, hi = J - interval[0], J + interval[1]
        report["interval"] = [lo, hi]
        report["interval_containment"] = float(np.mean((p_h >= lo) & (p_h <= hi)))
        report["p_hat_in_interval"] = bool(lo <= p_hat <= hi)
    return report


def check_theorem2(ell_union: int, b: int, d: float, trials: int = 100_000,
                   seed: int = 0) -> dict:
    """Empirical P[kappa/l < (1+d)(l-1)/(2b)] against the Chernoff lower bound."""
    if d <= 0:
        raise ValueError("d must be > 0")
    thr = collision_threshold(ell_union, b, d)
    bound = chernoff_bound(ell_union, b, d)
    if b == 1:
        # every item lands in the single bucket
        kappa = ell_union - 1
        freq = float(kappa / ell_union < thr)
        return {"ell_union": ell_union, "b": b, "d": d, "threshold": thr, "bound": bound,
                "trials": 0, "frequency": freq, "stderr": 0.0, "holds": freq >= bound}
    base = np.uint64(derive_seed(seed, 0x7E02))
    kappa = _kappa_trials(ell_union, b, trials, base)
    x = kappa / ell_union
    freq = float(np.mean(x < thr))
    se = math.sqrt(max(bound * (1 - bound), 0.0) / trials)
    return {
        "ell_union": ell_union, "b": b, "d": d, "threshold": thr, "bound": bound,
        "trials": trials, "frequency": freq, "stderr": se,
        "kappa_range": [int(kappa.min()), int(kappa.max())],
        "holds": freq >= bound - 3 * se,
    }


def enumerate_theorem1(p1, p2, b: int) -> dict:
    """Exact co-hashing probability over all ``b**l`` generative functions."""
    in1, in2 = _union_masks(p1, p2)
    ell = in1.size
    if b ** ell > 2_000_000:
        raise ValueError("enumeration too large")
    J = jaccard(sorted(set(p1)), sorted(set(p2)))
    hits = 0
    ratio_sum = 0.0
    violations = 0
    total = 0
    for h in itertools.product(range(1, b + 1), repeat=ell):
        h = np.array(h)
        img1, img2 = set(h[in1].tolist()), set(h[in2].tolist())
        img = img1 | img2
        kappa = ell - len(img)
        x = kappa / ell
        p = len(img1 & img2) / len(img)
        hits += h[in1].min() == h[in2].min()
        ratio_sum += p
        if p < J - x - 1e-12 or (x <= 0.5 and p > upper_bound(J, x) + 1e-12):
            violations += 1
        total += 1
    return {"J": J, "ell_union": ell, "b": b, "functions": total,
            "p_exact": hits / total, "mean_p_h": ratio_sum / total, "violations": violations}


def colocation_rate(p1, p2, b: int, t: int, trials: int = 10_000, seed: int = 0) -> dict:
    """Frequency with which two profiles share a bucket under at least one of
    ``t`` independent functions, next to ``1 - (1 - (J - kappa/l))**t``."""
    in1, in2 = _union_masks(p1, p2)
    base = np.uint64(derive_seed(seed, 0x7E03))
    eq, kappa, _ = _theorem1_trials(in1, in2, b, trials * t, base)
    together = eq.reshape(trials, t).any(axis=1)
    J = jaccard(sorted(set(p1)), sorted(set(p2)))
    x = float((kappa / in1.size).mean())
    single = max(J - x, 0.0)
    return {"J": J, "t": t, "rate": float(together.mean()),
            "lower_bound": 1.0 - (1.0 - single) ** t,
            "stderr": math.sqrt(max(together.mean() * (1 - together.mean()), 1e-12) / trials)}
