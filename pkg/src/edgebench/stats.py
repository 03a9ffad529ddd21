"""Evaluation statistics: ENA, IQM, bootstrap CIs, Mann-Whitney U, Holm correction, permutation tests."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

BOOTSTRAP_SEED = 42
BOOTSTRAP_RESAMPLES = 5000
EXACT_MWU_MAX_N = 20


@dataclass(frozen=True)
class EnaScore:
    value: float
    j: float
    j_exp: float
    j_ref: float


def ena(j: float, j_exp: float, j_ref: float) -> EnaScore:
    """Expert-normalised advantage: 0 at the expert, 1 at the task ceiling."""
    if j_ref == j_exp:
        raise ValueError("j_ref must differ from j_exp")
    if j_ref < j_exp:
        raise ValueError("j_ref must exceed j_exp")
    return EnaScore((j - j_exp) / (j_ref - j_exp), float(j), float(j_exp), float(j_ref))


def _as_finite(x, name: str = "scalars") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def trimmed_mean(x) -> float:
    """Mean after dropping ``floor(n/4)`` values from each tail (no minimum size)."""
    a = np.sort(_as_finite(x))
    if a.size == 0:
        raise ValueError("empty sample")
    k = a.size // 4
    return float(a[k : a.size - k].mean())


def iqm(scalars) -> float:
    """Interquartile mean; the quartile cut drops ``floor(n/4)`` values per tail."""
    a = _as_finite(scalars)
    if a.size < 4:
        raise ValueError("IQM needs at least 4 values")
    return trimmed_mean(a)


def _iqm_rows(samples: np.ndarray) -> np.ndarray:
    s = np.sort(samples, axis=1)
    k = s.shape[1] // 4
    return s[:, k : s.shape[1] - k].mean(axis=1)


def bootstrap_ci_iqm(scalars, n_resamples: int = BOOTSTRAP_RESAMPLES, seed: int = BOOTSTRAP_SEED,
                     level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval of the IQM (single stratum)."""
    a = _as_finite(scalars)
    if a.size < 4:
        raise ValueError("IQM needs at least 4 values")
    if np.all(a == a[0]):
        return float(a[0]), float(a[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, a.size, size=(n_resamples, a.size))
    vals = _iqm_rows(a[idx])
    alpha = 1.0 - level
    lo, hi = np.percentile(vals, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def _rank_sum_distribution(doubled_ranks: np.ndarray, n1: int) -> dict[int, int]:
    """Counts of size-``n1`` subsets by sum of (integer) doubled ranks."""
    dp: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    dp[0][0] = 1
    for r in doubled_ranks.astype(int):
        for k in range(min(n1, len(doubled_ranks)) - 1, -1, -1):
            src = dp[k]
            if not src:
                continue
            dst = dp[k + 1]
            for s, c in src.items():
                dst[s + r] = dst.get(s + r, 0) + c
    return dp[n1]


def mann_whitney_two_sided(x, y, method: str = "auto") -> tuple[float, float]:
    """Two-sided rank-sum test; returns ``(U_x, p)``.

    ``method="auto"`` enumerates exactly when the combined size is at most 20
    and otherwise uses the tie-corrected normal approximation with continuity
    correction.
    """
    x, y = _as_finite(x, "x"), _as_finite(y, "y")
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([x, y])
    ranks = sps.rankdata(pooled)
    r1 = float(ranks[:n1].sum())
    u = r1 - n1 * (n1 + 1) / 2.0
    n = n1 + n2
    if method == "auto":
        method = "exact" if n <= EXACT_MWU_MAX_N else "asymptotic"
    mu = n1 * n2 / 2.0
    if method == "exact":
        d = np.rint(2 * ranks).astype(int)
        dist = _rank_sum_distribution(d, n1)
        total = math.comb(n, n1)
        centre = n1 * (n + 1)  # doubled expected rank sum
        obs = abs(int(round(2 * r1)) - centre)
        count = sum(c for s, c in dist.items() if abs(s - centre) >= obs)
        return u, min(1.0, count / total)
    if method != "asymptotic":
        raise ValueError(f"unknown method {method!r}")
    _, t = np.unique(pooled, return_counts=True)
    tie = float(np.sum(t**3 - t))
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return u, float(min(1.0, 2.0 * sps.norm.sf(z)))


def holm_bonferroni(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values in the input order."""
    p = np.asarray(p_values, dtype=np.float64).ravel()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adj = np.maximum.accumulate(adj)
    out = np.empty(m)
    out[order] = adj
    return out


DIRECTIONS = ("less", "greater")


def permutation_one_sided(a, b, direction: str | None = None, n_shuffles: int = 100_000,
                          rng: np.random.Generator | int | None = None, mode: str = "auto") -> float:
    """One-sided test on ``IQM(a) - IQM(b)``.

    ``direction="less"`` is H1: IQM(a) < IQM(b); ``"greater"`` the reverse.
    Random shuffles use ``p = (1 + count) / (1 + n_shuffles)``. When the number
    of distinct label splits does not exceed ``n_shuffles`` (``mode="auto"``)
    every split is enumerated and ``p`` is the exact fraction, which includes
    the observed split itself.
    """
    if direction not in DIRECTIONS:
        raise ValueError("direction must be 'less' or 'greater'")
    a, b = _as_finite(a, "a"), _as_finite(b, "b")
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([a, b])
    n = na + nb
    sign = 1.0 if direction == "less" else -1.0
    obs = sign * (trimmed_mean(a) - trimmed_mean(b))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(pooled))))
    n_splits = math.comb(n, na)
    if mode == "auto":
        mode = "exact" if n_splits <= n_shuffles else "monte_carlo"
    if mode == "exact":
        count = 0
        all_idx = np.arange(n)
        for combo in itertools.combinations(range(n), na):
            mask = np.zeros(n, dtype=bool)
            mask[list(combo)] = True
            stat = sign * (trimmed_mean(pooled[mask]) - trimmed_mean(pooled[all_idx[~mask]]))
            count += stat <= obs + tol
        return count / n_splits
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    count = 0
    chunk = 4096
    ka, kb = na // 4, nb // 4
    done = 0
    while done < n_shuffles:
        m = min(chunk, n_shuffles - done)
        perm = rng.permuted(np.broadcast_to(pooled, (m, n)), axis=1)
        sa = np.sort(perm[:, :na], axis=1)[:, ka : na - ka].mean(axis=1)
        sb = np.sort(perm[:, na:], axis=1)[:, kb : nb - kb].mean(axis=1)
        count += int(np.sum(sign * (sa - sb) <= obs + tol))
        done += m
    return (1 + count) / (1 + n_shuffles)


def significance_marker(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def policy_arm_lower_bound(window: int, p_max: float, confidence: float = 0.99, n_windows: int = 1) -> int:
    """Smallest policy-arm count consistent with per-step policy probability ``>= 1 - p_max``.

    The count stochastically dominates ``Binomial(window, 1 - p_max)``; the
    quantile is Bonferroni-split across ``n_windows`` simultaneous checks.
    """
    if window <= 0:
        return 0
    q = (1.0 - confidence) / max(1, n_windows)
    return int(sps.binom.ppf(q, window, 1.0 - p_max))
