"""Outcome statistics comparing proxy rankings to the oracle.

Rankings sort descending by score with lexicographic tie-breaks. The
correlation and test statistics are implemented from their definitions
(tie-corrected Kendall tau-b, Fisher-z Pearson intervals, Mann-Whitney U
with exact small-sample enumeration) because the surrounding test suite
checks them against independent enumeration oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .intrinsic import MetricScore

_Z95 = 1.959963984540054  # two-sided 95% normal quantile
_EXACT_LIMIT = 12  # exact Mann-Whitney enumeration up to this combined n


@dataclass(frozen=True)
class Ranking:
    """Candidates ordered best-first under one metric."""

    metric_id: str
    order: tuple[str, ...]
    scores: dict[str, float]


@dataclass(frozen=True)
class OracleTable:
    """Downstream F1 on human-labeled test data, per candidate."""

    scores: dict[str, float]
    per_run: dict[str, tuple[float, ...]]

    def best(self) -> float:
        return max(self.scores.values())

    def ranking(self) -> Ranking:
        return make_ranking("oracle", self.scores)


def make_ranking(metric_id: str, scores: dict[str, float]) -> Ranking:
    order = tuple(sorted(scores, key=lambda gid: (-scores[gid], gid)))
    return Ranking(metric_id=metric_id, order=order, scores=dict(scores))


def rank_by_metric(scores: list[MetricScore]) -> Ranking:
    """Ranking from per-candidate metric scores (descending, lexicographic
    tie-break)."""
    if not scores:
        raise ValueError("no scores to rank")
    metric_ids = {s.metric_id for s in scores}
    if len(metric_ids) != 1:
        raise ValueError(f"mixed metric ids in one ranking: {sorted(metric_ids)}")
    gids = [s.generator_id for s in scores]
    if len(set(gids)) != len(gids):
        raise ValueError("duplicate generator in ranking input")
    return make_ranking(scores[0].metric_id, {s.generator_id: s.value for s in scores})


def _check_same_candidates(proxy: Ranking, oracle: Ranking) -> None:
    if set(proxy.order) != set(oracle.order):
        raise ValueError(
            f"candidate sets differ: {sorted(proxy.order)} vs {sorted(oracle.order)}"
        )


def top1_match(proxy: Ranking, oracle: Ranking) -> bool:
    _check_same_candidates(proxy, oracle)
    return proxy.order[0] == oracle.order[0]


def top3_match(proxy: Ranking, oracle: Ranking) -> bool:
    """Set equality of the three best candidates, irrespective of order."""
    _check_same_candidates(proxy, oracle)
    if len(proxy.order) < 3:
        raise ValueError("top-3 match needs at least 3 candidates")
    return set(proxy.order[:3]) == set(oracle.order[:3])


def performance_gap(proxy_choice: str, oracle: OracleTable) -> float:
    """Oracle F1 of the chosen candidate minus the best oracle F1, in
    percentage points; 0 is ideal, always <= 0."""
    if proxy_choice not in oracle.scores:
        raise ValueError(f"generator {proxy_choice!r} missing from oracle table")
    return (oracle.scores[proxy_choice] - oracle.best()) * 100.0


def pearson(x: list[float], y: list[float]) -> tuple[float, float, float]:
    """Sample Pearson r with a 95% Fisher-z confidence interval."""
    if len(x) != len(y):
        raise ValueError("length mismatch")
    n = len(x)
    if n < 3:
        raise ValueError("pearson needs at least 3 points")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    vx = math.fsum((xi - mx) ** 2 for xi in x)
    vy = math.fsum((yi - my) ** 2 for yi in y)
    if vx == 0.0 or vy == 0.0:
        raise ValueError("constant input; correlation undefined")
    r = cov / math.sqrt(vx * vy)
    r = max(-1.0, min(1.0, r))
    if n <= 3 or abs(r) == 1.0:
        return r, -1.0 if r < 1.0 else r, 1.0 if r > -1.0 else r
    z = math.atanh(r)
    half = _Z95 / math.sqrt(n - 3)
    return r, math.tanh(z - half), math.tanh(z + half)


def kendall_tau_b(x: list[float], y: list[float]) -> float:
    """Tie-corrected rank correlation:
    (concordant - discordant) / sqrt((n0 - n1) (n0 - n2))."""
    if len(x) != len(y):
        raise ValueError("length mismatch")
    n = len(x)
    if n < 2:
        raise ValueError("kendall tau needs at least 2 points")
    concordant = discordant = 0
    for i, j in combinations(range(n), 2):
        dx = (x[i] > x[j]) - (x[i] < x[j])
        dy = (y[i] > y[j]) - (y[i] < y[j])
        prod = dx * dy
        if prod > 0:
            concordant += 1
        elif prod < 0:
            discordant += 1
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(x)
    n2 = _tie_pairs(y)
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0.0:
        raise ValueError("all values tied on one side; tau undefined")
    return (concordant - discordant) / denom


def _tie_pairs(values: list[float]) -> int:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return sum(c * (c - 1) // 2 for c in counts.values())


def _midranks(pooled: list[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def mann_whitney_u(a: list[float], b: list[float]) -> tuple[float, float]:
    """Mann-Whitney U (for the first sample) and the two-sided p-value.

    The p-value is exact (full enumeration of rank assignments) when the
    combined sample size is at most 12 and there are no ties; otherwise a
    normal approximation with tie and continuity corrections is used.
    """
    na, nb = len(a), len(b)
    if na < 1 or nb < 1:
        raise ValueError("both samples must be non-empty")
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    rank_sum_a = math.fsum(ranks[:na])
    u_a = rank_sum_a - na * (na + 1) / 2
    has_ties = len(set(pooled)) != len(pooled)

    if na + nb <= _EXACT_LIMIT and not has_ties:
        p = _exact_two_sided_p(u_a, na, nb)
    else:
        p = _normal_two_sided_p(u_a, na, nb, pooled)
    return u_a, p


def _exact_two_sided_p(u_a: float, na: int, nb: int) -> float:
    """Enumerate all C(na+nb, na) rank assignments; p = 2 P(U <= min(U_a, U_b))."""
    n = na + nb
    u_min = min(u_a, na * nb - u_a)
    count = 0
    total = 0
    base = na * (na + 1) // 2
    for positions in combinations(range(1, n + 1), na):
        u = sum(positions) - base
        total += 1
        if min(u, na * nb - u) <= u_min + 1e-9:
            count += 1
    # assignments are counted from both tails by the min(), so halve symmetric
    # double counting via the standard two-sided doubling, capped at 1
    one_tail = sum(
        1
        for positions in combinations(range(1, n + 1), na)
        if sum(positions) - base <= u_min + 1e-9
    )
    total = math.comb(n, na)
    return min(1.0, 2.0 * one_tail / total)


def _normal_two_sided_p(u_a: float, na: int, nb: int, pooled: list[float]) -> float:
    n = na + nb
    mean = na * nb / 2
    tie_counts: dict[float, int] = {}
    for v in pooled:
        tie_counts[v] = tie_counts.get(v, 0) + 1
    tie_term = sum(t**3 - t for t in tie_counts.values())
    var = na * nb / 12 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    # continuity correction pulls the statistic a half step toward the mean
    z = (abs(u_a - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def bootstrap_ci(
    values: list[float], n_resamples: int, rng_seed: int
) -> tuple[float, float]:
    """Seeded percentile bootstrap (2.5/97.5) of the mean."""
    if len(values) < 2:
        raise ValueError("bootstrap needs at least 2 values")
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    arr = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(rng_seed & 0xFFFFFFFFFFFFFFFF)
    means = np.empty(n_resamples)
    for i in range(n_resamples):
        means[i] = arr[rng.integers(0, len(arr), size=len(arr))].mean()
    low, high = np.percentile(means, [2.5, 97.5])
    return float(low), float(high)
