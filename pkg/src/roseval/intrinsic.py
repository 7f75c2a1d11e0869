"""Intrinsic proxy metrics: scores computed from a candidate's data alone.

Each metric maps one candidate's dataset (plus metadata) to a scalar used
for ranking, higher is better. Text-based metrics pool tokens across the
whole dataset and operate on normalized text; bigrams never cross sample
boundaries. All functions are pure and bit-reproducible: sums run in a
fixed order via ``math.fsum``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import CandidateGenerator, Dataset, DatasetError
from .textfeat import EmbeddingTable, bigrams, sample_tokens

METRIC_IDS = (
    "avg_cos_dist",
    "bigram_div",
    "n_valid",
    "silhouette",
    "ttr",
    "token_entropy",
    "param_size",
    "random_baseline",
    "rose",
)


@dataclass(frozen=True)
class MetricScore:
    """One proxy metric's value for one candidate.

    For randomized metrics ``value`` is the mean of ``per_run_values``.
    """

    metric_id: str
    generator_id: str
    value: float
    per_run_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.metric_id not in METRIC_IDS:
            raise ValueError(f"unknown metric_id {self.metric_id!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric_id}: non-finite value")


def _all_tokens(dataset: Dataset) -> list[str]:
    tokens: list[str] = []
    for s in dataset.samples:
        tokens.extend(sample_tokens(s))
    return tokens


def type_token_ratio(dataset: Dataset) -> float:
    """Distinct tokens divided by total tokens, pooled over the dataset."""
    tokens = _all_tokens(dataset)
    if not tokens:
        raise DatasetError("no tokens in dataset; TTR undefined")
    return len(set(tokens)) / len(tokens)


def token_entropy(dataset: Dataset) -> float:
    """Shannon entropy (nats) of the pooled empirical token distribution."""
    counts = Counter(_all_tokens(dataset))
    total = sum(counts.values())
    if total == 0:
        raise DatasetError("no tokens in dataset; entropy undefined")
    return -math.fsum(
        (c / total) * math.log(c / total) for _, c in sorted(counts.items())
    )


def bigram_diversity(dataset: Dataset) -> float:
    """Distinct bigrams divided by total bigrams; bigrams are per sample."""
    seen: set[tuple[str, str]] = set()
    total = 0
    for s in dataset.samples:
        for pair in bigrams(sample_tokens(s)):
            seen.add(pair)
            total += 1
    if total == 0:
        raise DatasetError("no bigrams in dataset; bigram diversity undefined")
    return len(seen) / total


def _unit_rows(dataset: Dataset, embeddings: EmbeddingTable) -> np.ndarray:
    rows = np.stack([embeddings[s.id] for s in dataset.samples])
    norms = np.sqrt((rows * rows).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        bad = dataset.samples[int(zero[0])].id
        raise DatasetError(f"zero-norm embedding for sample {bad!r}")
    return rows / norms[:, None]


def avg_pairwise_cosine_distance(dataset: Dataset, embeddings: EmbeddingTable) -> float:
    """Mean cosine distance over within-label sample pairs.

    For each label, the mean of 1 - cos(u, v) over all unordered pairs in
    that label; the result is the unweighted mean across labels.
    """
    unit = _unit_rows(dataset, embeddings)
    per_label: list[float] = []
    for label in dataset.label_set.labels:
        idx = [i for i, s in enumerate(dataset.samples) if s.label == label]
        if len(idx) < 2:
            raise DatasetError(f"label {label!r} has < 2 samples; cannot pair")
        sub = unit[idx]
        dist = 1.0 - sub @ sub.T
        iu = np.triu_indices(len(idx), k=1)
        per_label.append(math.fsum(dist[iu].tolist()) / len(iu[0]))
    return math.fsum(per_label) / len(per_label)


def silhouette_score(
    dataset: Dataset, embeddings: EmbeddingTable, distance: str = "cosine"
) -> float:
    """Mean silhouette coefficient with labels as clusters.

    s(i) = (b - a) / max(a, b) with a = mean intra-label distance
    (excluding self) and b = the smallest mean distance to another label;
    s(i) = 0 when a = b = 0. Distance is cosine by default, with a
    Euclidean switch.
    """
    if len(dataset.label_set.labels) < 2:
        raise DatasetError("silhouette needs at least 2 labels")
    if distance == "cosine":
        unit = _unit_rows(dataset, embeddings)
        dmat = 1.0 - unit @ unit.T
    elif distance == "euclidean":
        rows = np.stack([embeddings[s.id] for s in dataset.samples])
        diff = rows[:, None, :] - rows[None, :, :]
        dmat = np.sqrt((diff * diff).sum(axis=2))
    else:
        raise ValueError(f"unknown distance {distance!r}")

    label_idx: dict[str, list[int]] = {}
    for i, s in enumerate(dataset.samples):
        label_idx.setdefault(s.label, []).append(i)
    for label in dataset.label_set.labels:
        if len(label_idx.get(label, [])) < 2:
            raise DatasetError(f"label {label!r} has < 2 samples; silhouette undefined")

    scores: list[float] = []
    for i, s in enumerate(dataset.samples):
        own = [j for j in label_idx[s.label] if j != i]
        a = math.fsum(dmat[i, j] for j in own) / len(own)
        b = min(
            math.fsum(dmat[i, j] for j in label_idx[other]) / len(label_idx[other])
            for other in dataset.label_set.labels
            if other != s.label
        )
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return math.fsum(scores) / len(scores)


def param_size_score(candidate: CandidateGenerator) -> float:
    """Parameter-count heuristic: the score is the declared size itself."""
    return float(candidate.param_count)


def random_baseline(
    candidates: list[CandidateGenerator], n_runs: int, rng_seed: int
) -> list[MetricScore]:
    """Uniform random selection repeated over ``n_runs`` seeded runs.

    Per candidate, ``per_run_values`` is the indicator of being chosen in
    each run; ``value`` is the mean indicator (selection frequency).
    Selection draws over lexicographically sorted candidate ids, so the
    outcome does not depend on input ordering.
    """
    if not candidates:
        raise ValueError("random baseline needs at least one candidate")
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    ordered = sorted(c.generator_id for c in candidates)
    rng = np.random.default_rng(rng_seed & 0xFFFFFFFFFFFFFFFF)
    choices = [ordered[int(rng.integers(len(ordered)))] for _ in range(n_runs)]
    scores = []
    for gid in ordered:
        indicators = tuple(1.0 if chosen == gid else 0.0 for chosen in choices)
        scores.append(
            MetricScore(
                metric_id="random_baseline",
                generator_id=gid,
                value=math.fsum(indicators) / n_runs,
                per_run_values=indicators,
            )
        )
    return scores


def random_choices(scores: list[MetricScore]) -> list[str]:
    """Recover the per-run selection sequence from random-baseline scores."""
    by_gid = {s.generator_id: s.per_run_values for s in scores}
    n_runs = len(next(iter(by_gid.values())))
    choices = []
    for r in range(n_runs):
        chosen = [gid for gid, runs in by_gid.items() if runs[r] == 1.0]
        if len(chosen) != 1:
            raise ValueError("malformed random-baseline indicators")
        choices.append(chosen[0])
    return choices
