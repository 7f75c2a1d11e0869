"""Data model and ingestion for per-generator labeled text datasets.

Datasets are line-delimited JSON: one flat object per line with required
keys ``id``, ``text``, ``label`` and optional ``embedding`` (list of
numbers), ``tokens`` (list of strings, overrides the built-in tokenizer)
and ``meta`` (string map). Dataset-level metadata (generator id, task,
language, split) lives in the run manifest, not in the data files.

All types are immutable after construction; every randomized operation is
a pure function of its seed.
"""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

SPLITS = ("synthetic-train", "synthetic-test", "human-train", "human-test")


class DatasetError(ValueError):
    """Raised for malformed dataset files or contract violations.

    ``problems`` holds one human-readable entry per offending record.
    """

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class LabelSet:
    """Ordered set of class names; the order is the tie-break anchor."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DatasetError("label set needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise DatasetError("label set contains duplicates")

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class Sample:
    """One labeled text, optionally with a precomputed embedding or tokens."""

    id: str
    text: str
    label: str
    embedding: tuple[float, ...] | None = None
    tokens: tuple[str, ...] | None = None
    meta: Mapping[str, str] | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """All samples attributed to one generator for one task-language slot.

    Sample order is preserved from the input file; it anchors every
    seeded selection performed downstream.
    """

    generator_id: str
    task: str
    language: str
    split: str
    samples: tuple[Sample, ...]
    label_set: LabelSet
    n_requested: int | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r}")
        if self.n_requested is not None and self.n_requested < len(self.samples):
            raise DatasetError(
                f"n_requested={self.n_requested} smaller than retained "
                f"sample count {len(self.samples)}"
            )

    def __len__(self) -> int:
        return len(self.samples)

    def label_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in self.label_set.labels}
        for s in self.samples:
            counts[s.label] += 1
        return counts


@dataclass(frozen=True)
class CandidateGenerator:
    """Identity and declared parameter count of one generator under comparison."""

    generator_id: str
    param_count: int
    display_name: str = ""

    def __post_init__(self):
        if self.param_count <= 0:
            raise DatasetError(
                f"candidate {self.generator_id!r}: param_count must be positive"
            )


def normalize_text(text: str) -> str:
    """Lowercase, strip Unicode punctuation, collapse whitespace runs.

    Punctuation means the Unicode P* categories (Pc Pd Pe Pf Pi Po Ps);
    digits and symbol categories are kept. Idempotent.
    """
    lowered = text.lower()
    kept = "".join(ch for ch in lowered if unicodedata.category(ch)[0] != "P")
    return " ".join(kept.split())


def load_dataset(
    path: str | Path,
    expected_labels: LabelSet,
    *,
    generator_id: str = "",
    task: str = "",
    language: str = "",
    split: str = "synthetic-train",
    n_requested: int | None = None,
) -> Dataset:
    """Load a line-delimited JSON dataset, validating every record.

    All problems are collected and reported together, each naming the
    offending line. Record order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: file not found")

    samples: list[Sample] = []
    problems: list[str] = []
    id_lines: dict[str, list[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"{path}:{lineno}: invalid JSON ({exc.msg})")
                continue
            problem = _check_record(record, expected_labels, path, lineno)
            if problem:
                problems.append(problem)
                continue
            id_lines.setdefault(record["id"], []).append(lineno)
            samples.append(
                Sample(
                    id=record["id"],
                    text=record["text"],
                    label=record["label"],
                    embedding=tuple(float(v) for v in record["embedding"])
                    if "embedding" in record
                    else None,
                    tokens=tuple(record["tokens"]) if "tokens" in record else None,
                    meta=dict(record["meta"]) if "meta" in record else None,
                )
            )
    for sample_id, lines in id_lines.items():
        if len(lines) > 1:
            where = ", ".join(str(n) for n in lines)
            problems.append(f"{path}: duplicate id {sample_id!r} on lines {where}")
    if problems:
        raise DatasetError(problems)
    return Dataset(
        generator_id=generator_id,
        task=task,
        language=language,
        split=split,
        samples=tuple(samples),
        label_set=expected_labels,
        n_requested=n_requested,
    )


def _check_record(record, expected_labels: LabelSet, path: Path, lineno: int) -> str | None:
    if not isinstance(record, dict):
        return f"{path}:{lineno}: record is not a JSON object"
    for key in ("id", "text", "label"):
        if key not in record:
            return f"{path}:{lineno}: missing required key {key!r}"
        if not isinstance(record[key], str):
            return f"{path}:{lineno}: key {key!r} must be a string"
    if not record["id"]:
        return f"{path}:{lineno}: empty id"
    if record["label"] not in expected_labels:
        return (
            f"{path}:{lineno}: unknown label {record['label']!r} "
            f"(expected one of {list(expected_labels.labels)})"
        )
    if "embedding" in record:
        emb = record["embedding"]
        if not isinstance(emb, list) or not all(
            isinstance(v, (int, float)) and math.isfinite(v) for v in emb
        ):
            return f"{path}:{lineno}: embedding must be a list of finite numbers"
    if "tokens" in record:
        toks = record["tokens"]
        if not isinstance(toks, list) or not all(isinstance(t, str) and t for t in toks):
            return f"{path}:{lineno}: tokens must be a list of non-empty strings"
    if "meta" in record and not isinstance(record["meta"], dict):
        return f"{path}:{lineno}: meta must be an object"
    return None


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back to the line-delimited JSON format.

    Reloading the written file yields a structurally identical dataset.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for s in dataset.samples:
            record: dict = {"id": s.id, "text": s.text, "label": s.label}
            if s.tokens is not None:
                record["tokens"] = list(s.tokens)
            if s.embedding is not None:
                record["embedding"] = list(s.embedding)
            if s.meta is not None:
                record["meta"] = dict(s.meta)
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def balance_by_label(dataset: Dataset, rng_seed: int) -> Dataset:
    """Downsample every label to the minimum per-label count.

    Retained samples are chosen by seeded uniform sampling without
    replacement (labels processed in label-set order); the output keeps
    the input ordering restricted to the retained ids. Already-balanced
    datasets pass through unchanged for any seed.
    """
    counts = dataset.label_counts()
    for label, count in counts.items():
        if count == 0:
            raise DatasetError(f"label {label!r} has zero samples; cannot balance")
    target = min(counts.values())
    rng = np.random.default_rng(rng_seed & 0xFFFFFFFFFFFFFFFF)
    keep: set[int] = set()
    for label in dataset.label_set.labels:
        positions = [i for i, s in enumerate(dataset.samples) if s.label == label]
        if len(positions) == target:
            keep.update(positions)
        else:
            chosen = rng.choice(len(positions), size=target, replace=False)
            keep.update(positions[int(i)] for i in chosen)
    retained = tuple(s for i, s in enumerate(dataset.samples) if i in keep)
    return replace(dataset, samples=retained, n_requested=None)


def split_dataset(
    dataset: Dataset, test_fraction: float, rng_seed: int
) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; ``round(test_fraction * count)`` per label.

    The two outputs partition the input exactly and both preserve the
    input sample order. Rounding is Python's round-half-even.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0,1), got {test_fraction}")
    counts = dataset.label_counts()
    for label, count in counts.items():
        if count < 2:
            raise DatasetError(
                f"label {label!r} has {count} sample(s); need at least 2 to split"
            )
    rng = np.random.default_rng(rng_seed & 0xFFFFFFFFFFFFFFFF)
    test_positions: set[int] = set()
    for label in dataset.label_set.labels:
        positions = [i for i, s in enumerate(dataset.samples) if s.label == label]
        n_test = round(test_fraction * len(positions))
        if n_test > 0:
            chosen = rng.choice(len(positions), size=n_test, replace=False)
            test_positions.update(positions[int(i)] for i in chosen)
    if dataset.split.startswith("human"):
        train_split, test_split = "human-train", "human-test"
    else:
        train_split, test_split = "synthetic-train", "synthetic-test"
    train = replace(
        dataset,
        split=train_split,
        samples=tuple(s for i, s in enumerate(dataset.samples) if i not in test_positions),
        n_requested=None,
    )
    test = replace(
        dataset,
        split=test_split,
        samples=tuple(s for i, s in enumerate(dataset.samples) if i in test_positions),
        n_requested=None,
    )
    return train, test


def valid_fraction(dataset: Dataset) -> float:
    """Fraction of generations that survived filtering.

    With ``n_requested`` present this is ``retained / requested``. Without
    it, a sample counts as valid when its normalized text is non-empty and
    is the first occurrence of that text within its label.
    """
    if dataset.n_requested is not None:
        if dataset.n_requested == 0:
            raise DatasetError("n_requested is 0; valid fraction undefined")
        return len(dataset.samples) / dataset.n_requested
    if not dataset.samples:
        raise DatasetError("empty dataset; valid fraction undefined")
    seen: dict[str, set[str]] = {}
    valid = 0
    for s in dataset.samples:
        norm = normalize_text(s.text)
        if not norm:
            continue
        bucket = seen.setdefault(s.label, set())
        if norm not in bucket:
            bucket.add(norm)
            valid += 1
    return valid / len(dataset.samples)


def concat_datasets(parts: Iterable[Dataset]) -> Dataset:
    """Concatenate datasets that share a label set, preserving order.

    Sample ids must stay unique across the result.
    """
    parts = list(parts)
    if not parts:
        raise DatasetError("nothing to concatenate")
    first = parts[0]
    seen_ids: dict[str, int] = {}
    samples: list[Sample] = []
    for part in parts:
        if part.label_set.labels != first.label_set.labels:
            raise DatasetError("cannot concatenate datasets with different label sets")
        for s in part.samples:
            if s.id in seen_ids:
                raise DatasetError(f"duplicate id {s.id!r} across concatenated datasets")
            seen_ids[s.id] = 1
            samples.append(s)
    return replace(first, samples=tuple(samples), n_requested=None)
