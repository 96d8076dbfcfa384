"""Photon-count state detection.

Counts are Poisson with a mean set by the detected state.  Prep and transfer
imperfections flip ``down <-> up`` before counting.  Each sequence shot is
paired with two reference shots prepared bright and dark.  The detection
threshold is the median of the pooled reference counts (lower middle order
statistic for an even pool).  A count strictly above the threshold reads bright.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .qsim import Outcome


@dataclass(frozen=True)
class PhotonModel:
    mean_bright: float = 13.0
    mean_dark: float = 0.14
    mean_leaked: float = 1.3
    prep_error_down: float = 0.0
    prep_error_up: float = 0.0

    def __post_init__(self):
        for name in ("mean_bright", "mean_dark", "mean_leaked"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("prep_error_down", "prep_error_up"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


# integer codes used by the vectorized paths
DOWN, UP, LEAKED = 0, 1, 2
_CODES = {Outcome.DOWN: DOWN, Outcome.UP: UP, Outcome.LEAKED: LEAKED}


def sample_counts_array(codes: np.ndarray, m: PhotonModel, rng: np.random.Generator) -> np.ndarray:
    """Counts for an array of outcome codes (``DOWN``/``UP``/``LEAKED``)."""
    codes = np.asarray(codes)
    u = rng.random(codes.shape)
    flip_down = (codes == DOWN) & (u < m.prep_error_down)
    flip_up = (codes == UP) & (u < m.prep_error_up)
    bright = ((codes == DOWN) & ~flip_down) | flip_up
    dark = ((codes == UP) & ~flip_up) | flip_down
    means = np.where(bright, m.mean_bright, np.where(dark, m.mean_dark, m.mean_leaked))
    return rng.poisson(means)


def sample_counts(outcome: Outcome, m: PhotonModel, rng: np.random.Generator) -> int:
    return int(sample_counts_array(np.array(_CODES[Outcome(outcome)]), m, rng))


def reference_counts(m: PhotonModel, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n`` bright-prepared then ``n`` dark-prepared reference detections."""
    codes = np.concatenate([np.full(n, DOWN), np.full(n, UP)])
    counts = sample_counts_array(codes, m, rng)
    return counts[:n], counts[n:]


def reference_pair(m: PhotonModel, rng: np.random.Generator) -> tuple[int, int]:
    b, d = reference_counts(m, 1, rng)
    return int(b[0]), int(d[0])


@dataclass
class CountHistogram:
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_counts(cls, values) -> CountHistogram:
        return cls(Counter(int(v) for v in np.asarray(values).ravel()))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __add__(self, other: CountHistogram) -> CountHistogram:
        return CountHistogram(self.counts + other.counts)

    def update(self, values) -> None:
        vals, occ = np.unique(np.asarray(values).ravel(), return_counts=True)
        for v, o in zip(vals, occ):
            self.counts[int(v)] += int(o)

    def as_array(self, size: int | None = None) -> np.ndarray:
        top = max(self.counts, default=-1) + 1
        out = np.zeros(max(top, size or 0), dtype=np.int64)
        for k, v in self.counts.items():
            out[k] = v
        return out


def pooled_median(occurrences) -> int:
    """Lower-middle order statistic of a pooled sample given as an occurrence array."""
    occ = np.asarray(occurrences)
    rank = (int(occ.sum()) + 1) // 2  # 1-based rank of the lower middle
    return int(np.searchsorted(np.cumsum(occ), rank))


def threshold_from_references(bright: CountHistogram, dark: CountHistogram) -> int:
    if bright.total == 0 or dark.total == 0:
        raise ValueError("reference histograms must be non-empty")
    size = max(max(bright.counts), max(dark.counts)) + 1
    return pooled_median(bright.as_array(size) + dark.as_array(size))


def threshold_from_arrays(bright: np.ndarray, dark: np.ndarray) -> int:
    """Same rule as :func:`threshold_from_references` on raw count arrays."""
    if len(bright) == 0 or len(dark) == 0:
        raise ValueError("reference samples must be non-empty")
    pooled = np.concatenate([bright, dark])
    k = (len(pooled) + 1) // 2
    return int(np.partition(pooled, k - 1)[k - 1])


def classify(count, threshold) -> np.ndarray | str:
    """``'bright'`` if count > threshold else ``'dark'``."""
    bright = np.asarray(count) > np.asarray(threshold)
    if bright.ndim == 0:
        return "bright" if bright else "dark"
    return np.where(bright, "bright", "dark")


def write_histogram_csv(path, bright: CountHistogram, dark: CountHistogram) -> None:
    size = max(max(bright.counts, default=0), max(dark.counts, default=0)) + 1
    b, d = bright.as_array(size), dark.as_array(size)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["count", "bright_occurrences", "dark_occurrences"])
        for k in range(size):
            w.writerow([k, int(b[k]), int(d[k])])


def read_histogram_csv(path) -> tuple[CountHistogram, CountHistogram]:
    bright, dark = CountHistogram(), CountHistogram()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            k = int(row["count"])
            if int(row["bright_occurrences"]):
                bright.counts[k] = int(row["bright_occurrences"])
            if int(row["dark_occurrences"]):
                dark.counts[k] = int(row["dark_occurrences"])
    return bright, dark
