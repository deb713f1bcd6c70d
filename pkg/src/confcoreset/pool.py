"""Labeled/unlabeled pool bookkeeping, file ingestion and synthetic datasets."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from confcoreset.errors import FormatError, SpecError
from confcoreset.rng import Xoshiro256, derive_seed

GAUSSIAN_MIXTURE = "gaussian-mixture"
TWO_MOONS = "two-moons"


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if self.num_classes < 2:
            raise FormatError("label set needs at least 2 classes")
        if labels.ndim != 1 or (labels.size and (labels.min() < 0 or labels.max() >= self.num_classes)):
            raise FormatError("labels must be a 1-D vector of ids in [0, num_classes)")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices) -> "LabelVector":
        return LabelVector(self.labels[np.asarray(indices, dtype=np.int64)], self.num_classes)


@dataclass(frozen=True)
class PoolState:
    """Partition of ``range(n)`` into the labeled set S and the candidates.

    ``initial`` is the set S^0 at the start of the current selection round;
    ``labeled`` keeps insertion order.
    """

    n: int
    labeled: tuple[int, ...]
    initial: tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        labeled = tuple(int(i) for i in self.labeled)
        initial = labeled if self.initial is None else tuple(int(i) for i in self.initial)
        if len(set(labeled)) != len(labeled):
            raise SpecError("labeled set contains duplicate indices")
        if any(i < 0 or i >= self.n for i in labeled):
            raise SpecError("labeled index out of range")
        if not set(initial) <= set(labeled):
            raise SpecError("initial set must be a subset of the labeled set")
        object.__setattr__(self, "labeled", labeled)
        object.__setattr__(self, "initial", initial)

    @property
    def m(self) -> int:
        return len(self.labeled)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.labeled)] = True
        return out

    def unlabeled(self) -> np.ndarray:
        return np.flatnonzero(~self.mask())

    def add(self, indices: Iterable[int]) -> "PoolState":
        """Return a new state with ``indices`` appended to S (S^0 unchanged)."""
        return PoolState(self.n, self.labeled + tuple(int(i) for i in indices), self.initial)

    def start_round(self) -> "PoolState":
        """Freeze the current S as the next round's S^0."""
        return PoolState(self.n, self.labeled, self.labeled)


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    n: int
    num_classes: int
    priors: tuple[float, ...]
    spread: float
    seed: int
    dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        validate_spec(self)


def validate_spec(spec: SyntheticSpec) -> None:
    if spec.kind not in (GAUSSIAN_MIXTURE, TWO_MOONS):
        raise SpecError(f"unknown dataset kind {spec.kind!r}")
    if spec.num_classes < 2:
        raise SpecError("need at least 2 classes")
    if len(spec.priors) != spec.num_classes:
        raise SpecError("one prior per class required")
    if any(not math.isfinite(p) or p <= 0 for p in spec.priors):
        raise SpecError("priors must be positive")
    if abs(math.fsum(spec.priors) - 1.0) > 1e-9:
        raise SpecError("priors must sum to 1")
    if spec.n < spec.num_classes:
        raise SpecError("n must be at least the number of classes")
    if not math.isfinite(spec.spread) or spec.spread < 0:
        raise SpecError("spread must be a non-negative real")
    if spec.dim < 1:
        raise SpecError("dimension must be positive")
    if spec.kind == TWO_MOONS and (spec.num_classes != 2 or spec.dim != 2):
        raise SpecError("two-moons requires 2 classes in 2 dimensions")


def class_counts(priors: Sequence[float], n: int) -> list[int]:
    """floor(prior * n) per class; the remainder goes to the largest prior (lowest id on ties)."""
    counts = [math.floor(p * n) for p in priors]
    largest = max(range(len(priors)), key=lambda c: (priors[c], -c))
    counts[largest] += n - sum(counts)
    return counts


def check_features(features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise FormatError("features must be a non-empty n x d matrix")
    if not np.all(np.isfinite(features)):
        raise FormatError("features must be finite")
    return features


def load_features(path: str | os.PathLike) -> np.ndarray:
    """Read a header-less comma separated matrix. Raises OSError if unreadable."""
    with open(path, encoding="ascii", errors="strict") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty features file")
    rows = []
    width = None
    for lineno, line in enumerate(lines, 1):
        tokens = line.rstrip("\r").split(",")
        try:
            row = [float(tok) for tok in tokens]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric token") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    return check_features(np.array(rows, dtype=np.float64))


def _read_int_lines(path) -> list[int]:
    with open(path, encoding="ascii", errors="strict") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    values = []
    for lineno, line in enumerate(lines, 1):
        token = line.strip()
        try:
            values.append(int(token))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: not an integer: {token!r}") from None
    return values


def load_labels(path: str | os.PathLike, num_classes: int | None = None) -> LabelVector:
    """One non-negative integer per line; C defaults to 1 + max label."""
    values = _read_int_lines(path)
    if not values:
        raise FormatError(f"{path}: empty labels file")
    if min(values) < 0:
        raise FormatError(f"{path}: negative label")
    if num_classes is None:
        num_classes = max(values) + 1
        if num_classes < 2:
            raise FormatError(f"{path}: single class")
    elif max(values) >= num_classes:
        raise FormatError(f"{path}: label exceeds class count {num_classes}")
    return LabelVector(np.array(values, dtype=np.int64), num_classes)


def load_indices(path: str | os.PathLike) -> list[int]:
    values = _read_int_lines(path)
    if any(v < 0 for v in values):
        raise FormatError(f"{path}: negative index")
    return values


def load_scores(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="ascii", errors="strict") as fh:
        lines = [ln.strip() for ln in fh.read().split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    try:
        scores = np.array([float(tok) for tok in lines], dtype=np.float64)
    except ValueError:
        raise FormatError(f"{path}: non-numeric score") from None
    if scores.size == 0:
        raise FormatError(f"{path}: empty score file")
    return scores


def format_float(value: float) -> str:
    return f"{value:.9g}"


def write_features(path, features) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in np.asarray(features, dtype=np.float64):
            fh.write(",".join(format_float(v) for v in row) + "\n")


def write_lines(path, values) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in values:
            fh.write((format_float(v) if isinstance(v, (float, np.floating)) else str(int(v))) + "\n")


def _shuffled(features: np.ndarray, labels: np.ndarray, rng: Xoshiro256):
    order = np.array(rng.permutation(len(labels)), dtype=np.int64)
    return features[order], labels[order]


def generate_gaussian_mixture(spec: SyntheticSpec) -> tuple[np.ndarray, LabelVector]:
    """Imbalanced isotropic Gaussian blobs with class means on the unit sphere.

    Rows are emitted in a seed-determined shuffled order so that pool index
    carries no class information.
    """
    validate_spec(spec)
    if spec.kind != GAUSSIAN_MIXTURE:
        raise SpecError("spec kind must be gaussian-mixture")
    rng = Xoshiro256(spec.seed)
    means = _draw_means(rng, spec.num_classes, spec.dim)
    counts = class_counts(spec.priors, spec.n)
    rows, labels = [], []
    for c, count in enumerate(counts):
        for _ in range(count):
            noise = rng.normals(spec.dim)
            rows.append(means[c] + spec.spread * noise)
            labels.append(c)
    features, label_arr = _shuffled(np.array(rows), np.array(labels, dtype=np.int64), rng)
    return features, LabelVector(label_arr, spec.num_classes)


def _draw_means(rng: Xoshiro256, num_classes: int, dim: int) -> np.ndarray:
    means = np.empty((num_classes, dim))
    for c in range(num_classes):
        direction = rng.normals(dim)
        while not direction.any():
            direction = rng.normals(dim)
        means[c] = direction / np.sqrt(direction @ direction)
    return means


def gaussian_mixture_means(spec: SyntheticSpec) -> np.ndarray:
    """The class means :func:`generate_gaussian_mixture` uses for ``spec``."""
    return _draw_means(Xoshiro256(spec.seed), spec.num_classes, spec.dim)


def generate_two_moons(spec: SyntheticSpec) -> tuple[np.ndarray, LabelVector]:
    """Two interleaving unit half-circles; class 1 is shifted by (1, -0.5) and flipped."""
    validate_spec(spec)
    if spec.kind != TWO_MOONS:
        raise SpecError("spec kind must be two-moons")
    rng = Xoshiro256(spec.seed)
    counts = class_counts(spec.priors, spec.n)
    rows, labels = [], []
    for c, count in enumerate(counts):
        for _ in range(count):
            t = math.pi * rng.random()
            if c == 0:
                point = [math.cos(t), math.sin(t)]
            else:
                point = [1.0 - math.cos(t), 0.5 - math.sin(t)]
            point[0] += spec.spread * rng.normal()
            point[1] += spec.spread * rng.normal()
            rows.append(point)
            labels.append(c)
    features, label_arr = _shuffled(np.array(rows), np.array(labels, dtype=np.int64), rng)
    return features, LabelVector(label_arr, spec.num_classes)


def generate(spec: SyntheticSpec) -> tuple[np.ndarray, LabelVector]:
    if spec.kind == TWO_MOONS:
        return generate_two_moons(spec)
    return generate_gaussian_mixture(spec)


def init_labeled(n: int, fraction: float, seed: int) -> PoolState:
    """Uniformly random (unstratified) initial labeled set of size floor(fraction * n)."""
    if not 0 < fraction <= 1:
        raise SpecError("fraction must lie in (0, 1]")
    size = math.floor(fraction * n)
    if size < 1:
        raise SpecError(f"fraction {fraction} of {n} samples labels nothing")
    chosen = Xoshiro256(seed).sample(range(n), size)
    return PoolState(n, tuple(chosen), tuple(chosen))


def split_train_test(features, labels: LabelVector, test_fraction: float, seed: int):
    """Random disjoint split. Returns ``((X_train, y_train), (X_test, y_test))``.

    The test part has floor(test_fraction * n) rows; each part keeps the
    original relative row order.
    """
    if not 0 < test_fraction < 1:
        raise SpecError("test_fraction must lie in (0, 1)")
    features = check_features(features)
    n = features.shape[0]
    if len(labels) != n:
        raise SpecError("features and labels differ in length")
    train_idx, test_idx = split_indices(n, test_fraction, seed)
    return (
        (features[train_idx], labels.subset(train_idx)),
        (features[test_idx], labels.subset(test_idx)),
    )


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Index form of :func:`split_train_test`: sorted ``(train, test)`` index arrays."""
    if not 0 < test_fraction < 1:
        raise SpecError("test_fraction must lie in (0, 1)")
    n_test = math.floor(test_fraction * n)
    if n_test < 1 or n_test >= n:
        raise SpecError("split leaves an empty part")
    picked = Xoshiro256(derive_seed(seed, 0)).sample(range(n), n_test)
    test_idx = np.sort(np.array(picked, dtype=np.int64))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx
