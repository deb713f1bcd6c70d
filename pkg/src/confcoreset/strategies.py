"""Batch query strategies over a labeled/unlabeled pool.

All selectors return a 1-D ``int64`` array of pool indices in selection
order. Every argmax and top-B breaks ties toward the lowest pool index.

Uncertainty scores are passed as a length-``n`` array aligned with the
pool; entries at already-labeled positions are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from confcoreset.errors import SelectionError
from confcoreset.rng import Xoshiro256

RANDOM = "random"
ENTROPY = "entropy"
LEARNING_LOSS = "learning-loss"
CORESET = "coreset"
CONFIDENT = "confident-coreset"
CONFIDENT_SUM = "confident-coreset-sum"
RANK_FUSION = "rank-fusion"
SEQUENTIAL = "sequential"

STRATEGY_IDS = (RANDOM, ENTROPY, LEARNING_LOSS, CORESET, CONFIDENT, CONFIDENT_SUM, RANK_FUSION, SEQUENTIAL)
NEEDS_UNCERTAINTY = frozenset({LEARNING_LOSS, CONFIDENT, CONFIDENT_SUM, RANK_FUSION, SEQUENTIAL})

PER_ITERATION = "per_iteration"
PER_ROUND = "per_round"


@dataclass(frozen=True)
class StrategySpec:
    id: str
    alpha: float = 0.25
    budget: int = 1

    def __post_init__(self):
        if self.id not in STRATEGY_IDS:
            raise SelectionError(f"unknown strategy {self.id!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise SelectionError("alpha must lie in [0, 1]")
        if self.budget < 1:
            raise SelectionError("budget must be at least 1")

    @property
    def label(self) -> str:
        """Stable name used in output tables; alpha only where it matters."""
        if self.id in (CONFIDENT, CONFIDENT_SUM):
            return f"{self.id}@{self.alpha:g}"
        return self.id

    @classmethod
    def parse(cls, text: str, budget: int = 1) -> "StrategySpec":
        """Parse ``"id"`` or ``"id@alpha"``."""
        name, _, alpha = text.strip().partition("@")
        if alpha:
            try:
                value = float(alpha)
            except ValueError:
                raise SelectionError(f"bad alpha in {text!r}") from None
            return cls(name, value, budget)
        return cls(name, budget=budget)


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SelectionError("dimension mismatch")
    diff = a - b
    return float(np.sqrt(diff @ diff))


def _distances_to(features: np.ndarray, point: np.ndarray) -> np.ndarray:
    # the single place pool-to-point distances are computed; keeps min-distance updates bit-exact
    diff = features - point
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _as_features(features) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if features.ndim != 2:
        raise SelectionError("features must be an n x d matrix")
    return features


def _labeled_list(labeled: Iterable[int], n: int) -> list[int]:
    out = [int(i) for i in labeled]
    if any(i < 0 or i >= n for i in out):
        raise SelectionError("labeled index out of range")
    if len(set(out)) != len(out):
        raise SelectionError("labeled set contains duplicates")
    return out


class MinDistState:
    """Distance from every pool point to its closest labeled point.

    ``dist[i] == 0`` for labeled ``i``; ``labeled`` is a boolean mask.
    """

    __slots__ = ("dist", "labeled")

    def __init__(self, dist: np.ndarray, labeled: np.ndarray):
        self.dist = dist
        self.labeled = labeled

    def candidates(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled)


def init_min_distances(features, labeled: Iterable[int]) -> MinDistState:
    features = _as_features(features)
    n = features.shape[0]
    labeled = _labeled_list(labeled, n)
    if not labeled:
        raise SelectionError("labeled set is empty")
    dist = np.full(n, np.inf)
    for j in labeled:
        np.minimum(dist, _distances_to(features, features[j]), out=dist)
    mask = np.zeros(n, dtype=bool)
    mask[labeled] = True
    dist[mask] = 0.0
    return MinDistState(dist, mask)


def update_min_distances(state: MinDistState, features, new_idx: int) -> MinDistState:
    """Fold one newly labeled point into the state (returns a new state)."""
    features = _as_features(features)
    new_idx = int(new_idx)
    if not 0 <= new_idx < len(state.dist):
        raise SelectionError(f"index {new_idx} out of range")
    if state.labeled[new_idx]:
        raise SelectionError(f"index {new_idx} is already labeled")
    dist = np.minimum(state.dist, _distances_to(features, features[new_idx]))
    dist[new_idx] = 0.0
    mask = state.labeled.copy()
    mask[new_idx] = True
    return MinDistState(dist, mask)


def minmax_normalize(values) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant vector maps to all 0.5."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise SelectionError("cannot normalize an empty vector")
    if not np.all(np.isfinite(values)):
        raise SelectionError("cannot normalize non-finite values")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def _check_budget(budget: int, available: int) -> int:
    budget = int(budget)
    if budget < 1:
        raise SelectionError("budget must be at least 1")
    if budget > available:
        raise SelectionError(f"budget {budget} exceeds the {available} unlabeled candidates")
    return budget


def kcenter_greedy(features, labeled: Iterable[int], budget: int) -> np.ndarray:
    """Greedy K-center: repeatedly label the point farthest from the labeled set."""
    features = _as_features(features)
    state = init_min_distances(features, labeled)
    budget = _check_budget(budget, int((~state.labeled).sum()))
    selected = np.empty(budget, dtype=np.int64)
    for k in range(budget):
        scores = np.where(state.labeled, -np.inf, state.dist)
        u = int(np.argmax(scores))
        selected[k] = u
        state = update_min_distances(state, features, u)
    return selected


def _full_uncertainty(uncertainty, n: int, candidates: np.ndarray) -> np.ndarray:
    if uncertainty is None:
        raise SelectionError("uncertainty scores are required")
    values = np.asarray(uncertainty, dtype=np.float64)
    if values.shape != (n,):
        raise SelectionError(f"expected {n} uncertainty scores, got shape {values.shape}")
    if not np.all(np.isfinite(values[candidates])):
        raise SelectionError("missing uncertainty score for a candidate")
    return values


def confident_kcenter(
    features,
    labeled: Iterable[int],
    uncertainty,
    budget: int,
    alpha: float = 0.25,
    combiner: str = "product",
    renorm_uncertainty: str = PER_ITERATION,
) -> np.ndarray:
    """Confident K-center selection.

    Each step scores every current candidate by
    ``N(mindist) ** alpha * N(G) ** (1 - alpha)`` (``combiner="product"``)
    or ``N(mindist) + N(G)`` (``combiner="sum"``), where ``N`` is min-max
    normalization over the current candidates, labels the argmax and updates
    the min-distances. ``0 ** 0`` is taken as 1 so the end points of
    ``alpha`` recover pure K-center and pure top uncertainty.

    With ``renorm_uncertainty="per_round"`` the uncertainty term is
    normalized once over the round's initial candidates.
    """
    if combiner not in ("product", "sum"):
        raise SelectionError(f"unknown combiner {combiner!r}")
    if renorm_uncertainty not in (PER_ITERATION, PER_ROUND):
        raise SelectionError(f"unknown renormalization mode {renorm_uncertainty!r}")
    if not 0.0 <= alpha <= 1.0:
        raise SelectionError("alpha must lie in [0, 1]")
    features = _as_features(features)
    n = features.shape[0]
    state = init_min_distances(features, labeled)
    candidates = state.candidates()
    budget = _check_budget(budget, len(candidates))
    unc = _full_uncertainty(uncertainty, n, candidates)
    if renorm_uncertainty == PER_ROUND:
        unc_round = np.zeros(n)
        unc_round[candidates] = minmax_normalize(unc[candidates])

    selected = np.empty(budget, dtype=np.int64)
    for k in range(budget):
        candidates = state.candidates()
        if renorm_uncertainty == PER_ITERATION:
            scores = combine_scores(state.dist[candidates], unc[candidates], alpha, combiner)
        else:
            scores = _combine(minmax_normalize(state.dist[candidates]), unc_round[candidates], alpha, combiner)
        u = int(candidates[np.argmax(scores)])
        selected[k] = u
        state = update_min_distances(state, features, u)
    return selected


def _combine(norm_dist: np.ndarray, norm_unc: np.ndarray, alpha: float, combiner: str) -> np.ndarray:
    if combiner == "product":
        # numpy defines 0.0 ** 0.0 == 1.0
        return np.power(norm_dist, alpha) * np.power(norm_unc, 1.0 - alpha)
    return norm_dist + norm_unc


def combine_scores(min_dists, uncertainty, alpha: float, combiner: str = "product") -> np.ndarray:
    """Confident-coreset informativeness of each candidate for one greedy step."""
    if combiner not in ("product", "sum"):
        raise SelectionError(f"unknown combiner {combiner!r}")
    return _combine(minmax_normalize(min_dists), minmax_normalize(uncertainty), alpha, combiner)


def top_b_select(scores, budget: int, candidates: Sequence[int] | None = None) -> np.ndarray:
    """The ``budget`` highest-scoring candidates, in descending score order.

    ``scores`` is aligned with ``candidates`` (default: ``range(len(scores))``).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise SelectionError("scores must be a vector")
    cand = np.arange(len(scores)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if len(cand) != len(scores):
        raise SelectionError("scores and candidates differ in length")
    budget = _check_budget(budget, len(scores))
    # order by (-score, pool index)
    order = np.lexsort((cand, -scores))
    return cand[order[:budget]].astype(np.int64)


def rank_fusion_select(min_dist_scores, uncertainty_scores, budget: int,
                       candidates: Sequence[int] | None = None) -> np.ndarray:
    """Late fusion: average the two descending ranks, pick the lowest averages.

    Tied values share the smallest rank of their group. The returned
    indices are ordered by (average rank, candidate index).
    """
    dist = np.asarray(min_dist_scores, dtype=np.float64)
    unc = np.asarray(uncertainty_scores, dtype=np.float64)
    if dist.shape != unc.shape or dist.ndim != 1:
        raise SelectionError("score vectors must be equal-length vectors")
    cand = np.arange(len(dist)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if len(cand) != len(dist):
        raise SelectionError("scores and candidates differ in length")
    budget = _check_budget(budget, len(dist))
    rank_dist = rankdata(-dist, method="min")
    rank_unc = rankdata(-unc, method="min")
    avg = (rank_dist + rank_unc) / 2.0
    order = np.lexsort((cand, avg))
    return cand[order[:budget]].astype(np.int64)


def sequential_select(features, labeled: Iterable[int], uncertainty, budget: int) -> np.ndarray:
    """ceil(B/2) top-uncertainty picks, then floor(B/2) K-center picks on the enlarged set."""
    features = _as_features(features)
    n = features.shape[0]
    labeled = _labeled_list(labeled, n)
    if budget < 2:
        raise SelectionError("sequential selection needs a budget of at least 2")
    mask = np.zeros(n, dtype=bool)
    mask[labeled] = True
    candidates = np.flatnonzero(~mask)
    budget = _check_budget(budget, len(candidates))
    unc = _full_uncertainty(uncertainty, n, candidates)
    first = top_b_select(unc[candidates], math.ceil(budget / 2), candidates)
    second = kcenter_greedy(features, labeled + first.tolist(), budget // 2)
    return np.concatenate([first, second])


def entropy_scores(probs) -> np.ndarray:
    """Shannon entropy (nats) per probability row, with 0 ln 0 = 0."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise SelectionError("probabilities must be a matrix")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise SelectionError("each row must be a probability distribution")
    logs = np.log(np.where(probs > 0, probs, 1.0))
    return -(probs * logs).sum(axis=1)


def random_select(candidates: Sequence[int], budget: int, seed: int) -> np.ndarray:
    cand = [int(c) for c in candidates]
    budget = _check_budget(budget, len(cand))
    return np.array(Xoshiro256(seed).sample(cand, budget), dtype=np.int64)
