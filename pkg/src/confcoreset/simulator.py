"""Pool-based active-learning simulation: train, evaluate, query, reveal, repeat."""

from __future__ import annotations

import math
import statistics
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from confcoreset import neural, strategies
from confcoreset.errors import InvariantError, SelectionError, SpecError
from confcoreset.neural import TrainConfig
from confcoreset.pool import (
    LabelVector,
    PoolState,
    SyntheticSpec,
    format_float,
    generate,
    init_labeled,
    load_features,
    load_labels,
    split_indices,
)
from confcoreset.rng import STREAM_DATA, STREAM_INITIAL, STREAM_SELECT, STREAM_TRAIN, derive_seed
from confcoreset.strategies import PER_ITERATION, PER_ROUND, StrategySpec

CSV_HEADER = "strategy,seed,round,num_labeled,fraction_labeled,test_accuracy,macro_recall"

DEFAULT_STRATEGIES = (
    StrategySpec(strategies.RANDOM),
    StrategySpec(strategies.ENTROPY),
    StrategySpec(strategies.LEARNING_LOSS),
    StrategySpec(strategies.CORESET),
    StrategySpec(strategies.CONFIDENT, 0.25),
)


@dataclass(frozen=True)
class SimulationConfig:
    dataset: SyntheticSpec | None = None
    features_path: str | None = None
    labels_path: str | None = None
    test_fraction: float = 0.2
    split_seed: int = 0
    initial_fraction: float = 0.10
    budget_fraction: float = 0.05
    rounds: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    strategies: tuple[StrategySpec, ...] = DEFAULT_STRATEGIES
    train: TrainConfig = field(default_factory=TrainConfig)
    renorm_uncertainty: str = PER_ITERATION
    resplit_per_seed: bool = False
    shared_initial: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        validate_config(self)


def validate_config(config: SimulationConfig) -> None:
    if (config.dataset is None) == (config.features_path is None):
        raise SpecError("give exactly one of a synthetic dataset spec or a features file")
    if config.features_path is not None and config.labels_path is None:
        raise SpecError("a features file needs a labels file")
    if not 0 < config.initial_fraction <= 1 or not 0 < config.budget_fraction <= 1:
        raise SpecError("fractions must lie in (0, 1]")
    if config.rounds < 1:
        raise SpecError("rounds must be positive")
    if config.initial_fraction + config.rounds * config.budget_fraction > 1 + 1e-12:
        raise SpecError("initial_fraction + rounds * budget_fraction exceeds 1")
    if not config.seeds:
        raise SpecError("at least one seed is required")
    if not config.strategies:
        raise SpecError("at least one strategy is required")
    labels = [s.label for s in config.strategies]
    if len(set(labels)) != len(labels):
        raise SpecError("duplicate strategy entries")
    if config.renorm_uncertainty not in (PER_ITERATION, PER_ROUND):
        raise SpecError(f"unknown renorm_uncertainty {config.renorm_uncertainty!r}")
    if config.workers < 1:
        raise SpecError("workers must be positive")
    if not 0 < config.test_fraction < 1:
        raise SpecError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class RoundRecord:
    strategy: str
    seed: int
    round: int
    num_labeled: int
    fraction_labeled: float
    test_accuracy: float
    macro_recall: float


@dataclass(frozen=True)
class Aggregate:
    strategy: str
    round: int
    num_labeled: int
    fraction_labeled: float
    accuracy_mean: float
    accuracy_stderr: float
    recall_mean: float
    recall_stderr: float


def mean_stderr(values) -> tuple[float, float]:
    """Mean and sample-std / sqrt(k); a single value has standard error 0."""
    values = [float(v) for v in values]
    if not values:
        raise SpecError("cannot aggregate an empty cell")
    mean = statistics.fmean(values)
    if len(values) == 1:
        return mean, 0.0
    return mean, statistics.stdev(values) / math.sqrt(len(values))


def aggregate(records) -> list[Aggregate]:
    """Per-(strategy, round) mean and standard error over seeds, in first-seen strategy order."""
    cells: dict[tuple[str, int], list[RoundRecord]] = {}
    for rec in records:
        cells.setdefault((rec.strategy, rec.round), []).append(rec)
    order = list(dict.fromkeys(rec.strategy for rec in records))
    out = []
    for (name, rnd), recs in sorted(cells.items(), key=lambda kv: (order.index(kv[0][0]), kv[0][1])):
        acc = mean_stderr([r.test_accuracy for r in recs])
        rec_ = mean_stderr([r.macro_recall for r in recs])
        out.append(Aggregate(name, rnd, recs[0].num_labeled, recs[0].fraction_labeled, *acc, *rec_))
    return out


@dataclass
class CurveTable:
    records: list[RoundRecord]
    strategy_order: list[str]

    def aggregates(self) -> list[Aggregate]:
        return aggregate(self.records)

    def final_accuracy(self, strategy: str) -> float:
        last = max(r.round for r in self.records if r.strategy == strategy)
        return next(a.accuracy_mean for a in self.aggregates() if a.strategy == strategy and a.round == last)

    def to_csv(self) -> str:
        """Record rows sorted by (strategy, seed, round), then mean/stderr rows per cell."""
        lines = [CSV_HEADER]
        for r in self.records:
            lines.append(",".join([
                r.strategy, str(r.seed), str(r.round), str(r.num_labeled),
                format_float(r.fraction_labeled), format_float(r.test_accuracy), format_float(r.macro_recall),
            ]))
        for a in self.aggregates():
            common = [a.strategy, None, str(a.round), str(a.num_labeled), format_float(a.fraction_labeled)]
            for tag, acc, rec in (("mean", a.accuracy_mean, a.recall_mean), ("stderr", a.accuracy_stderr, a.recall_stderr)):
                common[1] = tag
                lines.append(",".join(common + [format_float(acc), format_float(rec)]))
        return "\n".join(lines) + "\n"


@dataclass
class ModelBundle:
    mlp: neural.Mlp
    head: neural.UncertaintyHead


def run_round(pool: PoolState, features, model: ModelBundle | None, strategy: StrategySpec,
              budget: int, seed: int, renorm_uncertainty: str = PER_ITERATION):
    """Query ``budget`` new indices with ``strategy`` and add them to the pool.

    Returns ``(selected, new_pool)``; the new pool's S^0 is the old S.
    """
    candidates = pool.unlabeled()
    if budget > len(candidates):
        raise SelectionError(f"budget {budget} exceeds the {len(candidates)} unlabeled samples")
    labeled = list(pool.labeled)
    sid = strategy.id
    if sid == strategies.RANDOM:
        selected = strategies.random_select(candidates, budget, seed)
    else:
        if model is None:
            raise SelectionError(f"strategy {sid} needs a trained model")
        mlp, head = model.mlp, model.head
        if sid == strategies.ENTROPY:
            ent = strategies.entropy_scores(neural.predict_proba(mlp, features, candidates))
            selected = strategies.top_b_select(ent, budget, candidates)
        elif sid == strategies.LEARNING_LOSS:
            unc = neural.predict_uncertainty(mlp, head, features, candidates)
            selected = strategies.top_b_select(unc, budget, candidates)
        elif sid == strategies.CORESET:
            selected = strategies.kcenter_greedy(neural.embed(mlp, features), labeled, budget)
        else:
            emb = neural.embed(mlp, features)
            unc = neural.predict_uncertainty(mlp, head, features)
            if sid in (strategies.CONFIDENT, strategies.CONFIDENT_SUM):
                combiner = "product" if sid == strategies.CONFIDENT else "sum"
                selected = strategies.confident_kcenter(
                    emb, labeled, unc, budget, strategy.alpha, combiner, renorm_uncertainty)
            elif sid == strategies.RANK_FUSION:
                state = strategies.init_min_distances(emb, labeled)
                selected = strategies.rank_fusion_select(
                    state.dist[candidates], unc[candidates], budget, candidates)
            elif sid == strategies.SEQUENTIAL:
                selected = strategies.sequential_select(emb, labeled, unc, budget)
            else:  # pragma: no cover - StrategySpec rejects unknown ids
                raise SelectionError(f"unknown strategy {sid!r}")
    selected = np.asarray(selected, dtype=np.int64)
    if len(selected) != budget or len(set(selected.tolist())) != budget or pool.mask()[selected].any():
        raise InvariantError(f"{sid} returned an invalid selection")
    return selected, pool.start_round().add(selected.tolist())


@dataclass
class PreparedData:
    """Train/test partition of one seed's dataset."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    num_classes: int


def load_dataset(config: SimulationConfig) -> tuple[np.ndarray, LabelVector]:
    if config.dataset is not None:
        return generate(config.dataset)
    features = load_features(config.features_path)
    labels = load_labels(config.labels_path)
    if len(labels) != features.shape[0]:
        raise SpecError("features and labels differ in length")
    return features, labels


def prepare(config: SimulationConfig, seed: int, dataset=None) -> PreparedData:
    features, labels = dataset if dataset is not None else load_dataset(config)
    split_seed = derive_seed(seed, STREAM_DATA) if config.resplit_per_seed else config.split_seed
    train_idx, test_idx = split_indices(features.shape[0], config.test_fraction, split_seed)
    y = labels.labels
    return PreparedData(features[train_idx], y[train_idx], features[test_idx], y[test_idx], labels.num_classes)


def budget_size(config: SimulationConfig, n_train: int) -> int:
    return max(1, math.floor(config.budget_fraction * n_train))


def _initial_seed(config: SimulationConfig, seed: int, strategy: StrategySpec) -> int:
    if config.shared_initial:
        return derive_seed(seed, STREAM_INITIAL)
    return derive_seed(seed, STREAM_INITIAL, zlib.crc32(strategy.label.encode()))


def run_cell(config: SimulationConfig, data: PreparedData, strategy: StrategySpec, seed: int) -> list[RoundRecord]:
    """All rounds for one (strategy, seed): train from scratch, evaluate, query, reveal."""
    n_train = len(data.train_y)
    budget = budget_size(config, n_train)
    initial = math.floor(config.initial_fraction * n_train)
    pool = init_labeled(n_train, config.initial_fraction, _initial_seed(config, seed, strategy))
    records = []
    for rnd in range(config.rounds + 1):
        if pool.m != initial + rnd * budget:
            raise InvariantError("label budget not conserved")
        train_cfg = config.train.replace(seed=derive_seed(seed, STREAM_TRAIN, rnd))
        mlp, head = neural.train(data.train_x, data.train_y, pool.labeled, train_cfg, data.num_classes)
        acc, recall = neural.evaluate(mlp, data.test_x, data.test_y)
        records.append(RoundRecord(strategy.label, seed, rnd, pool.m, pool.m / n_train, acc, recall))
        if rnd == config.rounds:
            break
        _, pool = run_round(pool, data.train_x, ModelBundle(mlp, head), strategy, budget,
                            derive_seed(seed, STREAM_SELECT, rnd), config.renorm_uncertainty)
    return records


def _run_cell_job(args):
    config, data, strategy, seed = args
    return run_cell(config, data, strategy, seed)


def run_simulation(config: SimulationConfig) -> CurveTable:
    """Run every (strategy, seed) cell; output is a pure function of ``config``."""
    dataset = load_dataset(config)
    n_train = len(split_indices(dataset[0].shape[0], config.test_fraction, config.split_seed)[0])
    if math.floor(config.initial_fraction * n_train) < 1:
        raise SpecError("initial labeled set would be empty")
    if math.floor(config.initial_fraction * n_train) + config.rounds * budget_size(config, n_train) > n_train:
        raise SpecError("rounds exhaust the training pool")
    jobs = []
    for seed in config.seeds:
        data = prepare(config, seed, dataset)
        for spec in config.strategies:
            jobs.append((config, data, spec, seed))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_run_cell_job, jobs))
    else:
        results = [_run_cell_job(job) for job in jobs]
    order = [s.label for s in config.strategies]
    records = [rec for cell in results for rec in cell]
    records.sort(key=lambda r: (order.index(r.strategy), r.seed, r.round))
    return CurveTable(records, order)
