"""Command-line front end: ``select``, ``simulate`` and ``generate``.

Exit codes: 0 success, 2 bad arguments/config/input, 3 I/O failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from confcoreset import strategies
from confcoreset.errors import InvariantError, SpecError
from confcoreset.neural import TrainConfig
from confcoreset.pool import (
    SyntheticSpec,
    generate,
    load_features,
    load_indices,
    load_scores,
    write_features,
    write_lines,
)
from confcoreset.simulator import SimulationConfig, run_simulation
from confcoreset.strategies import StrategySpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

DEFAULT_PRIORS = (0.5, 0.25, 0.15, 0.09, 0.01)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONFIG_KEYS = {
    # dataset
    "kind": str, "n": int, "classes": int, "dim": int, "priors": _floats, "spread": float,
    "data_seed": int, "features": str, "labels": str,
    # protocol
    "test_fraction": float, "split_seed": int, "initial_fraction": float, "budget_fraction": float,
    "rounds": int, "seeds": _ints, "strategies": str, "renorm_uncertainty": str,
    "resplit_per_seed": _bool, "shared_initial": _bool, "workers": int,
    # training
    "hidden": _ints, "head_width": int, "learning_rate": float, "epochs": int, "batch_size": int,
    "lambda": float, "margin": float, "detach_head_gradient": _bool,
}

_TRAIN_KEYS = {
    "hidden": "hidden", "head_width": "head_width", "learning_rate": "learning_rate",
    "epochs": "epochs", "batch_size": "batch_size", "lambda": "lam", "margin": "margin",
    "detach_head_gradient": "detach_head_gradient",
}
_PROTOCOL_KEYS = (
    "test_fraction", "split_seed", "initial_fraction", "budget_fraction", "rounds", "seeds",
    "renorm_uncertainty", "resplit_per_seed", "shared_initial", "workers",
)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines, ``#`` starts a comment. Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise SpecError(f"line {lineno}: expected 'key = value'")
        if key not in CONFIG_KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise SpecError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def build_simulation_config(values: dict) -> SimulationConfig:
    train_kwargs = {_TRAIN_KEYS[k]: v for k, v in values.items() if k in _TRAIN_KEYS}
    kwargs = {k: values[k] for k in _PROTOCOL_KEYS if k in values}
    if "strategies" in values:
        kwargs["strategies"] = tuple(
            StrategySpec.parse(s) for s in values["strategies"].split(",") if s.strip())
    if "features" in values or "labels" in values:
        dataset_keys = {"kind", "n", "classes", "dim", "priors", "spread", "data_seed"} & values.keys()
        if dataset_keys:
            raise SpecError(f"synthetic keys {sorted(dataset_keys)} conflict with features/labels")
        kwargs["features_path"] = values.get("features")
        kwargs["labels_path"] = values.get("labels")
    else:
        priors = values.get("priors", DEFAULT_PRIORS)
        kwargs["dataset"] = SyntheticSpec(
            kind=values.get("kind", "gaussian-mixture"),
            n=values.get("n", 2500),
            num_classes=values.get("classes", len(priors)),
            priors=priors,
            spread=values.get("spread", 0.5),
            seed=values.get("data_seed", 7),
            dim=values.get("dim", 16),
        )
    return SimulationConfig(train=TrainConfig(**train_kwargs), **kwargs)


def load_config(path) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return build_simulation_config(parse_config_text(text))


def cmd_select(args) -> int:
    if args.strategy not in strategies.STRATEGY_IDS:
        raise SpecError(f"unknown strategy {args.strategy!r}")
    needs_unc = args.strategy in strategies.NEEDS_UNCERTAINTY
    if needs_unc and not args.uncertainty:
        raise SpecError(f"strategy {args.strategy} requires --uncertainty")
    if args.strategy == strategies.ENTROPY and not args.probs:
        raise SpecError("strategy entropy requires --probs")
    spec = StrategySpec(args.strategy, args.alpha, args.budget)

    features = load_features(args.features)
    n = features.shape[0]
    labeled = load_indices(args.labeled)
    if any(i >= n for i in labeled):
        raise SpecError("labeled index out of range")
    if len(set(labeled)) != len(labeled):
        raise SpecError("labeled file contains duplicates")
    unc = load_scores(args.uncertainty) if needs_unc else None
    probs = load_features(args.probs) if args.probs else None

    mask = np.zeros(n, dtype=bool)
    mask[labeled] = True
    candidates = np.flatnonzero(~mask)
    sid = spec.id
    if sid == strategies.RANDOM:
        selected = strategies.random_select(candidates, spec.budget, args.seed)
    elif sid == strategies.ENTROPY:
        if probs.shape[0] != n:
            raise SpecError("probability file must have one row per pool sample")
        selected = strategies.top_b_select(strategies.entropy_scores(probs[candidates]), spec.budget, candidates)
    elif sid == strategies.LEARNING_LOSS:
        _check_scores(unc, n)
        selected = strategies.top_b_select(unc[candidates], spec.budget, candidates)
    elif sid == strategies.CORESET:
        selected = strategies.kcenter_greedy(features, labeled, spec.budget)
    elif sid in (strategies.CONFIDENT, strategies.CONFIDENT_SUM):
        _check_scores(unc, n)
        combiner = "product" if sid == strategies.CONFIDENT else "sum"
        selected = strategies.confident_kcenter(
            features, labeled, unc, spec.budget, spec.alpha, combiner, args.renorm)
    elif sid == strategies.RANK_FUSION:
        _check_scores(unc, n)
        state = strategies.init_min_distances(features, labeled)
        selected = strategies.rank_fusion_select(
            state.dist[candidates], unc[candidates], spec.budget, candidates)
    else:
        _check_scores(unc, n)
        selected = strategies.sequential_select(features, labeled, unc, spec.budget)

    if len(set(selected.tolist())) != spec.budget or mask[selected].any():
        raise InvariantError("selection is not a set of new pool indices")
    write_lines(args.out, selected.tolist())
    return EXIT_OK


def _check_scores(scores: np.ndarray, n: int) -> None:
    if len(scores) != n:
        raise SpecError(f"uncertainty file must have {n} lines, one per pool sample")


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    table = run_simulation(config)
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(table.to_csv())
    return EXIT_OK


def cmd_generate(args) -> int:
    priors = _floats(args.priors)
    spec = SyntheticSpec(
        kind=args.kind,
        n=args.n,
        num_classes=args.classes if args.classes is not None else len(priors),
        priors=priors,
        spread=args.spread,
        seed=args.seed,
        dim=args.dim,
    )
    features, labels = generate(spec)
    write_features(args.out_features, features)
    write_lines(args.out_labels, labels.labels.tolist())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confcoreset", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sel = sub.add_parser("select", help="pick the next batch to label from a feature file")
    sel.add_argument("--features", required=True, help="pool features CSV (n rows, no header)")
    sel.add_argument("--labeled", required=True, help="labeled indices, one 0-based index per line")
    sel.add_argument("--strategy", required=True, help=", ".join(strategies.STRATEGY_IDS))
    sel.add_argument("--budget", required=True, type=int)
    sel.add_argument("--alpha", type=float, default=0.25, help="distance weight for confident-coreset")
    sel.add_argument("--uncertainty", help="predicted-loss scores, one per pool row")
    sel.add_argument("--probs", help="class probability CSV (n rows), required by entropy")
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--renorm", choices=(strategies.PER_ITERATION, strategies.PER_ROUND),
                     default=strategies.PER_ITERATION)
    sel.add_argument("--out", required=True, help="output index file")
    sel.set_defaults(func=cmd_select)

    sim = sub.add_parser("simulate", help="run the full active-learning protocol")
    sim.add_argument("--config", required=True, help="key = value config file")
    sim.add_argument("--out", required=True, help="curves CSV")
    sim.set_defaults(func=cmd_simulate)

    gen = sub.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("--kind", choices=("gaussian-mixture", "two-moons"), default="gaussian-mixture")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--classes", type=int)
    gen.add_argument("--dim", type=int, default=2)
    gen.add_argument("--priors", required=True, help="comma separated class priors")
    gen.add_argument("--spread", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-features", required=True)
    gen.add_argument("--out-labels", required=True)
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - exit code contract allows nothing else
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
