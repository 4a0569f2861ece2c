"""Adam, the mini-batch training loop, stratified cross-validation, and sweeps."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .errors import ConfigError, NumericError, StratificationError
from .graphs import CLASSIFICATION, Dataset, build_egonets
from .model import Model, ModelConfig, loss, loss_grad, metric, model_backward, model_forward
from .rng import derived_seed, sub_rng


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    learning_rate: float = 0.001
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1 (early stopping needs room to improve)")


class Adam:
    """Standard bias-corrected first/second moment update, in place."""

    def __init__(self, named_params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for _, p, _ in self.named_params]
        self.v = [np.zeros_like(p) for _, p, _ in self.named_params]

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for (name, param, grad), m, v in zip(self.named_params, self.m, self.v):
            if not np.all(np.isfinite(grad)):
                raise NumericError(f"non-finite gradient in parameter block {name!r}")
            m[...] = b1 * m + (1.0 - b1) * grad
            v[...] = b2 * v + (1.0 - b2) * grad * grad
            param[...] = param - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass(frozen=True)
class TrainSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray | None = None


@dataclass
class RunRecord:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_metric: list[float] = field(default_factory=list)
    val_metric: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    best_val_metric: float = float("nan")
    test_metric: float | None = None
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def evaluate(model: Model, dataset: Dataset, egonets, indices):
    """(mean loss, mean metric) over the given graph indices, dropout off."""
    task = model.config.task
    total_loss = total_metric = 0.0
    for gi in indices:
        g = dataset.graphs[gi]
        out, _ = model_forward(g, egonets[gi], model, training=False)
        total_loss += loss(out, g.target, task)
        total_metric += metric(out, g.target, task)
    k = max(len(indices), 1)
    return total_loss / k, total_metric / k


def train(
    model: Model,
    dataset: Dataset,
    split: TrainSplit,
    config: TrainConfig,
    egonets=None,
) -> RunRecord:
    """Mini-batch Adam with early stopping on validation loss.

    Leaves the model at the parameters of its best validation epoch and
    returns the per-epoch record. The test metric (when a test set is
    given) is evaluated at that restored checkpoint.
    """
    if len(split.train) == 0 or len(split.val) == 0:
        raise ConfigError("train and validation splits must both be non-empty")
    if egonets is None:
        egonets = build_egonets(dataset, model.config.egonet_radius)
    task = model.config.task
    adam = Adam(
        model.named_parameters(),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
    )
    rng_shuffle = sub_rng(config.seed, "shuffle")
    rng_dropout = sub_rng(config.seed, "dropout")

    record = RunRecord()
    best_state = model.get_state()
    for epoch in range(config.epochs):
        tic = time.perf_counter()
        order = rng_shuffle.permutation(split.train)
        running_loss = running_metric = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            scale = 1.0 / len(batch)
            model.zero_grads()
            for gi in batch:
                g = dataset.graphs[gi]
                out, tape = model_forward(
                    g, egonets[gi], model, training=True, dropout_rng=rng_dropout
                )
                running_loss += loss(out, g.target, task)
                running_metric += metric(out, g.target, task)
                model_backward(tape, model, loss_grad(out, g.target, task) * scale)
            adam.step()
        val_loss, val_metric = evaluate(model, dataset, egonets, split.val)

        record.train_loss.append(running_loss / len(order))
        record.train_metric.append(running_metric / len(order))
        record.val_loss.append(val_loss)
        record.val_metric.append(val_metric)
        record.epoch_seconds.append(time.perf_counter() - tic)

        if val_loss < record.best_val_loss:
            record.best_val_loss = val_loss
            record.best_val_metric = val_metric
            record.best_epoch = epoch
            best_state = model.get_state()
        elif epoch - record.best_epoch >= config.patience:
            record.stopped_early = True
            break

    model.set_state(best_state)
    if split.test is not None and len(split.test):
        record.test_metric = evaluate(model, dataset, egonets, split.test)[1]
    return record


def holdout_split(dataset: Dataset, seed: int, val_fraction: float = 0.1) -> TrainSplit:
    """Single stratified train/validation split (no test part)."""
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError("val_fraction must lie in (0, 1)")
    rng = sub_rng(seed, "holdout")
    targets = dataset.targets()
    n = len(dataset)
    val_parts = []
    if dataset.task == CLASSIFICATION:
        for cls in range(dataset.num_classes):
            members = np.flatnonzero(targets == cls)
            take = max(1, int(round(len(members) * val_fraction)))
            val_parts.append(rng.permutation(members)[:take])
    else:
        take = max(1, int(round(n * val_fraction)))
        val_parts.append(rng.permutation(n)[:take])
    val = np.array(sorted(np.concatenate(val_parts)), dtype=np.intp)
    train_idx = np.setdiff1d(np.arange(n, dtype=np.intp), val)
    if len(train_idx) == 0:
        raise ConfigError("val_fraction leaves no training graphs")
    return TrainSplit(train=train_idx, val=val)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    seed: int
    test: tuple
    train: tuple
    val: tuple


def _deal(indices, n_folds, start):
    folds = [[] for _ in range(n_folds)]
    for offset, idx in enumerate(indices):
        folds[(start + offset) % n_folds].append(int(idx))
    return folds, (start + len(indices)) % n_folds


def make_fold_plan(dataset: Dataset, seed: int, n_folds: int = 10) -> FoldPlan:
    """Stratified folds (classification) with an inner 9:1 train/val split.

    Dealing shuffled class members into consecutive fold slots keeps both
    the fold sizes and the per-fold class counts within one of each other.
    The plan is a pure function of (targets, seed, n_folds).
    """
    if n_folds < 2:
        raise ConfigError("need at least 2 folds")
    rng = sub_rng(seed, "folds")
    targets = dataset.targets()
    n = len(dataset)

    test_folds = [[] for _ in range(n_folds)]
    if dataset.task == CLASSIFICATION:
        start = 0
        for cls in range(dataset.num_classes):
            members = np.flatnonzero(targets == cls)
            if len(members) < n_folds:
                raise StratificationError(
                    f"class {cls} has {len(members)} graphs, fewer than {n_folds} folds"
                )
            dealt, start = _deal(rng.permutation(members), n_folds, start)
            for f in range(n_folds):
                test_folds[f].extend(dealt[f])
    else:
        dealt, _ = _deal(rng.permutation(n), n_folds, 0)
        test_folds = dealt

    tests, trains, vals = [], [], []
    for f in range(n_folds):
        test = np.array(sorted(test_folds[f]), dtype=np.intp)
        rest = np.setdiff1d(np.arange(n, dtype=np.intp), test)
        val_parts = []
        if dataset.task == CLASSIFICATION:
            for cls in range(dataset.num_classes):
                members = rest[targets[rest] == cls]
                take = max(1, len(members) // 10)
                val_parts.append(rng.permutation(members)[:take])
        else:
            take = max(1, len(rest) // 10)
            val_parts.append(rng.permutation(rest)[:take])
        val = np.array(sorted(np.concatenate(val_parts)), dtype=np.intp)
        train_idx = np.setdiff1d(rest, val)
        tests.append(test)
        trains.append(train_idx)
        vals.append(val)
    return FoldPlan(
        n_folds=n_folds, seed=seed, test=tuple(tests), train=tuple(trains), val=tuple(vals)
    )


@dataclass
class FoldOutcome:
    fold: int
    best_epoch: int
    best_val_loss: float
    val_metric: float
    test_metric: float
    epochs_run: int
    record: RunRecord | None = None


@dataclass
class CVResult:
    plan: FoldPlan
    outcomes: list[FoldOutcome]

    def test_metrics(self) -> np.ndarray:
        return np.array([o.test_metric for o in self.outcomes])

    @property
    def mean(self) -> float:
        return float(self.test_metrics().mean())

    @property
    def stderr(self) -> float:
        vals = self.test_metrics()
        if len(vals) < 2:
            return 0.0
        return float(vals.std(ddof=1) / np.sqrt(len(vals)))

    @property
    def mean_val_loss(self) -> float:
        return float(np.mean([o.best_val_loss for o in self.outcomes]))

    @property
    def mean_val_metric(self) -> float:
        return float(np.mean([o.val_metric for o in self.outcomes]))


def _run_fold(payload) -> FoldOutcome:
    dataset, model_config, train_config, split, fold, keep_record = payload
    fold_seed = derived_seed(train_config.seed, fold)
    model = Model(model_config, seed=fold_seed)
    record = train(model, dataset, split, replace(train_config, seed=fold_seed))
    return FoldOutcome(
        fold=fold,
        best_epoch=record.best_epoch,
        best_val_loss=record.best_val_loss,
        val_metric=record.best_val_metric,
        test_metric=record.test_metric,
        epochs_run=record.epochs_run,
        record=record if keep_record else None,
    )


def cross_validate(
    dataset: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    n_folds: int = 10,
    fold_subset=None,
    workers: int = 1,
    keep_records: bool = True,
) -> CVResult:
    """Per-fold best-on-validation models, tested on the held-out fold.

    ``fold_subset`` restricts training to some folds (budget knob for
    sweeps); the plan itself always covers the full dataset.
    """
    plan = make_fold_plan(dataset, train_config.seed, n_folds)
    folds = list(range(n_folds)) if fold_subset is None else sorted(fold_subset)
    jobs = [
        (
            dataset,
            model_config,
            train_config,
            TrainSplit(train=plan.train[f], val=plan.val[f], test=plan.test[f]),
            f,
            keep_records,
        )
        for f in folds
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_fold, jobs))
    else:
        outcomes = [_run_fold(job) for job in jobs]
    outcomes.sort(key=lambda o: o.fold)
    return CVResult(plan=plan, outcomes=outcomes)


# ---------------------------------------------------------------------------
# grid search


def reference_grid() -> dict:
    """The sweep ranges used for the ablation studies (672 configurations)."""
    return {
        "num_layers": [1, 3, 5, 7, 9, 11, 13],
        "dropout": [0.0, 0.1],
        "egonet_radius": [1, 2, 3],
        "masks_per_layer": [4, 8, 16, 32],
        "dict_size": [6, 8, 16, 32],
    }


def expand_grid(grid: dict) -> list[dict]:
    if not grid:
        raise ConfigError("grid must name at least one hyper-parameter")
    keys = sorted(grid)
    for k in keys:
        if not grid[k]:
            raise ConfigError(f"grid entry {k!r} lists no values")
    return [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]


@dataclass
class GridEntry:
    index: int
    overrides: dict
    result: CVResult | None = None
    error: str | None = None

    @property
    def mean_val_loss(self) -> float:
        return self.result.mean_val_loss if self.result else float("inf")


def grid_search(
    dataset: Dataset,
    grid: dict,
    model_config: ModelConfig,
    train_config: TrainConfig,
    n_folds: int = 10,
    fold_subset=None,
    workers: int = 1,
) -> list[GridEntry]:
    """Cross-validate every grid point; rank by mean best-validation loss.

    Failing configurations are recorded with their error and sink to the
    bottom of the ranking instead of aborting the sweep.
    """
    entries = []
    for i, overrides in enumerate(expand_grid(grid)):
        entry = GridEntry(index=i, overrides=overrides)
        try:
            cfg = replace(model_config, **overrides)
            entry.result = cross_validate(
                dataset,
                cfg,
                train_config,
                n_folds=n_folds,
                fold_subset=fold_subset,
                workers=workers,
                keep_records=False,
            )
        except Exception as exc:  # recorded, not raised: sweeps must survive
            entry.error = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    entries.sort(key=lambda e: (e.mean_val_loss, e.index))
    return entries


def ablation_cells(entries, keys, top: int = 3) -> dict:
    """Average the test metric of the top configurations per grid cell.

    ``keys`` names the config fields spanning the report (for example
    radius x layers); within each cell the ``top`` entries by validation
    loss are averaged, following the convention of averaging the best
    few models instead of trusting a single run.
    """
    cells: dict[tuple, list[GridEntry]] = {}
    for entry in entries:
        if entry.result is None:
            continue
        key = tuple(entry.overrides.get(k) for k in keys)
        cells.setdefault(key, []).append(entry)
    report = {}
    for key, group in cells.items():
        group.sort(key=lambda e: (e.mean_val_loss, e.index))
        best = group[:top]
        report[key] = float(np.mean([e.result.mean for e in best]))
    return report
