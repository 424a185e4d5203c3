"""Experiment pipelines: synthetic AUC, MNIST feature selection, MNIST generalization, gradcheck.

Each ``run_*`` function takes an ``ExperimentConfig`` and yields ``ResultRow``
objects in a fixed order, so a CSV written from them is reproducible.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .data import (
    Dataset,
    SplitSpec,
    augment_gaussian,
    filter_classes,
    find_mnist_files,
    load_mnist_idx,
    make_synthetic,
    split,
)
from .evaluation import accuracy, auc, fisher_score, select_retrain_evaluate
from .forest import ForestConfig, rf_train
from .lassolayer import KickConfig
from .tensor import Rng
from .train import (
    LassoMLPModel,
    TrainConfig,
    backprop,
    build_lassomlp,
    predict_labels,
    select_features,
    train_lassomlp,
    train_linear_lasso,
)

__all__ = [
    "EXPERIMENTS",
    "CSV_HEADER",
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "default_config",
    "parse_config_text",
    "standardize_pixels",
    "load_mnist",
    "apply_overrides",
    "effective_epochs",
    "run_synthetic_auc",
    "run_mnist_feature_selection",
    "run_mnist_generalization",
    "GradcheckReport",
    "run_gradcheck",
    "write_rows",
    "rows_to_csv",
]

EXPERIMENTS = ("synthetic-auc", "mnist-feature-selection", "mnist-generalization", "gradcheck")
CSV_HEADER = ["experiment", "seed", "train_size", "k", "method", "metric", "value", "wall_time_s"]
METHODS = ("lassomlp", "lasso", "fisher", "full-features-rf", "full-features-mlp")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    train_sizes: list = field(default_factory=list)
    k_values: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    # LassoMLP
    lam: float = 1e-4
    learning_rate: float = 0.1
    batch_size: int = 80
    epochs: int = 2000
    # Lower bound on SGD steps; raises the epoch count when an epoch holds few batches.
    min_steps: int = 0
    kick_epochs: int = 1000
    kick_probability: float = 0.1
    kicked_value: float = 0.1
    hidden_units: int = 100
    # synthetic task
    n_features: int = 256
    lasso_lam: float = 0.1
    # MNIST tasks
    noise_features: int = 5000
    pairs: list = field(default_factory=list)
    standardize: bool = True
    n_trees: int = 100
    data_dir: str = None
    # also run the full-feature MLP and forest baselines
    baselines: bool = True
    # gradcheck
    instances: int = 20
    max_dim: int = 16
    fd_step: float = 1e-5
    tolerance: float = 1e-4

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")

    def validate(self):
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.experiment != "gradcheck" and not self.train_sizes:
            raise ConfigError("train_sizes must not be empty")
        if self.experiment == "mnist-feature-selection" and not self.k_values:
            raise ConfigError("k_values must not be empty")
        if self.experiment == "mnist-generalization" and not self.pairs:
            raise ConfigError("pairs must not be empty")
        if any(n < 1 for n in self.train_sizes):
            raise ConfigError("train sizes must be >= 1")
        if any(k < 1 for k in self.k_values):
            raise ConfigError("k values must be >= 1")
        try:
            self.kick_config()
            TrainConfig(self.lam, self.learning_rate, self.batch_size, self.epochs, self.kick_config())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def kick_config(self):
        return KickConfig(self.kick_epochs, self.kick_probability, self.kicked_value)

    def train_config(self, seed, n_train, lam=None):
        return TrainConfig(
            lam=self.lam if lam is None else lam,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=effective_epochs(self.epochs, self.min_steps, n_train, self.batch_size),
            kick=self.kick_config() if (lam is None or lam > 0) else KickConfig.disabled(),
            seed=seed,
            hidden_units=self.hidden_units,
        )


def effective_epochs(epochs, min_steps, n_train, batch_size):
    batches = math.ceil(n_train / min(batch_size, n_train))
    return max(epochs, math.ceil(min_steps / batches))


def default_config(experiment, paper_scale=False) -> ExperimentConfig:
    """Desk-scale defaults, or the paper's full grid with ``paper_scale``."""
    if experiment == "synthetic-auc":
        return ExperimentConfig(
            experiment,
            train_sizes=[25, 50, 100, 200, 300, 400, 500] if paper_scale else [100, 300],
            seeds=list(range(10 if paper_scale else 5)),
            lam=1e-4,
            batch_size=80,
            epochs=6000 if paper_scale else 2000,
            kick_epochs=1000,
            kicked_value=0.1,
            lasso_lam=0.1,
        )
    if experiment == "mnist-feature-selection":
        return ExperimentConfig(
            experiment,
            train_sizes=[35, 70, 140, 210, 350, 700, 1400, 3500] if paper_scale else [350, 3500],
            k_values=[10, 20, 30, 40, 50, 60] if paper_scale else [10, 60],
            seeds=list(range(5 if paper_scale else 2)),
            lam=0.005,
            batch_size=80,
            epochs=200,
            min_steps=4000,
            kick_epochs=50,
            kicked_value=0.25,
        )
    if experiment == "mnist-generalization":
        return ExperimentConfig(
            experiment,
            train_sizes=[4, 7, 15, 75],
            pairs=[(1, 4), (1, 7)],
            seeds=list(range(10 if paper_scale else 3)),
            lam=0.005,
            batch_size=200,
            epochs=200,
            min_steps=4000,
            kick_epochs=50,
            kicked_value=0.25,
        )
    if experiment == "gradcheck":
        return ExperimentConfig(experiment, seeds=[0])
    raise ConfigError(f"unknown experiment {experiment!r}")


def _parse_list(value, item=int):
    return [item(v) for v in value.replace(";", ",").split(",") if v.strip()]


def _parse_pairs(value):
    pairs = []
    for tok in value.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        a, _, b = tok.partition("-")
        pairs.append((int(a), int(b)))
    return pairs


def _parse_bool(value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


_FIELD_PARSERS = {
    "train_sizes": _parse_list,
    "k_values": _parse_list,
    "seeds": _parse_list,
    "pairs": _parse_pairs,
    "standardize": _parse_bool,
    "baselines": _parse_bool,
    "data_dir": str,
    "experiment": str,
}
_ALIASES = {"train-sizes": "train_sizes", "k": "k_values", "lambda": "lam", "lr": "learning_rate"}


def apply_overrides(cfg: ExperimentConfig, items) -> ExperimentConfig:
    """Apply ``(key, value-string)`` pairs to a config."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    updates = {}
    for key, value in items:
        name = _ALIASES.get(key, key.replace("-", "_"))
        if name not in types:
            raise ConfigError(f"unknown configuration key {key!r}")
        parser = _FIELD_PARSERS.get(name)
        if parser is None:
            parser = float if types[name] == "float" else int
        try:
            updates[name] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    if "experiment" in updates and updates["experiment"] != cfg.experiment:
        raise ConfigError(
            f"config file is for {updates['experiment']!r} but subcommand runs {cfg.experiment!r}"
        )
    return replace(cfg, **updates)


def parse_config_text(text):
    """``key = value`` lines; ``#`` starts a comment. Returns a list of pairs."""
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        items.append((key.strip(), value.strip()))
    return items


@dataclass
class ResultRow:
    experiment: str
    seed: object
    train_size: int
    k: object
    method: str
    metric: str
    value: float
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite metric value for {self.method}/{self.metric}")

    def cells(self, timing=True):
        k = "" if self.k is None else str(self.k)
        wall = repr(round(float(self.wall_time_s), 3)) if timing else "0.0"
        return [self.experiment, str(self.seed), str(self.train_size), k, self.method, self.metric,
                repr(float(self.value)), wall]


def write_rows(rows, fh, timing=True):
    """Write the header and each row as it arrives; returns the row list."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    done = []
    for row in rows:
        writer.writerow(row.cells(timing))
        fh.flush()
        done.append(row)
    return done


def rows_to_csv(rows, timing=True):
    buf = io.StringIO()
    write_rows(rows, buf, timing)
    return buf.getvalue()


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def run_synthetic_auc(cfg: ExperimentConfig):
    """AUC of |w| against the three generating features, LassoMLP vs linear Lasso."""
    cfg.validate()
    exp = "synthetic-auc"
    for n in cfg.train_sizes:
        for seed in cfg.seeds:
            data = make_synthetic(n, cfg.n_features, seed=Rng(seed).child(n).seed)
            tcfg = cfg.train_config(seed, n)
            with _Timer() as t:
                model, _ = train_lassomlp(data, tcfg)
                score = auc(np.abs(model.lasso.w), data.provenance)
            yield ResultRow(exp, seed, n, None, "lassomlp", "auc", score, t.elapsed)
            with _Timer() as t:
                lin = train_linear_lasso(data, cfg.lasso_lam, cfg.learning_rate, tcfg.epochs,
                                         cfg.batch_size, seed)
                score = auc(np.abs(lin.w), data.provenance)
            yield ResultRow(exp, seed, n, None, "lasso", "auc", score, t.elapsed)


def standardize_pixels(d: Dataset) -> Dataset:
    """Shift and scale all pixels by one global mean and standard deviation."""
    mu = d.features.mean()
    sd = d.features.std()
    return Dataset((d.features - mu) / sd, d.targets, d.provenance, d.name, d.classes)


def load_mnist(cfg: ExperimentConfig) -> Dataset:
    """The MNIST pool named by the config, standardized unless disabled."""
    d = load_mnist_idx(*find_mnist_files(cfg.data_dir))
    return standardize_pixels(d) if cfg.standardize else d


def run_mnist_feature_selection(cfg: ExperimentConfig, mnist: Dataset = None):
    """Select k features on the training split, retrain a forest on them, score on test."""
    cfg.validate()
    exp = "mnist-feature-selection"
    base = mnist if mnist is not None else load_mnist(cfg)
    for n in cfg.train_sizes:
        for seed in cfg.seeds:
            rng = Rng(seed)
            data = augment_gaussian(base, cfg.noise_features, seed=rng.child(1).seed)
            train, test = split(data, SplitSpec(train_count=n, seed=rng.child(2, n).seed))
            forest = ForestConfig(n_trees=cfg.n_trees, seed=rng.child(3, n).seed)
            with _Timer() as t_fit:
                model, _ = train_lassomlp(train, cfg.train_config(seed, n), n_out=base.n_classes)
            with _Timer() as t_fisher:
                fisher = fisher_score(train.features, train.targets)
            fisher_order = np.argsort(-fisher, kind="stable")
            for k in cfg.k_values:
                for method in ("lassomlp", "fisher"):
                    with _Timer() as t:
                        if method == "lassomlp":
                            selected = select_features(model, k).selected
                        else:
                            selected = fisher_order[:k]
                        acc = select_retrain_evaluate(train, test, selected, forest)
                    fit_time = t_fit.elapsed if method == "lassomlp" else t_fisher.elapsed
                    prov = data.provenance[selected]
                    wall = t.elapsed + fit_time
                    yield ResultRow(exp, seed, n, k, method, "accuracy", acc, wall)
                    yield ResultRow(exp, seed, n, k, method, "n_selected", float(len(selected)), wall)
                    yield ResultRow(exp, seed, n, k, method, "selected_genuine", float(np.sum(prov == 1)), wall)
                    yield ResultRow(exp, seed, n, k, method, "selected_noise", float(np.sum(prov == 0)), wall)


def _summary(exp, n, method, metric, values):
    values = np.asarray(values, dtype=np.float64)
    return [
        ResultRow(exp, "all", n, None, method, f"{metric}_mean", float(values.mean())),
        ResultRow(exp, "all", n, None, method, f"{metric}_sd", float(values.std())),
    ]


def run_mnist_generalization(cfg: ExperimentConfig, mnist: Dataset = None):
    """Raw-mode test accuracy of LassoMLP vs full-feature MLP and forest on digit pairs.

    Per-seed rows are followed, for each (pair, size), by mean and standard
    deviation rows (seed ``all``; population SD over seeds).
    """
    cfg.validate()
    base = mnist if mnist is not None else load_mnist(cfg)
    for pair in cfg.pairs:
        pair = tuple(pair)
        exp = f"mnist-generalization-{pair[0]}v{pair[1]}"
        two = filter_classes(base, pair, relabel=True)
        for n in cfg.train_sizes:
            collected = {}
            for seed in cfg.seeds:
                rng = Rng(seed)
                data = augment_gaussian(two, cfg.noise_features, seed=rng.child(1).seed)
                train, test = split(data, SplitSpec(train_count=n, seed=rng.child(2, n).seed))
                cell = []
                with _Timer() as t:
                    model, _ = train_lassomlp(train, cfg.train_config(seed, n), n_out=2)
                    acc = accuracy(predict_labels(model, test.features), test.targets)
                w = model.lasso.w
                genuine = float(np.count_nonzero(w[data.provenance == 1]))
                noise = float(np.count_nonzero(w[data.provenance == 0]))
                cell += [
                    ResultRow(exp, seed, n, None, "lassomlp", "accuracy", acc, t.elapsed),
                    ResultRow(exp, seed, n, None, "lassomlp", "remained_genuine", genuine, t.elapsed),
                    ResultRow(exp, seed, n, None, "lassomlp", "remained_noise", noise, t.elapsed),
                ]
                if cfg.baselines:
                    with _Timer() as t:
                        mlp, _ = train_lassomlp(train, cfg.train_config(seed, n, lam=0.0), n_out=2)
                        acc = accuracy(predict_labels(mlp, test.features), test.targets)
                    cell.append(ResultRow(exp, seed, n, None, "full-features-mlp", "accuracy", acc, t.elapsed))
                    with _Timer() as t:
                        forest = rf_train(train.features, train.targets,
                                          ForestConfig(n_trees=cfg.n_trees, seed=rng.child(3, n).seed), n_classes=2)
                        acc = accuracy(forest.predict(test.features), test.targets)
                    cell.append(ResultRow(exp, seed, n, None, "full-features-rf", "accuracy", acc, t.elapsed))
                for row in cell:
                    collected.setdefault((row.method, row.metric), []).append(row.value)
                    yield row
            for (method, metric), values in collected.items():
                yield from _summary(exp, n, method, metric, values)


@dataclass
class GradcheckReport:
    max_rel_error: float
    tolerance: float
    # (instance, parameter name, flat index) of the worst entry
    worst: tuple
    per_instance: list

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance

    def format(self):
        lines = [f"instance {i}: max relative error {e:.3e}" for i, e in enumerate(self.per_instance)]
        inst, name, idx = self.worst
        lines.append(f"max relative error {self.max_rel_error:.3e} at instance {inst}, {name}[{idx}]")
        lines.append(f"{'PASS' if self.passed else 'FAIL'} (tolerance {self.tolerance:.0e})")
        return "\n".join(lines)


PARAM_NAMES = ("lasso.w", "layer1.weights", "layer1.bias", "layer2.weights", "layer2.bias")
# Gradients smaller than this are compared in absolute terms.
REL_FLOOR = 1e-6
RELU_MARGIN = 1e-3


def _random_instance(rng: Rng, max_dim):
    while True:
        n_in, n_hidden = (int(v) for v in rng.integers(2, max_dim + 1, 2))
        task = "classification" if rng.uniform(1)[0] < 0.5 else "regression"
        n_out = int(rng.integers(2, 5, 1)[0]) if task == "classification" else int(rng.integers(1, 4, 1)[0])
        model = build_lassomlp(n_in, n_hidden, n_out, task, rng)
        model.lasso.w[:] = rng.normal(n_in)
        batch = 4
        x = rng.normal(batch * n_in).reshape(batch, n_in)
        if task == "classification":
            target = np.zeros((batch, n_out))
            target[np.arange(batch), rng.integers(0, n_out, batch)] = 1.0
        else:
            target = rng.normal(batch * n_out).reshape(batch, n_out)
        pre = (model.lasso.w * x) @ model.layer1.weights.T + model.layer1.bias
        if np.min(np.abs(pre)) > RELU_MARGIN:
            return model, x, target


def _fd_gradient(model: LassoMLPModel, x, target, param, step):
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.shape[0]):
        old = flat[i]
        flat[i] = old + step
        up, _ = backprop(model, x, target)
        flat[i] = old - step
        down, _ = backprop(model, x, target)
        flat[i] = old
        g[i] = (up - down) / (2.0 * step)
    return grad


def run_gradcheck(cfg: ExperimentConfig = None, corrupt=False) -> GradcheckReport:
    """Compare backprop gradients to central differences on random small LassoMLPs.

    ``corrupt`` perturbs one analytic gradient entry as a negative control.
    """
    cfg = cfg or default_config("gradcheck")
    rng = Rng(cfg.seeds[0]).child(99)
    worst = (0, PARAM_NAMES[0], 0)
    max_err = 0.0
    per_instance = []
    for inst in range(cfg.instances):
        model, x, target = _random_instance(rng, cfg.max_dim)
        _, grads = backprop(model, x, target)
        if corrupt and inst == 0:
            grads[1] = grads[1].copy()
            grads[1].flat[0] += 1e-2 * (abs(grads[1].flat[0]) + 1.0)
        inst_err = 0.0
        for name, param, analytic in zip(PARAM_NAMES, model.parameters(), grads):
            numeric = _fd_gradient(model, x, target, param, cfg.fd_step)
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
            rel = np.abs(analytic - numeric) / denom
            j = int(np.argmax(rel))
            if rel.flat[j] > max_err:
                max_err = float(rel.flat[j])
                worst = (inst, name, j)
            inst_err = max(inst_err, float(rel.max()))
        per_instance.append(inst_err)
    return GradcheckReport(max_err, cfg.tolerance, worst, per_instance)
