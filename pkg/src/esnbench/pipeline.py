"""Trainers for the cross-validation harness and the model comparison run."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import glm, reservoir
from .dataio import Dataset
from .metrics import CvReport, Trainer, cross_validate, roc
from .numkit import derive_seed
from .stepwise import backward_select


def logit_trainer(max_iters: int = 100, tol: float = 1e-10) -> Trainer:
    def train(data: Dataset):
        fit = glm.fit_logistic(data, max_iters=max_iters, tol=tol)

        def scorer(x):
            return glm.predict_proba(fit, np.atleast_2d(x))
        scorer.fit = fit
        return scorer
    return train


def esn_trainer(config: reservoir.EsnConfig, method: str = "ridge") -> Trainer:
    """``config.input_dim`` is overridden by the training data's width."""
    def train(data: Dataset):
        model = reservoir.init_esn(replace(config, input_dim=data.p))
        model = reservoir.train(model, data, method)

        def scorer(x):
            return reservoir.scores(model, np.atleast_2d(x))
        scorer.model = model
        return scorer
    return train


def with_selection(base: Trainer, alpha: float) -> Trainer:
    """Run backward selection on each training partition, then train ``base``."""
    def train(data: Dataset):
        trace = backward_select(data, alpha)
        keep = [data.feature_names.index(n) for n in trace.surviving]
        if keep:
            inner = base(data.select(trace.surviving))

            def scorer(x):
                return inner(np.atleast_2d(x)[:, keep])
        else:
            base_rate = float(data.labels.mean())

            def scorer(x):
                return np.full(np.atleast_2d(x).shape[0], base_rate)
        scorer.info = {"n_features": len(keep), "features": list(trace.surviving)}
        return scorer
    return train


@dataclass
class ConfigResult:
    name: str
    model: str
    alpha: Optional[float]
    n_features: float
    report: Optional[CvReport] = None
    error: Optional[str] = None
    auc: float = float("nan")

    @property
    def ci(self) -> str:
        return "-" if self.alpha is None else f"{round(100 * (1 - self.alpha), 6):g}%"


@dataclass
class CompareSettings:
    alphas: tuple = (0.05, 0.01)
    k: int = 10
    seed: int = 0
    threshold: float = 0.5
    models: str = "both"
    esn: dict = field(default_factory=dict)
    esn_method: str = "ridge"
    holdout_fold: int = 0
    workers: int = 1


def run_compare(data: Dataset, settings: CompareSettings) -> list[ConfigResult]:
    """Cross-validate each (model, feature set) configuration on the same folds.

    Feature sets are "all" plus one backward-selected set per alpha, with
    selection redone inside every training partition.
    """
    fold_seed = derive_seed(settings.seed, "folds")
    esn_cfg = reservoir.EsnConfig(
        **{"input_dim": max(data.p, 1), "seed": derive_seed(settings.seed, "esn"), **settings.esn}
    )
    bases = []
    if settings.models in ("logit", "both"):
        bases.append(("logit", logit_trainer()))
    if settings.models in ("esn", "both"):
        bases.append(("esn", esn_trainer(esn_cfg, settings.esn_method)))
    if not bases:
        raise ValueError(f"unknown model selection {settings.models!r}")

    results = []
    for model, base in bases:
        variants = [(f"{model}_all", None, base)]
        variants += [(f"{model}_a{a:g}", a, with_selection(base, a)) for a in settings.alphas]
        for name, alpha, trainer in variants:
            res = ConfigResult(name, model, alpha, float(data.p))
            try:
                rep = cross_validate(
                    trainer, data, settings.k, fold_seed, settings.threshold, workers=settings.workers
                )
            except Exception as exc:  # keep the other configurations going
                res.error = f"{type(exc).__name__}: {exc}"
                results.append(res)
                continue
            res.report = rep
            if alpha is not None:
                res.n_features = float(np.mean([f.info["n_features"] for f in rep.per_fold]))
            try:
                res.auc = roc(rep.test_labels, rep.test_scores).auc
            except ValueError:
                pass
            results.append(res)
    return results


METRICS_HEADER = [
    "config", "model", "ci", "independent_variables", "dependent_variables",
    "avg_mse", "std_dev", "variance", "mean_accuracy", "avg_train_mse", "auc", "error",
]


def _g(v: float) -> str:
    return "%.17g" % v


def write_metrics(results: list[ConfigResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in results:
            if r.report is None:
                w.writerow([r.name, r.model, r.ci, _g(r.n_features), 1] + [""] * 6 + [r.error])
                continue
            rep = r.report
            w.writerow([
                r.name, r.model, r.ci, _g(r.n_features), 1,
                _g(rep.avg_mse), _g(rep.std_dev), _g(rep.variance), _g(rep.mean_accuracy),
                _g(rep.avg_train_mse), _g(r.auc), "",
            ])


def write_folds(results: list[ConfigResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config", "fold", "n_train", "n_test", "train_mse", "mse", "accuracy",
                    "tn", "fp", "fn", "tp", "n_features"])
        for r in results:
            if r.report is None:
                continue
            for f in r.report.per_fold:
                c = f.confusion
                w.writerow([r.name, f.fold, f.n_train, f.n_test, _g(f.train_mse), _g(f.mse),
                            _g(f.accuracy), c.tn, c.fp, c.fn, c.tp,
                            f.info.get("n_features", r.n_features)])
