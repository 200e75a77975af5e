"""Backward elimination of predictors by Wald p-value."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .dataio import Dataset
from .glm import FitError, fit_logistic, wald_stats


@dataclass(frozen=True)
class Step:
    predictor: str
    p_value: float
    model_size_after: int


@dataclass
class SelectionTrace:
    original: list
    alpha: float
    steps: list = field(default_factory=list)
    surviving: list = field(default_factory=list)

    @property
    def eliminated(self) -> list:
        return [s.predictor for s in self.steps]

    @property
    def intercept_only(self) -> bool:
        return not self.surviving

    def replay(self) -> list:
        """Surviving set recomputed by removing the eliminations in order."""
        left = list(self.original)
        for s in self.steps:
            left.remove(s.predictor)
        return left


class SelectionError(RuntimeError):
    def __init__(self, message, trace: SelectionTrace):
        super().__init__(message)
        self.trace = trace


def ci_to_alpha(confidence: float) -> float:
    """95 -> 0.05, 0.99 -> 0.01."""
    c = confidence / 100.0 if confidence > 1 else confidence
    return round(1.0 - c, 12)


def least_significant(rows) -> tuple[str, float]:
    """Largest p-value; ties go to the lexicographically smallest name."""
    worst = max(r.p_value for r in rows)
    return min(r.predictor for r in rows if r.p_value == worst), worst


def backward_select(data: Dataset, alpha: float = 0.05, max_iters: int = 100, tol: float = 1e-10) -> SelectionTrace:
    """Drop the least significant predictor and refit until all have p <= alpha.

    The intercept is never a candidate. Ties on the largest p-value go to the
    lexicographically smallest name. Eliminating every predictor is allowed;
    check ``trace.intercept_only``. A failed refit raises
    :class:`SelectionError` carrying the trace built so far.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if data.p < 1:
        raise ValueError("need at least one predictor")

    trace = SelectionTrace(original=list(data.feature_names), alpha=alpha)
    current = list(data.feature_names)
    while current:
        try:
            fit = fit_logistic(data.select(current), max_iters=max_iters, tol=tol)
        except FitError as exc:
            trace.surviving = list(current)
            raise SelectionError(f"fit failed with {len(current)} predictors: {exc}", trace) from exc
        name, worst = least_significant(wald_stats(fit, include_intercept=False))
        if worst <= alpha:
            break
        current.remove(name)
        trace.steps.append(Step(name, worst, len(current)))
    trace.surviving = current
    return trace


def write_trace(trace: SelectionTrace, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "predictor", "p_value", "model_size_after"])
        for i, s in enumerate(trace.steps, start=1):
            w.writerow([i, s.predictor, "%.17g" % s.p_value, s.model_size_after])


def write_survivors(names, path) -> None:
    Path(path).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def read_survivors(path) -> list:
    return [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
