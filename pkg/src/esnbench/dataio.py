"""Tabular data: CSV loading/saving, z-score standardization, synthetic cohorts."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .numkit import make_rng


class DataError(ValueError):
    """Raised for unusable input data (schema problems, bad labels, ...)."""


@dataclass(frozen=True)
class Standardization:
    names: tuple
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.sd


@dataclass(frozen=True)
class Dataset:
    feature_names: list
    features: np.ndarray
    labels: np.ndarray
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if y.shape != (x.shape[0],):
            raise DataError("labels must be a vector with one entry per row")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length does not match the column count")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("duplicate feature names")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or Inf")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "feature_names", list(self.feature_names))
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset_rows(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def select(self, names: Sequence[str]) -> "Dataset":
        """Keep only the named columns, in the given order."""
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise DataError(f"unknown feature(s): {', '.join(missing)}")
        cols = [self.feature_names.index(n) for n in names]
        std = self.standardization
        if std is not None:
            std = Standardization(tuple(names), std.mean[cols], std.sd[cols])
        return Dataset(list(names), self.features[:, cols], self.labels, std)


@dataclass
class LoadReport:
    path: str
    source_rows: int = 0
    kept_rows: int = 0
    dropped: list = field(default_factory=list)  # (line number, reason)

    @property
    def dropped_rows(self) -> int:
        return len(self.dropped)

    def text(self) -> str:
        lines = [
            f"source: {self.path}",
            f"rows read: {self.source_rows}",
            f"rows kept: {self.kept_rows}",
            f"rows dropped: {self.dropped_rows}",
        ]
        lines += [f"  line {ln}: {why}" for ln, why in self.dropped]
        return "\n".join(lines) + "\n"


def _parse_float(cell: str) -> Optional[float]:
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, label_column: str) -> tuple[Dataset, LoadReport]:
    """Read a comma-delimited UTF-8 file with a header row.

    Every column other than ``label_column`` becomes a feature. Rows with a
    missing or non-numeric cell (or the wrong number of cells) are dropped and
    listed in the returned :class:`LoadReport`. A label that parses as a
    number other than 0 or 1 is a hard error.
    """
    path = Path(path)
    report = LoadReport(str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{path}: duplicate column names: {', '.join(dupes)}")
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not found")
        li = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != li]

        rows, labels = [], []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            report.source_rows += 1
            if len(raw) != len(header):
                report.dropped.append((lineno, f"expected {len(header)} cells, got {len(raw)}"))
                continue
            label = _parse_float(raw[li])
            if label is None:
                report.dropped.append((lineno, "missing or non-numeric label"))
                continue
            if label not in (0.0, 1.0):
                raise DataError(f"{path}: line {lineno}: label {raw[li].strip()!r} is not 0 or 1")
            values = [_parse_float(c) for i, c in enumerate(raw) if i != li]
            bad = [names[i] for i, v in enumerate(values) if v is None]
            if bad:
                report.dropped.append((lineno, f"unparseable cell(s): {', '.join(bad)}"))
                continue
            rows.append(values)
            labels.append(label)

    if not rows:
        raise DataError(f"{path}: no usable rows")
    report.kept_rows = len(rows)
    data = Dataset(names, np.array(rows, dtype=float).reshape(len(rows), len(names)), np.array(labels))
    return data, report


def fmt(v: float) -> str:
    """17 significant digits: enough for exact float64 round trips."""
    return "%.17g" % v


def save_csv(data: Dataset, path, label_column: str = "label") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + [label_column])
        for row, y in zip(data.features, data.labels):
            w.writerow([fmt(v) for v in row] + [str(int(y))])


def fit_standardization(data: Dataset) -> Standardization:
    """Column means and sample SDs; constant columns are rejected by name."""
    if data.n < 2:
        raise DataError("standardization needs at least two rows")
    mean = data.features.mean(axis=0)
    sd = data.features.std(axis=0, ddof=1)
    const = [n for n, s in zip(data.feature_names, sd) if not s > 0]
    if const:
        raise DataError(f"constant column(s) cannot be standardized: {', '.join(const)}")
    return Standardization(tuple(data.feature_names), mean, sd)


def apply_standardization(data: Dataset, params: Standardization) -> Dataset:
    if tuple(data.feature_names) != params.names:
        data = data.select(list(params.names))
    return Dataset(data.feature_names, params.apply(data.features), data.labels, params)


def standardize(data: Dataset, params: Optional[Standardization] = None) -> Dataset:
    """Z-score the columns. Pass ``params`` (from a training fold) to reuse them."""
    if params is None:
        params = fit_standardization(data)
    return apply_standardization(data, params)


# --- synthetic cohorts -----------------------------------------------------

NONLINEARITIES = ("none", "interaction", "threshold")


@dataclass(frozen=True)
class SynthSpec:
    n: int = 804
    p_informative: int = 5
    p_noise: int = 15
    planted_alpha: float = 0.0
    planted_beta: Optional[tuple] = None
    nonlinearity: str = "none"
    nonlinear_strength: float = 3.0
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.p_informative < 0 or self.p_noise < 0 or self.p_informative + self.p_noise < 1:
            raise ValueError("need at least one feature")
        if self.planted_beta is not None and len(self.planted_beta) != self.p_informative:
            raise ValueError("planted_beta length must equal p_informative")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
        if self.nonlinearity != "none" and self.p_informative < 2:
            raise ValueError(f"{self.nonlinearity} mode needs p_informative >= 2")
        if not 0.0 <= self.label_noise < 0.5:
            raise ValueError("label_noise must lie in [0, 0.5)")


@dataclass(frozen=True)
class GroundTruth:
    alpha: float
    beta: np.ndarray
    informative: list
    nonlinearity: str
    nonlinear_strength: float

    def rows(self):
        yield ("(Intercept)", self.alpha)
        yield from zip(self.informative, self.beta)


def feature_names(p: int) -> list:
    width = len(str(p))
    return [f"x{i:0{width}d}" for i in range(1, p + 1)]


def synth_generate(spec: SynthSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a labelled cohort from a planted logistic model.

    Features are i.i.d. standard normal; the first ``p_informative`` columns
    carry the planted coefficients. ``interaction`` adds
    ``strength * x1 * x2`` to the linear score, ``threshold`` adds
    ``strength * [x1 > 0]``. Labels are Bernoulli(sigmoid(score)), then each
    is flipped with probability ``label_noise``. Unless given, the planted
    coefficients have magnitude uniform on [1, 2] with random signs.
    """
    rng = make_rng(spec.seed)
    p = spec.p_informative + spec.p_noise
    if spec.planted_beta is None:
        mags = rng.uniform(1.0, 2.0, size=spec.p_informative)
        signs = rng.choice([-1.0, 1.0], size=spec.p_informative)
        beta = mags * signs
    else:
        beta = np.asarray(spec.planted_beta, dtype=float)

    x = rng.standard_normal((spec.n, p))
    xi = x[:, : spec.p_informative]
    score = spec.planted_alpha + xi @ beta
    if spec.nonlinearity == "interaction":
        score = score + spec.nonlinear_strength * xi[:, 0] * xi[:, 1]
    elif spec.nonlinearity == "threshold":
        score = score + spec.nonlinear_strength * (xi[:, 0] > 0)

    prob = 0.5 * (1.0 + np.tanh(0.5 * score))  # overflow-free sigmoid
    y = (rng.uniform(size=spec.n) < prob).astype(float)
    if spec.label_noise > 0:
        flip = rng.uniform(size=spec.n) < spec.label_noise
        y = np.where(flip, 1.0 - y, y)

    names = feature_names(p)
    truth = GroundTruth(
        float(spec.planted_alpha),
        beta,
        names[: spec.p_informative],
        spec.nonlinearity,
        spec.nonlinear_strength,
    )
    return Dataset(names, x, y), truth


def save_ground_truth(truth: GroundTruth, path) -> None:
    """Sidecar CSV: one row per planted coefficient plus the nonlinear term."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "coefficient", "informative"])
        for name, coef in truth.rows():
            w.writerow([name, fmt(coef), int(name != "(Intercept)")])
        if truth.nonlinearity != "none":
            a, b = truth.informative[:2]
            term = f"{a}*{b}" if truth.nonlinearity == "interaction" else f"[{a}>0]"
            w.writerow([term, fmt(truth.nonlinear_strength), 0])


def load_ground_truth(path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {row["term"]: float(row["coefficient"]) for row in csv.DictReader(fh)}
