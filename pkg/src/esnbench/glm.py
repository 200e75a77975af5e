"""Logistic regression by IRLS with Wald inference."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.special import expit, log_expit

from .dataio import Dataset, Standardization
from .numkit import read_matrices, write_matrix

INTERCEPT = "(Intercept)"
SEPARATION_BOUND = 15.0


class FitError(RuntimeError):
    """Base class for logistic fitting failures."""


class PerfectSeparationError(FitError):
    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class SingularInformationError(FitError):
    pass


class NonConvergenceError(FitError):
    pass


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    coefficients: np.ndarray
    predictor_names: list
    covariance: np.ndarray
    converged: bool
    iterations: int
    final_log_likelihood: float
    ll_history: tuple = ()

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.coefficients))


@dataclass(frozen=True)
class WaldRow:
    predictor: str
    coefficient: float
    std_error: float
    odds_ratio: float
    z_value: float
    p_value: float


def design(features: np.ndarray) -> np.ndarray:
    """Prepend the intercept column."""
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[None, :]
    return np.column_stack([np.ones(features.shape[0]), features])


def log_likelihood(params, features, labels) -> float:
    """Bernoulli log-likelihood of ``params = [alpha, beta...]``.

    Uses ``log sigmoid`` directly so large linear predictors do not overflow.
    """
    params = np.asarray(params, dtype=float)
    x = design(features)
    if x.shape[1] != params.size:
        raise ValueError(f"expected {x.shape[1]} parameters, got {params.size}")
    eta = x @ params
    y = np.asarray(labels, dtype=float)
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def score_vector(params, features, labels) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to ``params``."""
    x = design(features)
    return x.T @ (np.asarray(labels, dtype=float) - expit(x @ np.asarray(params, dtype=float)))


def _check_columns(data: Dataset) -> None:
    x = data.features
    for j, name in enumerate(data.feature_names):
        if np.all(x[:, j] == x[0, j]):
            raise SingularInformationError(f"column {name!r} is constant (collinear with the intercept)")
    for j in range(x.shape[1]):
        for k in range(j + 1, x.shape[1]):
            if np.array_equal(x[:, j], x[:, k]):
                a, b = data.feature_names[j], data.feature_names[k]
                raise SingularInformationError(f"columns {a!r} and {b!r} are duplicates")


def fit_logistic(data: Dataset, max_iters: int = 100, tol: float = 1e-10) -> LogisticFit:
    """Maximum-likelihood fit by Newton-Raphson (IRLS) with step halving.

    Converged when the largest score component drops below ``tol`` or the
    relative change in log-likelihood does. A step that lowers the
    likelihood (beyond rounding) is halved until it does not, up to 30 times. Perfect
    separation is reported when a coefficient passes
    ``SEPARATION_BOUND`` while the likelihood is still climbing.
    """
    if data.n == 0:
        raise ValueError("empty dataset")
    if data.p:
        _check_columns(data)

    x = design(data.features)
    y = data.labels
    beta = np.zeros(x.shape[1])
    ll = log_likelihood(beta, data.features, y)
    history = [ll]
    converged = False
    it = 0

    for it in range(1, max_iters + 1):
        p = expit(x @ beta)
        grad = x.T @ (y - p)
        if np.max(np.abs(grad)) < tol:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        info = x.T @ (x * w[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SingularInformationError("information matrix is singular") from None

        # near the optimum the likelihood change is pure rounding noise
        slack = 1e-12 * max(1.0, abs(ll))
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            new_ll = log_likelihood(cand, data.features, y)
            if new_ll >= ll - slack:
                break
            t *= 0.5
        else:
            # no ascent along the Newton direction: already at the optimum numerically
            converged = True
            break

        improved = new_ll - ll
        beta, old_ll, ll = cand, ll, new_ll
        history.append(ll)
        if np.max(np.abs(beta)) > SEPARATION_BOUND and improved > 0:
            if _looks_separated(x, y, beta):
                raise PerfectSeparationError(
                    "perfect or quasi-perfect separation: likelihood keeps improving "
                    "as coefficients diverge",
                    direction=beta / np.linalg.norm(beta),
                )
        if abs(improved) <= tol * max(abs(old_ll), 1.0):
            p = expit(x @ beta)
            if np.max(np.abs(x.T @ (y - p))) < max(tol, 1e-8):
                converged = True
                break

    if not converged:
        raise NonConvergenceError(f"IRLS did not converge in {max_iters} iterations")

    p = expit(x @ beta)
    info = x.T @ (x * (p * (1.0 - p))[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError("information matrix is singular at the optimum") from None
    if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) <= 0):
        raise SingularInformationError("information matrix is numerically singular at the optimum")
    cov = 0.5 * (cov + cov.T)

    return LogisticFit(
        intercept=float(beta[0]),
        coefficients=beta[1:].copy(),
        predictor_names=list(data.feature_names),
        covariance=cov,
        converged=True,
        iterations=it,
        final_log_likelihood=float(ll),
        ll_history=tuple(history),
    )


def _looks_separated(x, y, beta) -> bool:
    # fitted probabilities saturating on the training set
    eta = x @ beta
    return bool(np.mean((eta > 0) == (y > 0.5)) > 0.999 or np.max(np.abs(eta)) > 30)


def predict_proba(fit: LogisticFit, features) -> np.ndarray | float:
    """P(y=1 | x). Accepts one feature vector or a matrix of rows."""
    f = np.asarray(features, dtype=float)
    single = f.ndim == 1
    if f.shape[-1] != fit.coefficients.size:
        raise ValueError(f"expected {fit.coefficients.size} features, got {f.shape[-1]}")
    prob = expit(fit.intercept + f @ fit.coefficients)
    return float(prob) if single else prob


def wald_row(predictor: str, coefficient: float, std_error: float) -> WaldRow:
    """One Wald table row from a coefficient and its standard error."""
    if not std_error > 0:
        raise ValueError("standard error must be positive")
    z = coefficient / std_error
    return WaldRow(
        predictor=predictor,
        coefficient=float(coefficient),
        std_error=float(std_error),
        odds_ratio=float(np.exp(coefficient)),
        z_value=float(z),
        p_value=float(min(1.0, 2.0 * stats.norm.sf(abs(z)))),
    )


def wald_stats(fit: LogisticFit, include_intercept: bool = True) -> list[WaldRow]:
    if not fit.converged:
        raise FitError("Wald statistics need a converged fit")
    se = np.sqrt(np.diag(fit.covariance))
    names = [INTERCEPT] + list(fit.predictor_names)
    rows = [wald_row(n, c, s) for n, c, s in zip(names, fit.params, se)]
    return rows if include_intercept else rows[1:]


WALD_HEADER = ["Predictor", "Co-eff.", "S.Error", "O. Ratio", "z-value", "p-value"]


def wald_table(rows: list[WaldRow]) -> list[list[str]]:
    """Rows ready for ``csv.writer`` under the Table-I style header."""
    out = [WALD_HEADER]
    for r in rows:
        out.append([r.predictor] + ["%.17g" % v for v in (
            r.coefficient, r.std_error, r.odds_ratio, r.z_value, r.p_value)])
    return out



FORMAT_TAG = "esnbench-logit"
FORMAT_VERSION = 1


def save_logit(fit: LogisticFit, path, standardization=None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
        meta = {"converged": fit.converged, "iterations": fit.iterations,
                "final_log_likelihood": fit.final_log_likelihood}
        fh.write("meta " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("features " + json.dumps(list(fit.predictor_names)) + "\n")
        write_matrix(fh, "params", fit.params[None, :])
        write_matrix(fh, "covariance", fit.covariance)
        if standardization is not None:
            write_matrix(fh, "std_mean", standardization.mean[None, :])
            write_matrix(fh, "std_sd", standardization.sd[None, :])
        fh.write("end\n")


def load_logit(path):
    """Returns ``(fit, standardization or None)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tag, version = lines[0].split()
    if tag != FORMAT_TAG or int(version) != FORMAT_VERSION:
        raise ValueError(f"{path}: not an {FORMAT_TAG} v{FORMAT_VERSION} file")
    meta = json.loads(lines[1].split(" ", 1)[1])
    names = json.loads(lines[2].split(" ", 1)[1])
    m = read_matrices(lines[3:])
    params = m["params"][0]
    fit = LogisticFit(float(params[0]), params[1:], names, m["covariance"], meta["converged"],
                      meta["iterations"], meta["final_log_likelihood"])
    std = None
    if "std_mean" in m:
        std = Standardization(tuple(names), m["std_mean"][0], m["std_sd"][0])
    return fit, std
