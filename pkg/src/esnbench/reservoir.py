"""Echo state network classifier for static tabular records.

The reservoir follows ``x(t) = tanh(W_in u + W x(t-1) + b)`` and the readout
``y = W_out [x; 1]``. Only ``W_out`` is trained, either online by LMS or in
closed form by ridge regression.

A patient record has no time axis, so each record is encoded by resetting the
state to zero and driving the reservoir with the same input vector for
``drive_steps`` steps; the last state is the record's representation. No
state is carried between records.

``b`` is a fixed random input bias (``input_bias`` sets its half-width; 0
disables it). Without it every state is an odd function of the input and the
readout cannot represent interactions such as ``x1 * x2``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dataio import Dataset, Standardization
from .numkit import (
    check_finite,
    dense_random_matrix,
    derive_seed,
    make_rng,
    read_matrices,
    sparse_random_matrix,
    spectral_radius,
    write_matrix,
)

FORMAT_TAG = "esnbench-esn"
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EsnConfig:
    input_dim: int
    reservoir_size: int = 150
    output_dim: int = 1
    spectral_radius: float = 0.9
    density: float = 0.10
    learning_rate: float = 0.005
    epochs: int = 50
    drive_steps: int = 10
    ridge_lambda: float = 10.0
    input_scaling: float = 1.0
    input_bias: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.reservoir_size < 1 or self.output_dim < 1:
            raise ValueError("input_dim, reservoir_size and output_dim must be >= 1")
        if not 0.0 < self.spectral_radius <= 1.0:
            raise ValueError("spectral_radius must lie in (0, 1]")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.drive_steps < 1:
            raise ValueError("epochs and drive_steps must be >= 1")
        if not self.input_scaling > 0:
            raise ValueError("input_scaling must be positive")
        if self.ridge_lambda < 0 or self.input_bias < 0:
            raise ValueError("ridge_lambda and input_bias must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "EsnConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class EsnModel:
    w_in: np.ndarray   # (N_x, N_u)
    w: np.ndarray      # (N_x, N_x)
    bias: np.ndarray   # (N_x,)
    w_out: np.ndarray  # (N_y, N_x + 1), last column multiplies the constant 1
    config: EsnConfig

    @property
    def n_x(self) -> int:
        return self.w.shape[0]

    @property
    def n_u(self) -> int:
        return self.w_in.shape[1]

    def with_readout(self, w_out: np.ndarray) -> "EsnModel":
        w_out = np.array(w_out, dtype=float).reshape(self.w_out.shape)
        return replace(self, w_out=w_out)


def init_esn(config: EsnConfig, attempts: int = 3) -> EsnModel:
    """Draw a reservoir and rescale it to the configured spectral radius.

    ``W`` is sparse uniform on [-0.5, 0.5] with exactly
    ``round(density * N_x**2)`` nonzeros, ``W_in`` is dense uniform on the same
    range, ``W_out`` starts at zero. A draw whose radius is numerically zero
    (possible for tiny or very sparse reservoirs) is redrawn from a derived
    seed.
    """
    n, rho = config.reservoir_size, config.spectral_radius
    for attempt in range(attempts):
        rng = make_rng(derive_seed(config.seed, "reservoir", attempt))
        w = sparse_random_matrix(n, config.density, rng)
        radius = spectral_radius(w, seed=derive_seed(config.seed, "radius", attempt))
        if radius >= 1e-12:
            break
    else:
        raise TrainingError(f"reservoir draw degenerate (radius < 1e-12) after {attempts} attempts")
    w = w * (rho / radius)
    w_in = config.input_scaling * dense_random_matrix(n, config.input_dim, rng)
    if config.input_bias > 0:
        bias = rng.uniform(-config.input_bias, config.input_bias, size=n)
    else:
        bias = np.zeros(n)
    w_out = np.zeros((config.output_dim, n + 1))
    return EsnModel(w_in, w, bias, w_out, config)


def update_state(model: EsnModel, state, inputs) -> np.ndarray:
    """One reservoir step. Works on a single vector or on a batch of rows."""
    state = np.asarray(state, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if state.shape[-1] != model.n_x:
        raise ValueError(f"state has {state.shape[-1]} units, reservoir has {model.n_x}")
    if inputs.shape[-1] != model.n_u:
        raise ValueError(f"input has {inputs.shape[-1]} entries, expected {model.n_u}")
    return np.tanh(inputs @ model.w_in.T + state @ model.w.T + model.bias)


def encode(model: EsnModel, features) -> np.ndarray:
    """Final state after driving a zero state with ``features`` for ``drive_steps``.

    ``features`` may be one record or an ``(n, N_u)`` matrix; records are
    encoded independently of each other.
    """
    u = np.asarray(features, dtype=float)
    check_finite(u, "features")
    x = np.zeros(u.shape[:-1] + (model.n_x,))
    for _ in range(model.config.drive_steps):
        x = update_state(model, x, u)
    return x


def augment(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    ones = np.ones(states.shape[:-1] + (1,))
    return np.concatenate([states, ones], axis=-1)


def readout(model: EsnModel, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != model.n_x:
        raise ValueError(f"state has {state.shape[-1]} units, reservoir has {model.n_x}")
    return augment(state) @ model.w_out.T


def _targets(data: Dataset, n_y: int) -> np.ndarray:
    if data.n == 0:
        raise ValueError("empty dataset")
    y = data.labels
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return np.repeat(y[:, None], n_y, axis=1)


def lms_readout(states_aug, targets, w_out, eta: float, epochs: int) -> np.ndarray:
    """Online LMS: ``W_out += eta * (target - W_out s) s^T`` per sample, in order."""
    w_out = np.array(w_out, dtype=float)
    a = np.asarray(states_aug, dtype=float)
    t = np.asarray(targets, dtype=float).reshape(a.shape[0], -1)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            for s, target in zip(a, t):
                err = target - w_out @ s
                w_out += eta * np.outer(err, s)
            if not np.all(np.isfinite(w_out)):
                raise TrainingError(f"LMS diverged at learning rate {eta}; lower it")
    return w_out


def ridge_readout(states_aug, targets, lam: float) -> np.ndarray:
    """Closed-form ridge: ``W_out^T = (S^T S + lam I)^-1 S^T Y``."""
    a = np.asarray(states_aug, dtype=float)
    t = np.asarray(targets, dtype=float).reshape(a.shape[0], -1)
    gram = a.T @ a + lam * np.eye(a.shape[1])
    try:
        sol = np.linalg.solve(gram, a.T @ t)
    except np.linalg.LinAlgError:
        raise TrainingError("normal matrix is singular; use ridge_lambda > 0") from None
    if not np.all(np.isfinite(sol)):
        raise TrainingError("normal matrix is singular; use ridge_lambda > 0")
    return sol.T


def train_lms(model: EsnModel, data: Dataset, epochs: Optional[int] = None) -> EsnModel:
    epochs = model.config.epochs if epochs is None else epochs
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    t = _targets(data, model.w_out.shape[0])
    a = augment(encode(model, data.features))
    w_out = lms_readout(a, t, model.w_out, model.config.learning_rate, epochs)
    return model.with_readout(w_out)


def train_ridge(model: EsnModel, data: Dataset) -> EsnModel:
    t = _targets(data, model.w_out.shape[0])
    a = augment(encode(model, data.features))
    return model.with_readout(ridge_readout(a, t, model.config.ridge_lambda))


def train(model: EsnModel, data: Dataset, method: str = "ridge") -> EsnModel:
    if method == "ridge":
        return train_ridge(model, data)
    if method == "lms":
        return train_lms(model, data)
    raise ValueError(f"unknown readout training method {method!r}")


def scores(model: EsnModel, features) -> np.ndarray:
    """Clamped [0, 1] scores for a matrix of records (single-output models)."""
    if model.w_out.shape[0] != 1:
        raise ValueError("binary prediction needs output_dim == 1")
    return np.clip(readout(model, encode(model, features))[..., 0], 0.0, 1.0)


def predict_esn(model: EsnModel, features, threshold: float = 0.5) -> tuple[float, int]:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    s = float(scores(model, np.asarray(features, dtype=float)))
    return s, int(s >= threshold)


# --- serialization ---------------------------------------------------------

def save_esn(model: EsnModel, path, feature_names=None, standardization: Optional[Standardization] = None):
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
        fh.write("config " + json.dumps(asdict(model.config), sort_keys=True) + "\n")
        fh.write("features " + json.dumps(list(feature_names or [])) + "\n")
        write_matrix(fh, "w_in", model.w_in)
        write_matrix(fh, "w", model.w)
        write_matrix(fh, "bias", model.bias[None, :])
        write_matrix(fh, "w_out", model.w_out)
        if standardization is not None:
            write_matrix(fh, "std_mean", standardization.mean[None, :])
            write_matrix(fh, "std_sd", standardization.sd[None, :])
        fh.write("end\n")


def load_esn(path) -> tuple[EsnModel, list, Optional[Standardization]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tag, version = lines[0].split()
    if tag != FORMAT_TAG or int(version) != FORMAT_VERSION:
        raise ValueError(f"{path}: not an {FORMAT_TAG} v{FORMAT_VERSION} file")
    config = EsnConfig.from_dict(json.loads(lines[1].split(" ", 1)[1]))
    names = json.loads(lines[2].split(" ", 1)[1])
    m = read_matrices(lines[3:])
    model = EsnModel(m["w_in"], m["w"], m["bias"][0], m["w_out"], config)
    std = None
    if "std_mean" in m:
        std = Standardization(tuple(names), m["std_mean"][0], m["std_sd"][0])
    return model, names, std
