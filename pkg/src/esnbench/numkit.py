"""Seeded numerics shared by the reservoir and evaluation code.

Matrices are plain ``numpy.ndarray`` values (float64, C order). Random
streams come from :class:`numpy.random.Generator` backed by PCG64, which is
bit-reproducible across platforms for a given seed.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_LOW = -0.5
DEFAULT_HIGH = 0.5

# Ritz block width for the subspace iteration in spectral_radius.
_BLOCK = 8


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations."""


def make_rng(seed: int) -> np.random.Generator:
    """Return the repo-wide deterministic generator (PCG64) for ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """Split a master seed into an independent 64-bit sub-seed.

    The rule is ``SeedSequence([seed, crc32(label), index])`` and the first
    64-bit word of its state. Changing any of the three inputs gives an
    unrelated stream, so one run seed reproduces every stage of a pipeline.
    """
    ss = np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8")), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def check_finite(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} contains NaN or Inf")
    return m


def nonzero_count(n: int, density: float) -> int:
    """Number of nonzeros for an ``n x n`` matrix at ``density`` (round half up)."""
    return int(np.floor(density * n * n + 0.5))


def sparse_random_matrix(
    n: int,
    density: float,
    rng: np.random.Generator,
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
) -> np.ndarray:
    """Square matrix with exactly ``round(density * n**2)`` uniform nonzeros.

    Positions are sampled uniformly without replacement; values are uniform
    on ``[low, high]``, and any draw landing exactly on 0.0 is redrawn so the
    nonzero count is exact.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if not low < high:
        raise ValueError("need low < high")

    count = nonzero_count(n, density)
    positions = rng.choice(n * n, size=count, replace=False)
    values = rng.uniform(low, high, size=count)
    zeros = values == 0.0
    while zeros.any():
        values[zeros] = rng.uniform(low, high, size=int(zeros.sum()))
        zeros = values == 0.0

    m = np.zeros(n * n)
    m[positions] = values
    return m.reshape(n, n)


def dense_random_matrix(
    rows: int,
    cols: int,
    rng: np.random.Generator,
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
) -> np.ndarray:
    return rng.uniform(low, high, size=(rows, cols))


def _ritz_radius(m: np.ndarray, q: np.ndarray) -> float:
    h = q.T @ m @ q
    return float(np.max(np.abs(np.linalg.eigvals(h))))


def spectral_radius(
    m: np.ndarray,
    tol: float = 1e-12,
    max_iters: int = 20000,
    seed: int = 0,
    restarts: int = 3,
) -> float:
    """Estimate the largest eigenvalue magnitude of a square matrix.

    Block power iteration: a small orthonormal block is repeatedly multiplied
    by ``m`` and re-orthonormalised, and the radius is read off the
    eigenvalues of the projected (Rayleigh-Ritz) block. Unlike single-vector
    power iteration this also converges when the dominant eigenvalues form a
    complex-conjugate pair, which is the usual case for random nonsymmetric
    reservoirs.

    Convergence is declared when the estimate changes by less than ``tol``
    (relative) for several consecutive checks. On failure the iteration is
    restarted from a fresh seeded block up to ``restarts`` times before
    :class:`ConvergenceError` is raised.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {m.shape}")
    if tol <= 0 or max_iters < 1:
        raise ValueError("need tol > 0 and max_iters >= 1")
    check_finite(m)

    n = m.shape[0]
    if not np.any(m):
        return 0.0
    block = min(n, _BLOCK)
    if block == n:
        # the whole space fits in the block: Ritz values are exact
        return float(np.max(np.abs(np.linalg.eigvals(m))))

    check_every = 10
    needed_stable = 3
    for attempt in range(restarts + 1):
        rng = make_rng(derive_seed(seed, "spectral_radius", attempt))
        q, _ = np.linalg.qr(rng.standard_normal((n, block)))
        prev = None
        stable = 0
        for it in range(1, max_iters + 1):
            z = m @ q
            if not np.any(z):
                return 0.0
            q, _ = np.linalg.qr(z)
            if it % check_every:
                continue
            est = _ritz_radius(m, q)
            if prev is not None and abs(est - prev) <= tol * max(est, np.finfo(float).tiny):
                stable += 1
                if stable >= needed_stable:
                    return est
            else:
                stable = 0
            prev = est
    raise ConvergenceError(
        f"spectral_radius did not converge in {max_iters} iterations after {restarts} restarts"
    )


def write_matrix(fh, name: str, m: np.ndarray) -> None:
    """Append a named matrix block: ``matrix <name> <rows> <cols>`` then rows."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    fh.write(f"matrix {name} {m.shape[0]} {m.shape[1]}\n")
    for row in m:
        fh.write(" ".join("%.17g" % v for v in row) + "\n")


def read_matrices(lines) -> dict:
    """Parse consecutive matrix blocks written by :func:`write_matrix`."""
    out = {}
    it = iter(lines)
    for line in it:
        line = line.strip()
        if not line or line == "end":
            continue
        tag, name, rows, cols = line.split()
        if tag != "matrix":
            raise ValueError(f"expected a matrix block, got {line!r}")
        rows, cols = int(rows), int(cols)
        data = [next(it).split() for _ in range(rows)]
        m = np.array(data, dtype=float).reshape(rows, cols)
        out[name] = m
    return out
