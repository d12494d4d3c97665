"""Shared synthetic data generators and the acceptance-criterion registry."""

import numpy as np

from sparsekr import Dataset

# criterion number -> (status, detail); printed by conftest at session end.
ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def report_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = ("PASS" if passed else "FAIL", detail)


def skip_criterion(number: int, detail: str) -> None:
    ACCEPTANCE_RESULTS.setdefault(number, ("SKIP", detail))


def make_planted(n: int, seed: int, noise_dims: int = 7, rho: float = 0.9) -> Dataset:
    """Planted-sparse regression task.

    Three mutually correlated signal features (pairwise correlation rho)
    plus `noise_dims` independent pure-noise features, all unit variance.
    The target depends only on the two low-variance contrasts of the signal
    block, so PCA at a high variance threshold discards the directions that
    actually carry the signal.
    """
    rng = np.random.default_rng(seed)
    shared = rng.normal(size=n)
    signal = (np.sqrt(rho) * shared[:, None]
              + np.sqrt(1.0 - rho) * rng.normal(size=(n, 3)))
    noise = rng.normal(size=(n, noise_dims))
    features = np.hstack([signal, noise])
    c1 = signal[:, 0] - signal[:, 1]
    c2 = signal[:, 1] - signal[:, 2]
    targets = 3.0 * c1 + 2.0 * c2 ** 2 + rng.normal(scale=0.05, size=n)
    return Dataset(features, targets)


def make_seasonal_series(length: int, seed: int) -> np.ndarray:
    """Positive traffic-like series: AR(1) deviations around a daily sinusoid."""
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    base = 100.0 + 20.0 * np.sin(2.0 * np.pi * t / 24.0)
    out = np.empty(length)
    deviation = 0.0
    for i in range(length):
        deviation = 0.75 * deviation + rng.normal(scale=4.0)
        out[i] = base[i] + deviation
    return out


def random_psd(rng: np.random.Generator, dim: int) -> np.ndarray:
    b = rng.normal(size=(dim, dim))
    m = b.T @ b
    return (m + m.T) / 2.0
