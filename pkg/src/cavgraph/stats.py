"""Delete-one jackknife helpers shared by the witness and measurement code."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import kernels


def jackknife_from_replicates(full: float, replicates) -> tuple[float, float]:
    """(estimate, 1 s.d.) from the full-sample value and the n leave-one-out values."""
    reps = np.asarray(replicates, dtype=float)
    n = reps.shape[0]
    dev = reps - reps.mean(axis=0)
    var = (n - 1.0) / n * np.sum(dev * dev, axis=0)
    return full, np.sqrt(var)


def jackknife_ci(samples, statistic: Callable) -> tuple[float, float]:
    """Delete-one jackknife estimate and standard error of ``statistic(samples)``.

    ``samples`` is indexed by trial along axis 0.
    """
    X = np.asarray(samples)
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"jackknife needs at least 3 samples, got {n}")
    full = statistic(X)
    keep = np.ones(n, dtype=bool)
    reps = []
    for i in range(n):
        keep[i] = False
        reps.append(statistic(X[keep]))
        keep[i] = True
    return jackknife_from_replicates(full, np.array(reps))


def covariance_jackknife(samples, statistic: Callable) -> tuple[np.ndarray, np.ndarray]:
    """Jackknife for statistics that depend on the data only through its covariance.

    ``statistic`` maps a stack of covariances (k, d, d) to values (k, ...).
    Leave-one-out covariances are built in one pass, so the cost is O(n d^2).
    """
    X = np.ascontiguousarray(np.asarray(samples, dtype=float))
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"jackknife needs at least 3 samples, got {n}")
    full = statistic(np.atleast_2d(np.cov(X, rowvar=False))[None])[0]
    reps = statistic(kernels.loo_covariances(X))
    return jackknife_from_replicates(full, reps)
