"""Vectorized log densities shared by the catalog."""

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def gamma_logpdf(x, shape, rate):
    """Ga(shape, rate) log density; ``shape`` must be a scalar."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * np.log(rate) - math.lgamma(shape) + (shape - 1.0) * np.log(x) - rate * x
    return np.where(x > 0, out, -np.inf)


def col(x):
    """First column of an (n, k) array as a flat vector."""
    return np.asarray(x, dtype=float)[:, 0]
