"""Closed-form transition densities used as ground truth in validation."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, ive

from .errors import SupportViolationError

__all__ = ["ou_exact_logpdf", "gbm_exact_logpdf", "cir_exact_logpdf"]


def ou_exact_logpdf(lam, mu, sigma, x, y, dt):
    """Gaussian transition of the mean-reverting linear model:
    mean mu + (x - mu) e^{-lam dt}, variance sigma^2 (1 - e^{-2 lam dt}) / (2 lam)."""
    if lam <= 0 or sigma <= 0:
        raise ValueError("lam and sigma must be positive")
    mean = mu + (x - mu) * np.exp(-lam * dt)
    var = sigma * sigma * (1.0 - np.exp(-2.0 * lam * dt)) / (2.0 * lam)
    return -0.5 * np.log(2.0 * np.pi * var) - (y - mean) ** 2 / (2.0 * var)


def gbm_exact_logpdf(r, sigma, x, y, dt):
    """Log-normal transition LN(log x + (r - sigma^2/2) dt, sigma^2 dt)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise SupportViolationError("geometric Brownian motion lives on (0, inf)")
    s2t = sigma * sigma * dt
    z = np.log(y) - np.log(x) - (r - 0.5 * sigma * sigma) * dt
    return -np.log(y) - 0.5 * np.log(2.0 * np.pi * s2t) - z * z / (2.0 * s2t)


def cir_exact_logpdf(lam, xi, gamma, x, y, dt):
    """Square-root process transition: a scaled noncentral chi-square.

    With c = 2 lam / (gamma^2 (1 - e^{-lam dt})), u = c x e^{-lam dt},
    v = c y and q = 2 lam xi / gamma^2 - 1,

        p(y) = c e^{-u-v} (v/u)^{q/2} I_q(2 sqrt(u v)),

    evaluated through the exponentially scaled Bessel function for
    numerical stability in both tails.
    """
    if min(lam, xi, gamma) <= 0:
        raise ValueError("lam, xi, gamma must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise SupportViolationError("the square-root process lives on (0, inf)")
    emt = np.exp(-lam * dt)
    c = 2.0 * lam / (gamma * gamma * (1.0 - emt))
    q = 2.0 * lam * xi / (gamma * gamma) - 1.0
    u = c * x * emt
    v = c * y
    z = 2.0 * np.sqrt(u * v)
    # I_q(z) = ive(q, z) e^z
    log_bessel = np.log(ive(q, z)) + z
    return np.log(c) - u - v + 0.5 * q * (np.log(v) - np.log(u)) + log_bessel


def cir_stationary_logpdf(lam, xi, gamma, y):
    """Gamma(2 lam xi / gamma^2, rate 2 lam / gamma^2) stationary density."""
    shape = 2.0 * lam * xi / (gamma * gamma)
    rate = 2.0 * lam / (gamma * gamma)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise SupportViolationError("stationary law lives on (0, inf)")
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(y) - rate * y
