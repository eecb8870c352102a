"""Exact filtering and smoothing for discretized linear-Gaussian chains.

The chain is the time discretization actually used by a formulation: the
explicit Euler scheme for the state-space and increment formulations, the
implicit trapezoidal scheme for the Stratonovich one.  On such a chain the
filter's marginal log-likelihood and the RTS-smoothed marginals are exact,
which is what makes them oracles for the Laplace machinery on linear models
with additive noise and Gaussian observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretize import TimeGrid
from .models import GaussianInitial, SdeModel, drift_jacobian, eval_diffusion, eval_drift

__all__ = [
    "LinearGaussianChain",
    "KalmanState",
    "kalman_loglik",
    "kalman_loglik_and_smooth",
    "affine_em_chain",
    "affine_trapezoid_chain",
    "ou_exact_chain",
]


@dataclass
class LinearGaussianChain:
    """x_{k+1} = A_k x_k + c_k + w_k, w_k ~ N(0, Q_k), with Gaussian
    observations y = H x + v, v ~ N(0, R) attached to grid indices."""

    a: np.ndarray  # (M, n, n)
    c: np.ndarray  # (M, n)
    q: np.ndarray  # (M, n, n)
    init_mean: np.ndarray
    init_cov: np.ndarray
    obs: list  # list of (grid_index, H, y, R)

    @property
    def num_steps(self):
        return self.a.shape[0]

    @property
    def dim(self):
        return self.a.shape[1]


@dataclass
class KalmanState:
    """Filtered/smoothed moments per grid time plus the loglik accumulator."""

    means: np.ndarray
    covs: np.ndarray
    loglik: float = 0.0


def _filter(chain: LinearGaussianChain):
    n = chain.dim
    m_steps = chain.num_steps
    obs_by_idx = {}
    for idx, h, y, r in chain.obs:
        obs_by_idx.setdefault(int(idx), []).append((np.atleast_2d(h), np.atleast_1d(y), np.atleast_2d(r)))
    mean = np.array(chain.init_mean, dtype=float)
    cov = np.array(chain.init_cov, dtype=float)
    loglik = 0.0
    pred_means = np.zeros((m_steps + 1, n))
    pred_covs = np.zeros((m_steps + 1, n, n))
    filt_means = np.zeros((m_steps + 1, n))
    filt_covs = np.zeros((m_steps + 1, n, n))
    for k in range(m_steps + 1):
        pred_means[k], pred_covs[k] = mean, cov
        for h, y, r in obs_by_idx.get(k, ()):  # measurement update
            s = h @ cov @ h.T + r
            sc = np.linalg.cholesky(s)
            resid = y - h @ mean
            alpha = np.linalg.solve(sc.T, np.linalg.solve(sc, resid))
            loglik += -0.5 * (
                resid @ alpha + 2.0 * np.sum(np.log(np.diag(sc))) + y.size * np.log(2.0 * np.pi)
            )
            gain = cov @ h.T @ np.linalg.solve(s, np.eye(y.size))
            mean = mean + gain @ resid
            cov = cov - gain @ s @ gain.T
            cov = 0.5 * (cov + cov.T)
        filt_means[k], filt_covs[k] = mean, cov
        if k < m_steps:
            mean = chain.a[k] @ mean + chain.c[k]
            cov = chain.a[k] @ cov @ chain.a[k].T + chain.q[k]
            cov = 0.5 * (cov + cov.T)
    return loglik, pred_means, pred_covs, filt_means, filt_covs


def kalman_loglik(chain: LinearGaussianChain) -> float:
    return _filter(chain)[0]


def kalman_loglik_and_smooth(chain: LinearGaussianChain) -> KalmanState:
    """Exact marginal log-likelihood and RTS-smoothed marginals."""
    loglik, _, _, fm, fc = _filter(chain)
    m_steps = chain.num_steps
    means = fm.copy()
    covs = fc.copy()
    for k in range(m_steps - 1, -1, -1):
        pred_cov = chain.a[k] @ fc[k] @ chain.a[k].T + chain.q[k]
        pred_mean = chain.a[k] @ fm[k] + chain.c[k]
        gain = fc[k] @ chain.a[k].T @ np.linalg.inv(pred_cov)
        means[k] = fm[k] + gain @ (means[k + 1] - pred_mean)
        covs[k] = fc[k] + gain @ (covs[k + 1] - pred_cov) @ gain.T
        covs[k] = 0.5 * (covs[k] + covs[k].T)
    return KalmanState(means=means, covs=covs, loglik=loglik)


# -- chain builders -------------------------------------------------------------


def _affine_parts(model: SdeModel, theta):
    """F, c0, g for an affine-drift constant-diffusion model (probed at x=0)."""
    n = model.dim
    f0 = eval_drift(model, np.zeros(n), theta)
    jac = drift_jacobian(model, np.zeros(n), theta)
    g = eval_diffusion(model, np.zeros(n), theta)
    return jac, f0, g


def affine_em_chain(model: SdeModel, grid: TimeGrid, theta, init: GaussianInitial,
                    obs=(), extra_var=0.0) -> LinearGaussianChain:
    """Explicit-Euler chain of an affine model: A = I + F dt, Q = (g g^T + e I) dt.

    ``extra_var`` adds the artificial per-step variance used by the
    increment+state formulation, making that formulation's implied chain
    exactly representable too.
    """
    jac, f0, g = _affine_parts(model, theta)
    n = model.dim
    dts = grid.steps
    eye = np.eye(n)
    a = eye[None, :, :] + dts[:, None, None] * jac[None, :, :]
    c = dts[:, None] * f0[None, :]
    q = dts[:, None, None] * (g @ g.T + extra_var * eye)[None, :, :]
    return LinearGaussianChain(
        a=a, c=c, q=q,
        init_mean=np.asarray(init.mean, dtype=float),
        init_cov=np.atleast_2d(np.asarray(init.cov, dtype=float)),
        obs=list(obs),
    )


def affine_trapezoid_chain(model: SdeModel, grid: TimeGrid, theta, init: GaussianInitial,
                           obs=()) -> LinearGaussianChain:
    """Implicit trapezoidal chain of an affine model:
    (I - F dt/2) x' = (I + F dt/2) x + c0 dt + g b."""
    jac, f0, g = _affine_parts(model, theta)
    n = model.dim
    dts = grid.steps
    eye = np.eye(n)
    a = np.zeros((dts.size, n, n))
    c = np.zeros((dts.size, n))
    q = np.zeros((dts.size, n, n))
    for k, dt in enumerate(dts):
        lhs = eye - 0.5 * dt * jac
        inv = np.linalg.inv(lhs)
        a[k] = inv @ (eye + 0.5 * dt * jac)
        c[k] = inv @ (f0 * dt)
        gg = inv @ g
        q[k] = dt * gg @ gg.T
    return LinearGaussianChain(
        a=a, c=c, q=q,
        init_mean=np.asarray(init.mean, dtype=float),
        init_cov=np.atleast_2d(np.asarray(init.cov, dtype=float)),
        obs=list(obs),
    )


def ou_exact_chain(lam, mu, sigma, grid: TimeGrid, init: GaussianInitial, obs=()):
    """Exactly discretized mean-reverting chain (continuous-time law)."""
    dts = grid.steps
    a = np.exp(-lam * dts)[:, None, None]
    c = (mu * (1.0 - np.exp(-lam * dts)))[:, None]
    q = (sigma * sigma * (1.0 - np.exp(-2.0 * lam * dts)) / (2.0 * lam))[:, None, None]
    return LinearGaussianChain(
        a=a, c=c, q=q,
        init_mean=np.asarray(init.mean, dtype=float),
        init_cov=np.atleast_2d(np.asarray(init.cov, dtype=float)),
        obs=list(obs),
    )
