"""Seeded path simulation and synthetic observations.

Simulation always runs in the model's natural coordinates with the explicit
Euler scheme on a fine internal grid (finer than anything used for
inference).  Randomness comes from numpy's PCG64 generator with one
dedicated stream per purpose, so outputs are bit-reproducible per seed:

    path stream         default_rng(SeedSequence([seed, 0]))
    observation stream  default_rng(SeedSequence([seed, 1]))

If a step exits the state domain of a positivity-constrained model, the
step is rejected and re-done as two half steps with a Brownian-bridge split
of the increment (recursively, bounded depth); the events are counted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainExitError
from .models import (
    DiracInitial,
    GaussianInitial,
    GaussianObservation,
    PoissonObservation,
    SdeModel,
    eval_diffusion,
    eval_drift,
)

__all__ = ["SimConfig", "SimResult", "simulate", "cir_exact_sample"]

logger = logging.getLogger(__name__)

_MAX_HALVING_DEPTH = 16


@dataclass(frozen=True)
class SimConfig:
    model: SdeModel
    theta: dict
    initial: object  # DiracInitial or GaussianInitial (natural coordinates)
    t_end: float
    obs_interval: float
    sim_substeps: int
    seed: int
    obs_model: object = None
    t_start: float = 0.0


@dataclass
class SimResult:
    times: np.ndarray        # fine grid
    path: np.ndarray         # (len(times), dim), natural coordinates
    obs_times: np.ndarray
    obs_values: np.ndarray   # (num_obs, ydim)
    seed: int
    n_halvings: int = 0


def _guarded_step(model, theta, x, dt, db, rng, depth, counter):
    drift = eval_drift(model, x, theta)
    diff = eval_diffusion(model, x, theta)
    nxt = x + drift * dt + diff @ db
    ok = np.all(np.isfinite(nxt)) and (not model.positive_state or np.all(nxt > 0.0))
    if ok:
        return nxt
    if depth >= _MAX_HALVING_DEPTH:
        raise DomainExitError(
            f"state left the domain of {model.name!r} and halving depth is exhausted"
        )
    counter[0] += 1
    # Brownian-bridge split of the increment over the two half steps
    half_var = dt / 4.0
    db1 = db / 2.0 + rng.normal(0.0, np.sqrt(half_var), size=db.shape)
    db2 = db - db1
    mid = _guarded_step(model, theta, x, dt / 2.0, db1, rng, depth + 1, counter)
    return _guarded_step(model, theta, mid, dt / 2.0, db2, rng, depth + 1, counter)


def simulate(cfg: SimConfig) -> SimResult:
    """Euler path on the fine grid plus observations at multiples of the
    sampling interval (the first observation falls one interval after the
    start, matching how the benchmark experiments are set up)."""
    model, theta = cfg.model, cfg.theta
    if model.coords != "natural":
        raise ValueError("simulate expects the natural-coordinate model")
    n = model.dim
    rng_path = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    rng_obs = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    if isinstance(cfg.initial, DiracInitial):
        x = np.asarray(cfg.initial.x0, dtype=float)
    elif isinstance(cfg.initial, GaussianInitial):
        mean = np.asarray(cfg.initial.mean, dtype=float)
        cov = np.atleast_2d(np.asarray(cfg.initial.cov, dtype=float))
        x = rng_path.multivariate_normal(mean, cov)
    else:
        raise ValueError("simulation needs a Dirac or Gaussian initial condition")

    h = float(cfg.obs_interval)
    if h <= 0 or cfg.t_end <= cfg.t_start:
        raise ValueError("need obs_interval > 0 and t_end > t_start")
    num_obs = int(round((cfg.t_end - cfg.t_start) / h))
    if num_obs < 1:
        raise ValueError("no observation times in [t_start, t_end]")
    sub = int(cfg.sim_substeps)
    if sub < 1:
        raise ValueError("sim_substeps must be >= 1")

    counter = [0]
    times = [cfg.t_start]
    path = [x.copy()]
    obs_times, obs_values = [], []
    dt = h / sub
    for i in range(num_obs):
        for j in range(sub):
            db = rng_path.normal(0.0, np.sqrt(dt), size=n)
            x = _guarded_step(model, theta, x, dt, db, rng_path, 0, counter)
            times.append(cfg.t_start + (i * sub + j + 1) * dt)
            path.append(x.copy())
        t_obs = cfg.t_start + (i + 1) * h
        obs_times.append(t_obs)
        obs_values.append(_draw_observation(cfg.obs_model, x, theta, rng_obs))
    if counter[0]:
        logger.info("simulate: %d rejected steps were halved", counter[0])
    return SimResult(
        times=np.array(times),
        path=np.array(path),
        obs_times=np.array(obs_times),
        obs_values=np.array(obs_values, dtype=float),
        seed=cfg.seed,
        n_halvings=counter[0],
    )


def _draw_observation(obs_model, x, theta, rng):
    if obs_model is None:
        return np.array([])
    if isinstance(obs_model, GaussianObservation):
        s = float(theta[obs_model.sd_param])
        return np.array([x[i] + rng.normal(0.0, s) for i in obs_model.indices])
    if isinstance(obs_model, PoissonObservation):
        v = float(theta[obs_model.volume_param])
        mean = max(v * float(x[obs_model.index]), 0.0)
        return np.array([float(rng.poisson(mean))])
    raise TypeError(f"unknown observation model {obs_model!r}")


def cir_exact_sample(lam, xi, gamma, x0, dts, seed):
    """Exact transition-law sampling of the square-root process, for
    validating the Euler simulator against the known law."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    df = 4.0 * lam * xi / (gamma * gamma)
    x = float(x0)
    out = [x]
    for dt in np.asarray(dts, dtype=float):
        emt = np.exp(-lam * dt)
        c = 2.0 * lam / (gamma * gamma * (1.0 - emt))
        nc = 2.0 * c * x * emt
        x = rng.noncentral_chisquare(df, nc) / (2.0 * c)
        out.append(x)
    return np.array(out)
