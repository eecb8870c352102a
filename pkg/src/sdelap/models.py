"""SDE model abstraction, built-in models, observation laws, initial laws.

Drift and diffusion are written once over generic scalars (plain floats,
batched arrays, or the dual types from :mod:`sdelap.autodiff`), so every
derivative the solvers need is obtained by seeding, never by hand-coded
Jacobians.  A model evaluates either in its natural coordinates or, for
strictly positive processes, in log coordinates after an Ito change of
variables (``log_transformed``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad
from .errors import NonFiniteError, SingularMatrixError, SupportViolationError

__all__ = [
    "ParamSpec",
    "SdeModel",
    "GaussianObservation",
    "PoissonObservation",
    "DiracInitial",
    "GaussianInitial",
    "FreeInitial",
    "ou_model",
    "gbm_model",
    "cir_model",
    "rma_model",
    "builtin_model",
    "BUILTIN_MODELS",
    "eval_drift",
    "eval_diffusion",
    "stratonovich_drift",
    "observation_loglik",
    "log_transformed",
    "validate_params",
]


@dataclass(frozen=True)
class ParamSpec:
    """One named parameter: positivity implies a log transform when fitted."""

    name: str
    positive: bool = False
    fixed: bool = False


@dataclass(frozen=True)
class SdeModel:
    """Time-invariant SDE dX = f(X, theta) dt + g(X, theta) dB.

    ``drift`` maps (state, params) to a length-``dim`` list and ``diffusion``
    to a ``dim x dim`` nested list; both must be evaluable on generic
    scalars.  ``positive_state`` marks models whose natural state space is
    the positive orthant.  ``coords`` records whether this instance works in
    natural or log coordinates.
    """

    name: str
    dim: int
    drift: Callable[[Sequence, Mapping], list]
    diffusion: Callable[[Sequence, Mapping], list]
    params: tuple[ParamSpec, ...]
    positive_state: bool = False
    coords: str = "natural"

    def param_names(self):
        return [p.name for p in self.params]

    def to_natural(self, x):
        """Map model-coordinate states to natural-coordinate states."""
        x = np.asarray(x, dtype=float)
        return np.exp(x) if self.coords == "log" else x

    def from_natural(self, x):
        x = np.asarray(x, dtype=float)
        if self.coords == "log":
            if np.any(x <= 0):
                raise SupportViolationError("log coordinates need positive states")
            return np.log(x)
        return x

    @property
    def constrained_state(self):
        """True when optimization must guard the positive orthant."""
        return self.positive_state and self.coords == "natural"


def validate_params(model: SdeModel, theta: Mapping[str, float]):
    for spec in model.params:
        if spec.name not in theta:
            raise ValueError(f"missing parameter {spec.name!r} for model {model.name!r}")
        v = float(theta[spec.name])
        if not math.isfinite(v):
            raise NonFiniteError(f"parameter {spec.name!r} is not finite")
        if spec.positive and v <= 0:
            raise ValueError(f"parameter {spec.name!r} must be positive, got {v}")


def eval_drift(model: SdeModel, x, theta):
    """Drift vector at a plain-number state, with finiteness check."""
    out = np.array([float(v) for v in model.drift(list(np.asarray(x, dtype=float)), theta)])
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"drift of {model.name!r} is not finite at x={x!r}")
    return out


def eval_diffusion(model: SdeModel, x, theta, require_invertible=False):
    """Diffusion matrix at a plain-number state."""
    rows = model.diffusion(list(np.asarray(x, dtype=float)), theta)
    out = np.array([[float(v) for v in row] for row in rows])
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"diffusion of {model.name!r} is not finite at x={x!r}")
    if require_invertible and abs(np.linalg.det(out)) < 1e-300:
        raise SingularMatrixError(f"diffusion of {model.name!r} is singular at x={x!r}")
    return out


def diffusion_and_jacobians(model: SdeModel, x, theta):
    """Diffusion matrix and the Jacobians of its columns, by forward jets.

    Returns ``(g, dg)`` where ``g[i][k]`` and ``dg[i][k][j] = d g[i][k] / d x[j]``
    hold generic scalars (so ``x`` may contain duals).
    """
    n = model.dim
    seeds = [ad.Jet.seed(x[j], j, n) for j in range(n)]
    rows = model.diffusion(seeds, theta)
    g = [[ad.jet_value(rows[i][k]) for k in range(n)] for i in range(n)]
    dg = [[ad.jet_parts(rows[i][k], n) for k in range(n)] for i in range(n)]
    return g, dg


def stratonovich_drift(model: SdeModel, x, theta):
    """Drift of the Stratonovich form of the same process.

    Applies the standard conversion f_S,i = f_i - 1/2 sum_{j,k} g_{jk}
    d g_{ik} / d x_j, using the columns of g.  Works on generic scalars.
    """
    n = model.dim
    f = model.drift(list(x), theta)
    g, dg = diffusion_and_jacobians(model, list(x), theta)
    out = []
    for i in range(n):
        corr = 0.0
        for k in range(n):
            for j in range(n):
                corr = corr + dg[i][k][j] * g[j][k]
        out.append(f[i] - 0.5 * corr)
    return out


def drift_jacobian(model: SdeModel, x, theta, stratonovich=False):
    """Jacobian of the (Ito or Stratonovich) drift at a plain-number state."""
    n = model.dim
    seeds = [ad.Jet.seed(float(x[j]), j, n) for j in range(n)]
    f = stratonovich_drift(model, seeds, theta) if stratonovich else model.drift(seeds, theta)
    jac = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            jac[i, j] = float(ad.jet_parts(f[i], n)[j])
    return jac


# -- observation models -------------------------------------------------------


@dataclass(frozen=True)
class GaussianObservation:
    """Additive Gaussian errors on a subset of state components.

    The noise standard deviation lives in the shared parameter table under
    ``sd_param`` (fixed by default, like the measurement noise in the
    linear benchmark).
    """

    indices: tuple[int, ...] = (0,)
    sd_param: str = "s"

    @property
    def params(self):
        return (ParamSpec(self.sd_param, positive=True, fixed=True),)

    @property
    def ydim(self):
        return len(self.indices)

    def loglik(self, x, y, theta):
        s = theta[self.sd_param]
        if not s > 0:
            raise SupportViolationError("observation sd must be positive")
        out = -0.5 * self.ydim * np.log(2.0 * np.pi * s * s)
        for j, idx in enumerate(self.indices):
            r = x[idx] - float(y[j])
            out = out - (r * r) / (2.0 * s * s)
        return out


@dataclass(frozen=True)
class PoissonObservation:
    """Poisson counts with expectation (volume * state component)."""

    index: int = 0
    volume_param: str = "v"

    @property
    def params(self):
        return (ParamSpec(self.volume_param, positive=True, fixed=True),)

    @property
    def ydim(self):
        return 1

    def loglik(self, x, y, theta):
        v = theta[self.volume_param]
        if not v > 0:
            raise SupportViolationError("sample volume must be positive")
        count = float(np.asarray(y).reshape(-1)[0])
        if count < 0 or count != round(count):
            raise SupportViolationError("Poisson observation must be a nonnegative integer")
        mean = v * x[self.index]
        mval = mean.val if isinstance(mean, ad.Dual) else mean
        if np.any(np.asarray(mval) < 0):
            raise SupportViolationError("Poisson expectation is negative")
        if count == 0:
            return -mean
        return count * ad.log(mean) - mean - gammaln(count + 1.0)


def observation_loglik(obs, x, y, theta):
    """Log-likelihood of one observation record at a plain-number state."""
    out = obs.loglik(list(np.asarray(x, dtype=float)), y, theta)
    out = float(out)
    if math.isnan(out):
        raise NonFiniteError("observation log-likelihood is NaN")
    return out


# -- initial conditions -------------------------------------------------------


@dataclass(frozen=True)
class DiracInitial:
    """Known deterministic initial state (natural coordinates)."""

    x0: tuple[float, ...]


@dataclass(frozen=True)
class GaussianInitial:
    """Gaussian initial density (natural coordinates)."""

    mean: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class FreeInitial:
    """Improper flat initial law: the first state is simply optimized."""


# -- built-in models ----------------------------------------------------------


def ou_model():
    """Mean-reverting linear model with additive noise."""

    def drift(x, th):
        return [th["lambda"] * (th["mu"] - x[0])]

    def diffusion(x, th):
        return [[th["sigma"]]]

    return SdeModel(
        name="ou",
        dim=1,
        drift=drift,
        diffusion=diffusion,
        params=(
            ParamSpec("lambda", positive=True),
            ParamSpec("mu"),
            ParamSpec("sigma", positive=True),
        ),
    )


def gbm_model():
    """Geometric Brownian motion."""

    def drift(x, th):
        return [th["r"] * x[0]]

    def diffusion(x, th):
        return [[th["sigma"] * x[0]]]

    return SdeModel(
        name="gbm",
        dim=1,
        drift=drift,
        diffusion=diffusion,
        params=(ParamSpec("r"), ParamSpec("sigma", positive=True)),
        positive_state=True,
    )


def cir_model():
    """Square-root mean-reverting model."""

    def drift(x, th):
        return [th["lambda"] * (th["xi"] - x[0])]

    def diffusion(x, th):
        return [[th["gamma"] * ad.sqrt(x[0])]]

    return SdeModel(
        name="cir",
        dim=1,
        drift=drift,
        diffusion=diffusion,
        params=(
            ParamSpec("lambda", positive=True),
            ParamSpec("xi", positive=True),
            ParamSpec("gamma", positive=True),
        ),
        positive_state=True,
    )


def rma_model():
    """Stochastic predator-prey model with logistic prey growth and a
    saturating (Holling type II) uptake c N P / (N + nbar)."""

    def drift(x, th):
        n, p = x[0], x[1]
        uptake = th["c"] * n * p / (n + th["nbar"])
        return [
            th["r"] * n * (1.0 - n / th["K"]) - uptake,
            th["eps"] * uptake - th["mu"] * p,
        ]

    def diffusion(x, th):
        return [[th["sigma_N"] * x[0], 0.0], [0.0, th["sigma_P"] * x[1]]]

    return SdeModel(
        name="rma",
        dim=2,
        drift=drift,
        diffusion=diffusion,
        params=(
            ParamSpec("r", positive=True),
            ParamSpec("K", positive=True),
            ParamSpec("eps", positive=True, fixed=True),
            ParamSpec("c", positive=True, fixed=True),
            ParamSpec("nbar", positive=True),
            ParamSpec("mu", positive=True),
            ParamSpec("sigma_N", positive=True),
            ParamSpec("sigma_P", positive=True),
        ),
        positive_state=True,
    )


BUILTIN_MODELS = {
    "ou": ou_model,
    "gbm": gbm_model,
    "cir": cir_model,
    "rma": rma_model,
}


def builtin_model(model_id: str) -> SdeModel:
    try:
        factory = BUILTIN_MODELS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; known: {sorted(BUILTIN_MODELS)}")
    return factory()


def log_transformed(model: SdeModel) -> SdeModel:
    """Ito change of variables z = log x, componentwise.

    dz_k = [f_k / x_k - (g g^T)_{kk} / (2 x_k^2)] dt + (g_k. / x_k) dB,
    evaluated at x = exp(z).  Only meaningful for positive-state models.
    """
    if not model.positive_state:
        raise ValueError(f"model {model.name!r} does not have a positive state space")
    if model.coords == "log":
        return model
    n = model.dim
    base_drift, base_diffusion = model.drift, model.diffusion

    def drift(z, th):
        x = [ad.exp(zi) for zi in z]
        f = base_drift(x, th)
        g = base_diffusion(x, th)
        out = []
        for k in range(n):
            gg = 0.0
            for j in range(n):
                gg = gg + g[k][j] * g[k][j]
            out.append(f[k] / x[k] - gg / (2.0 * x[k] * x[k]))
        return out

    def diffusion(z, th):
        x = [ad.exp(zi) for zi in z]
        g = base_diffusion(x, th)
        return [[g[i][j] / x[i] for j in range(n)] for i in range(n)]

    return SdeModel(
        name=model.name,
        dim=n,
        drift=drift,
        diffusion=diffusion,
        params=model.params,
        positive_state=True,
        coords="log",
    )
