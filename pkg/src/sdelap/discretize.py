"""Time grids with inserted computational points, the explicit Euler step and
its Gaussian transition kernel, and the trapezoidal (Stratonovich) residual
with its increment solve."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import InvalidGridError, NonFiniteError, SingularMatrixError
from .models import SdeModel, stratonovich_drift

__all__ = [
    "TimeGrid",
    "build_grid",
    "em_step",
    "em_trans_logpdf",
    "strat_residual",
    "b_solve",
]


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times; observation times sit exactly on the grid."""

    times: np.ndarray
    obs_index: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 2:
            raise InvalidGridError("grid needs at least two time points")
        if not np.all(np.isfinite(times)):
            raise InvalidGridError("grid times must be finite")
        if np.any(np.diff(times) <= 0):
            raise InvalidGridError("grid times must be strictly increasing")

    @property
    def steps(self):
        return np.diff(self.times)

    @property
    def num_steps(self):
        return self.times.size - 1

    @property
    def num_points(self):
        return self.times.size


def build_grid(obs_times, substeps_per_interval: int) -> TimeGrid:
    """Uniformly subdivide each observation interval.

    Observation times are carried over bit-exactly; interior points come
    from affine interpolation.
    """
    obs_times = np.asarray(obs_times, dtype=float)
    if obs_times.ndim != 1 or obs_times.size < 1:
        raise InvalidGridError("need at least one observation time")
    if obs_times.size > 1 and np.any(np.diff(obs_times) <= 0):
        raise InvalidGridError("observation times must be strictly increasing")
    k = int(substeps_per_interval)
    if k < 1:
        raise InvalidGridError("substeps_per_interval must be >= 1")
    times = [obs_times[0]]
    obs_index = {0: 0}
    for i in range(obs_times.size - 1):
        a, b = obs_times[i], obs_times[i + 1]
        for j in range(1, k):
            times.append(a + (b - a) * (j / k))
        times.append(b)
        obs_index[i + 1] = len(times) - 1
    if len(times) == 1:
        raise InvalidGridError("a single observation time does not define a grid")
    return TimeGrid(np.array(times), obs_index)


def em_step(model: SdeModel, x, theta, dt, b):
    """One explicit Euler step x + f dt + g b (generic scalars allowed)."""
    if not dt > 0:
        raise InvalidGridError("time step must be positive")
    n = model.dim
    x = list(x)
    f = model.drift(x, theta)
    g = model.diffusion(x, theta)
    out = []
    for i in range(n):
        acc = x[i] + f[i] * dt
        for j in range(n):
            acc = acc + g[i][j] * b[j]
        out.append(acc)
    if all(isinstance(v, float) or np.isscalar(v) for v in out):
        arr = np.array([float(v) for v in out])
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("Euler step produced a non-finite state")
        return arr
    return out


def em_trans_logpdf(model: SdeModel, x_from, x_to, theta, dt):
    """Gaussian one-step transition log-density N(x + f dt, g dt g^T)."""
    n = model.dim
    x_from = list(x_from)
    f = model.drift(x_from, theta)
    g = model.diffusion(x_from, theta)
    det = ad.det_generic(g)
    detv = det.val if isinstance(det, ad.Dual) else det
    if np.any(np.abs(np.asarray(detv)) < 1e-300):
        raise SingularMatrixError("diffusion matrix is singular in em_trans_logpdf")
    r = [x_to[i] - x_from[i] - f[i] * dt for i in range(n)]
    z = ad.solve_linear(g, r)
    quad = 0.0
    for zi in z:
        quad = quad + zi * zi
    return (
        -quad / (2.0 * dt)
        - 0.5 * n * np.log(2.0 * np.pi * dt)
        - 0.5 * ad.log(det * det)
    )


def strat_residual(model: SdeModel, x_from, x_to, theta, dt, b):
    """Trapezoidal residual eta(y, b); zero iff (x_to, b) satisfies the
    implicit trapezoidal relation over the step."""
    n = model.dim
    fs_a = stratonovich_drift(model, list(x_from), theta)
    fs_b = stratonovich_drift(model, list(x_to), theta)
    g_a = model.diffusion(list(x_from), theta)
    g_b = model.diffusion(list(x_to), theta)
    out = []
    for i in range(n):
        acc = x_to[i] - x_from[i] - 0.5 * (fs_a[i] + fs_b[i]) * dt
        for j in range(n):
            acc = acc - 0.5 * (g_a[i][j] + g_b[i][j]) * b[j]
        out.append(acc)
    if all(np.isscalar(v) for v in out):
        arr = np.array([float(v) for v in out])
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("trapezoidal residual is not finite")
        return arr
    return out


def b_solve(model: SdeModel, x_from, x_to, theta, dt):
    """The unique increment b with strat_residual(x_to, b) = 0:
    b = (g(x) + g(y))^{-1} (2(y - x) - (f_S(x) + f_S(y)) dt)."""
    n = model.dim
    fs_a = stratonovich_drift(model, list(x_from), theta)
    fs_b = stratonovich_drift(model, list(x_to), theta)
    g_a = model.diffusion(list(x_from), theta)
    g_b = model.diffusion(list(x_to), theta)
    gsum = [[g_a[i][j] + g_b[i][j] for j in range(n)] for i in range(n)]
    det = ad.det_generic(gsum)
    detv = det.val if isinstance(det, ad.Dual) else det
    if np.any(np.abs(np.asarray(detv)) < 1e-300):
        raise SingularMatrixError("g(x) + g(y) is singular in b_solve")
    rhs = [2.0 * (x_to[i] - x_from[i]) - (fs_a[i] + fs_b[i]) * dt for i in range(n)]
    out = ad.solve_linear(gsum, rhs)
    if all(np.isscalar(v) for v in out):
        arr = np.array([float(v) for v in out])
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("increment solve is not finite")
        return arr
    return out
