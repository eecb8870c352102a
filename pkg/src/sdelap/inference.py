"""User-facing computations: transition densities under any formulation,
full-series marginal likelihood, posterior smoothing, and outer maximum
likelihood with standard errors.

States in this module's public signatures are always in natural
coordinates; models that carry a log transform are handled internally
(including the density Jacobian for transition queries).
"""

from __future__ import annotations

import concurrent.futures
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .discretize import TimeGrid, build_grid
from .errors import (
    NoConvergenceError,
    NonFiniteError,
    SdeLapError,
    UnsupportedFormulationError,
)
from .laplace import (
    LaplaceResult,
    ModeResult,
    NewtonConfig,
    find_mode,
    find_mode_dense,
    init_path,
    laplace_value,
    laplace_value_dense,
)
from .models import (
    FreeInitial,
    GaussianObservation,
    ParamSpec,
    PoissonObservation,
    SdeModel,
    validate_params,
)
from .objectives import (
    DEFAULT_MOLLIFIER_EPS,
    DEFAULT_TINY_EPS,
    Formulation,
    bridge_objective,
    db_objective,
    series_objective,
)

__all__ = [
    "TransitionQuery",
    "ObservationSeries",
    "FitOptions",
    "FitResult",
    "SmoothResult",
    "transition_density",
    "density_sweep",
    "marginal_loglik",
    "smooth",
    "fit",
]


@dataclass(frozen=True)
class TransitionQuery:
    """One transition-density evaluation p(s, x, t, y)."""

    formulation: Formulation
    s: float
    t: float
    x: tuple
    y: tuple
    theta: dict
    substeps: int
    tiny_eps: float = DEFAULT_TINY_EPS
    mollifier_eps: float = DEFAULT_MOLLIFIER_EPS

    def __post_init__(self):
        if not self.t > self.s:
            raise ValueError("need t > s")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclass(frozen=True)
class ObservationSeries:
    """Observation times, per-time records, and the observation law."""

    times: np.ndarray
    values: np.ndarray
    obs_model: object

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(times)):
            raise ValueError("observation times must be finite")
        if times.ndim != 1 or values.shape[0] != times.size:
            raise ValueError("observation times and values are misaligned")

    def __len__(self):
        return self.times.size


@dataclass
class SmoothResult:
    times: np.ndarray
    mean: np.ndarray  # (K, dim), natural coordinates
    sd: np.ndarray    # (K, dim), natural coordinates (delta method under log)
    laplace: LaplaceResult | None = None


@dataclass(frozen=True)
class FitOptions:
    formulation: Formulation = Formulation.XDB
    substeps: int = 8
    t_start: float | None = None
    initial: object = FreeInitial()
    tiny_eps: float = DEFAULT_TINY_EPS
    fix: tuple = ()
    estimate: tuple = ()
    max_iters: int = 200
    gtol: float = 1e-3
    fd_step: float = 1e-5
    se_step: float = 1e-3
    newton: NewtonConfig = NewtonConfig()


@dataclass
class FitResult:
    theta_hat: dict
    loglik: float
    free_names: list
    param_sd: dict
    param_cov: np.ndarray | None
    smoothed: SmoothResult | None
    converged: bool
    outer_iters: int
    message: str
    se_ok: bool


# -- transition densities --------------------------------------------------------


def _bridge_grid(q: TransitionQuery) -> TimeGrid:
    return build_grid([q.s, q.t], q.substeps)


def transition_density(model: SdeModel, q: TransitionQuery,
                       newton: NewtonConfig | None = None):
    """Laplace-approximate log transition density under one formulation."""
    validate_params(model, q.theta)
    grid = _bridge_grid(q)
    x = model.from_natural(np.asarray(q.x, dtype=float))
    y = model.from_natural(np.asarray(q.y, dtype=float))
    jac = float(np.sum(np.log(np.asarray(q.y)))) if model.coords == "log" else 0.0
    states0 = np.linspace(0.0, 1.0, grid.num_points)[:, None] * (y - x) + x

    if q.formulation is Formulation.DB:
        obj = db_objective(model, grid, q.theta, x, y, mollifier_eps=q.mollifier_eps)
        cfg = newton or NewtonConfig(decrement_tol=1e-7)
        mode = find_mode_dense(obj, obj.initial_increments(states0), cfg)
        res = laplace_value_dense(obj, mode)
    else:
        obj = bridge_objective(model, grid, q.theta, q.formulation, x, y,
                               tiny_eps=q.tiny_eps)
        cfg = newton or NewtonConfig()
        mode = find_mode(obj, obj.nodes_from_states(states0), cfg)
        res = laplace_value(obj, mode)
    res.log_integral -= jac
    return res


def density_sweep(model: SdeModel, theta, x, t, y_grid, formulation,
                  substeps, threads=None, s=0.0, tiny_eps=DEFAULT_TINY_EPS,
                  mollifier_eps=DEFAULT_MOLLIFIER_EPS):
    """One transition density per target value, independently computed.

    Returns ``(logp, notes)`` where failed entries carry NaN and an error
    note; the sweep always continues past failures.  Row order follows
    ``y_grid`` regardless of the thread count.
    """
    y_grid = np.asarray(y_grid, dtype=float).reshape(-1)
    formulation = Formulation.parse(formulation)

    def one(yv):
        try:
            q = TransitionQuery(formulation, s, s + t, tuple(np.atleast_1d(x)),
                                (float(yv),) * 1, dict(theta), substeps,
                                tiny_eps=tiny_eps, mollifier_eps=mollifier_eps)
            return transition_density(model, q).log_integral, ""
        except SdeLapError as exc:
            return np.nan, f"{type(exc).__name__}: {exc}"

    if threads and threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(one, y_grid))
    else:
        results = [one(yv) for yv in y_grid]
    logp = np.array([r[0] for r in results])
    notes = [r[1] for r in results]
    return logp, notes


# -- full time series ---------------------------------------------------------------


class SeriesEvaluator:
    """Joint Laplace approximation over the whole grid, warm-startable.

    One instance corresponds to one (model, data, formulation, grid) tuple;
    ``loglik(theta)`` reuses the previous mode path as the next initial
    guess, which is what makes the outer optimization cheap.
    """

    def __init__(self, model: SdeModel, obs: ObservationSeries, formulation,
                 substeps, initial=FreeInitial(), t_start=None,
                 tiny_eps=DEFAULT_TINY_EPS, newton: NewtonConfig = NewtonConfig()):
        self.model = model
        self.obs = obs
        self.formulation = Formulation.parse(formulation)
        if self.formulation is Formulation.DB:
            raise UnsupportedFormulationError(
                "the dense increment formulation is a transition-density "
                "reference; use x, s or xdb for time-series work"
            )
        self.initial = initial
        self.tiny_eps = tiny_eps
        self.newton = newton
        obs_times = np.asarray(obs.times, dtype=float)
        if t_start is not None:
            if t_start >= obs_times[0]:
                raise ValueError("t_start must precede the first observation")
            obs_times = np.concatenate([[t_start], obs_times])
            self._lead = 1
        else:
            self._lead = 0
        self.grid = build_grid(obs_times, substeps)
        self._warm_nodes = None

    # anchor heuristic: observed components interpolate the observation-implied
    # states; unobserved components stay at the model-coordinate image of 1
    def _anchors(self):
        model, obs = self.model, self.obs
        anchors = {}
        om = obs.obs_model
        for ordinal in range(len(obs)):
            node = self.grid.obs_index[ordinal + self._lead]
            y = obs.values[ordinal]
            if isinstance(om, GaussianObservation):
                for j, comp in enumerate(om.indices):
                    val = y[j]
                    if model.coords == "log":
                        val = np.log(max(val, 1e-3))
                    anchors.setdefault(comp, {})[node] = val
            elif isinstance(om, PoissonObservation):
                val = max(y[0] / float(self._theta_now[om.volume_param]), 1e-3)
                if model.coords == "log":
                    val = np.log(val)
                anchors.setdefault(om.index, {})[node] = val
        return anchors

    def _objective(self, theta):
        return series_objective(self.model, self.grid, theta, self.formulation,
                                self.obs.obs_model, self.obs, self.initial,
                                tiny_eps=self.tiny_eps)

    def solve(self, theta) -> tuple[LaplaceResult, object]:
        validate_params(self.model, theta)
        self._theta_now = theta
        obj = self._objective(theta)
        if self._warm_nodes is not None and self._warm_nodes.shape == (obj.num_nodes, obj.width):
            init_nodes = np.array(self._warm_nodes)
            init_nodes[~obj.free] = obj.pinned_values[~obj.free]
            if not obj.domain_ok(init_nodes) or not np.isfinite(obj.value(init_nodes)):
                init_nodes = obj.nodes_from_states(init_path(self.model, self.grid,
                                                             theta, self._anchors()))
        else:
            init_nodes = obj.nodes_from_states(init_path(self.model, self.grid,
                                                         theta, self._anchors()))
        mode = find_mode(obj, init_nodes, self.newton)
        self._warm_nodes = np.array(mode.nodes)
        return laplace_value(obj, mode), obj

    def loglik(self, theta) -> float:
        return self.solve(theta)[0].log_integral

    def reset(self):
        self._warm_nodes = None


def marginal_loglik(model: SdeModel, obs: ObservationSeries, theta, formulation,
                    substeps, initial=FreeInitial(), t_start=None,
                    tiny_eps=DEFAULT_TINY_EPS, newton: NewtonConfig = NewtonConfig()):
    """Marginal log-likelihood from one joint Laplace approximation over the
    full latent path (states, plus increments under the augmented layout)."""
    if len(obs) == 0:
        raise ValueError("need at least one observation")
    ev = SeriesEvaluator(model, obs, formulation, substeps, initial=initial,
                         t_start=t_start, tiny_eps=tiny_eps, newton=newton)
    return ev.loglik(theta)


def smooth(model: SdeModel, obs: ObservationSeries, theta, formulation,
           substeps, initial=FreeInitial(), t_start=None,
           tiny_eps=DEFAULT_TINY_EPS, newton: NewtonConfig = NewtonConfig()) -> SmoothResult:
    """Posterior state summary at every grid time (intermediate points
    included): mode path as the point estimate, marginal standard
    deviations from the inverse Hessian at the mode."""
    ev = SeriesEvaluator(model, obs, formulation, substeps, initial=initial,
                         t_start=t_start, tiny_eps=tiny_eps, newton=newton)
    res, obj = ev.solve(theta)
    return _smooth_from_mode(model, ev.grid, obj, res)


def _smooth_from_mode(model, grid, obj, res: LaplaceResult) -> SmoothResult:
    _, _, hess = obj.grad_hess(res.mode)
    var = hess.inverse_diagonal()  # (K, w); pinned entries are 0
    cols = obj.state_cols
    mean_model = res.mode_states
    sd_model = np.sqrt(np.maximum(var[:, cols], 0.0))
    if model.coords == "log":
        mean = np.exp(mean_model)
        sd = mean * sd_model  # delta method through x = exp(z)
    else:
        mean = np.array(mean_model)
        sd = sd_model
    return SmoothResult(times=np.array(grid.times), mean=mean, sd=sd, laplace=res)


# -- outer maximum likelihood ---------------------------------------------------------


def _free_param_specs(model: SdeModel, obs_model, options: FitOptions):
    specs = list(model.params) + list(getattr(obs_model, "params", ()))
    seen = {}
    for sp in specs:
        if sp.name in seen:
            raise ValueError(f"duplicate parameter name {sp.name!r}")
        seen[sp.name] = sp
    for name in tuple(options.fix) + tuple(options.estimate):
        if name not in seen:
            raise ValueError(f"unknown parameter {name!r}")
    free = []
    for sp in specs:
        fixed = sp.fixed
        if sp.name in options.fix:
            fixed = True
        if sp.name in options.estimate:
            fixed = False
        if not fixed:
            free.append(sp)
    return specs, free


def _to_unconstrained(spec: ParamSpec, v):
    return np.log(v) if spec.positive else v


def _from_unconstrained(spec: ParamSpec, z):
    return float(np.exp(z)) if spec.positive else float(z)


def fit(model: SdeModel, obs: ObservationSeries, theta_init, options: FitOptions = FitOptions()):
    """Quasi-Newton maximum likelihood over the free parameters.

    Positive parameters are optimized on the log scale; gradients are
    central finite differences of the Laplace marginal log-likelihood, and
    standard errors come from the finite-difference Hessian at the optimum
    mapped back through the parameter transform (delta method).
    """
    theta_init = dict(theta_init)
    validate_params(model, theta_init)
    specs, free = _free_param_specs(model, obs.obs_model, options)
    ev = SeriesEvaluator(model, obs, options.formulation, options.substeps,
                         initial=options.initial, t_start=options.t_start,
                         tiny_eps=options.tiny_eps, newton=options.newton)

    if not free:
        ll = ev.loglik(theta_init)
        res, obj = ev.solve(theta_init)
        return FitResult(theta_hat=dict(theta_init), loglik=res.log_integral,
                         free_names=[], param_sd={}, param_cov=None,
                         smoothed=_smooth_from_mode(model, ev.grid, obj, res),
                         converged=True, outer_iters=0,
                         message="all parameters fixed", se_ok=True)

    names = [sp.name for sp in free]
    z0 = np.array([_to_unconstrained(sp, theta_init[sp.name]) for sp in free])

    def theta_of(z):
        th = dict(theta_init)
        for sp, zi in zip(free, z):
            th[sp.name] = _from_unconstrained(sp, zi)
        return th

    cache = {}
    n_eval = [0]

    def negloglik(z):
        key = tuple(np.round(z, 14))
        if key in cache:
            return cache[key]
        n_eval[0] += 1
        try:
            val = -ev.loglik(theta_of(z))
        except SdeLapError:
            ev.reset()
            val = 1e10
        if not np.isfinite(val):
            val = 1e10
        cache[key] = val
        return val

    def fd_grad(z):
        g = np.zeros_like(z)
        for i in range(z.size):
            h = options.fd_step * max(1.0, abs(z[i]))
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            g[i] = (negloglik(zp) - negloglik(zm)) / (2.0 * h)
        return g

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        opt = scipy.optimize.minimize(
            negloglik, z0, jac=fd_grad, method="BFGS",
            options={"maxiter": options.max_iters, "gtol": options.gtol},
        )
    z_hat = opt.x
    grad_ok = np.all(np.isfinite(opt.jac)) and np.max(np.abs(opt.jac)) <= 10 * options.gtol
    converged = bool(opt.success or grad_ok)
    theta_hat = theta_of(z_hat)

    # curvature of -loglik at the optimum, central second differences
    k = z_hat.size
    se_ok = True
    cov_z = None
    try:
        hz = np.zeros((k, k))
        f0 = negloglik(z_hat)
        hs = [options.se_step * max(1.0, abs(z_hat[i])) for i in range(k)]
        for i in range(k):
            zp, zm = z_hat.copy(), z_hat.copy()
            zp[i] += hs[i]
            zm[i] -= hs[i]
            hz[i, i] = (negloglik(zp) - 2.0 * f0 + negloglik(zm)) / hs[i] ** 2
        for i in range(k):
            for j in range(i + 1, k):
                zpp, zpm, zmp, zmm = (z_hat.copy() for _ in range(4))
                zpp[[i, j]] += [hs[i], hs[j]]
                zpm[i] += hs[i]
                zpm[j] -= hs[j]
                zmp[i] -= hs[i]
                zmp[j] += hs[j]
                zmm[[i, j]] -= [hs[i], hs[j]]
                hz[i, j] = hz[j, i] = (
                    negloglik(zpp) - negloglik(zpm) - negloglik(zmp) + negloglik(zmm)
                ) / (4.0 * hs[i] * hs[j])
        eigvals = np.linalg.eigvalsh(hz)
        if np.any(eigvals <= 0):
            raise np.linalg.LinAlgError("outer Hessian not positive definite")
        cov_z = np.linalg.inv(hz)
    except (np.linalg.LinAlgError, SdeLapError):
        se_ok = False
        warnings.warn("outer Hessian is not positive definite; standard errors are NaN")

    if se_ok:
        scale = np.array([theta_hat[sp.name] if sp.positive else 1.0 for sp in free])
        cov = cov_z * np.outer(scale, scale)
        sd = {nm: float(np.sqrt(cov[i, i])) for i, nm in enumerate(names)}
    else:
        cov = None
        sd = {nm: float("nan") for nm in names}

    res, obj = ev.solve(theta_hat)
    return FitResult(
        theta_hat=theta_hat,
        loglik=res.log_integral,
        free_names=names,
        param_sd=sd,
        param_cov=cov,
        smoothed=_smooth_from_mode(model, ev.grid, obj, res),
        converged=converged,
        outer_iters=int(opt.nit),
        message=str(opt.message),
        se_ok=se_ok,
    )
