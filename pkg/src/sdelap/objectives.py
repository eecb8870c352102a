"""Negative-log-density objectives over latent paths, one per formulation.

Four formulations share a chain layout of K nodes, one per grid time:

* ``X``   - nodes are the states; each step contributes the Gaussian
  negative log-density of the increment implied by the explicit Euler
  relation.  A determinant correction (product of diffusion determinants at
  the step start points) is applied at the mode, outside the optimization.
* ``S``   - like ``X`` but increments come from the implicit trapezoidal
  relation of the Stratonovich form, with its own determinant correction.
* ``XDB`` - nodes carry both the Brownian increment over the incoming step
  and the state; a small artificial Gaussian error of scale ``tiny_eps``
  ties states to the Euler relation, keeping the Hessian sparse with no
  determinant correction.
* ``DB``  - increments only, with the path endpoint enforced through a
  narrow Gaussian mollifier; its Hessian is dense, so it lives in its own
  class and is used as a reference method.

The chain objectives expose batched value/gradient/Hessian evaluation; every
term couples at most two adjacent nodes, which is what makes the assembled
Hessian block tridiagonal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad
from .blocktridiag import BlockTridiagonal
from .discretize import TimeGrid
from .errors import (
    NonFiniteError,
    SingularMatrixError,
    StructureViolationError,
    SupportViolationError,
)
from .models import (
    DiracInitial,
    FreeInitial,
    GaussianInitial,
    SdeModel,
    stratonovich_drift,
)

__all__ = [
    "Formulation",
    "ObjectiveEvaluation",
    "PathObjective",
    "DenseIncrementObjective",
    "bridge_objective",
    "series_objective",
    "naive_objective",
    "db_objective",
    "append_observation_terms",
    "hessian_blocks",
    "objective_x",
    "objective_s",
    "objective_xdb",
    "objective_db",
    "naive_state_mode_objective",
    "LOG2PI",
]

LOG2PI = float(np.log(2.0 * np.pi))

DEFAULT_TINY_EPS = 1e-4
# Mollifier scale balancing the O(eps^2) endpoint-smoothing bias against the
# double-precision cancellation floor O(ulp / eps^2) in the mollifier
# gradient; 1e-4 keeps both comfortably below the 1e-8 agreement target with
# the state-space formulation.
DEFAULT_MOLLIFIER_EPS = 1e-4


class Formulation(enum.Enum):
    DB = "db"
    XDB = "xdb"
    X = "x"
    S = "s"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class ObjectiveEvaluation:
    """Objective value plus the mode-time determinant correction."""

    value: float
    latent_layout: str
    correction_logdet: float


def _increment_nll(b, dt, n):
    """Negative log N(b; 0, dt I_n), batched."""
    quad = None
    for bi in b:
        quad = bi * bi if quad is None else quad + bi * bi
    return quad / (2.0 * dt) + (0.5 * n) * np.log(2.0 * np.pi * dt)


def _batch_jacobians(fn_rows, x, n):
    """Jacobian entries of a length-n vector function at batched points."""
    seeds = [ad.Jet.seed(x[j], j, n) for j in range(n)]
    rows = fn_rows(seeds)
    return [[ad.jet_parts(rows[i], n)[j] for j in range(n)] for i in range(n)]


class PathObjective:
    """Sum of per-step terms coupling adjacent nodes, plus per-node terms.

    Nodes are laid out as a uniform ``(K, w)`` array; pinned components keep
    their fixed values in the array and are excluded from the latent vector.
    """

    def __init__(self, model, grid, theta, width, state_cols, step_fn,
                 correction_fn, layout, pinned_values, free):
        self.model = model
        self.grid = grid
        self.theta = dict(theta)
        self.width = width
        self.state_cols = state_cols
        self._step = step_fn
        self._correction = correction_fn
        self.latent_layout = layout
        self.pinned_values = pinned_values
        self.free = free
        self.point_terms = []

    # -- layout helpers -----------------------------------------------------

    @property
    def num_nodes(self):
        return self.grid.num_points

    @property
    def latent_count(self):
        return int(self.free.sum())

    def state_values(self, nodes):
        """Per-grid-time states (model coordinates), shape (K, dim)."""
        return np.asarray(nodes[:, self.state_cols], dtype=float)

    def state_free_mask(self):
        return self.free[:, self.state_cols]

    def nodes_from_states(self, states):
        """Embed a state path into the node layout (pinned values enforced).

        For the increment-carrying layout the increments are initialized to
        the values consistent with the explicit Euler relation along the
        path, which keeps the stiff penalty terms small at the start.
        """
        states = np.asarray(states, dtype=float)
        k, n = self.num_nodes, self.model.dim
        nodes = np.array(self.pinned_values)
        nodes[:, self.state_cols] = states
        if self.width == 2 * n:
            xa = [states[:-1, j] for j in range(n)]
            f = self.model.drift(xa, self.theta)
            g = self.model.diffusion(xa, self.theta)
            dts = self.grid.steps
            r = [states[1:, i] - states[:-1, i] - f[i] * dts for i in range(n)]
            b = ad.solve_linear(g, r)
            for j in range(n):
                nodes[1:, j] = b[j]
            nodes[0, :n] = 0.0
        nodes[~self.free] = np.asarray(self.pinned_values)[~self.free]
        return nodes

    def add_point_term(self, node_index, fn):
        if not 0 <= node_index < self.num_nodes:
            raise StructureViolationError(
                f"point term at node {node_index} outside grid of {self.num_nodes} nodes"
            )
        self.point_terms.append((int(node_index), fn))

    def domain_ok(self, nodes):
        """Positivity guard for models constrained to the positive orthant."""
        if not self.model.constrained_state:
            return True
        return bool(np.all(nodes[:, self.state_cols] > 0.0))

    # -- evaluation -----------------------------------------------------------

    def value(self, nodes):
        """Objective value; +inf when the point is outside the domain."""
        if not self.domain_ok(nodes):
            return np.inf
        w = self.width
        dts = self.grid.steps
        prev = [nodes[:-1, j] for j in range(w)]
        cur = [nodes[1:, j] for j in range(w)]
        with np.errstate(all="ignore"):
            try:
                term = self._step(prev, cur, dts)
                total = float(np.sum(term))
                for k, fn in self.point_terms:
                    total += float(fn([nodes[k, j] for j in range(w)]))
            except (SupportViolationError, SingularMatrixError, FloatingPointError):
                return np.inf
        return total if np.isfinite(total) else np.inf

    def evaluate(self, nodes):
        """Strict evaluation returning value and correction."""
        v = self.value(nodes)
        if not np.isfinite(v):
            raise NonFiniteError("objective value is not finite")
        return ObjectiveEvaluation(v, self.latent_layout, self.correction_logdet(nodes))

    def grad_hess(self, nodes):
        """Value, gradient over nodes, and the block-tridiagonal Hessian."""
        k, w = nodes.shape
        m = 2 * w
        dts = self.grid.steps
        prev = [ad.Dual.seed(nodes[:-1, j], j, m) for j in range(w)]
        cur = [ad.Dual.seed(nodes[1:, j], w + j, m) for j in range(w)]
        with np.errstate(all="ignore"):
            term = self._step(prev, cur, dts)
        value = float(np.sum(term.val))
        grad = np.zeros((k, w))
        grad[:-1] += term.grad[:, :w]
        grad[1:] += term.grad[:, w:]
        diag = np.zeros((k, w, w))
        diag[:-1] += term.hess[:, :w, :w]
        diag[1:] += term.hess[:, w:, w:]
        off = np.ascontiguousarray(term.hess[:, w:, :w])
        for idx, fn in self.point_terms:
            seeds = [ad.Dual.seed(nodes[idx, j], j, w) for j in range(w)]
            with np.errstate(all="ignore"):
                out = fn(seeds)
            if isinstance(out, ad.Dual):
                value += float(out.val)
                grad[idx] += out.grad
                diag[idx] += out.hess
            else:
                value += float(out)
        if not np.isfinite(value):
            raise NonFiniteError("objective value is not finite at evaluation point")
        free = self.free
        grad[~free] = 0.0
        pair = free[:, :, None] & free[:, None, :]
        diag *= pair
        rng = np.arange(w)
        diag[:, rng, rng] = np.where(free, diag[:, rng, rng], 1.0)
        if k > 1:
            off *= free[1:, :, None] & free[:-1, None, :]
        return value, grad, BlockTridiagonal(diag, off, free)

    def correction_logdet(self, nodes):
        if self._correction is None:
            return 0.0
        return float(self._correction(self.state_values(nodes)))


# -- step kernels --------------------------------------------------------------


def _make_x_step(model, theta):
    n = model.dim

    def step(prev, cur, dt):
        xa, xb = prev[:n], cur[:n]
        f = model.drift(xa, theta)
        g = model.diffusion(xa, theta)
        r = [xb[i] - xa[i] - f[i] * dt for i in range(n)]
        b = ad.solve_linear(g, r)
        return _increment_nll(b, dt, n)

    return step


def _make_s_step(model, theta):
    n = model.dim

    def step(prev, cur, dt):
        xa, xb = prev[:n], cur[:n]
        fs_a = stratonovich_drift(model, xa, theta)
        fs_b = stratonovich_drift(model, xb, theta)
        g_a = model.diffusion(xa, theta)
        g_b = model.diffusion(xb, theta)
        gbar = [[0.5 * (g_a[i][j] + g_b[i][j]) for j in range(n)] for i in range(n)]
        rhs = [xb[i] - xa[i] - 0.5 * (fs_a[i] + fs_b[i]) * dt for i in range(n)]
        b = ad.solve_linear(gbar, rhs)
        return _increment_nll(b, dt, n)

    return step


def _make_xdb_step(model, theta, tiny_eps):
    n = model.dim
    tiny2 = tiny_eps * tiny_eps

    def step(prev, cur, dt):
        xa = prev[n:]
        b, xb = cur[:n], cur[n:]
        f = model.drift(xa, theta)
        g = model.diffusion(xa, theta)
        out = _increment_nll(b, dt, n)
        for i in range(n):
            r = xb[i] - xa[i] - f[i] * dt
            for j in range(n):
                r = r - g[i][j] * b[j]
            out = out + (r * r) / (2.0 * tiny2 * dt)
        return out + (0.5 * n) * np.log(2.0 * np.pi * tiny2 * dt)

    return step


def _make_naive_step(model, theta, exact_gbm=False):
    n = model.dim
    if exact_gbm:
        if model.name != "gbm" or model.coords != "natural":
            raise ValueError("exact transition densities are only wired up for gbm")

        def step(prev, cur, dt):
            x, y = prev[0], cur[0]
            r, sigma = theta["r"], theta["sigma"]
            s2t = sigma * sigma * dt
            z = ad.log(y) - ad.log(x) - (r - 0.5 * sigma * sigma) * dt
            return ad.log(y) + 0.5 * np.log(2.0 * np.pi * s2t) + (z * z) / (2.0 * s2t)

        return step

    x_step = _make_x_step(model, theta)

    def step(prev, cur, dt):
        g = model.diffusion(prev[:n], theta)
        det = ad.det_generic(g)
        return x_step(prev, cur, dt) + 0.5 * ad.log(det * det)

    return step


# -- determinant corrections ---------------------------------------------------


def _x_correction(model, theta, grid):
    def corr(states):
        n = model.dim
        xa = [states[:-1, j] for j in range(n)]
        g = model.diffusion(xa, theta)
        det = ad.det_generic(g)
        return -0.5 * float(np.sum(np.log(np.asarray(det) ** 2)))

    return corr


def _s_correction(model, theta, grid):
    def corr(states):
        n = model.dim
        dts = grid.steps
        xa = [states[:-1, j] for j in range(n)]
        xb = [states[1:, j] for j in range(n)]
        fs_a = stratonovich_drift(model, xa, theta)
        fs_b = stratonovich_drift(model, xb, theta)
        g_a = model.diffusion(xa, theta)
        g_b = model.diffusion(xb, theta)
        gbar = [[0.5 * (g_a[i][j] + g_b[i][j]) for j in range(n)] for i in range(n)]
        rhs = [xb[i] - xa[i] - 0.5 * (fs_a[i] + fs_b[i]) * dts for i in range(n)]
        b = ad.solve_linear(gbar, rhs)
        dfs = _batch_jacobians(lambda z: stratonovich_drift(model, z, theta), xb, n)
        gcols = _batch_jacobians_columns(model, theta, xb, n)
        m = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = (1.0 if i == j else 0.0) - 0.5 * dts * dfs[i][j]
                for kk in range(n):
                    acc = acc - 0.5 * b[kk] * gcols[kk][i][j]
                m[i][j] = acc
        det_m = ad.det_generic(m)
        det_g = ad.det_generic(gbar)
        return 0.5 * float(np.sum(np.log(np.asarray(det_m) ** 2) - np.log(np.asarray(det_g) ** 2)))

    return corr


def _batch_jacobians_columns(model, theta, x, n):
    """gcols[k][i][j] = d g_{ik} / d x_j at batched points."""
    seeds = [ad.Jet.seed(x[j], j, n) for j in range(n)]
    rows = model.diffusion(seeds, theta)
    return [
        [[ad.jet_parts(rows[i][k], n)[j] for j in range(n)] for i in range(n)]
        for k in range(n)
    ]


# -- builders -------------------------------------------------------------------


def _fresh_layout(model, grid, formulation):
    n = model.dim
    k = grid.num_points
    if formulation is Formulation.XDB:
        w = 2 * n
        state_cols = slice(n, 2 * n)
        layout = "increments+states"
    else:
        w = n
        state_cols = slice(0, n)
        layout = "states"
    pinned = np.zeros((k, w))
    free = np.ones((k, w), dtype=bool)
    if formulation is Formulation.XDB:
        free[0, :n] = False  # no incoming increment at the first node
    return w, state_cols, layout, pinned, free


def _objective_for(model, grid, theta, formulation, tiny_eps):
    if formulation is Formulation.X:
        step = _make_x_step(model, theta)
        corr = _x_correction(model, theta, grid)
    elif formulation is Formulation.S:
        step = _make_s_step(model, theta)
        corr = _s_correction(model, theta, grid)
    elif formulation is Formulation.XDB:
        step = _make_xdb_step(model, theta, tiny_eps)
        corr = None
    else:
        raise ValueError(f"{formulation} does not use the chain layout")
    w, cols, layout, pinned, free = _fresh_layout(model, grid, formulation)
    return PathObjective(model, grid, theta, w, cols, step, corr, layout, pinned, free)


def bridge_objective(model, grid, theta, formulation, x_start, x_end,
                     tiny_eps=DEFAULT_TINY_EPS):
    """Objective for a path pinned at both endpoints (model coordinates)."""
    formulation = Formulation.parse(formulation)
    obj = _objective_for(model, grid, theta, formulation, tiny_eps)
    n = model.dim
    cols = obj.state_cols
    obj.pinned_values[0, cols] = np.asarray(x_start, dtype=float)
    obj.pinned_values[-1, cols] = np.asarray(x_end, dtype=float)
    obj.free[0, cols] = False
    obj.free[-1, cols] = False
    return obj


def series_objective(model, grid, theta, formulation, obs_model, obs_series,
                     initial=FreeInitial(), tiny_eps=DEFAULT_TINY_EPS):
    """Joint objective over the whole grid with observation and initial terms."""
    formulation = Formulation.parse(formulation)
    obj = _objective_for(model, grid, theta, formulation, tiny_eps)
    return append_observation_terms(obj, obs_model, obs_series, grid, initial)


def naive_objective(model, grid, theta, x_start, x_end, exact_gbm=False):
    """Negative log of the product of transition densities over the states,
    with no determinant correction: the biased reference construction."""
    n = model.dim
    k = grid.num_points
    pinned = np.zeros((k, n))
    free = np.ones((k, n), dtype=bool)
    pinned[0] = np.asarray(x_start, dtype=float)
    pinned[-1] = np.asarray(x_end, dtype=float)
    free[0] = False
    free[-1] = False
    step = _make_naive_step(model, theta, exact_gbm=exact_gbm)
    return PathObjective(model, grid, theta, n, slice(0, n), step, None,
                         "states (uncorrected)", pinned, free)


def append_observation_terms(objective, obs_model, obs_series, grid, initial):
    """Attach observation negative log-likelihoods and the initial-state term.

    ``obs_series`` must expose ``times`` and ``values`` aligned with the
    grid's observation indices.  Observation laws always see natural-scale
    states; the initial law is transformed consistently when the model works
    in log coordinates.
    """
    model = objective.model
    theta = objective.theta
    n = model.dim
    cols = objective.state_cols
    log_coords = model.coords == "log"

    if obs_model is not None and obs_series is not None:
        times = np.asarray(obs_series.times, dtype=float)
        values = obs_series.values
        if len(values) != times.size:
            raise ValueError("observation times and values are misaligned")
        grid_times = grid.times
        for ordinal, t in enumerate(times):
            hits = np.nonzero(grid_times == t)[0]
            if hits.size == 0:
                raise StructureViolationError(f"observation time {t} is not on the grid")
            node = int(hits[0])
            y = values[ordinal]

            def term(comps, y=y):
                x = list(comps[cols])
                if log_coords:
                    x = [ad.exp(xi) for xi in x]
                return -obs_model.loglik(x, y, theta)

            objective.add_point_term(node, term)

    if isinstance(initial, DiracInitial):
        x0 = model.from_natural(np.asarray(initial.x0, dtype=float))
        objective.pinned_values[0, cols] = x0
        objective.free[0, cols] = False
    elif isinstance(initial, GaussianInitial):
        mean = np.asarray(initial.mean, dtype=float)
        cov = np.atleast_2d(np.asarray(initial.cov, dtype=float))
        prec = np.linalg.inv(cov)
        _, logdet_cov = np.linalg.slogdet(cov)
        const = 0.5 * (n * LOG2PI + logdet_cov)

        def init_term(comps):
            x = list(comps[cols])
            extra = 0.0
            if log_coords:
                for xi in x:
                    extra = extra - xi  # log-density Jacobian of z = log x
                x = [ad.exp(xi) for xi in x]
            quad = 0.0
            for i in range(n):
                for j in range(n):
                    quad = quad + (x[i] - mean[i]) * prec[i, j] * (x[j] - mean[j])
            return 0.5 * quad + const + extra

        objective.add_point_term(0, init_term)
    elif isinstance(initial, FreeInitial):
        pass
    else:
        raise TypeError(f"unknown initial condition {initial!r}")
    return objective


def hessian_blocks(objective, nodes):
    """Block-tridiagonal Hessian of a chain objective at ``nodes``."""
    _, _, blocks = objective.grad_hess(np.asarray(nodes, dtype=float))
    return blocks


# -- dense increment formulation -------------------------------------------------


class DenseIncrementObjective:
    """Endpoint-mollified objective over all Brownian increments.

    The negative log integrand is the sum of the Gaussian increment terms and
    a narrow Gaussian mollifier at the simulated endpoint; the flow from
    increments to the endpoint couples everything, so the Hessian is dense.
    """

    def __init__(self, model, grid, theta, x_start, y_target,
                 mollifier_eps=DEFAULT_MOLLIFIER_EPS):
        if mollifier_eps <= 0:
            raise ValueError("mollifier_eps must be positive")
        self.model = model
        self.grid = grid
        self.theta = dict(theta)
        self.x_start = np.asarray(x_start, dtype=float)
        self.y_target = np.asarray(y_target, dtype=float)
        self.eps = float(mollifier_eps)
        n = model.dim
        self.dim = n * grid.num_steps
        self._dt_per_comp = np.repeat(grid.steps, n)
        self.latent_layout = "increments"
        self.latent_count = self.dim

    def _flow(self, b_scalars):
        """Endpoint of the Euler recursion driven by the given increments."""
        model, theta = self.model, self.theta
        n = model.dim
        x = [self.x_start[i] for i in range(n)]
        dts = self.grid.steps
        for step in range(self.grid.num_steps):
            f = model.drift(x, theta)
            g = model.diffusion(x, theta)
            b = b_scalars[step * n : (step + 1) * n]
            nxt = []
            for i in range(n):
                acc = x[i] + f[i] * dts[step]
                for j in range(n):
                    acc = acc + g[i][j] * b[j]
                nxt.append(acc)
            x = nxt
        return x

    def _mollifier(self, b_scalars):
        endpoint = self._flow(b_scalars)
        n = self.model.dim
        quad = 0.0
        for i in range(n):
            r = self.y_target[i] - endpoint[i]
            quad = quad + r * r
        return quad / (2.0 * self.eps * self.eps)

    def _const(self):
        n = self.model.dim
        incr = 0.5 * n * float(np.sum(np.log(2.0 * np.pi * self.grid.steps)))
        return incr + n * np.log(self.eps) + 0.5 * n * LOG2PI

    def value(self, b):
        b = np.asarray(b, dtype=float)
        with np.errstate(all="ignore"):
            quad = float(np.sum(b * b / (2.0 * self._dt_per_comp)))
            moll = self._mollifier(list(b))
            total = quad + self._const() + float(moll)
        return total if np.isfinite(total) else np.inf

    def grad(self, b):
        """Exact gradient (increment part analytic, mollifier by duals)."""
        b = np.asarray(b, dtype=float)
        d = self.dim
        seeds = [ad.Dual.seed(b[i], i, d, order=1) for i in range(d)]
        with np.errstate(all="ignore"):
            moll = self._mollifier(seeds)
        g = np.asarray(moll.grad, dtype=float).reshape(d) + b / self._dt_per_comp
        return g

    def value_grad_gauss_newton(self, b):
        """Value, exact gradient and the Gauss-Newton step matrix.

        The Gauss-Newton matrix drops the flow's second derivatives; it is
        used only to propose steps, never in the reported log-determinant.
        """
        b = np.asarray(b, dtype=float)
        d = self.dim
        n = self.model.dim
        seeds = [ad.Dual.seed(b[i], i, d, order=1) for i in range(d)]
        with np.errstate(all="ignore"):
            endpoint = self._flow(seeds)
        jac = np.zeros((n, d))
        resid = np.zeros(n)
        for i in range(n):
            comp = endpoint[i]
            if isinstance(comp, ad.Dual):
                jac[i] = np.asarray(comp.grad, dtype=float).reshape(d)
                resid[i] = self.y_target[i] - float(comp.val)
            else:
                resid[i] = self.y_target[i] - float(comp)
        inv_eps2 = 1.0 / (self.eps * self.eps)
        grad = b / self._dt_per_comp - inv_eps2 * (jac.T @ resid)
        gn = np.diag(1.0 / self._dt_per_comp) + inv_eps2 * (jac.T @ jac)
        value = float(np.sum(b * b / (2.0 * self._dt_per_comp)) + self._const()
                      + 0.5 * inv_eps2 * float(resid @ resid))
        return value, grad, gn

    def hessian(self, b):
        """Exact dense Hessian (second derivatives of the flow included)."""
        b = np.asarray(b, dtype=float)
        d = self.dim
        seeds = [ad.Dual.seed(b[i], i, d, order=2) for i in range(d)]
        with np.errstate(all="ignore"):
            moll = self._mollifier(seeds)
        hess = np.asarray(moll.hess, dtype=float).reshape(d, d)
        hess[np.arange(d), np.arange(d)] += 1.0 / self._dt_per_comp
        return hess

    def initial_increments(self, states):
        """Increments matching the Euler relation along a given state path."""
        states = np.asarray(states, dtype=float)
        n = self.model.dim
        xa = [states[:-1, j] for j in range(n)]
        f = self.model.drift(xa, self.theta)
        g = self.model.diffusion(xa, self.theta)
        dts = self.grid.steps
        r = [states[1:, i] - states[:-1, i] - f[i] * dts for i in range(n)]
        b = ad.solve_linear(g, r)
        return np.column_stack([np.asarray(bi, dtype=float) for bi in b]).reshape(-1)


def db_objective(model, grid, theta, x_start, y_target,
                 mollifier_eps=DEFAULT_MOLLIFIER_EPS):
    return DenseIncrementObjective(model, grid, theta, x_start, y_target,
                                   mollifier_eps=mollifier_eps)


# -- functional wrappers ----------------------------------------------------------


def objective_x(model, grid, theta, states):
    """Value and determinant correction of the state-space objective along
    a path with pinned endpoints."""
    states = np.asarray(states, dtype=float)
    obj = bridge_objective(model, grid, theta, Formulation.X, states[0], states[-1])
    return obj.evaluate(obj.nodes_from_states(states))


def objective_s(model, grid, theta, states):
    states = np.asarray(states, dtype=float)
    obj = bridge_objective(model, grid, theta, Formulation.S, states[0], states[-1])
    return obj.evaluate(obj.nodes_from_states(states))


def objective_xdb(model, grid, theta, increments, states, tiny_eps=DEFAULT_TINY_EPS):
    """Value of the augmented objective at given increments and states."""
    states = np.asarray(states, dtype=float)
    increments = np.asarray(increments, dtype=float)
    obj = bridge_objective(model, grid, theta, Formulation.XDB, states[0], states[-1],
                           tiny_eps=tiny_eps)
    nodes = obj.nodes_from_states(states)
    n = model.dim
    nodes[1:, :n] = increments.reshape(grid.num_steps, n)
    v = obj.value(nodes)
    if not np.isfinite(v):
        raise NonFiniteError("objective value is not finite")
    return v


def objective_db(model, grid, theta, increments, y_target, x_start,
                 mollifier_eps=DEFAULT_MOLLIFIER_EPS):
    obj = db_objective(model, grid, theta, x_start, y_target, mollifier_eps)
    v = obj.value(np.asarray(increments, dtype=float).reshape(-1))
    if not np.isfinite(v):
        raise NonFiniteError("objective value is not finite")
    return v


def naive_state_mode_objective(model, grid, theta, states, exact_gbm=False):
    states = np.asarray(states, dtype=float)
    obj = naive_objective(model, grid, theta, states[0], states[-1], exact_gbm=exact_gbm)
    v = obj.value(obj.nodes_from_states(states))
    if not np.isfinite(v):
        raise NonFiniteError("objective value is not finite")
    return v
