"""Inner optimization (most probable path) and Laplace value assembly.

``find_mode`` runs a damped Newton iteration on a chain objective using the
block-tridiagonal factorization; ``find_mode_dense`` does the same for the
dense increment formulation with Gauss-Newton steps and an exact Hessian at
the accepted mode.  ``laplace_value`` turns a converged mode into the
log-integral via

    log I = -value(mode) - (log|H| - d log 2pi) / 2 + correction_logdet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .blocktridiag import BlockTridiagonal
from .errors import NoConvergenceError, NonFiniteError, NotPositiveDefiniteError
from .objectives import LOG2PI

__all__ = [
    "NewtonConfig",
    "ModeResult",
    "LaplaceResult",
    "find_mode",
    "find_mode_dense",
    "laplace_value",
    "laplace_value_dense",
    "interpolate_anchors",
    "init_path",
]


@dataclass(frozen=True)
class NewtonConfig:
    """Damped-Newton settings.

    Convergence is declared on the gradient max-norm or, for stiff
    objectives whose gradient floor is set by floating-point cancellation
    (narrow mollifiers, tiny artificial noise), on the Newton decrement.
    """

    max_iters: int = 100
    grad_tol: float = 1e-8
    decrement_tol: float = 1e-9
    damping_init: float = 1e-6
    damping_growth: float = 2.0
    max_damping: float = 1e10
    armijo: float = 1e-4
    min_step: float = 1e-12
    stall_decrement: float = 1e-6
    # stop once the predicted decrease falls below the floating-point
    # resolution of the objective value itself
    value_resolution: float = 1e-14

    def decrement_converged(self, decrement, value):
        if decrement <= self.decrement_tol:
            return True
        return 0.5 * decrement * decrement <= self.value_resolution * (1.0 + abs(value))


@dataclass
class ModeResult:
    nodes: np.ndarray
    value: float
    grad_norm: float
    decrement: float
    iterations: int
    converged: bool


@dataclass
class LaplaceResult:
    """Mode, curvature and the resulting log-integral."""

    mode: np.ndarray
    objective_at_mode: float
    hessian_logdet: float
    correction_logdet: float
    log_integral: float
    latent_dim: int
    newton_iters: int
    converged: bool
    grad_norm: float = np.nan
    mode_states: np.ndarray | None = None


def _masked_max(grad, free):
    if not free.any():
        return 0.0
    return float(np.max(np.abs(grad[free])))


def find_mode(objective, init_nodes, cfg: NewtonConfig = NewtonConfig()):
    """Damped Newton on a chain objective; returns the optimized nodes."""
    nodes = np.array(init_nodes, dtype=float)
    free = objective.free
    if not free.any():
        return ModeResult(nodes, objective.value(nodes), 0.0, 0.0, 0, True)
    if not objective.domain_ok(nodes):
        raise NonFiniteError("initial path violates the state domain")
    value = objective.value(nodes)
    if not np.isfinite(value):
        raise NonFiniteError("objective is not finite at the initial path")

    for it in range(1, cfg.max_iters + 1):
        value, grad, hess = objective.grad_hess(nodes)
        gmax = _masked_max(grad, free)
        if gmax <= cfg.grad_tol:
            return ModeResult(nodes, value, gmax, 0.0, it - 1, True)

        factor = None
        mu = 0.0
        while factor is None:
            try:
                factor = hess.factor(shift=mu)
            except NotPositiveDefiniteError:
                mu = cfg.damping_init if mu == 0.0 else mu * cfg.damping_growth
                if mu > cfg.max_damping:
                    raise NotPositiveDefiniteError(
                        "Hessian not positive definite even under maximal damping"
                    )
        step = hess.solve(-grad, factor=factor)
        step[~free] = 0.0
        decrement = float(np.sqrt(max(0.0, -np.sum(grad * step))))
        if cfg.decrement_converged(decrement, value):
            return ModeResult(nodes, value, gmax, decrement, it, True)

        t = 1.0
        accepted = False
        while t >= cfg.min_step:
            cand = nodes + t * step
            cv = objective.value(cand)
            if np.isfinite(cv) and cv <= value - cfg.armijo * t * decrement * decrement:
                nodes, value = cand, cv
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if decrement <= cfg.stall_decrement:
                return ModeResult(nodes, value, gmax, decrement, it, True)
            raise NoConvergenceError(
                f"line search stalled at iteration {it} (grad {gmax:.2e}, "
                f"decrement {decrement:.2e})"
            )
    value, grad, _ = objective.grad_hess(nodes)
    gmax = _masked_max(grad, free)
    if gmax <= cfg.grad_tol:
        return ModeResult(nodes, value, gmax, 0.0, cfg.max_iters, True)
    raise NoConvergenceError(f"no convergence in {cfg.max_iters} iterations (grad {gmax:.2e})")


def find_mode_dense(objective, init_b, cfg: NewtonConfig = NewtonConfig(decrement_tol=1e-7)):
    """Mode search for the dense increment objective.

    The endpoint mollifier carves an extremely narrow curved valley, so the
    mode is tracked through a widening-to-target continuation: solve at
    mollifier scale 0.1, shrink tenfold, warm start, repeat down to the
    requested scale.  Steps are Gauss-Newton (the exact Hessian is reserved
    for the final log-determinant).
    """
    target = objective.eps
    levels = []
    e = 0.1
    while e > target * 1.0000001:
        levels.append(e)
        e /= 10.0
    levels.append(target)
    b = np.array(init_b, dtype=float).reshape(-1)
    total_iters = 0
    try:
        for level in levels[:-1]:
            objective.eps = level
            stage_cfg = NewtonConfig(
                max_iters=cfg.max_iters,
                grad_tol=cfg.grad_tol,
                decrement_tol=max(cfg.decrement_tol, 1e-6),
                stall_decrement=1e-4,
            )
            stage = _dense_newton(objective, b, stage_cfg)
            b = stage.nodes
            total_iters += stage.iterations
    finally:
        objective.eps = target
    final = _dense_newton(objective, b, cfg)
    final.iterations += total_iters
    return final


def _dense_newton(objective, init_b, cfg: NewtonConfig):
    b = np.array(init_b, dtype=float).reshape(-1)
    value = objective.value(b)
    if not np.isfinite(value):
        raise NonFiniteError("objective is not finite at the initial increments")
    for it in range(1, cfg.max_iters + 1):
        value, grad, gn = objective.value_grad_gauss_newton(b)
        gmax = float(np.max(np.abs(grad)))
        if gmax <= cfg.grad_tol:
            return ModeResult(b, value, gmax, 0.0, it - 1, True)
        mu = 0.0
        while True:
            try:
                cf = scipy.linalg.cho_factor(
                    gn + mu * np.eye(gn.shape[0]), check_finite=False
                )
                break
            except np.linalg.LinAlgError:
                mu = cfg.damping_init if mu == 0.0 else mu * cfg.damping_growth
                if mu > cfg.max_damping:
                    raise NotPositiveDefiniteError("Gauss-Newton matrix not factorizable")
        step = scipy.linalg.cho_solve(cf, -grad, check_finite=False)
        decrement = float(np.sqrt(max(0.0, -grad @ step)))
        if cfg.decrement_converged(decrement, value):
            return ModeResult(b, value, gmax, decrement, it, True)
        t = 1.0
        accepted = False
        while t >= cfg.min_step:
            cand = b + t * step
            cv = objective.value(cand)
            if np.isfinite(cv) and cv <= value - cfg.armijo * t * decrement * decrement:
                b, value = cand, cv
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if decrement <= cfg.stall_decrement:
                return ModeResult(b, value, gmax, decrement, it, True)
            raise NoConvergenceError(f"dense line search stalled at iteration {it}")
    raise NoConvergenceError(f"no convergence in {cfg.max_iters} iterations")


def laplace_value(objective, mode: ModeResult) -> LaplaceResult:
    """Laplace log-integral for a chain objective at its mode."""
    value, grad, hess = objective.grad_hess(mode.nodes)
    logdet = hess.logdet()
    d = objective.latent_count
    corr = objective.correction_logdet(mode.nodes)
    log_integral = -value - 0.5 * (logdet - d * LOG2PI) + corr
    return LaplaceResult(
        mode=mode.nodes,
        objective_at_mode=value,
        hessian_logdet=logdet,
        correction_logdet=corr,
        log_integral=log_integral,
        latent_dim=d,
        newton_iters=mode.iterations,
        converged=mode.converged,
        grad_norm=mode.grad_norm,
        mode_states=objective.state_values(mode.nodes),
    )


def laplace_value_dense(objective, mode: ModeResult) -> LaplaceResult:
    """Laplace log-integral for the dense increment objective."""
    hess = objective.hessian(mode.nodes)
    try:
        cf = scipy.linalg.cho_factor(hess, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"dense Hessian at mode: {exc}") from exc
    logdet = float(2.0 * np.sum(np.log(np.diag(cf[0]))))
    d = objective.latent_count
    value = objective.value(mode.nodes)
    log_integral = -value - 0.5 * (logdet - d * LOG2PI)
    return LaplaceResult(
        mode=mode.nodes,
        objective_at_mode=value,
        hessian_logdet=logdet,
        correction_logdet=0.0,
        log_integral=log_integral,
        latent_dim=d,
        newton_iters=mode.iterations,
        converged=mode.converged,
        grad_norm=mode.grad_norm,
    )


# -- initial paths ------------------------------------------------------------


def interpolate_anchors(num_points, anchors):
    """Piecewise-linear interpolation through index-anchored values.

    ``anchors`` maps grid index -> value; segments before the first and
    after the last anchor are held constant.
    """
    if not anchors:
        raise ValueError("need at least one anchor")
    idx = np.array(sorted(anchors), dtype=float)
    vals = np.array([anchors[int(i)] for i in idx], dtype=float)
    return np.interp(np.arange(num_points, dtype=float), idx, vals)


def init_path(model, grid, theta, anchors_by_comp):
    """Initial state path (model coordinates) from per-component anchors.

    ``anchors_by_comp[j]`` maps grid index -> anchored value of state
    component ``j`` in model coordinates; components with no anchors are
    held at the model-coordinate image of 1.
    """
    k, n = grid.num_points, model.dim
    states = np.zeros((k, n))
    default = model.from_natural(np.ones(n))
    for j in range(n):
        anchors = anchors_by_comp.get(j, {})
        if anchors:
            states[:, j] = interpolate_anchors(k, anchors)
        else:
            states[:, j] = default[j]
    return states
