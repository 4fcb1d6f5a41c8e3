"""
Geodesic flow of Kropina and Randers metrics.

Both metrics are handled through the spacetime picture: a curve x(s) with a
lift t(s) is a lightlike geodesic of

    G = g0 + 2 s_w omega dt - eps dt^2

where ``s_w`` is the Randers family factor (1, or sqrt(1 - eps) for the Katok
family) and ``eps = 0`` gives the Kropina case. The lift speed is the Finsler
speed, ``t' = F(x')``, and ``s_w omega(x') - eps t'`` is conserved because
d/dt is Killing.

The spacetime (affine) spray is reparametrized to constant Finsler speed,
``x'' = A2 + mu x'``; ``rho`` with ``(log rho)' = mu`` converts the Killing
constant to the constant-speed parametrization.
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from .config import Config
from .exceptions import (ChartGuardError, ConeExit, DomainError, InadmissiblePath, InadmissibleVector, InvalidArgument,
                         StepUnderflow)
from .manifold import ManifoldModel, christoffel_batch
from .metrics import (STANDARD, PointVector, check_epsilon, family_scale, fundamental_tensor_batch,
                      kropina_batch, kropina_derivatives, quadratic_terms, randers_batch, randers_derivatives)
from .models import DiscretePath, GeodesicSolution

logger = logging.getLogger(__name__)

KROPINA = 'kropina'
RANDERS = 'randers'
KINDS = (KROPINA, RANDERS)

ROUTE_CONSTRAINT = 'constraint'
ROUTE_LAGRANGIAN = 'lagrangian'


def _check_kind(kind: str, epsilon: Optional[float], operation: str) -> float:
    if kind == KROPINA:
        return 0.0
    if kind == RANDERS:
        if epsilon is None:
            raise InvalidArgument("kind 'randers' needs epsilon", module='geodesic_flow', operation=operation)
        return check_epsilon(epsilon, operation)
    raise InvalidArgument(f"unknown kind '{kind}'", module='geodesic_flow', operation=operation)


def speed_and_derivatives(model: ManifoldModel, kind: str, epsilon: Optional[float], x, v,
                          family: str = STANDARD) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(F, dF/dx, dF/dv)`` for the metric of the given kind."""
    if kind == KROPINA:
        return kropina_derivatives(model, x, v)
    return randers_derivatives(model, epsilon, x, v, family)


def speed_batch(model: ManifoldModel, kind: str, epsilon: Optional[float], x, v,
                family: str = STANDARD) -> np.ndarray:
    """Finsler speed; Kropina speeds are ``inf`` outside the cone."""
    if kind == KROPINA:
        return kropina_batch(model, x, v)
    return randers_batch(model, epsilon, x, v, family)


def lightlike_spray(model: ManifoldModel, x, v, epsilon: float = 0.0, scale: float = 1.0,
                    speed: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Spatial acceleration of the lightlike spacetime geodesic with ``t' = speed``.

    ``t'' = [nabla omega(v, v) + t' omega(Omega# v)] / (eps + |omega|^2)`` and
    ``x'' = -Gamma(v, v) + t' Omega# v - omega# t''``, with omega replaced by
    ``scale * omega`` throughout.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if speed is None:
        speed = kropina_batch(model, x, v) if epsilon == 0 else _scaled_randers(model, epsilon, scale, x, v)
    g_inv = np.linalg.inv(model.metric_at(x))
    gamma = christoffel_batch(model, x)
    omega = scale * model.one_form_at(x)
    jet = scale * model.one_form_jet(x)
    big_omega = jet - np.swapaxes(jet, -1, -2)
    gamma_vv = np.einsum('...ijk,...j,...k->...i', gamma, v, v)
    nabla_omega = (np.einsum('...ki,...k,...i->...', jet, v, v)
                   - np.einsum('...l,...l->...', omega, gamma_vv))
    omega_sharp = np.einsum('...ij,...j->...i', g_inv, omega)
    big_omega_sharp_v = np.einsum('...ik,...kj,...j->...i', g_inv, big_omega, v)
    omega_norm_sq = np.einsum('...i,...i->...', omega, omega_sharp)
    t_ddot = (nabla_omega + speed * np.einsum('...i,...i->...', omega, big_omega_sharp_v)) / (epsilon + omega_norm_sq)
    return -gamma_vv + speed[..., None] * big_omega_sharp_v - omega_sharp * t_ddot[..., None]


def _scaled_randers(model, epsilon, scale, x, v):
    a, b, _, _ = quadratic_terms(model, x, v)
    beta = scale * b
    root = np.sqrt(epsilon * a + beta ** 2)
    return np.where(beta < 0, a / np.where(root - beta > 0, root - beta, 1.0), (root + beta) / epsilon)


def _reparametrized(model: ManifoldModel, kind: str, epsilon: Optional[float], family: str, x, v):
    """Constant-speed acceleration together with the rate ``mu`` and the speed."""
    eps = 0.0 if kind == KROPINA else epsilon
    scale = 1.0 if kind == KROPINA else family_scale(epsilon, family)
    speed, d_x, d_v = speed_and_derivatives(model, kind, epsilon, x, v, family)
    affine = lightlike_spray(model, x, v, eps, scale, speed)
    mu = -(np.einsum('...i,...i->...', d_x, v) + np.einsum('...i,...i->...', d_v, affine)) / speed
    return affine + mu[..., None] * v, mu, speed


def _euler_lagrange_spray(model: ManifoldModel, x, v) -> np.ndarray:
    """Euler-Lagrange spray of ``L = K^2 / 2``: ``x'' = H^-1 (dL/dx - M v)``."""
    a, b, gv, omega = quadratic_terms(model, x, v)
    g_jet = model.metric_jet(x)
    o_jet = model.one_form_jet(x)
    da = np.einsum('...kij,...i,...j->...k', g_jet, v, v)
    db = np.einsum('...ki,...i->...k', o_jet, v)
    dgv = np.einsum('...kij,...j->...ik', g_jet, v)  # (d_k g v)_l as [l, k]
    a_ = a[..., None]
    b_ = b[..., None]
    dl_dx = a_ * da / (4.0 * b_ ** 2) - a_ ** 2 * db / (4.0 * b_ ** 3)
    a2 = a[..., None, None]
    b2 = b[..., None, None]

    def outer(p, q):
        return np.einsum('...l,...k->...lk', p, q)

    mixed = ((outer(gv, da) + a2 * dgv) / (2.0 * b2 ** 2)
             - a2 * outer(gv, db) / b2 ** 3
             - (2.0 * a2 * outer(omega, da) + a2 ** 2 * np.swapaxes(o_jet, -1, -2)) / (4.0 * b2 ** 3)
             + 3.0 * a2 ** 2 * outer(omega, db) / (4.0 * b2 ** 4))
    rhs = dl_dx - np.einsum('...lk,...k->...l', mixed, v)
    hessian = fundamental_tensor_batch(model, x, v)
    return np.linalg.solve(hessian, rhs[..., None])[..., 0]


def kropina_spray(model: ManifoldModel, x, v, route: str = ROUTE_CONSTRAINT) -> np.ndarray:
    """
    Constant-speed geodesic acceleration of the Kropina metric.

    ``route='constraint'`` eliminates the lift from the lightlike system;
    ``route='lagrangian'`` solves the Euler-Lagrange equations of ``K^2 / 2``.

    Raises:
        InadmissibleVector: ``v`` outside the admissible cone
        DomainError, ChartGuardError: ``x`` not a valid chart point
    """
    pv = PointVector.at(model, x, v)
    if not pv.admissible:
        raise InadmissibleVector(f"-omega(v) = {-pv.omega_v:.3g} is not positive", operation='kropina_spray')
    if route == ROUTE_LAGRANGIAN:
        return _euler_lagrange_spray(model, pv.x, pv.v)
    if route != ROUTE_CONSTRAINT:
        raise InvalidArgument(f"unknown spray route '{route}'", module='geodesic_flow', operation='kropina_spray')
    return _reparametrized(model, KROPINA, None, STANDARD, pv.x, pv.v)[0]


def randers_spray(model: ManifoldModel, epsilon: float, x, v, family: str = STANDARD) -> np.ndarray:
    """Constant-speed geodesic acceleration of the Randers metric ``F_eps``."""
    check_epsilon(epsilon, 'randers_spray')
    x = model.check_point(x, 'randers_spray')
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise InadmissibleVector('zero velocity', module='geodesic_flow', operation='randers_spray')
    return _reparametrized(model, RANDERS, epsilon, family, x, v)[0]


def integrate(model: ManifoldModel, kind: str, x0, v0, horizon: float = 1.0,
              tol: float = Config.INTEGRATION_TOL, epsilon: Optional[float] = None,
              family: str = STANDARD, samples: int = 201,
              cone_exit: float = Config.CONE_EXIT) -> GeodesicSolution:
    """
    Integrate a geodesic with DOP853 in the constant-speed parametrization.

    Periodic coordinates are integrated unwrapped.

    Raises:
        InadmissibleVector: Kropina initial velocity outside the cone
        ChartGuardError: trajectory entered the guard band
        DomainError: trajectory left the chart box
        ConeExit: Kropina velocity approached the cone boundary
        StepUnderflow: the integrator could not make progress
    """
    eps = _check_kind(kind, epsilon, 'integrate')
    x0 = model.check_point(x0, 'integrate')
    v0 = np.asarray(v0, dtype=float)
    pv = PointVector.at(model, x0, v0)
    if kind == KROPINA and not pv.admissible:
        raise InadmissibleVector(f"initial velocity has -omega(v) = {-pv.omega_v:.3g}", operation='integrate')
    dim = model.dim
    scale = family_scale(epsilon, family) if kind == RANDERS else 1.0
    start_time = time.time()

    def rhs(_, y):
        x, v = y[:dim], y[dim:2 * dim]
        acceleration, mu, speed = _reparametrized(model, kind, epsilon, family, x, v)
        return np.concatenate([v, acceleration, [speed, mu]])

    events = []
    reasons = []

    if kind == KROPINA:
        def cone_event(_, y):
            x, v = y[:dim], y[dim:2 * dim]
            norm = np.sqrt(v @ model.metric_at(x) @ v)
            return -(model.one_form_at(x) @ v) / norm - cone_exit
        cone_event.terminal = True
        events.append(cone_event)
        reasons.append('cone')

    if model.guard_fn is not None:
        def guard_event(_, y):
            return float(model.guard_fn(y[:dim])) - model.guard_band
        guard_event.terminal = True
        events.append(guard_event)
        reasons.append('guard')

    bounded = [axis for axis in range(dim) if not model.periodic[axis]]
    if bounded:
        lower = np.asarray(model.lower)[bounded]
        upper = np.asarray(model.upper)[bounded]

        def box_event(_, y):
            x = y[:dim][bounded]
            return float(np.min(np.minimum(x - lower, upper - x)))
        box_event.terminal = True
        events.append(box_event)
        reasons.append('box')

    y0 = np.concatenate([x0, v0, [0.0, 0.0]])
    t_eval = np.linspace(0.0, horizon, samples)
    result = solve_ivp(rhs, (0.0, horizon), y0, method='DOP853', t_eval=t_eval, rtol=tol, atol=tol,
                       events=events or None)
    if result.status == -1:
        raise StepUnderflow(f"integrator failed: {result.message}", operation='integrate')
    if result.status == 1:
        for reason, hits in zip(reasons, result.t_events):
            if len(hits):
                where = f"at s = {hits[0]:.6g}"
                if reason == 'cone':
                    raise ConeExit(f"velocity approached the cone boundary {where}", operation='integrate')
                if reason == 'guard':
                    raise ChartGuardError(f"trajectory entered the guard band of '{model.name}' {where}",
                                          module='geodesic_flow', operation='integrate')
                raise DomainError(f"trajectory left the chart box of '{model.name}' {where}",
                                  module='geodesic_flow', operation='integrate')

    points = result.y[:dim].T
    velocities = result.y[dim:2 * dim].T
    lift = result.y[2 * dim]
    rho = np.exp(result.y[2 * dim + 1])
    omega_trace = np.einsum('ki,ki->k', model.one_form_at(points), velocities)
    speed_trace = speed_batch(model, kind, epsilon, points, velocities, family)
    conserved = (scale * omega_trace - eps * speed_trace) / rho
    path = DiscretePath(params=result.t, points=points, velocities=velocities)
    stats = {
        'evaluations': int(result.nfev),
        'horizon': float(horizon),
    }
    logger.debug(f"Integrated {kind} geodesic on '{model.name}' with {result.nfev} evaluations "
                 f"in {time.time() - start_time:.3f}s")
    return GeodesicSolution(kind=kind, epsilon=float(eps), path=path, lift=lift, omega_trace=omega_trace,
                            speed_trace=speed_trace, conserved=conserved, tolerance=tol, stats=stats)


# -- functionals ----------------------------------------------------------------

def _refined_chords(path: DiscretePath, refine: int):
    """Sub-sample positions along every chord plus the chord velocities."""
    points = path.closing_points()
    params = path.closing_params()
    chords = np.diff(points, axis=0)
    steps = np.diff(params)
    sigma = np.linspace(0.0, 1.0, refine + 1)
    positions = points[:-1, None, :] + sigma[None, :, None] * chords[:, None, :]
    return positions, chords, steps, sigma


def path_length(model: ManifoldModel, kind: str, path: DiscretePath, epsilon: Optional[float] = None,
                family: str = STANDARD, refine: int = 10) -> float:
    """
    Finsler length of a discrete path.

    Paths with velocities are integrated with the trapezoid rule over their
    samples; polylines integrate the chord speed on ``refine`` sub-samples per
    chord.

    Raises:
        InadmissiblePath: a Kropina velocity or chord leaves the admissible cone
    """
    _check_kind(kind, epsilon, 'path_length')
    if path.velocities is not None and not path.closed:
        speeds = speed_batch(model, kind, epsilon, path.points, path.velocities, family)
        if not np.all(np.isfinite(speeds)):
            raise InadmissiblePath('path has velocities outside the admissible cone', operation='path_length')
        return float(trapezoid(speeds, path.params))
    positions, chords, _, sigma = _refined_chords(path, refine)
    speeds = speed_batch(model, kind, epsilon, positions, np.broadcast_to(chords[:, None, :], positions.shape),
                         family)
    if not np.all(np.isfinite(speeds)):
        raise InadmissiblePath('polyline has chords outside the admissible cone', operation='path_length')
    return float(np.sum(trapezoid(speeds, sigma, axis=1)))


def path_energy(model: ManifoldModel, path: DiscretePath, refine: int = 10) -> float:
    """Kropina energy ``1/2 int K(x')^2 ds`` of a polyline with its parameters."""
    positions, chords, steps, sigma = _refined_chords(path, refine)
    speeds = kropina_batch(model, positions, np.broadcast_to(chords[:, None, :], positions.shape))
    if not np.all(np.isfinite(speeds)):
        raise InadmissiblePath('polyline has chords outside the admissible cone', operation='path_energy')
    return float(np.sum(0.5 * trapezoid(speeds ** 2, sigma, axis=1) / steps))


def spacetime_energy_diagnostic(model: ManifoldModel, kind: str, solution: GeodesicSolution,
                                lift: Optional[np.ndarray] = None, epsilon: Optional[float] = None,
                                family: str = STANDARD) -> float:
    """
    Spacetime energy ``1/2 int G(z', z') ds`` of the lifted curve ``z = (x, t)``.

    ``G(z', z') = g0(x', x') + 2 s_w omega(x') t' - eps t'^2``; ``lift``
    overrides the lift stored with the solution. Zero for lightlike lifts.
    """
    if epsilon is None:
        epsilon = solution.epsilon if kind == RANDERS else None
    eps = _check_kind(kind, epsilon, 'spacetime_energy_diagnostic')
    scale = family_scale(epsilon, family) if kind == RANDERS else 1.0
    path = solution.path
    params = path.params
    lift = solution.lift if lift is None else np.asarray(lift, dtype=float)
    velocities = path.velocities if path.velocities is not None else np.gradient(path.points, params, axis=0)
    t_dot = np.gradient(lift, params)
    a, b, _, _ = quadratic_terms(model, path.points, velocities)
    integrand = a + 2.0 * scale * b * t_dot - eps * t_dot ** 2
    return float(0.5 * trapezoid(integrand, params))
