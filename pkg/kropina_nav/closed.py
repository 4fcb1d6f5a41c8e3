"""
Closed Kropina geodesics.

* ``closed_geodesic_in_class`` minimizes the discrete loop energy with a free
  basepoint and refines the result by periodic shooting.
* ``killing_orbit_candidates`` finds closed orbits of a Killing field through
  critical points of ``omega(Y)`` (constant ``|Y|``) or of ``g0(Y, Y)``
  (constant ``omega(Y)``); such orbits are closed geodesics.
* The Katok helpers give the closed-form and numeric lengths of the Hopf
  circles for the Katok Randers family on S^3, and the perturbed-orbit lengths
  of a Killing orbit under a mild wind.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp, trapezoid

from .config import Config
from .connect import admissibilize_seed, minimize_discrete_energy, reparametrize_constant_speed
from .exceptions import (HypothesisViolated, InadmissiblePath, InvalidArgument, KropinaNavError, NoAdmissibleSeed,
                         NoClosedOrbit, ParameterRangeError)
from .geodesic_flow import KROPINA, RANDERS, integrate, path_length
from .geometries import round_sphere_hopf
from .manifold import ManifoldModel, christoffel_batch, d_omega_batch, lie_derivative_residuals, sample_chart_points
from .metrics import KATOK, check_epsilon, quadratic_terms, zermelo_randers_value
from .models import (COLLAPSED, CONVERGED, MAX_ITERATIONS, NO_ADMISSIBLE_SEED, ConnectResult, DiscretePath,
                     GeodesicSolution, KillingOrbitCandidate, LoopProblem)

logger = logging.getLogger(__name__)

KILLING_TOL = 1e-6
CONSTANT_TOL = 1e-8
CRITICAL_TOL = 1e-7
DISTINCT_TOL = 1e-3
CLOSURE_TOL = 1e-6
ORBIT_SAMPLES = 257
GRID_PER_AXIS = 16
MAX_SEEDS = 100000

CONSTANT_LENGTH = 'constant_length'
CONSTANT_OMEGA = 'constant_omega'


# -- first variation --------------------------------------------------------------

def _periodic_derivative(values: np.ndarray, ds: float, shift: Optional[np.ndarray] = None) -> np.ndarray:
    shift = 0.0 if shift is None else shift
    forward = np.roll(values, -1, axis=0)
    backward = np.roll(values, 1, axis=0)
    forward[-1] = forward[-1] + shift
    backward[0] = backward[0] - shift
    return (forward - backward) / (2.0 * ds)


def first_variation(model: ManifoldModel, loop: DiscretePath, xi: np.ndarray) -> float:
    """
    First variation of the Kropina length of a closed loop along ``xi``.

    ``-1/2 int [2 g0(x', nabla xi) / b - a (Omega(xi, x') + d/ds omega(xi)) / b^2] ds``
    with ``a = g0(x', x')`` and ``b = omega(x')``; derivatives are periodic
    central differences and the integral is the periodic trapezoid rule.

    Raises:
        InadmissiblePath: a velocity sample lies outside the admissible cone
    """
    if not loop.closed:
        raise InvalidArgument('first variation needs a closed loop', module='closed', operation='first_variation')
    xi = np.asarray(xi, dtype=float)
    if xi.shape != loop.points.shape:
        raise InvalidArgument(f"variation field must have shape {loop.points.shape}",
                              module='closed', operation='first_variation')
    points = loop.points
    ds = 1.0 / loop.size
    velocity = _periodic_derivative(points, ds, loop.shift)
    xi_dot = _periodic_derivative(xi, ds)
    a, b, gv, omega = quadratic_terms(model, points, velocity)
    if np.any(-b <= Config.TOL_ADM):
        raise InadmissiblePath('loop has velocities outside the admissible cone', operation='first_variation')
    gamma = christoffel_batch(model, points)
    covariant = xi_dot + np.einsum('...ijk,...j,...k->...i', gamma, velocity, xi)
    big_omega = d_omega_batch(model, points)
    omega_xi = np.einsum('...i,...i->...', omega, xi)
    integrand = (2.0 * np.einsum('...i,...i->...', gv, covariant) / b
                 - a * (np.einsum('...i,...ij,...j->...', xi, big_omega, velocity)
                        + _periodic_derivative(omega_xi, ds)) / b ** 2)
    return float(-0.5 * np.sum(integrand) * ds)


def variation_basis(loop: DiscretePath) -> List[np.ndarray]:
    """Fields ``e_i``, ``e_i cos(2 pi s)`` and ``e_i sin(2 pi s)`` on the loop nodes."""
    s = loop.params
    fields = []
    for axis in range(loop.dim):
        for profile in (np.ones_like(s), np.cos(2 * np.pi * s), np.sin(2 * np.pi * s)):
            field = np.zeros((loop.size, loop.dim))
            field[:, axis] = profile
            fields.append(field)
    return fields


def first_variation_residual(model: ManifoldModel, loop: DiscretePath) -> float:
    """Largest absolute first variation over ``variation_basis``, in parallel."""
    with ThreadPoolExecutor(max_workers=Config().worker_count) as executor:
        values = list(executor.map(lambda xi: first_variation(model, loop, xi), variation_basis(loop)))
    return float(np.max(np.abs(values)))


def _loop_from_solution(solution: GeodesicSolution, shift: np.ndarray) -> DiscretePath:
    """Closed loop from uniformly sampled solution points (last sample dropped)."""
    return DiscretePath.loop(solution.path.points[:-1], shift=shift)


# -- closed geodesics in a class ---------------------------------------------------------

def _deck_shift(model: ManifoldModel, difference: np.ndarray) -> np.ndarray:
    periods = model.periods
    shift = np.zeros_like(difference)
    mask = periods > 0
    shift[mask] = periods[mask] * np.round(difference[mask] / periods[mask])
    return shift


def periodic_shooting(model: ManifoldModel, loop: DiscretePath, tol: float = Config.INTEGRATION_TOL,
                      samples: int = ORBIT_SAMPLES) -> Tuple[GeodesicSolution, float]:
    """
    Refine a loop into a periodic Kropina geodesic by least squares.

    Unknowns are the initial point and velocity; residuals are the closure of
    position (through the deck shift) and velocity, plus a phase condition
    keeping the basepoint on the section through the starting guess.
    """
    dim = model.dim
    ds = 1.0 / loop.size
    velocity = _periodic_derivative(loop.points, ds, loop.shift)
    x_guess = loop.points[0]
    v_guess = velocity[0]
    shift = loop.shift

    def residual(z):
        x0, v0 = z[:dim], z[dim:]
        try:
            solution = integrate(model, KROPINA, x0, v0, horizon=1.0, tol=tol, samples=2)
        except KropinaNavError:
            return np.full(2 * dim + 1, 1e3)
        end_x = solution.path.end
        end_v = solution.path.velocities[-1]
        return np.concatenate([end_x - x0 - shift, end_v - v0, [(x0 - x_guess) @ v_guess]])

    fit = optimize.least_squares(residual, np.concatenate([x_guess, v_guess]), method='trf',
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x0, v0 = fit.x[:dim], fit.x[dim:]
    solution = integrate(model, KROPINA, x0, v0, horizon=1.0, tol=tol, samples=samples)
    closure = float(max(np.max(np.abs(solution.path.end - x0 - shift)),
                        np.max(np.abs(solution.path.velocities[-1] - v0))))
    return solution, closure


def closed_geodesic_in_class(problem: LoopProblem) -> ConnectResult:
    """
    Closed Kropina geodesic in the free homotopy class of the seed loop.

    The loop energy is minimized over all nodes (free basepoint), optionally
    preceded by the Randers epsilon continuation, and the result is refined by
    periodic shooting. Loops whose diameter collapses are reported as
    ``Collapsed``.
    """
    model = problem.model
    try:
        seed = admissibilize_seed(model, problem.seed_loop)
    except NoAdmissibleSeed as e:
        logger.info(f"No admissible loop in class on '{model.name}': {e}")
        return ConnectResult(status=NO_ADMISSIBLE_SEED, reason=f"{e.reason}; {e.message}")
    seed_length = path_length(model, KROPINA, seed)
    start = reparametrize_constant_speed(model, seed, problem.nodes)

    trace = []
    if problem.use_homotopy:
        current = start
        for epsilon in problem.epsilon_schedule:
            path, opt = minimize_discrete_energy(model, current, RANDERS, epsilon=epsilon,
                                                 gradient_tol=problem.gradient_tol, value_tol=problem.length_tol,
                                                 max_iterations=problem.max_iterations)
            delta = path_length(model, RANDERS, path, epsilon)
            trace.append({'epsilon': float(epsilon), 'delta': delta, 'iterations': opt.iterations,
                          'status': opt.status})
            logger.info(f"Loop homotopy stage eps={epsilon:.6g}: delta {delta:.10g}")
            current = path
        try:
            path_length(model, KROPINA, current)
            start = current
        except InadmissiblePath:
            logger.debug('Randers loop left the admissible cone, restarting Kropina stage from the seed')

    path, opt = minimize_discrete_energy(model, start, KROPINA, gradient_tol=problem.gradient_tol,
                                         value_tol=problem.length_tol, max_iterations=problem.max_iterations)
    status = opt.status
    closing = path.closing_points()
    diameter = float(np.max(np.linalg.norm(closing[:, None, :] - closing[None, :, :], axis=-1)))
    residuals = {'gradient_norm': opt.gradient_norm, 'diameter': diameter}
    try:
        length = path_length(model, KROPINA, path)
    except InadmissiblePath:
        length = float('nan')
    if diameter < problem.collapse_diameter:
        return ConnectResult(status=COLLAPSED, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason='loop collapsed to a point: the class is contractible in the chart')
    if status != CONVERGED:
        return ConnectResult(status=status, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=opt.message)
    path = reparametrize_constant_speed(model, path)
    try:
        solution, closure = periodic_shooting(model, path, tol=problem.integration_tol)
        loop = _loop_from_solution(solution, path.shift)
        residuals['first_variation'] = first_variation_residual(model, loop)
    except KropinaNavError as e:
        return ConnectResult(status=MAX_ITERATIONS, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=f"periodic shooting failed: {e}")
    residuals.update(solution.residuals)
    residuals['closure_error'] = closure
    if closure >= CLOSURE_TOL:
        return ConnectResult(status=MAX_ITERATIONS, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=f"periodic shooting closure error {closure:.3g}")
    logger.info(f"Closed geodesic on '{model.name}': length {solution.arrival_time:.10g}, "
                f"first variation residual {residuals['first_variation']:.2e}")
    return ConnectResult(status=CONVERGED, path=loop, solution=solution, length=solution.arrival_time,
                         seed_length=seed_length, epsilon_trace=trace, residuals=residuals,
                         iterations=opt.iterations)


# -- Killing orbits -------------------------------------------------------------------------

def _killing_functions(model: ManifoldModel):
    def omega_of_y(x):
        return np.einsum('...i,...i->...', model.one_form_at(x), model.killing_at(x))

    def norm_sq(x):
        y = model.killing_at(x)
        return np.einsum('...i,...ij,...j->...', y, model.metric_at(x), y)

    return omega_of_y, norm_sq


def check_killing_hypotheses(model: ManifoldModel, samples: int = 256,
                             rng: Optional[np.random.Generator] = None) -> str:
    """
    Verify the Killing hypotheses on sampled points and pick the criterion.

    Returns ``'constant_length'`` when ``|Y|`` is constant, otherwise
    ``'constant_omega'`` when ``omega(Y)`` is constant.

    Raises:
        HypothesisViolated: naming the failing residual
    """
    if model.killing_fn is None:
        raise HypothesisViolated(f"model '{model.name}' has no Killing field", residual_name='Y',
                                 operation='killing_orbit_candidates')
    points = sample_chart_points(model, samples, rng)
    lie_g, lie_omega = lie_derivative_residuals(model, points)
    for name, values in (('L_Y g0', lie_g), ('L_Y omega', lie_omega)):
        worst = float(np.max(values))
        if worst >= KILLING_TOL:
            raise HypothesisViolated(f"{name} residual {worst:.3g} exceeds {KILLING_TOL:g}", residual_name=name,
                                     residual=worst, operation='killing_orbit_candidates')
    omega_of_y, norm_sq = _killing_functions(model)
    f = omega_of_y(points)
    if np.max(f) >= 0:
        raise HypothesisViolated(f"omega(Y) reaches {np.max(f):.3g}; it must be negative everywhere",
                                 residual_name='omega(Y)', residual=float(np.max(f)),
                                 operation='killing_orbit_candidates')
    if np.ptp(norm_sq(points)) < CONSTANT_TOL:
        return CONSTANT_LENGTH
    if np.ptp(f) < CONSTANT_TOL:
        return CONSTANT_OMEGA
    raise HypothesisViolated('neither |Y| nor omega(Y) is constant', residual_name='variation of omega(Y)',
                             residual=float(np.ptp(f)), operation='killing_orbit_candidates')


def _grid_seeds(model: ManifoldModel, per_axis: int = GRID_PER_AXIS, cap: int = MAX_SEEDS) -> np.ndarray:
    per_axis = max(2, min(per_axis, int(cap ** (1.0 / model.dim))))
    axes = [np.asarray(model.lower[i]) + (np.arange(per_axis) + 0.5) * (model.upper[i] - model.lower[i]) / per_axis
            for i in range(model.dim)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, model.dim)
    return grid[model.in_domain(grid)]


def _gradient(func, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    gradient = np.zeros_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        gradient[k] = (func(x + e) - func(x - e)) / (2 * h)
    return gradient


def _critical_points(model: ManifoldModel, func, seeds: np.ndarray, maximize: bool, count: int = 4) -> List:
    """
    Local extrema of ``func`` started from the best grid seeds.

    Each minimizer is polished by a root solve on the finite-difference gradient.
    """
    sign = -1.0 if maximize else 1.0
    values = sign * func(seeds)
    order = np.argsort(values)[:count]
    bounds = [(lo, hi) if not periodic else (None, None)
              for lo, hi, periodic in zip(model.lower, model.upper, model.periodic)]

    def scalar(x):
        return float(func(x))

    found = []
    for index in order:
        fit = optimize.minimize(lambda x: sign * scalar(x), seeds[index], method='L-BFGS-B', bounds=bounds,
                                options={'gtol': 1e-14, 'ftol': 1e-15})
        point = fit.x
        polish = optimize.root(lambda x: _gradient(scalar, x), point, method='hybr')
        if (bool(model.in_domain(polish.x)) and np.linalg.norm(polish.x - point) < 1e-3
                and np.linalg.norm(_gradient(scalar, polish.x)) < np.linalg.norm(_gradient(scalar, point))):
            point = polish.x
        if not bool(model.in_domain(point)):
            continue
        residual = float(np.linalg.norm(_gradient(scalar, point)))
        if residual < CRITICAL_TOL:
            found.append((point, residual))
    return found


def killing_orbit(model: ManifoldModel, base_point, max_time: float = 100.0,
                  samples: int = ORBIT_SAMPLES) -> Tuple[GeodesicSolution, float, float, np.ndarray]:
    """
    Closed orbit of the Killing field through ``base_point``.

    The period is the first return to the hyperplane through the base point
    orthogonal to Y with closure below ``CLOSURE_TOL``. Returns the orbit as
    a solution in ``s = t / T``, the period, the closure error and the deck shift.

    Raises:
        NoClosedOrbit: no return within ``max_time``
    """
    p = model.check_point(base_point, 'killing_orbit')
    normal = model.metric_at(p) @ model.killing_at(p)

    def flow(_, x):
        return model.killing_at(x)

    def section(_, x):
        return float(normal @ model.wrapped_difference(x, p))
    section.direction = 1.0

    result = solve_ivp(flow, (0.0, max_time), p, method='DOP853', rtol=1e-12, atol=1e-12, events=section,
                       dense_output=True)
    period = None
    closure = float('inf')
    for time_hit, state in zip(result.t_events[0], result.y_events[0]):
        if time_hit < 1e-6:
            continue
        error = float(np.max(np.abs(model.wrapped_difference(state, p))))
        if error < CLOSURE_TOL:
            period, closure = float(time_hit), error
            break
    if period is None:
        raise NoClosedOrbit(f"orbit through {np.round(p, 6).tolist()} does not close within t = {max_time:g}",
                            operation='killing_orbit')
    s = np.linspace(0.0, 1.0, samples)
    points = result.sol(s * period).T
    velocities = period * model.killing_at(points)
    shift = _deck_shift(model, points[-1] - p)
    a, b, _, _ = quadratic_terms(model, points, velocities)
    speed = -a / (2.0 * b)
    lift = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(s))])
    orbit = GeodesicSolution(kind=KROPINA, epsilon=0.0,
                             path=DiscretePath(params=s, points=points, velocities=velocities),
                             lift=lift, omega_trace=b, speed_trace=speed, conserved=b, tolerance=1e-12,
                             stats={'period': period, 'evaluations': int(result.nfev)})
    return orbit, period, closure, shift


def _hausdorff(model: ManifoldModel, first: np.ndarray, second: np.ndarray) -> float:
    distances = np.linalg.norm(model.wrapped_difference(first[:, None, :], second[None, :, :]), axis=-1)
    return float(max(np.max(np.min(distances, axis=1)), np.max(np.min(distances, axis=0))))


def killing_orbit_candidates(model: ManifoldModel, max_candidates: int = 4,
                             rng: Optional[np.random.Generator] = None) -> List[KillingOrbitCandidate]:
    """
    Closed geodesics among the orbits of the Killing field.

    With ``|Y|`` constant, orbits through critical points of ``omega(Y)``
    qualify; with ``omega(Y)`` constant, orbits through the extrema of
    ``g0(Y, Y)``. When the selecting function is constant every orbit
    qualifies and distinct grid orbits are returned.

    Raises:
        HypothesisViolated: Killing residuals too large or omega(Y) not negative
        NoClosedOrbit: no candidate orbit closes
    """
    criterion = check_killing_hypotheses(model, rng=rng)
    omega_of_y, norm_sq = _killing_functions(model)
    selector = omega_of_y if criterion == CONSTANT_LENGTH else norm_sq
    seeds = _grid_seeds(model)
    values = selector(seeds)
    if np.ptp(values) < CONSTANT_TOL:
        critical = [(seed, 0.0) for seed in seeds]
    else:
        critical = (_critical_points(model, selector, seeds, maximize=False)
                    + _critical_points(model, selector, seeds, maximize=True))
    logger.info(f"Killing orbits on '{model.name}' ({criterion}): {len(critical)} critical seeds")

    candidates: List[KillingOrbitCandidate] = []
    for point, residual in critical:
        if len(candidates) >= max_candidates:
            break
        try:
            orbit, period, closure, shift = killing_orbit(model, point)
        except NoClosedOrbit:
            continue
        if any(_hausdorff(model, orbit.path.points, c.orbit.path.points) <= DISTINCT_TOL for c in candidates):
            continue
        loop = DiscretePath.loop(orbit.path.points[:-1], shift=shift)
        candidate = KillingOrbitCandidate(
            base_point=np.asarray(point), orbit=orbit, period=period, value=float(omega_of_y(point)),
            criticality_residual=residual, closure_error=closure, criterion=criterion,
            length=orbit.arrival_time, first_variation_residual=first_variation_residual(model, loop))
        candidates.append(candidate)
    if not candidates:
        raise NoClosedOrbit(f"no closed Killing orbit found on '{model.name}'", operation='killing_orbit_candidates')
    return candidates


# -- Katok family and perturbed orbits ---------------------------------------------------------

def katok_lengths(epsilon: float) -> Tuple[float, float]:
    """Closed-form Hopf-circle lengths ``2 pi / (1 +- sqrt(1 - eps))``."""
    check_epsilon(epsilon, 'katok_lengths')
    root = math.sqrt(1.0 - epsilon)
    return 2 * math.pi / (1 + root), 2 * math.pi / (1 - root)


def katok_numeric(epsilon: float, forward: bool = True, m: int = 2,
                  tol: float = Config.INTEGRATION_TOL) -> Dict[str, float]:
    """
    Integrate the Katok Randers geodesic along a Hopf circle for one period.

    ``forward`` follows the Hopf field V (the short circle), otherwise -V.
    """
    check_epsilon(epsilon, 'katok_numeric')
    model = round_sphere_hopf(m)
    x0 = np.zeros(model.dim)
    x0[:m - 1] = math.pi / 4
    direction = 1.0 if forward else -1.0
    v0 = direction * 2 * math.pi * model.killing_at(x0)
    solution = integrate(model, RANDERS, x0, v0, horizon=1.0, tol=tol, epsilon=epsilon, family=KATOK)
    closure = float(np.max(np.abs(model.wrapped_difference(solution.path.end, x0))))
    return {'length': solution.arrival_time, 'closure_error': closure,
            'conserved_drift': solution.residuals['conserved_drift']}


def _katok_row(epsilon: float) -> Dict[str, float]:
    short, long = katok_lengths(epsilon)
    numeric = katok_numeric(epsilon, forward=True)
    return {'epsilon': float(epsilon), 'short': short, 'long': long, 'numeric': numeric['length'],
            'error': abs(numeric['length'] - short),
            'numeric_long': katok_numeric(epsilon, forward=False)['length']}


def katok_table(epsilons: Sequence[float] = (0.9, 0.75, 0.5, 0.1, 0.01)) -> List[Dict[str, float]]:
    """Closed-form and numeric Katok lengths per epsilon, rows computed in parallel."""
    with ThreadPoolExecutor(max_workers=Config().worker_count) as executor:
        return list(executor.map(_katok_row, epsilons))


def katok_extrapolate(epsilons: Sequence[float] = (0.08, 0.04, 0.02, 0.01), degree: int = 2) -> float:
    """Polynomial extrapolation of the numeric short length to ``eps -> 0``."""
    lengths = [katok_numeric(epsilon)['length'] for epsilon in epsilons]
    coefficients = np.polyfit(np.asarray(epsilons, dtype=float), np.asarray(lengths), degree)
    return float(np.polyval(coefficients, 0.0))


def _check_alpha(alpha: float, operation: str) -> float:
    if not (0.0 < alpha < 1.0):
        raise ParameterRangeError(f"alpha must lie in (0, 1), got {alpha}", operation=operation)
    return float(alpha)


def _widest_orbit(model: ManifoldModel):
    """Killing orbit through the maximum of ``g0(Y, Y)`` with its g0-length."""
    if model.killing_fn is None:
        raise NoClosedOrbit(f"model '{model.name}' has no Killing field", operation='perturbed_orbit_lengths')
    _, norm_sq = _killing_functions(model)
    seeds = _grid_seeds(model)
    values = norm_sq(seeds)
    if np.ptp(values) < CONSTANT_TOL:
        points = [seeds[0]]
    else:
        points = [p for p, _ in _critical_points(model, norm_sq, seeds, maximize=True)]
    for point in points:
        try:
            orbit, period, _, _ = killing_orbit(model, point)
        except NoClosedOrbit:
            continue
        width = math.sqrt(float(norm_sq(point)))
        return orbit, period * width, width
    raise NoClosedOrbit(f"no closed orbit through a maximum of |Y| on '{model.name}'",
                        operation='perturbed_orbit_lengths')


def perturbed_orbit_lengths(model: ManifoldModel, alpha: float, period: Optional[float] = None) -> float:
    """
    Length ``T / (1 + sqrt(alpha))`` of the widest Killing orbit for the wind
    ``sqrt(alpha) Y / max|Y|`` over the sea metric g0.

    ``period`` is the g0-length T of the orbit; when omitted it is measured
    on the orbit through the maximum of ``g0(Y, Y)``.
    """
    _check_alpha(alpha, 'perturbed_orbit_lengths')
    if period is None:
        _, period, _ = _widest_orbit(model)
    return period / (1.0 + math.sqrt(alpha))


def perturbed_orbit_numeric(model: ManifoldModel, alpha: float) -> float:
    """Zermelo-Randers length of the widest Killing orbit, by quadrature."""
    _check_alpha(alpha, 'perturbed_orbit_numeric')
    orbit, _, width = _widest_orbit(model)
    points = orbit.path.points
    velocities = orbit.path.velocities
    wind = math.sqrt(alpha) * model.killing_at(points) / width
    speeds = zermelo_randers_value(model.metric_at(points), wind, velocities)
    return float(trapezoid(speeds, orbit.path.params))
