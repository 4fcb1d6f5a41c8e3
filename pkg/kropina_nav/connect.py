"""
Connecting geodesics of Kropina metrics.

Two routes solve the two-point problem in the homotopy class of a seed path:

* direct minimization of the discrete Kropina energy over the interior nodes,
  with an annealed logarithmic barrier on ``-omega(x')``, followed by single
  shooting against the Kropina spray;
* the epsilon homotopy: minimize the Randers energy for a decreasing sequence
  of epsilon, warm-starting each stage from the previous minimizer, then
  finish with the Kropina minimization.

Discrete energy: ``E = sum_k L(m_k, d_k / ds) ds`` with ``m_k`` the chord
midpoint, ``d_k`` the chord and ``L = F^2 / 2``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from .config import Config
from .exceptions import InvalidArgument, KropinaNavError, NoAdmissibleSeed
from .geodesic_flow import KROPINA, RANDERS, integrate, path_length, speed_and_derivatives
from .manifold import ManifoldModel
from .metrics import STANDARD
from .models import (CONE_COLLAPSE, CONVERGED, MAX_ITERATIONS, NO_ADMISSIBLE_SEED, NOT_ATTAINED, ConnectProblem,
                     ConnectResult, DiscretePath)
from .reachable import chord_costs, predecessor_path, propagate

logger = logging.getLogger(__name__)

BARRIER_SCHEDULE = (1e-2, 1e-4, 1e-6, 0.0)
DETOUR_RESOLUTION = 8
DETOUR_MAX_NODES = 60000
COLLAPSE_DIAMETER = 1e-3


# -- discrete energy ---------------------------------------------------------------

def segment_lagrangian(model: ManifoldModel, kind: str, epsilon: Optional[float], family: str,
                       midpoints: np.ndarray, velocities: np.ndarray,
                       barrier: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``(L, dL/dx, dL/dv)`` of ``F^2 / 2 - barrier * log(-omega(v))`` per segment.

    Kropina segments outside the cone get ``L = inf``.
    """
    omega = model.one_form_at(midpoints)
    b = np.einsum('...i,...i->...', omega, velocities)
    if kind == KROPINA:
        admissible = -b > Config.TOL_ADM
        if not np.all(admissible):
            infinite = np.full(b.shape, np.inf)
            return infinite, np.zeros_like(velocities), np.zeros_like(velocities)
    speed, d_x, d_v = speed_and_derivatives(model, kind, epsilon, midpoints, velocities, family)
    value = 0.5 * speed ** 2
    grad_x = speed[..., None] * d_x
    grad_v = speed[..., None] * d_v
    if barrier > 0:
        if np.any(b >= 0):
            infinite = np.full(b.shape, np.inf)
            return infinite, np.zeros_like(velocities), np.zeros_like(velocities)
        db = np.einsum('...ki,...i->...k', model.one_form_jet(midpoints), velocities)
        value = value - barrier * np.log(-b)
        grad_x = grad_x - barrier * db / b[..., None]
        grad_v = grad_v - barrier * omega / b[..., None]
    return value, grad_x, grad_v


class DiscreteEnergy:
    """
    Discrete path energy as a function of the free nodes.

    Open paths keep both endpoints fixed; closed paths have all nodes free and
    close through ``x_N = x_0 + shift``.
    """

    def __init__(self, model: ManifoldModel, template: DiscretePath, kind: str = KROPINA,
                 epsilon: Optional[float] = None, family: str = STANDARD, barrier: float = 0.0):
        self.model = model
        self.kind = kind
        self.epsilon = epsilon
        self.family = family
        self.barrier = barrier
        self.closed = template.closed
        self.shift = template.shift
        self.dim = template.dim
        self.x0 = template.start.copy()
        self.x1 = template.end.copy()
        self.nodes = template.size
        self.segments = self.nodes if self.closed else self.nodes - 1
        self.ds = 1.0 / self.segments

    def pack(self, path: DiscretePath) -> np.ndarray:
        points = path.points if self.closed else path.points[1:-1]
        return points.reshape(-1).copy()

    def unpack(self, z: np.ndarray) -> np.ndarray:
        """Nodes including the closing node."""
        free = z.reshape(-1, self.dim)
        if self.closed:
            return np.vstack([free, free[:1] + self.shift])
        return np.vstack([self.x0, free, self.x1])

    def to_path(self, z: np.ndarray) -> DiscretePath:
        points = self.unpack(z)
        if self.closed:
            return DiscretePath.loop(points[:-1], shift=self.shift)
        return DiscretePath(params=np.linspace(0.0, 1.0, self.nodes), points=points)

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        points = self.unpack(z)
        chords = np.diff(points, axis=0)
        midpoints = points[:-1] + 0.5 * chords
        if not np.all(self.model.in_domain(midpoints)):
            return float('inf'), np.zeros_like(z)
        value, grad_x, grad_v = segment_lagrangian(self.model, self.kind, self.epsilon, self.family, midpoints,
                                                   chords / self.ds, self.barrier)
        if not np.all(np.isfinite(value)):
            return float('inf'), np.zeros_like(z)
        node_gradient = np.zeros_like(points)
        node_gradient[:-1] += 0.5 * grad_x * self.ds - grad_v
        node_gradient[1:] += 0.5 * grad_x * self.ds + grad_v
        if self.closed:
            node_gradient[0] += node_gradient[-1]
            gradient = node_gradient[:-1]
        else:
            gradient = node_gradient[1:-1]
        return float(np.sum(value) * self.ds), gradient.reshape(-1)


@dataclass
class EnergyFit:
    """Outcome of one discrete-energy minimization, with a connect status."""
    x: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    status: str
    message: str = ''


class _CappedEnergy:
    """
    Energy with a finite ceiling outside its domain.

    L-BFGS-B needs finite values; trial points past the cone boundary or the
    chart get ``ceiling`` with a zero gradient, so the line search backs off.
    ``ceiling`` lies above the stage's starting value, which bounds every
    accepted iterate.
    """

    def __init__(self, energy: DiscreteEnergy, ceiling: float):
        self.energy = energy
        self.ceiling = ceiling
        self.rejected = 0

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        value, gradient = self.energy(z)
        if not np.isfinite(value):
            self.rejected += 1
            return self.ceiling, np.zeros_like(z)
        return value, gradient


def _fit_status(fit, capped: _CappedEnergy, gradient_norm: float) -> str:
    if fit.status == 0:
        return CONVERGED
    if fit.status == 1:
        return MAX_ITERATIONS
    if gradient_norm < 1e-6:
        return CONVERGED
    return CONE_COLLAPSE if capped.rejected else MAX_ITERATIONS


def minimize_discrete_energy(model: ManifoldModel, start: DiscretePath, kind: str = KROPINA,
                             epsilon: Optional[float] = None, family: str = STANDARD,
                             gradient_tol: float = 1e-8, value_tol: float = 1e-14,
                             max_iterations: int = 2000,
                             barriers: Tuple[float, ...] = BARRIER_SCHEDULE) -> Tuple[DiscretePath, EnergyFit]:
    """
    Minimize the discrete energy from ``start`` with L-BFGS-B, annealing the barrier weight.

    Barrier weights are relative to the starting energy. Randers energies are
    minimized without barrier. A start outside the admissible region, or a
    line search stalled against the cone boundary, ends with ``ConeCollapse``.
    """
    plain = DiscreteEnergy(model, start, kind, epsilon, family)
    z = plain.pack(start)
    scale = max(abs(plain(z)[0]), 1e-12)
    schedule = barriers if kind == KROPINA else (0.0,)
    result = None
    for weight in schedule:
        energy = DiscreteEnergy(model, start, kind, epsilon, family, barrier=weight * scale)
        value, _ = energy(z)
        if not np.isfinite(value):
            result = EnergyFit(x=z, value=float('inf'), gradient_norm=float('inf'), iterations=0,
                               status=CONE_COLLAPSE, message='start lies outside the admissible region')
            break
        capped = _CappedEnergy(energy, value + max(1.0, abs(value)))
        tolerance = gradient_tol if weight == 0 else max(gradient_tol, 1e-6)
        fit = optimize.minimize(capped, z, jac=True, method='L-BFGS-B',
                                options={'gtol': tolerance, 'ftol': value_tol, 'maxiter': max_iterations,
                                         'maxls': 50})
        gradient_norm = float(np.max(np.abs(fit.jac))) if fit.jac.size else 0.0
        result = EnergyFit(x=fit.x, value=float(fit.fun), gradient_norm=gradient_norm, iterations=int(fit.nit),
                           status=_fit_status(fit, capped, gradient_norm), message=str(fit.message))
        logger.debug(f"Energy stage barrier={weight:g}: {result.status} after {result.iterations} iterations, "
                     f"value {result.value:.12g}, {capped.rejected} trial points outside the region")
        z = fit.x
    return plain.to_path(z), result



# -- seeds ---------------------------------------------------------------------------

def resample_path(path: DiscretePath, nodes: int) -> DiscretePath:
    """Linear resampling at uniform parameters."""
    params = path.closing_params()
    points = path.closing_points()
    s = params[0] + (params[-1] - params[0]) * np.arange(nodes + (1 if path.closed else 0)) / (
        nodes if path.closed else nodes - 1)
    new = np.column_stack([np.interp(s, params, points[:, axis]) for axis in range(path.dim)])
    if path.closed:
        return DiscretePath.loop(new[:-1], shift=path.shift)
    return DiscretePath(params=np.linspace(0.0, 1.0, nodes), points=new)


def reparametrize_constant_speed(model: ManifoldModel, path: DiscretePath,
                                 nodes: Optional[int] = None) -> DiscretePath:
    """
    Resample a polyline at uniform Kropina arc length.

    Returns the input unchanged when the resampled polyline is not admissible.
    """
    nodes = nodes or path.size
    points = path.closing_points()
    chords = np.diff(points, axis=0)
    lengths = chord_costs(model, points[:-1], chords)
    if not np.all(np.isfinite(lengths)) or np.sum(lengths) <= 0:
        return path
    arc = np.concatenate([[0.0], np.cumsum(lengths)]) / np.sum(lengths)
    count = nodes + 1 if path.closed else nodes
    targets = np.linspace(0.0, 1.0, count)
    new = np.column_stack([np.interp(targets, arc, points[:, axis]) for axis in range(path.dim)])
    result = (DiscretePath.loop(new[:-1], shift=path.shift) if path.closed
              else DiscretePath(params=targets, points=new))
    if not np.all(np.isfinite(chord_costs(model, result.closing_points()[:-1], result.chords()))):
        return path
    return result


def homotopy_proxy_check(model: ManifoldModel, first: DiscretePath, second: DiscretePath,
                         steps: int = 11, samples: int = 129) -> bool:
    """
    Straight-line homotopy between two paths stays in the chart domain.

    Both paths are resampled at common parameters; endpoints (and the deck
    shift of loops) must agree.
    """
    if first.closed != second.closed or not np.allclose(first.shift, second.shift):
        return False
    a = resample_path(first, samples).closing_points()
    b = resample_path(second, samples).closing_points()
    if not first.closed and (not np.allclose(a[0], b[0]) or not np.allclose(a[-1], b[-1])):
        return False
    for weight in np.linspace(0.0, 1.0, steps):
        if not np.all(model.in_domain((1.0 - weight) * a + weight * b)):
            return False
    return True


def _detour(model: ManifoldModel, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Admissible polyline from ``start`` to ``end`` found on a local lattice."""
    extent = float(np.linalg.norm(end - start))
    h = extent / DETOUR_RESOLUTION
    lower = np.minimum(start, end) - extent
    upper = np.maximum(start, end) + extent
    for axis in range(model.dim):
        if not model.periodic[axis]:
            lower[axis] = max(lower[axis], model.lower[axis])
            upper[axis] = min(upper[axis], model.upper[axis])
    while np.prod(np.floor((upper - lower) / h) + 1) > DETOUR_MAX_NODES:
        h *= 1.25
    rs = propagate(model, start, np.column_stack([lower, upper]), h, wrap=False)
    points = rs.node_points().reshape(-1, model.dim)
    cost = rs.cost.reshape(-1)
    candidates = np.nonzero(np.isfinite(cost))[0]
    if len(candidates) == 0:
        raise NoAdmissibleSeed('no admissible curve leaves the start point', operation='admissibilize_seed')
    arrival = chord_costs(model, points[candidates], end - points[candidates])
    total = cost[candidates] + arrival
    if not np.any(np.isfinite(total)):
        raise NoAdmissibleSeed(f"no admissible curve from {np.round(start, 6).tolist()} to "
                               f"{np.round(end, 6).tolist()} in a neighbourhood of the seed",
                               operation='admissibilize_seed')
    best = candidates[int(np.argmin(total))]
    return np.vstack([predecessor_path(rs, best), end])


def detour_seed(model: ManifoldModel, x0, x1) -> DiscretePath:
    """
    Seed polyline from ``x0`` to ``x1`` along the cheapest lattice route.

    The route is the reachable-set predecessor chain from ``x0`` closed by an
    admissible chord into ``x1``, so every chord lies in the cone.

    Raises:
        NoAdmissibleSeed: no admissible route joins the endpoints near their chord
    """
    start = model.check_point(x0, 'detour_seed')
    end = model.check_point(x1, 'detour_seed')
    if np.max(np.abs(end - start)) < 1e-12:
        raise InvalidArgument('a detour seed needs distinct endpoints', module='connect', operation='detour_seed')
    points = _detour(model, start, end)
    logger.info(f"Detour seed on '{model.name}' with {len(points)} nodes")
    return DiscretePath(params=np.linspace(0.0, 1.0, len(points)), points=points)


def admissibilize_seed(
model: ManifoldModel, path: DiscretePath) -> DiscretePath:
    """
    Replace inadmissible stretches of a seed by admissible detours.

    Every run of inadmissible chords is replaced by the direct chord when that
    is admissible, otherwise by a lattice detour. The result must be
    straight-line homotopic to the input within the chart.

    Raises:
        NoAdmissibleSeed: no detour exists near the seed
    """
    points = path.closing_points()
    chords = np.diff(points, axis=0)
    admissible = np.isfinite(chord_costs(model, points[:-1], chords))
    if np.all(admissible):
        return path
    logger.info(f"Seed on '{model.name}' has {int(np.count_nonzero(~admissible))} inadmissible chords, "
                f"searching for detours")
    pieces = [points[:1]]
    k = 0
    while k < len(chords):
        if admissible[k]:
            pieces.append(points[k + 1:k + 2])
            k += 1
            continue
        j = k
        while j < len(chords) and not admissible[j]:
            j += 1
        start, end = points[k], points[j]
        if np.isfinite(chord_costs(model, start[None, :], (end - start)[None, :])[0]):
            pieces.append(end[None, :])
        else:
            pieces.append(_detour(model, start, end)[1:])
        k = j
    new = np.concatenate(pieces, axis=0)
    keep = np.concatenate([[True], np.any(np.abs(np.diff(new, axis=0)) > 1e-14, axis=1)])
    new = new[keep]
    if path.closed:
        result = DiscretePath.loop(new[:-1], shift=path.shift)
    else:
        result = DiscretePath(params=np.linspace(0.0, 1.0, len(new)), points=new)
    if not homotopy_proxy_check(model, path, result):
        raise NoAdmissibleSeed('admissible detour leaves the homotopy class of the seed',
                               operation='admissibilize_seed')
    return result


# -- shooting ------------------------------------------------------------------------

def shoot(model: ManifoldModel, path: DiscretePath, tol: float = Config.INTEGRATION_TOL,
          samples: int = 201):
    """
    Single shooting from the start of an open polyline to its end.

    Returns the integrated solution and the endpoint error.
    """
    x0, x1 = path.start, path.end
    ds = np.diff(path.params)
    if path.size >= 3:
        guess = (-3.0 * path.points[0] + 4.0 * path.points[1] - path.points[2]) / (ds[0] + ds[1])
    else:
        guess = (path.points[1] - path.points[0]) / ds[0]

    def residual(v):
        try:
            solution = integrate(model, KROPINA, x0, v, horizon=1.0, tol=tol, samples=2)
        except KropinaNavError:
            return np.full(model.dim, 1e3)
        return solution.path.end - x1

    if np.max(np.abs(residual(guess))) > 1e-12:
        root = optimize.root(residual, guess, method='hybr', options={'xtol': 1e-14})
        velocity = root.x
    else:
        velocity = guess
    solution = integrate(model, KROPINA, x0, velocity, horizon=1.0, tol=tol, samples=samples)
    return solution, float(np.max(np.abs(solution.path.end - x1)))


# -- operations ------------------------------------------------------------------------

def _prepare_seed(problem: ConnectProblem):
    seed = admissibilize_seed(problem.model, problem.seed_path)
    seed_length = path_length(problem.model, KROPINA, seed)
    start = reparametrize_constant_speed(problem.model, seed, problem.nodes)
    return seed, seed_length, start


def _finish_kropina(problem: ConnectProblem, start: DiscretePath, seed_length: float,
                    trace: Optional[List] = None) -> ConnectResult:
    model = problem.model
    path, opt = minimize_discrete_energy(model, start, KROPINA, gradient_tol=problem.gradient_tol,
                                         value_tol=problem.length_tol, max_iterations=problem.max_iterations)
    status = opt.status
    length = path_length(model, KROPINA, path)
    residuals = {'gradient_norm': opt.gradient_norm}
    trace = trace or []
    if np.max(np.abs(problem.x1 - problem.x0)) < 1e-12:
        diameter = float(np.max(np.ptp(path.points, axis=0)))
        residuals['diameter'] = diameter
        if diameter < COLLAPSE_DIAMETER or status != CONVERGED:
            return ConnectResult(status=NOT_ATTAINED, path=path, length=length, seed_length=seed_length,
                                 epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                                 reason='infimum not attained: admissible curves through the endpoint collapse')
    if status != CONVERGED:
        return ConnectResult(status=status, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=opt.message)
    path = reparametrize_constant_speed(model, path)
    try:
        solution, error = shoot(model, path, tol=problem.integration_tol)
    except KropinaNavError as e:
        return ConnectResult(status=MAX_ITERATIONS, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=f"shooting failed: {e}")
    residuals.update(solution.residuals)
    residuals['endpoint_error'] = error
    if error >= problem.shooting_tol:
        return ConnectResult(status=MAX_ITERATIONS, path=path, length=length, seed_length=seed_length,
                             epsilon_trace=trace, residuals=residuals, iterations=opt.iterations,
                             reason=f"shooting endpoint error {error:.3g} above {problem.shooting_tol:g}")
    logger.info(f"Connecting geodesic on '{model.name}': length {solution.arrival_time:.10g} "
                f"(seed {seed_length:.10g}), endpoint error {error:.2e}")
    return ConnectResult(status=CONVERGED, path=solution.path, solution=solution, length=solution.arrival_time,
                         seed_length=seed_length, epsilon_trace=trace, residuals=residuals,
                         iterations=opt.iterations)


def minimize_length(problem: ConnectProblem) -> ConnectResult:
    """
    Direct minimization of the discrete Kropina energy plus shooting refinement.

    Structural outcomes (no admissible seed, degenerate endpoints) are returned
    as statuses.
    """
    try:
        _, seed_length, start = _prepare_seed(problem)
    except NoAdmissibleSeed as e:
        logger.info(f"No admissible seed on '{problem.model.name}': {e}")
        return ConnectResult(status=NO_ADMISSIBLE_SEED, reason=f"{e.reason}; {e.message}")
    return _finish_kropina(problem, start, seed_length)


def epsilon_homotopy(problem: ConnectProblem) -> ConnectResult:
    """
    Randers continuation epsilon -> 0 followed by the Kropina minimization.

    The trace records ``delta = L_eps(x_eps)`` per stage; since ``F_eps``
    decreases in epsilon on the cone, deltas grow as epsilon shrinks and stay
    below the seed length.
    """
    model = problem.model
    try:
        seed, seed_length, start = _prepare_seed(problem)
    except NoAdmissibleSeed as e:
        return ConnectResult(status=NO_ADMISSIBLE_SEED, reason=f"{e.reason}; {e.message}")
    trace = []
    current = start
    for epsilon in problem.epsilon_schedule:
        path, opt = minimize_discrete_energy(model, current, RANDERS, epsilon=epsilon,
                                             gradient_tol=problem.gradient_tol, value_tol=problem.length_tol,
                                             max_iterations=problem.max_iterations)
        status = opt.status
        delta = path_length(model, RANDERS, path, epsilon)
        endpoint_error = float(max(np.max(np.abs(path.start - problem.x0)), np.max(np.abs(path.end - problem.x1))))
        trace.append({'epsilon': float(epsilon), 'delta': delta, 'iterations': opt.iterations,
                      'status': status, 'endpoint_error': endpoint_error})
        logger.info(f"Homotopy stage eps={epsilon:.6g}: delta {delta:.10g} ({status})")
        if status != CONVERGED:
            return ConnectResult(status=status, path=path, length=delta, seed_length=seed_length,
                                 epsilon_trace=trace, iterations=opt.iterations,
                                 reason=f"stage eps={epsilon:g}: {opt.message}")
        current = path
    deltas = np.array([row['delta'] for row in trace])
    residuals = {
        'monotone_violation': float(max(0.0, np.max(deltas[:-1] - deltas[1:]))) if len(deltas) > 1 else 0.0,
        'bound_violation': float(max(0.0, np.max(deltas) - seed_length)),
    }
    admissible_chords = np.isfinite(chord_costs(model, current.points[:-1], current.chords()))
    final_start = current if np.all(admissible_chords) else start
    result = _finish_kropina(problem, final_start, seed_length, trace)
    result.residuals.update(residuals)
    return result


def connect_many(problems: List[ConnectProblem], method: str = 'direct') -> List[ConnectResult]:
    """Solve independent problems on the worker pool."""
    solver = epsilon_homotopy if method == 'homotopy' else minimize_length
    with ThreadPoolExecutor(max_workers=Config().worker_count) as executor:
        return list(executor.map(solver, problems))
