"""
Data models for Kropina Nav results and problems.

This module defines the value objects passed between the solvers: discrete
paths, integrated geodesics, two-point and loop problems, their results, Killing
orbit candidates and reachable sets. All of them are plain dataclasses holding
numpy arrays; ``to_dict`` methods produce JSON-ready summaries.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import Config
from .exceptions import InvalidArgument, ParameterRangeError
from .manifold import ManifoldModel

# Result statuses
CONVERGED = 'Converged'
NO_ADMISSIBLE_SEED = 'NoAdmissibleSeed'
CONE_COLLAPSE = 'ConeCollapse'
MAX_ITERATIONS = 'MaxIterations'
NOT_ATTAINED = 'NotAttained'
COLLAPSED = 'Collapsed'

STRUCTURAL_STATUSES = (NO_ADMISSIBLE_SEED, NOT_ATTAINED, COLLAPSED)

DEFAULT_EPSILON_SCHEDULE = tuple(2.0 ** -k for k in range(15))


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays into JSON-friendly Python objects."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


@dataclass
class DiscretePath:
    """
    Ordered samples of a curve.

    For closed paths the last sample is NOT repeated: node ``N`` is identified
    with node ``0`` shifted by the deck vector ``shift`` (non-zero on periodic
    axes for loops that wind around the chart).
    """
    params: np.ndarray
    points: np.ndarray
    velocities: Optional[np.ndarray] = None
    closed: bool = False
    shift: Optional[np.ndarray] = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.velocities is not None:
            self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if self.shift is None:
            self.shift = np.zeros(self.points.shape[1])
        self.shift = np.asarray(self.shift, dtype=float)
        if len(self.params) != len(self.points):
            raise InvalidArgument(f"{len(self.params)} parameters for {len(self.points)} points", module='models',
                                  operation='DiscretePath')
        if np.any(np.diff(self.params) <= 0):
            raise InvalidArgument('path parameters must be strictly increasing',
                                  module='models', operation='DiscretePath')

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def closing_params(self) -> np.ndarray:
        """Parameters including the closing node of a loop (period 1 in s)."""
        if not self.closed:
            return self.params
        return np.append(self.params, self.params[0] + 1.0)

    def closing_points(self) -> np.ndarray:
        """Points including the closing node ``x_0 + shift`` of a loop."""
        if not self.closed:
            return self.points
        return np.vstack([self.points, self.points[0] + self.shift])

    def chords(self) -> np.ndarray:
        return np.diff(self.closing_points(), axis=0)

    @classmethod
    def straight(cls, x0: Sequence[float], x1: Sequence[float], nodes: int = 33) -> 'DiscretePath':
        """Uniformly sampled chart segment from ``x0`` to ``x1``."""
        s = np.linspace(0.0, 1.0, nodes)
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        return cls(params=s, points=x0 + s[:, None] * (x1 - x0))

    @classmethod
    def loop(cls, points: np.ndarray, shift: Optional[Sequence[float]] = None) -> 'DiscretePath':
        """Closed path with uniform parameters ``k / N``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(params=np.arange(len(points)) / len(points), points=points, closed=True, shift=shift)

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'params': self.params,
            'points': self.points,
            'closed': self.closed,
            'shift': self.shift,
        })


@dataclass
class GeodesicSolution:
    """
    Integrated trajectory with its invariant traces.

    ``conserved`` holds the Killing constant of the spacetime lift expressed
    in the constant-speed parametrization, ``(s * omega(v) - eps * speed) / rho``;
    for Kropina (eps = 0) it is ``omega(v) / rho``.
    """
    kind: str
    epsilon: float
    path: DiscretePath
    lift: np.ndarray
    omega_trace: np.ndarray
    speed_trace: np.ndarray
    conserved: np.ndarray
    tolerance: float
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def arrival_time(self) -> float:
        return float(self.lift[-1] - self.lift[0])

    @property
    def residuals(self) -> Dict[str, float]:
        speed_scale = max(1.0, float(np.max(np.abs(self.speed_trace))))
        conserved_scale = max(1.0, float(np.max(np.abs(self.conserved))))
        return {
            'conserved_drift': float(np.max(np.abs(self.conserved - self.conserved[0]))) / conserved_scale,
            'omega_drift': float(np.max(np.abs(self.omega_trace - self.omega_trace[0]))),
            'speed_drift': float(np.max(np.abs(self.speed_trace - self.speed_trace[0]))) / speed_scale,
        }

    def trajectory_rows(self) -> List[Dict[str, float]]:
        """Rows for the trajectory CSV: s, x1..xn, v1..vn, t, omega_dot, speed."""
        rows = []
        velocities = self.path.velocities
        for k, s in enumerate(self.path.params):
            row = {'s': float(s)}
            for i, value in enumerate(self.path.points[k]):
                row[f'x{i + 1}'] = float(value)
            for i, value in enumerate(velocities[k]):
                row[f'v{i + 1}'] = float(value)
            row['t'] = float(self.lift[k])
            row['omega_dot'] = float(self.omega_trace[k])
            row['speed'] = float(self.speed_trace[k])
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'kind': self.kind,
            'epsilon': self.epsilon,
            'arrival_time': self.arrival_time,
            'samples': self.path.size,
            'tolerance': self.tolerance,
            'residuals': self.residuals,
            'stats': self.stats,
        })


@dataclass
class ConnectProblem:
    """Two-point problem in the homotopy class of ``seed_path``."""
    model: ManifoldModel
    x0: np.ndarray
    x1: np.ndarray
    seed_path: DiscretePath
    nodes: int = 33
    gradient_tol: float = 1e-8
    length_tol: float = 1e-10
    max_iterations: int = 2000
    epsilon_schedule: Sequence[float] = DEFAULT_EPSILON_SCHEDULE
    shooting_tol: float = 1e-8
    integration_tol: float = Config.INTEGRATION_TOL

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.x1 = np.asarray(self.x1, dtype=float)
        if (np.max(np.abs(self.seed_path.start - self.x0)) > 1e-10
                or np.max(np.abs(self.seed_path.end - self.x1)) > 1e-10):
            raise InvalidArgument('seed path endpoints do not match x0 and x1', module='connect',
                                  operation='ConnectProblem')
        schedule = list(self.epsilon_schedule)
        if any(e <= 0 or e > 1 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise ParameterRangeError('epsilon schedule must be strictly decreasing in (0, 1]', module='connect',
                                      operation='ConnectProblem')


@dataclass
class LoopProblem:
    """Closed geodesic search in the free homotopy class of ``seed_loop``."""
    model: ManifoldModel
    seed_loop: DiscretePath
    nodes: int = 64
    gradient_tol: float = 1e-8
    length_tol: float = 1e-10
    max_iterations: int = 3000
    epsilon_schedule: Sequence[float] = DEFAULT_EPSILON_SCHEDULE
    collapse_diameter: float = 1e-3
    use_homotopy: bool = False
    integration_tol: float = Config.INTEGRATION_TOL

    def __post_init__(self):
        if not self.seed_loop.closed:
            raise InvalidArgument('seed loop must be a closed path', module='closed', operation='LoopProblem')


@dataclass
class ConnectResult:
    """Outcome of a connecting or closed geodesic search."""
    status: str
    path: Optional[DiscretePath] = None
    solution: Optional[GeodesicSolution] = None
    length: float = float('nan')
    epsilon_trace: List[Dict[str, float]] = field(default_factory=list)
    reason: str = ''
    residuals: Dict[str, float] = field(default_factory=dict)
    seed_length: float = float('nan')
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            'status': self.status,
            'length': self.length,
            'seed_length': self.seed_length,
            'iterations': self.iterations,
            'epsilon_trace': self.epsilon_trace,
            'residuals': self.residuals,
        }
        if self.reason:
            payload['reason'] = self.reason
        if self.solution is not None:
            payload['solution'] = self.solution.to_dict()
        return _plain(payload)


@dataclass
class KillingOrbitCandidate:
    """Closed orbit of the Killing field through a critical point."""
    base_point: np.ndarray
    orbit: GeodesicSolution
    period: float
    value: float
    criticality_residual: float
    closure_error: float
    criterion: str
    length: float = float('nan')
    first_variation_residual: float = float('nan')

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'base_point': self.base_point,
            'period': self.period,
            'value': self.value,
            'criticality_residual': self.criticality_residual,
            'closure_error': self.closure_error,
            'criterion': self.criterion,
            'length': self.length,
            'first_variation_residual': self.first_variation_residual,
        })


@dataclass
class ReachableSet:
    """
    Lattice-indexed membership of the forward (or backward) reachable set.

    ``cost`` is ``inf`` on unreached nodes; ``reached`` is the membership mask
    after the optional budget cut.
    """
    model: ManifoldModel
    source: np.ndarray
    lower: np.ndarray
    spacing: np.ndarray
    shape: tuple
    reached: np.ndarray
    cost: np.ndarray
    valid: np.ndarray
    direction: str = 'forward'
    budget: Optional[float] = None
    predecessors: Optional[np.ndarray] = None
    boundary_samples: Optional[np.ndarray] = None
    wrapped: tuple = ()

    def node_points(self) -> np.ndarray:
        """Coordinates of every lattice node, shape ``shape + (dim,)``."""
        axes = [self.lower[i] + self.spacing[i] * np.arange(n) for i, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)

    @property
    def reached_fraction(self) -> float:
        considered = int(np.count_nonzero(self.valid))
        if considered == 0:
            return 0.0
        return float(np.count_nonzero(self.reached & self.valid)) / considered

    def grid_rows(self) -> List[Dict[str, Any]]:
        """Rows for the grid CSV, lexicographic in the node index."""
        points = self.node_points().reshape(-1, len(self.shape))
        reached = self.reached.reshape(-1)
        cost = self.cost.reshape(-1)
        rows = []
        for flat_index, index in enumerate(np.ndindex(*self.shape)):
            row = {f'i{axis + 1}': int(value) for axis, value in enumerate(index)}
            row.update({f'x{axis + 1}': float(value) for axis, value in enumerate(points[flat_index])})
            row['reached'] = bool(reached[flat_index])
            row['cost'] = float(cost[flat_index]) if np.isfinite(cost[flat_index]) else ''
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'source': self.source,
            'direction': self.direction,
            'shape': list(self.shape),
            'spacing': self.spacing,
            'budget': self.budget,
            'reached_nodes': int(np.count_nonzero(self.reached)),
            'reached_fraction': self.reached_fraction,
            'boundary_samples': 0 if self.boundary_samples is None else len(self.boundary_samples),
        })
