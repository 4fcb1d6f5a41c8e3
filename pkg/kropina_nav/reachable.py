"""
Admissible reachable sets on a lattice.

The forward set of a source is computed by a shortest-path search over a
lattice covering a chart box. A lattice edge is traversable when its chord is
admissible at the chord midpoint and costs the chord's Kropina length. Since
the admissible cone is a half-space, every node joined to the source by an
admissible straight chord is reachable directly; those chords (checked at
several points along the chord) seed the search through a virtual source
node, and the lattice edges carry it around corners.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .config import Config
from .exceptions import BoundaryEmpty, InvalidArgument, SourceOutsideBox
from .manifold import ManifoldModel, omega_wedge_domega, with_one_form_scale
from .metrics import kropina_batch
from .models import ReachableSet

logger = logging.getLogger(__name__)

FORWARD = 'forward'
BACKWARD = 'backward'
CHORD_SAMPLES = 9
NONZERO_THRESHOLD = 1e-9


def stencil_offsets(dim: int, radius: int = 2) -> np.ndarray:
    """All lattice offsets of Chebyshev norm ``1..radius``."""
    axes = [np.arange(-radius, radius + 1)] * dim
    offsets = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, dim)
    return offsets[np.any(offsets != 0, axis=1)]


def _lattice(model: ManifoldModel, box, spacing, wrap: bool):
    box = np.asarray(box, dtype=float)
    if box.shape != (model.dim, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise InvalidArgument(f"box must be {model.dim} increasing (low, high) pairs",
                              module='reachable', operation='propagate')
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (model.dim,)).copy()
    if np.any(spacing <= 0):
        raise InvalidArgument('lattice spacing must be positive', module='reachable', operation='propagate')
    periods = model.periods
    wrapped = np.zeros(model.dim, dtype=bool)
    shape = []
    for axis in range(model.dim):
        span = box[axis, 1] - box[axis, 0]
        if wrap and periods[axis] > 0 and span >= periods[axis] - 1e-9:
            count = max(3, int(round(periods[axis] / spacing[axis])))
            spacing[axis] = periods[axis] / count
            wrapped[axis] = True
        else:
            count = int(np.floor(span / spacing[axis] + 1e-9)) + 1
        shape.append(count)
    return box, spacing, wrapped, tuple(shape)


def _reduce(difference: np.ndarray, periods: np.ndarray, wrapped: np.ndarray) -> np.ndarray:
    if np.any(wrapped):
        difference = np.array(difference)
        p = periods[wrapped]
        difference[..., wrapped] -= p * np.round(difference[..., wrapped] / p)
    return difference


def chord_costs(model: ManifoldModel, starts: np.ndarray, chords: np.ndarray,
                samples: int = CHORD_SAMPLES) -> np.ndarray:
    """Kropina length of straight chords, ``inf`` unless admissible at every sample."""
    sigma = np.linspace(0.0, 1.0, samples)
    positions = starts[..., None, :] + sigma[:, None] * chords[..., None, :]
    speeds = kropina_batch(model, positions, np.broadcast_to(chords[..., None, :], positions.shape))
    return np.where(np.all(np.isfinite(speeds), axis=-1), trapezoid(np.where(np.isfinite(speeds), speeds, 0.0),
                                                                    sigma, axis=-1), np.inf)


def propagate(model: ManifoldModel, x, box, h: Union[float, Sequence[float]], cone_samples: int = 8,
              direction: str = FORWARD, budget: Optional[float] = None, wrap: bool = True,
              tol_adm: float = Config.TOL_ADM) -> ReachableSet:
    """
    Forward (or backward) admissible reachable set of ``x`` on a lattice.

    Args:
        box: ``dim`` pairs ``(low, high)``; periodic axes spanning a full period wrap
        h: lattice spacing, scalar or per axis
        cone_samples: minimum number of stencil directions per node
        direction: ``'forward'`` for I+, ``'backward'`` for I- (omega -> -omega)
        budget: optional cost cut for membership
        wrap: allow wrapping along periodic axes

    Raises:
        SourceOutsideBox: ``x`` does not lie in the box
    """
    if direction not in (FORWARD, BACKWARD):
        raise InvalidArgument(f"unknown direction '{direction}'", module='reachable', operation='propagate')
    box, spacing, wrapped, shape = _lattice(model, box, h, wrap)
    x = np.asarray(x, dtype=float)
    inside = (x >= box[:, 0] - 1e-12) & (x <= box[:, 1] + 1e-12)
    if x.shape != (model.dim,) or not np.all(inside | wrapped):
        raise SourceOutsideBox(f"source {np.round(x, 6).tolist()} is outside the box {box.tolist()}",
                               operation='propagate')
    geometry = with_one_form_scale(model, -1.0) if direction == BACKWARD else model
    lower = box[:, 0]
    dim = model.dim
    count = int(np.prod(shape))
    indices = np.indices(shape).reshape(dim, -1).T
    points = lower + indices * spacing
    valid = model.in_domain(points) & (model.omega_norm(points) >= model.tol_omega)
    periods = model.periods

    radius = 2
    while (2 * radius + 1) ** dim - 1 < cone_samples:
        radius += 1
    offsets = stencil_offsets(dim, radius)

    rows, cols, costs = [], [], []
    for offset in offsets:
        target = indices + offset
        ok = valid.copy()
        for axis in range(dim):
            if wrapped[axis]:
                target[:, axis] %= shape[axis]
            else:
                ok &= (target[:, axis] >= 0) & (target[:, axis] < shape[axis])
        source_index = np.nonzero(ok)[0]
        target_index = np.ravel_multi_index(tuple(target[source_index].T), shape)
        keep = valid[target_index]
        source_index, target_index = source_index[keep], target_index[keep]
        chord = offset * spacing
        midpoints = points[source_index] + 0.5 * chord
        cost = kropina_batch(geometry, midpoints, np.broadcast_to(chord, midpoints.shape), tol_adm)
        finite = np.isfinite(cost)
        rows.append(source_index[finite])
        cols.append(target_index[finite])
        costs.append(cost[finite])

    # fan of direct chords from the source through a virtual node
    chords = _reduce(points - x, periods, wrapped)
    candidates = np.nonzero(valid & np.any(np.abs(chords) > 1e-12, axis=1))[0]
    fan = chord_costs(geometry, np.broadcast_to(x, (len(candidates), dim)), chords[candidates])
    finite = np.isfinite(fan)
    rows.append(np.full(int(np.count_nonzero(finite)), count))
    cols.append(candidates[finite])
    costs.append(fan[finite])

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    costs = np.concatenate(costs)
    order = np.lexsort((costs, cols, rows))
    rows, cols, costs = rows[order], cols[order], costs[order]
    _, first = np.unique(rows * (count + 1) + cols, return_index=True)
    graph = sparse.csr_matrix((costs[first], (rows[first], cols[first])), shape=(count + 1, count + 1))
    logger.debug(f"Reachability graph on '{model.name}': {count} nodes, {len(first)} edges")

    distance, predecessors = dijkstra(graph, directed=True, indices=count, return_predecessors=True)
    cost = distance[:count]
    reached = np.isfinite(cost) & valid
    if budget is not None:
        reached &= cost <= budget
    cost = np.where(reached, cost, np.inf)

    boundary = _boundary_samples(points, reached, valid, shape, spacing, wrapped)
    logger.info(f"Propagated {direction} set on '{model.name}': {int(np.count_nonzero(reached))} of "
                f"{int(np.count_nonzero(valid))} nodes reached, {len(boundary)} boundary samples")
    return ReachableSet(model=model, source=x, lower=lower, spacing=spacing, shape=shape,
                        reached=reached.reshape(shape), cost=cost.reshape(shape), valid=valid.reshape(shape),
                        direction=direction, budget=budget, predecessors=predecessors,
                        boundary_samples=boundary, wrapped=tuple(bool(w) for w in wrapped))


def _boundary_samples(points, reached, valid, shape, spacing, wrapped) -> np.ndarray:
    """Midpoints of axis-neighbour pairs with differing membership."""
    reached = reached.reshape(shape)
    valid = valid.reshape(shape)
    grid = points.reshape(shape + (len(shape),))
    samples = []
    for axis in range(len(shape)):
        if wrapped[axis]:
            here = np.arange(shape[axis])
            there = np.roll(here, -1)
        else:
            here = np.arange(0, shape[axis] - 1)
            there = here + 1
        mask = (np.take(valid, here, axis=axis) & np.take(valid, there, axis=axis)
                & (np.take(reached, here, axis=axis) != np.take(reached, there, axis=axis)))
        base = np.take(grid, here, axis=axis)
        step = np.zeros(len(shape))
        step[axis] = 0.5 * spacing[axis]
        samples.append(base[mask] + step)
    return np.concatenate(samples, axis=0) if samples else np.zeros((0, len(shape)))


def predecessor_path(rs: ReachableSet, index) -> np.ndarray:
    """Lattice points of the cheapest route from the source to node ``index``."""
    count = int(np.prod(rs.shape))
    flat_index = int(np.ravel_multi_index(tuple(index), rs.shape)) if np.ndim(index) else int(index)
    if not rs.reached.reshape(-1)[flat_index]:
        raise InvalidArgument(f"node {index} is not reached", module='reachable', operation='predecessor_path')
    points = rs.node_points().reshape(-1, len(rs.shape))
    chain = []
    node = flat_index
    while node != count and node >= 0:
        chain.append(points[node])
        node = int(rs.predecessors[node])
    chain.append(rs.source)
    chain = np.array(chain[::-1])
    wrapped = np.asarray(rs.wrapped, dtype=bool)
    if np.any(wrapped):
        steps = _reduce(np.diff(chain, axis=0), rs.model.periods, wrapped)
        chain = np.vstack([chain[:1], chain[0] + np.cumsum(steps, axis=0)])
    return chain


def boundary_tangency_test(model: ManifoldModel, rs: ReachableSet, radius_factor: float = 3.0) -> Dict:
    """
    Compare boundary normals with the kernel of omega.

    Normals come from principal components of the boundary samples within
    ``radius_factor * h`` of each sample; the angle is measured against the
    covector omega_q.

    Raises:
        BoundaryEmpty: nothing reached, everything reached, or no boundary samples
    """
    considered = int(np.count_nonzero(rs.valid))
    reached = int(np.count_nonzero(rs.reached & rs.valid))
    samples = rs.boundary_samples if rs.boundary_samples is not None else np.zeros((0, model.dim))
    if reached == 0 or reached == considered or len(samples) == 0:
        raise BoundaryEmpty(f"{reached} of {considered} nodes reached; no boundary to test",
                            operation='boundary_tangency_test')
    tree = cKDTree(samples)
    neighbourhoods = tree.query_ball_point(samples, r=radius_factor * float(np.max(rs.spacing)))
    covectors = model.one_form_at(samples)
    angles = np.full(len(samples), np.nan)
    for k, neighbours in enumerate(neighbourhoods):
        if len(neighbours) < model.dim:
            continue
        local = samples[neighbours]
        centered = local - local.mean(axis=0)
        _, vectors = np.linalg.eigh(centered.T @ centered)
        normal = vectors[:, 0]
        covector = covectors[k] / np.linalg.norm(covectors[k])
        angles[k] = np.degrees(np.arccos(np.clip(abs(normal @ covector), 0.0, 1.0)))
    evaluated = np.isfinite(angles)
    if not np.any(evaluated):
        raise BoundaryEmpty('boundary samples too sparse for normal estimation', operation='boundary_tangency_test')
    density = np.abs(omega_wedge_domega(model, samples))
    report = {
        'samples': int(len(samples)),
        'evaluated': int(np.count_nonzero(evaluated)),
        'max_angle_deg': float(np.max(angles[evaluated])),
        'mean_angle_deg': float(np.mean(angles[evaluated])),
        'boundary_density_max': float(np.max(density)),
        'boundary_density_mean': float(np.mean(density)),
        'angles': angles,
    }
    logger.info(f"Boundary tangency on '{model.name}': max angle {report['max_angle_deg']:.3f} deg, "
                f"mean {report['mean_angle_deg']:.3f} deg over {report['evaluated']} samples")
    return report


def nonintegrability_scan(model: ManifoldModel, box=None, samples: int = 1000,
                          rng: Optional[np.random.Generator] = None) -> Dict:
    """
    Sample the omega ^ d omega density over a box.

    For dim 3 the values are the signed density, for dim 2 zero, and for
    higher dimensions the largest component magnitude (reported with
    ``extension=True``).
    """
    rng = rng or np.random.default_rng(Config.DEFAULT_SEED)
    box = np.column_stack([model.lower, model.upper]) if box is None else np.asarray(box, dtype=float)
    collected = []
    total = 0
    for _ in range(100):
        batch = rng.uniform(box[:, 0], box[:, 1], size=(samples, model.dim))
        ok = model.in_domain(batch) & (model.omega_norm(batch) >= model.tol_omega)
        collected.append(batch[ok])
        total += int(np.count_nonzero(ok))
        if total >= samples:
            break
    points = np.concatenate(collected, axis=0)[:samples]
    values = omega_wedge_domega(model, points)
    fraction = float(np.mean(np.abs(values) > NONZERO_THRESHOLD)) if len(values) else 0.0
    return {
        'dim': model.dim,
        'samples': int(len(points)),
        'points': points,
        'values': values,
        'fraction_nonzero': fraction,
        'extension': model.dim > 3,
    }


def propagate_many(model: ManifoldModel, sources: List[Sequence[float]], box, h, **kwargs) -> List[ReachableSet]:
    """Independent propagations from several sources on the worker pool."""
    with ThreadPoolExecutor(max_workers=Config().worker_count) as executor:
        futures = [executor.submit(propagate, model, source, box, h, **kwargs) for source in sources]
        return [future.result() for future in futures]
