"""
Chart-based manifold models for Kropina Nav.

A model carries the Riemannian metric g0 and the one-form omega of a Kropina
space on a single chart (a box, possibly periodic along some axes), the first
derivatives of both, and optionally a Killing field Y. All closures are
vectorized: they accept points of shape ``(..., dim)``.

Jet layout: ``metric_jet(x)[..., k, i, j] = d_k g_ij`` and
``one_form_jet(x)[..., k, i] = d_k omega_i``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .config import Config
from .exceptions import ChartGuardError, DomainError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


def central_difference_jet(func: ArrayFn, x: np.ndarray, h: float) -> np.ndarray:
    """
    Fourth-order central differences of ``func`` at ``x``.

    Returns an array with the derivative axis inserted right after the batch
    axes: ``out[..., k, *value_shape] = d_k func(x)``.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    slices = []
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        slices.append((-func(x + 2 * e) + 8 * func(x + e) - 8 * func(x - e) + func(x - 2 * e)) / (12 * h))
    batch = x.ndim - 1
    return np.stack(slices, axis=batch)


@dataclass(frozen=True)
class ManifoldModel:
    """
    Geometry of a Kropina space on one chart.

    Models are immutable and their closures pure, so a model can be shared
    across threads.
    """
    name: str
    dim: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    periodic: Tuple[bool, ...]
    metric_fn: ArrayFn = field(compare=False, repr=False)
    one_form_fn: ArrayFn = field(compare=False, repr=False)
    metric_jet_fn: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    one_form_jet_fn: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    killing_fn: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    killing_jet_fn: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    guard_fn: Optional[ArrayFn] = field(default=None, compare=False, repr=False)
    guard_band: float = Config.GUARD_BAND
    tol_omega: float = Config.TOL_OMEGA
    fd_step: float = Config.FD_STEP

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError(f"dimension must be at least 2, got {self.dim}", operation='ManifoldModel')
        for name in ('lower', 'upper', 'periodic'):
            if len(getattr(self, name)) != self.dim:
                raise DomainError(f"'{name}' must have {self.dim} entries", operation='ManifoldModel')

    # -- evaluation -------------------------------------------------------

    def metric_at(self, x) -> np.ndarray:
        return np.asarray(self.metric_fn(np.asarray(x, dtype=float)), dtype=float)

    def one_form_at(self, x) -> np.ndarray:
        return np.asarray(self.one_form_fn(np.asarray(x, dtype=float)), dtype=float)

    def metric_jet(self, x) -> np.ndarray:
        if self.metric_jet_fn is not None:
            return np.asarray(self.metric_jet_fn(np.asarray(x, dtype=float)), dtype=float)
        return central_difference_jet(self.metric_at, x, self.fd_step)

    def one_form_jet(self, x) -> np.ndarray:
        if self.one_form_jet_fn is not None:
            return np.asarray(self.one_form_jet_fn(np.asarray(x, dtype=float)), dtype=float)
        return central_difference_jet(self.one_form_at, x, self.fd_step)

    def killing_at(self, x) -> np.ndarray:
        if self.killing_fn is None:
            raise DomainError(f"model '{self.name}' has no Killing field", operation='killing_at')
        return np.asarray(self.killing_fn(np.asarray(x, dtype=float)), dtype=float)

    def killing_jet(self, x) -> np.ndarray:
        if self.killing_jet_fn is not None:
            return np.asarray(self.killing_jet_fn(np.asarray(x, dtype=float)), dtype=float)
        return central_difference_jet(self.killing_at, x, self.fd_step)

    # -- chart bookkeeping -------------------------------------------------

    @property
    def periods(self) -> np.ndarray:
        """Period per axis (zero on non-periodic axes)."""
        span = np.asarray(self.upper) - np.asarray(self.lower)
        return np.where(np.asarray(self.periodic), span, 0.0)

    def wrap(self, x) -> np.ndarray:
        """Reduce periodic coordinates into ``[lower, upper)``."""
        x = np.array(x, dtype=float)
        lower = np.asarray(self.lower)
        for axis in range(self.dim):
            if self.periodic[axis]:
                period = self.upper[axis] - self.lower[axis]
                x[..., axis] = lower[axis] + np.mod(x[..., axis] - lower[axis], period)
        return x

    def wrapped_difference(self, a, b) -> np.ndarray:
        """``a - b`` with periodic axes reduced to the shortest representative."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        periods = self.periods
        mask = periods > 0
        if np.any(mask):
            d = np.array(d)
            d[..., mask] = d[..., mask] - periods[mask] * np.round(d[..., mask] / periods[mask])
        return d

    def in_domain(self, x) -> np.ndarray:
        """Vectorized membership in the chart box and outside the guard band."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for axis in range(self.dim):
            if not self.periodic[axis]:
                ok &= (x[..., axis] >= self.lower[axis]) & (x[..., axis] <= self.upper[axis])
        if self.guard_fn is not None:
            ok &= np.asarray(self.guard_fn(x)) >= self.guard_band
        return ok

    def check_point(self, x, operation: str = 'check_point') -> np.ndarray:
        """
        Validate a single chart point.

        Raises:
            DomainError: outside the box on a non-periodic axis
            ChartGuardError: inside the guard band of a chart singularity
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise DomainError(f"expected a finite point of dimension {self.dim}, got {x!r}", operation=operation)
        for axis in range(self.dim):
            if not self.periodic[axis] and not (self.lower[axis] <= x[axis] <= self.upper[axis]):
                raise DomainError(f"coordinate {axis + 1} = {x[axis]:.6g} outside "
                                  f"[{self.lower[axis]:.6g}, {self.upper[axis]:.6g}] in '{self.name}'",
                                  operation=operation)
        if self.guard_fn is not None:
            distance = float(self.guard_fn(x))
            if distance < self.guard_band:
                raise ChartGuardError(f"point {np.round(x, 6).tolist()} is {distance:.3g} from a chart "
                                      f"singularity of '{self.name}' (guard band {self.guard_band:g})",
                                      operation=operation)
        return x

    def omega_norm(self, x) -> np.ndarray:
        """g0-norm of omega, vectorized."""
        omega = self.one_form_at(x)
        inverse = np.linalg.inv(self.metric_at(x))
        return np.sqrt(np.einsum('...i,...ij,...j->...', omega, inverse, omega))


def sample_chart_points(model: ManifoldModel, count: int, rng: Optional[np.random.Generator] = None,
                        margin: float = 0.0) -> np.ndarray:
    """
    Uniform random chart points outside the guard band and the zero set of omega.

    ``margin`` shrinks the box on non-periodic axes.
    """
    rng = rng or np.random.default_rng(Config.DEFAULT_SEED)
    lower = np.asarray(model.lower, dtype=float)
    upper = np.asarray(model.upper, dtype=float)
    shrink = np.where(np.asarray(model.periodic), 0.0, margin)
    accepted = []
    total = 0
    for _ in range(100):
        batch = rng.uniform(lower + shrink, upper - shrink, size=(max(count, 16), model.dim))
        ok = model.in_domain(batch) & (model.omega_norm(batch) >= model.tol_omega)
        accepted.append(batch[ok])
        total += int(np.count_nonzero(ok))
        if total >= count:
            break
    points = np.concatenate(accepted, axis=0)
    if len(points) < count:
        raise DomainError(f"could not sample {count} valid points in '{model.name}'", operation='sample_chart_points')
    return points[:count]


def with_one_form_scale(model: ManifoldModel, scale: float) -> ManifoldModel:
    """Model with omega replaced by ``scale * omega`` (sign duality, Katok family)."""
    one_form = model.one_form_fn
    jet = model.one_form_jet_fn
    return replace(
        model,
        name=model.name if scale == 1 else f"{model.name}*{scale:g}",
        one_form_fn=lambda x: scale * one_form(x),
        one_form_jet_fn=None if jet is None else (lambda x: scale * jet(x)),
    )


# -- differential-geometric operations ------------------------------------

def christoffel_at(model: ManifoldModel, x) -> np.ndarray:
    """
    Christoffel symbols of g0, ``gamma[i, j, k] = Gamma^i_jk``.

    Raises:
        DomainError, ChartGuardError: when ``x`` is not a valid chart point
    """
    x = model.check_point(x, 'christoffel_at')
    return christoffel_batch(model, x)


def christoffel_batch(model: ManifoldModel, x) -> np.ndarray:
    """Unchecked, vectorized Christoffel symbols."""
    inverse = np.linalg.inv(model.metric_at(x))
    d = model.metric_jet(x)
    # Gamma_{l,jk} = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    lowered = 0.5 * (np.einsum('...jlk->...ljk', d) + np.einsum('...klj->...ljk', d) - d)
    return np.einsum('...il,...ljk->...ijk', inverse, lowered)


def d_omega_at(model: ManifoldModel, x) -> np.ndarray:
    """Exterior derivative of omega, ``Omega[i, j] = d_i omega_j - d_j omega_i``."""
    x = model.check_point(x, 'd_omega_at')
    return d_omega_batch(model, x)


def d_omega_batch(model: ManifoldModel, x) -> np.ndarray:
    jet = model.one_form_jet(x)
    return jet - np.swapaxes(jet, -1, -2)


def sharp(model: ManifoldModel, x, covector) -> np.ndarray:
    """Raise an index with g0."""
    x = model.check_point(x, 'sharp')
    return np.linalg.solve(model.metric_at(x), np.asarray(covector, dtype=float))


def flat(model: ManifoldModel, x, vector) -> np.ndarray:
    """Lower an index with g0."""
    x = model.check_point(x, 'flat')
    return model.metric_at(x) @ np.asarray(vector, dtype=float)


def omega_wedge_domega(model: ManifoldModel, x) -> np.ndarray:
    """
    Non-integrability density of omega.

    dim 3: the coefficient of ``dx1^dx2^dx3`` in omega ^ d omega. dim 2: zero.
    dim > 3: the largest absolute component of the 3-form omega ^ d omega,
    a rank proxy that vanishes exactly where the kernel distribution is
    integrable to first order.
    """
    x = np.asarray(x, dtype=float)
    omega = model.one_form_at(x)
    big = d_omega_batch(model, x)
    if model.dim == 2:
        return np.zeros(x.shape[:-1])
    triples = [(i, j, k) for i in range(model.dim) for j in range(i + 1, model.dim) for k in range(j + 1, model.dim)]
    components = [omega[..., i] * big[..., j, k] + omega[..., j] * big[..., k, i] + omega[..., k] * big[..., i, j]
                  for i, j, k in triples]
    if model.dim == 3:
        return components[0]
    return np.max(np.abs(np.stack(components, axis=-1)), axis=-1)


def lie_derivative_residuals(model: ManifoldModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Max-norm of ``L_Y g0`` and ``L_Y omega`` at the points ``x``.

    ``(L_Y g)_ij = Y^k d_k g_ij + g_kj d_i Y^k + g_ik d_j Y^k`` and
    ``(L_Y omega)_i = Y^k d_k omega_i + omega_k d_i Y^k``.
    """
    x = np.asarray(x, dtype=float)
    y = model.killing_at(x)
    dy = model.killing_jet(x)  # dy[..., i, k] = d_i Y^k
    g = model.metric_at(x)
    lie_g = (np.einsum('...k,...kij->...ij', y, model.metric_jet(x))
             + np.einsum('...kj,...ik->...ij', g, dy)
             + np.einsum('...ik,...jk->...ij', g, dy))
    omega = model.one_form_at(x)
    lie_omega = np.einsum('...k,...ki->...i', y, model.one_form_jet(x)) + np.einsum('...k,...ik->...i', omega, dy)
    return np.max(np.abs(lie_g), axis=(-2, -1)), np.max(np.abs(lie_omega), axis=-1)
