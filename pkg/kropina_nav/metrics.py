"""
Kropina, Randers and Zermelo metric evaluation.

Notation used throughout: ``a = g0(v, v)``, ``b = omega(v)``. The Kropina
metric is ``K = -a / (2 b)`` on the admissible cone ``-b > tol_adm``. The
Randers family is ``F_eps = (sqrt(eps a + beta^2) + beta) / eps`` with
``beta = s b``; ``s = 1`` for the standard family and ``s = sqrt(1 - eps)``
for the Katok family.

The ``*_batch`` and ``*_derivatives`` helpers are vectorized and unchecked;
the public ``*_value`` operations validate their input.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .config import Config
from .exceptions import InadmissibleVector, NotCriticalWind, ParameterRangeError
from .manifold import ManifoldModel, sample_chart_points

logger = logging.getLogger(__name__)

STANDARD = 'standard'
KATOK = 'katok'
FAMILIES = (STANDARD, KATOK)


@dataclass(frozen=True)
class PointVector:
    """A chart point with a tangent vector and its cached invariants."""
    x: np.ndarray
    v: np.ndarray
    omega_v: float
    norm_sq: float
    tol_adm: float = Config.TOL_ADM

    @classmethod
    def at(cls, model: ManifoldModel, x, v, tol_adm: float = Config.TOL_ADM) -> 'PointVector':
        x = model.check_point(x, 'PointVector')
        v = np.asarray(v, dtype=float)
        if v.shape != (model.dim,):
            raise InadmissibleVector(f"tangent vector must have {model.dim} components", operation='PointVector')
        omega_v = float(model.one_form_at(x) @ v)
        norm_sq = float(v @ model.metric_at(x) @ v)
        return cls(x=x, v=v, omega_v=omega_v, norm_sq=norm_sq, tol_adm=tol_adm)

    @property
    def admissible(self) -> bool:
        return -self.omega_v > self.tol_adm


def family_scale(epsilon: float, family: str = STANDARD) -> float:
    """Factor multiplying omega in the Randers family."""
    if family == STANDARD:
        return 1.0
    if family == KATOK:
        return math.sqrt(1.0 - epsilon)
    raise ParameterRangeError(f"unknown Randers family '{family}'", operation='family_scale')


def check_epsilon(epsilon: float, operation: str = 'randers_value') -> float:
    if not (0.0 < epsilon <= 1.0):
        raise ParameterRangeError(f"epsilon must lie in (0, 1], got {epsilon}", operation=operation)
    return float(epsilon)


# -- vectorized primitives --------------------------------------------------

def quadratic_terms(model: ManifoldModel, x, v) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(a, b, g v, omega)`` for batches of points and vectors."""
    g = model.metric_at(x)
    omega = model.one_form_at(x)
    gv = np.einsum('...ij,...j->...i', g, v)
    a = np.einsum('...i,...i->...', gv, v)
    b = np.einsum('...i,...i->...', omega, v)
    return a, b, gv, omega


def kropina_batch(model: ManifoldModel, x, v, tol_adm: float = Config.TOL_ADM) -> np.ndarray:
    """Kropina values with ``inf`` outside the admissible cone."""
    a, b, _, _ = quadratic_terms(model, x, v)
    admissible = -b > tol_adm
    safe_b = np.where(admissible, b, -1.0)
    return np.where(admissible, -a / (2.0 * safe_b), np.inf)


def randers_batch(model: ManifoldModel, epsilon: float, x, v, family: str = STANDARD) -> np.ndarray:
    """Randers values of the chosen family, cancellation-free on the cone."""
    a, b, _, _ = quadratic_terms(model, x, v)
    beta = family_scale(epsilon, family) * b
    root = np.sqrt(epsilon * a + beta ** 2)
    # (r + beta) / eps == a / (r - beta); the second form is stable for beta < 0
    with np.errstate(divide='ignore', invalid='ignore'):
        stable = np.where(root - beta > 0, a / np.where(root - beta > 0, root - beta, 1.0), 0.0)
    return np.where(beta < 0, stable, (root + beta) / epsilon)


def kropina_derivatives(model: ManifoldModel, x, v) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``(K, dK/dx, dK/dv)`` for admissible batches.

    ``dK/dv = -g v / b + a omega / (2 b^2)`` and
    ``dK/dx_k = -d_k a / (2 b) + a d_k b / (2 b^2)``.
    """
    a, b, gv, omega = quadratic_terms(model, x, v)
    da = np.einsum('...kij,...i,...j->...k', model.metric_jet(x), v, v)
    db = np.einsum('...ki,...i->...k', model.one_form_jet(x), v)
    b_ = b[..., None]
    a_ = a[..., None]
    value = -a / (2.0 * b)
    d_v = -gv / b_ + a_ * omega / (2.0 * b_ ** 2)
    d_x = -da / (2.0 * b_) + a_ * db / (2.0 * b_ ** 2)
    return value, d_x, d_v


def randers_derivatives(model: ManifoldModel, epsilon: float, x, v,
                        family: str = STANDARD) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(F, dF/dx, dF/dv)`` of the Randers family for ``v != 0``."""
    scale = family_scale(epsilon, family)
    a, b, gv, omega = quadratic_terms(model, x, v)
    da = np.einsum('...kij,...i,...j->...k', model.metric_jet(x), v, v)
    dbeta_x = scale * np.einsum('...ki,...i->...k', model.one_form_jet(x), v)
    dbeta_v = scale * omega
    beta = scale * b
    root = np.sqrt(epsilon * a + beta ** 2)
    r_ = root[..., None]
    beta_ = beta[..., None]
    droot_x = (epsilon * da + 2.0 * beta_ * dbeta_x) / (2.0 * r_)
    droot_v = (epsilon * 2.0 * gv + 2.0 * beta_ * dbeta_v) / (2.0 * r_)
    value = randers_batch(model, epsilon, x, v, family)
    # F = a / (r - beta) on the cone; derivative of that form avoids cancellation
    gap = np.where(root - beta > 0, root - beta, 1.0)[..., None]
    a_ = a[..., None]
    cone = (beta < 0)[..., None]
    d_x = np.where(cone, da / gap - a_ * (droot_x - dbeta_x) / gap ** 2, (droot_x + dbeta_x) / epsilon)
    d_v = np.where(cone, 2.0 * gv / gap - a_ * (droot_v - dbeta_v) / gap ** 2, (droot_v + dbeta_v) / epsilon)
    return value, d_x, d_v


def fundamental_tensor_batch(model: ManifoldModel, x, v) -> np.ndarray:
    """Analytic Hessian of ``K^2 / 2`` in ``v`` for admissible batches."""
    a, b, gv, omega = quadratic_terms(model, x, v)
    g = model.metric_at(x)
    a_ = a[..., None, None]
    b_ = b[..., None, None]
    outer_gv = np.einsum('...i,...j->...ij', gv, gv)
    mixed = np.einsum('...i,...j->...ij', gv, omega)
    outer_omega = np.einsum('...i,...j->...ij', omega, omega)
    return (a_ * g / (2.0 * b_ ** 2) + outer_gv / b_ ** 2
            - a_ * (mixed + np.swapaxes(mixed, -1, -2)) / b_ ** 3
            + 3.0 * a_ ** 2 * outer_omega / (4.0 * b_ ** 4))


# -- checked operations -------------------------------------------------------

def _require_admissible(pv: PointVector, operation: str):
    if not pv.admissible:
        raise InadmissibleVector(f"-omega(v) = {-pv.omega_v:.3g} is not above tol_adm = {pv.tol_adm:g}",
                                 operation=operation)


def kropina_value(model: ManifoldModel, pv: PointVector) -> float:
    """
    Kropina metric ``K(v) = -g0(v, v) / (2 omega(v))``.

    Raises:
        InadmissibleVector: when ``-omega(v) <= tol_adm``
    """
    _require_admissible(pv, 'kropina_value')
    return -pv.norm_sq / (2.0 * pv.omega_v)


def fundamental_tensor(model: ManifoldModel, pv: PointVector) -> np.ndarray:
    """Fundamental tensor (Hessian of ``K^2 / 2``) at an admissible vector."""
    _require_admissible(pv, 'fundamental_tensor')
    return fundamental_tensor_batch(model, pv.x, pv.v)


def randers_value(model: ManifoldModel, epsilon: float, pv: PointVector, family: str = STANDARD) -> float:
    """
    Randers approximation ``F_eps``, defined on the whole tangent space.

    Raises:
        ParameterRangeError: epsilon outside (0, 1], unknown family or ``v = 0``
    """
    check_epsilon(epsilon)
    if not np.any(pv.v):
        raise ParameterRangeError('Randers value requested for the zero vector', operation='randers_value')
    return float(randers_batch(model, epsilon, pv.x, pv.v, family))


# -- Zermelo navigation --------------------------------------------------------

@dataclass(frozen=True)
class ZermeloData:
    """
    Zermelo navigation data: a sea metric ``h`` and a wind ``W`` on a chart.

    The chart (box, periodicity, guard) is borrowed from ``chart``.
    """
    chart: ManifoldModel
    metric_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    wind_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    metric_jet_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @classmethod
    def from_model(cls, model: ManifoldModel) -> 'ZermeloData':
        """Critical wind ``W = omega#`` of a Kropina model."""
        def wind(x):
            return np.linalg.solve(model.metric_at(x), model.one_form_at(x)[..., None])[..., 0]
        return cls(chart=model, metric_fn=model.metric_fn, wind_fn=wind, metric_jet_fn=model.metric_jet_fn)

    def metric_at(self, x) -> np.ndarray:
        return np.asarray(self.metric_fn(np.asarray(x, dtype=float)), dtype=float)

    def wind_at(self, x) -> np.ndarray:
        return np.asarray(self.wind_fn(np.asarray(x, dtype=float)), dtype=float)

    def wind_norm(self, x) -> np.ndarray:
        h = self.metric_at(x)
        w = self.wind_at(x)
        return np.sqrt(np.einsum('...i,...ij,...j->...', w, h, w))


def kropina_from_wind(zd: ZermeloData, samples: int = 256,
                      rng: Optional[np.random.Generator] = None, tolerance: float = 1e-6) -> ManifoldModel:
    """
    Kropina model with ``omega = h(W, .)`` for critical wind data.

    Raises:
        NotCriticalWind: when ``|W|_h`` deviates from 1 by more than ``tolerance``
            at any sampled point
    """
    points = sample_chart_points(replace(zd.chart, tol_omega=0.0), samples, rng)
    deviation = float(np.max(np.abs(zd.wind_norm(points) - 1.0)))
    if deviation > tolerance:
        raise NotCriticalWind(f"wind norm deviates from 1 by {deviation:.3g} (tolerance {tolerance:g})",
                              operation='kropina_from_wind')
    logger.debug(f"Critical wind verified on {samples} points, max deviation {deviation:.2e}")

    def one_form(x):
        return np.einsum('...ij,...j->...i', zd.metric_at(x), zd.wind_at(x))

    return replace(zd.chart, name=f"{zd.chart.name}:wind", metric_fn=zd.metric_fn, one_form_fn=one_form,
                   metric_jet_fn=zd.metric_jet_fn, one_form_jet_fn=None)


def zermelo_randers_value(h: np.ndarray, wind: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Randers metric solving Zermelo's problem for a mild wind (``h(W, W) < 1``).

    ``F(v) = (sqrt(lam h(v, v) + h(W, v)^2) - h(W, v)) / lam`` with
    ``lam = 1 - h(W, W)``. Vectorized over leading axes.
    """
    hw = np.einsum('...ij,...j->...i', h, wind)
    lam = 1.0 - np.einsum('...i,...i->...', hw, wind)
    if np.any(lam <= 0):
        raise NotCriticalWind('Zermelo-Randers construction needs |W|_h < 1', operation='zermelo_randers_value')
    hvv = np.einsum('...i,...ij,...j->...', v, h, v)
    hwv = np.einsum('...i,...i->...', hw, v)
    return (np.sqrt(lam * hvv + hwv ** 2) - hwv) / lam


def katok_zermelo_data(model: ManifoldModel, epsilon: float) -> ZermeloData:
    """
    Zermelo data of the Katok family:
    ``h_eps = g0 / (eps + (1 - eps) |omega|^2)`` and ``W_eps = -sqrt(1 - eps) omega#``.
    """
    check_epsilon(epsilon, 'katok_zermelo_data')
    scale = math.sqrt(1.0 - epsilon)

    def conformal(x):
        return epsilon + (1.0 - epsilon) * model.omega_norm(x) ** 2

    def metric(x):
        return model.metric_at(x) / conformal(x)[..., None, None]

    def wind(x):
        return -scale * np.linalg.solve(model.metric_at(x), model.one_form_at(x)[..., None])[..., 0]

    return ZermeloData(chart=model, metric_fn=metric, wind_fn=wind)
