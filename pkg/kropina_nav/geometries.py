"""
Builtin geometries.

Every builtin ships analytic jets. The registry ``BUILTINS`` maps the names
accepted in manifold spec files to factories taking keyword parameters.
"""

import math
from typing import Dict, Callable, Optional, Sequence

import numpy as np

from .exceptions import DomainError
from .manifold import ManifoldModel


def _constant_field(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    return lambda x: np.broadcast_to(values, np.shape(x)[:-1] + values.shape).copy()


def flat_constant_form(dim: int = 2, covector: Optional[Sequence[float]] = None,
                       half_width: float = 10.0) -> ManifoldModel:
    """Euclidean space with a constant one-form (default ``omega = -dx1``)."""
    c = np.zeros(dim)
    if covector is None:
        c[0] = -1.0
    else:
        c = np.asarray(covector, dtype=float)
    if c.shape != (dim,):
        raise DomainError(f"covector must have {dim} entries", operation='flat_constant_form')
    return ManifoldModel(
        name='flat',
        dim=dim,
        lower=(-half_width,) * dim,
        upper=(half_width,) * dim,
        periodic=(False,) * dim,
        metric_fn=_constant_field(np.eye(dim)),
        one_form_fn=_constant_field(c),
        metric_jet_fn=_constant_field(np.zeros((dim, dim, dim))),
        one_form_jet_fn=_constant_field(np.zeros((dim, dim))),
    )


def flat_torus(dim: int = 2, covector: Optional[Sequence[float]] = None,
               killing: Optional[Sequence[float]] = None, period: float = 1.0) -> ManifoldModel:
    """
    Flat torus R^dim / (period Z)^dim with a constant one-form and a constant
    Killing field (default ``omega = -dx1``, ``Y = d/dx1``).
    """
    c = np.zeros(dim)
    c[0] = -1.0
    if covector is not None:
        c = np.asarray(covector, dtype=float)
    y = np.zeros(dim)
    y[0] = 1.0
    if killing is not None:
        y = np.asarray(killing, dtype=float)
    return ManifoldModel(
        name='torus',
        dim=dim,
        lower=(0.0,) * dim,
        upper=(float(period),) * dim,
        periodic=(True,) * dim,
        metric_fn=_constant_field(np.eye(dim)),
        one_form_fn=_constant_field(c),
        metric_jet_fn=_constant_field(np.zeros((dim, dim, dim))),
        one_form_jet_fn=_constant_field(np.zeros((dim, dim))),
        killing_fn=_constant_field(y),
    )


def heisenberg_contact(sign: float = -1.0, half_width: float = 2.0) -> ManifoldModel:
    """Euclidean R^3 with the contact form ``omega = sign * (dz - y dx)``."""
    sign = float(sign)

    def one_form(x):
        x = np.asarray(x, dtype=float)
        return sign * np.stack([-x[..., 1], np.zeros(x.shape[:-1]), np.ones(x.shape[:-1])], axis=-1)

    jet = np.zeros((3, 3))
    jet[1, 0] = -sign  # d_y omega_x
    return ManifoldModel(
        name='heisenberg',
        dim=3,
        lower=(-half_width,) * 3,
        upper=(half_width,) * 3,
        periodic=(False,) * 3,
        metric_fn=_constant_field(np.eye(3)),
        one_form_fn=one_form,
        metric_jet_fn=_constant_field(np.zeros((3, 3, 3))),
        one_form_jet_fn=_constant_field(jet),
    )


def round_sphere_rotation() -> ManifoldModel:
    """
    Round S^2 in coordinates (theta, phi) with the rotation field d/dphi and
    ``omega = -g0(d/dphi, .)``; omega vanishes at the poles.
    """
    def metric(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(x[..., 0]) ** 2
        return g

    def metric_jet(x):
        x = np.asarray(x, dtype=float)
        jet = np.zeros(x.shape[:-1] + (2, 2, 2))
        jet[..., 0, 1, 1] = np.sin(2 * x[..., 0])
        return jet

    def one_form(x):
        x = np.asarray(x, dtype=float)
        omega = np.zeros(x.shape)
        omega[..., 1] = -np.sin(x[..., 0]) ** 2
        return omega

    def one_form_jet(x):
        x = np.asarray(x, dtype=float)
        jet = np.zeros(x.shape[:-1] + (2, 2))
        jet[..., 0, 1] = -np.sin(2 * x[..., 0])
        return jet

    def guard(x):
        theta = np.asarray(x, dtype=float)[..., 0]
        return np.minimum(theta, math.pi - theta)

    return ManifoldModel(
        name='sphere_rotation',
        dim=2,
        lower=(0.0, 0.0),
        upper=(math.pi, 2 * math.pi),
        periodic=(False, True),
        metric_fn=metric,
        one_form_fn=one_form,
        metric_jet_fn=metric_jet,
        one_form_jet_fn=one_form_jet,
        killing_fn=_constant_field(np.array([0.0, 1.0])),
        guard_fn=guard,
    )


def round_sphere_hopf(m: int = 2) -> ManifoldModel:
    """
    Round S^(2m-1) in Hopf-type coordinates with omega = -g0(V, .) for the
    Hopf field V.

    Coordinates are m-1 angles theta_j in (0, pi/2) fixing the moduli
    r_1 = cos(theta_1), r_2 = sin(theta_1) cos(theta_2), ..., r_m = prod sin,
    followed by m phases xi_k in [0, 2 pi). The metric is diagonal:
    ``prod_{i<j} sin^2(theta_i)`` on theta_j and ``r_k^2`` on xi_k, so each
    entry is a product of sin^2 and cos^2 factors. V = sum_k d/dxi_k has unit
    length everywhere and every orbit of V is a great circle.
    """
    if m < 2:
        raise DomainError('round_sphere_hopf needs m >= 2 (dimension 2m-1 >= 3)', operation='round_sphere_hopf')
    angles = m - 1
    dim = 2 * m - 1
    sin_exp = np.zeros((dim, angles))
    cos_exp = np.zeros((dim, angles))
    for j in range(angles):
        sin_exp[j, :j] = 1.0
    for k in range(m):
        sin_exp[angles + k, :min(k, angles)] = 1.0
        if k < angles:
            cos_exp[angles + k, k] = 1.0

    def entries(x):
        theta = np.asarray(x, dtype=float)[..., None, :angles]
        factors = np.sin(theta) ** (2 * sin_exp) * np.cos(theta) ** (2 * cos_exp)
        return np.prod(factors, axis=-1)

    def entries_jet(x):
        # d_l entry_e = entry_e * (2 S[e,l] cot(theta_l) - 2 C[e,l] tan(theta_l))
        theta = np.asarray(x, dtype=float)[..., :angles]
        values = entries(x)
        log_derivative = (2 * sin_exp / np.tan(theta)[..., None, :]
                          - 2 * cos_exp * np.tan(theta)[..., None, :])
        return np.moveaxis(values[..., :, None] * log_derivative, -1, -2)  # (..., l, e)

    def metric(x):
        values = entries(x)
        return values[..., :, None] * np.eye(dim)

    def metric_jet(x):
        x = np.asarray(x, dtype=float)
        jet = np.zeros(x.shape[:-1] + (dim, dim, dim))
        jet[..., :angles, :, :] = entries_jet(x)[..., :, :, None] * np.eye(dim)
        return jet

    def one_form(x):
        x = np.asarray(x, dtype=float)
        omega = np.zeros(x.shape)
        omega[..., angles:] = -entries(x)[..., angles:]
        return omega

    def one_form_jet(x):
        x = np.asarray(x, dtype=float)
        jet = np.zeros(x.shape[:-1] + (dim, dim))
        jet[..., :angles, angles:] = -entries_jet(x)[..., :, angles:]
        return jet

    hopf = np.zeros(dim)
    hopf[angles:] = 1.0

    def guard(x):
        theta = np.asarray(x, dtype=float)[..., :angles]
        return np.min(np.minimum(theta, math.pi / 2 - theta), axis=-1)

    return ManifoldModel(
        name=f'sphere_hopf_{dim}',
        dim=dim,
        lower=(0.0,) * angles + (0.0,) * m,
        upper=(math.pi / 2,) * angles + (2 * math.pi,) * m,
        periodic=(False,) * angles + (True,) * m,
        metric_fn=metric,
        one_form_fn=one_form,
        metric_jet_fn=metric_jet,
        one_form_jet_fn=one_form_jet,
        killing_fn=_constant_field(hopf),
        guard_fn=guard,
    )


def hopf_circle(m: int = 2, angle: float = math.pi / 4, samples: int = 256) -> np.ndarray:
    """Points of the Hopf orbit through the moduli angles all equal to ``angle``."""
    s = np.arange(samples) / samples
    points = np.zeros((samples, 2 * m - 1))
    points[:, :m - 1] = angle
    points[:, m - 1:] = 2 * math.pi * s[:, None]
    return points


BUILTINS: Dict[str, Callable[..., ManifoldModel]] = {
    'flat': flat_constant_form,
    'torus': flat_torus,
    'heisenberg': heisenberg_contact,
    'sphere_rotation': round_sphere_rotation,
    'sphere_hopf': round_sphere_hopf,
}
