#!/usr/bin/env python3
"""
Unit tests for Kropina, Randers and Zermelo metric evaluation.
"""

import math
import unittest
import sys
import os

import numpy as np

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav.exceptions import ChartGuardError, InadmissibleVector, NotCriticalWind, ParameterRangeError
from kropina_nav.geometries import flat_constant_form, round_sphere_hopf, round_sphere_rotation
from kropina_nav.manifold import sample_chart_points
from kropina_nav.metrics import (KATOK, PointVector, ZermeloData, check_epsilon, family_scale, fundamental_tensor,
                                 katok_zermelo_data, kropina_batch, kropina_derivatives, kropina_from_wind,
                                 kropina_value, randers_batch, randers_derivatives, randers_value,
                                 zermelo_randers_value)


class TestKropinaValue(unittest.TestCase):
    """Kropina metric on the admissible cone."""

    def setUp(self):
        self.flat = flat_constant_form()
        self.origin = np.zeros(2)

    def test_flat_values(self):
        self.assertAlmostEqual(kropina_value(self.flat, PointVector.at(self.flat, self.origin, [1.0, 0.0])), 0.5)
        self.assertAlmostEqual(kropina_value(self.flat, PointVector.at(self.flat, self.origin, [1.0, 0.5])), 0.625)

    def test_kernel_vector_is_inadmissible(self):
        pv = PointVector.at(self.flat, self.origin, [0.0, 1.0])
        self.assertFalse(pv.admissible)
        with self.assertRaises(InadmissibleVector) as ctx:
            kropina_value(self.flat, pv)
        self.assertIn('[metrics.kropina_value]', str(ctx.exception))

    def test_backward_vector_is_inadmissible(self):
        with self.assertRaises(InadmissibleVector):
            kropina_value(self.flat, PointVector.at(self.flat, self.origin, [-1.0, 0.0]))

    def test_positive_homogeneity(self):
        v = np.array([0.7, -0.3])
        base = kropina_value(self.flat, PointVector.at(self.flat, self.origin, v))
        for scale in (0.1, 2.0, 37.0):
            scaled = kropina_value(self.flat, PointVector.at(self.flat, self.origin, scale * v))
            self.assertAlmostEqual(scaled, scale * base, places=10)

    def test_batch_is_infinite_outside_cone(self):
        values = kropina_batch(self.flat, np.zeros((3, 2)), np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 2.0]]))
        self.assertAlmostEqual(values[0], 0.5)
        self.assertTrue(np.isinf(values[1]))
        self.assertTrue(np.isinf(values[2]))

    def test_guard_band_is_enforced(self):
        sphere = round_sphere_rotation()
        with self.assertRaises(ChartGuardError):
            PointVector.at(sphere, [math.pi - 1e-5, 0.0], [0.0, -1.0])

    def test_derivatives_match_finite_differences(self):
        sphere = round_sphere_rotation()
        x = np.array([1.0, 0.3])
        v = np.array([0.2, -0.8])
        _, d_x, d_v = kropina_derivatives(sphere, x, v)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd_x = (kropina_batch(sphere, x + e, v) - kropina_batch(sphere, x - e, v)) / (2 * h)
            fd_v = (kropina_batch(sphere, x, v + e) - kropina_batch(sphere, x, v - e)) / (2 * h)
            self.assertAlmostEqual(float(d_x[k]), float(fd_x), places=6)
            self.assertAlmostEqual(float(d_v[k]), float(fd_v), places=6)

    def test_fundamental_tensor_matches_hessian(self):
        model = round_sphere_hopf(2)
        x = np.array([0.7, 1.0, 2.0])
        v = np.array([0.1, 0.9, 0.4])
        tensor = fundamental_tensor(model, PointVector.at(model, x, v))

        def energy(w):
            return 0.5 * float(kropina_batch(model, x, w)) ** 2

        h = 1e-4
        hessian = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                ei = np.zeros(3)
                ej = np.zeros(3)
                ei[i] = h
                ej[j] = h
                hessian[i, j] = (energy(v + ei + ej) - energy(v + ei - ej)
                                 - energy(v - ei + ej) + energy(v - ei - ej)) / (4 * h * h)
        np.testing.assert_allclose(tensor, hessian, atol=1e-5)
        np.testing.assert_allclose(tensor, tensor.T)
        self.assertTrue(np.all(np.linalg.eigvalsh(tensor) > 0))


class TestRanders(unittest.TestCase):
    """Randers approximations of the Kropina metric."""

    def setUp(self):
        self.flat = flat_constant_form()
        self.origin = np.zeros(2)

    def test_epsilon_range(self):
        for bad in (0.0, -0.5, 1.5):
            with self.assertRaises(ParameterRangeError):
                check_epsilon(bad)
        self.assertEqual(check_epsilon(1.0), 1.0)

    def test_unknown_family(self):
        with self.assertRaises(ParameterRangeError):
            family_scale(0.5, 'exotic')
        self.assertAlmostEqual(family_scale(0.75, KATOK), 0.5)

    def test_zero_vector_rejected(self):
        with self.assertRaises(ParameterRangeError):
            randers_value(self.flat, 0.5, PointVector.at(self.flat, self.origin, [0.0, 0.0]))

    def test_randers_defined_off_cone(self):
        value = randers_value(self.flat, 0.25, PointVector.at(self.flat, self.origin, [0.0, 1.0]))
        self.assertAlmostEqual(value, math.sqrt(0.25) / 0.25)

    def test_randers_increases_to_kropina(self):
        v = np.array([1.0, 0.5])
        kropina = kropina_value(self.flat, PointVector.at(self.flat, self.origin, v))
        previous = 0.0
        for epsilon in (1.0, 0.5, 0.1, 1e-3, 1e-6):
            value = randers_value(self.flat, epsilon, PointVector.at(self.flat, self.origin, v))
            self.assertLessEqual(value, kropina + 1e-12)
            self.assertGreaterEqual(value, previous)
            previous = value
        self.assertAlmostEqual(previous, kropina, places=5)

    def test_randers_below_kropina_on_random_vectors(self):
        model = round_sphere_hopf(2)
        rng = np.random.default_rng(17)
        points = sample_chart_points(model, 100, rng)
        vectors = rng.normal(size=(100, 3))
        kropina = kropina_batch(model, points, vectors)
        for epsilon in (0.9, 0.3, 0.01):
            randers = randers_batch(model, epsilon, points, vectors)
            admissible = np.isfinite(kropina)
            self.assertTrue(np.all(randers[admissible] <= kropina[admissible] + 1e-12))

    def test_randers_derivatives_match_finite_differences(self):
        sphere = round_sphere_rotation()
        x = np.array([1.2, 0.1])
        h = 1e-6
        for v in (np.array([0.3, -0.6]), np.array([0.3, 0.6])):
            _, d_x, d_v = randers_derivatives(sphere, 0.4, x, v, KATOK)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                fd_x = (randers_batch(sphere, 0.4, x + e, v, KATOK) - randers_batch(sphere, 0.4, x - e, v, KATOK))
                fd_v = (randers_batch(sphere, 0.4, x, v + e, KATOK) - randers_batch(sphere, 0.4, x, v - e, KATOK))
                self.assertAlmostEqual(float(d_x[k]), float(fd_x) / (2 * h), places=6)
                self.assertAlmostEqual(float(d_v[k]), float(fd_v) / (2 * h), places=6)


class TestZermelo(unittest.TestCase):
    """Zermelo navigation data."""

    def test_hopf_wind_is_critical(self):
        model = round_sphere_hopf(2)
        rebuilt = kropina_from_wind(ZermeloData.from_model(model))
        points = sample_chart_points(model, 20, np.random.default_rng(2))
        np.testing.assert_allclose(rebuilt.one_form_at(points), model.one_form_at(points), atol=1e-12)

    def test_rotation_wind_is_not_critical(self):
        with self.assertRaises(NotCriticalWind) as ctx:
            kropina_from_wind(ZermeloData.from_model(round_sphere_rotation()))
        self.assertIn('deviates from 1', str(ctx.exception))

    def test_zero_wind_gives_norm(self):
        h = np.eye(2)
        value = zermelo_randers_value(h, np.zeros(2), np.array([3.0, 4.0]))
        self.assertAlmostEqual(float(value), 5.0)

    def test_strong_wind_rejected(self):
        with self.assertRaises(NotCriticalWind):
            zermelo_randers_value(np.eye(2), np.array([1.0, 0.0]), np.array([1.0, 1.0]))

    def test_katok_zermelo_matches_randers_family(self):
        model = round_sphere_hopf(2)
        rng = np.random.default_rng(4)
        points = sample_chart_points(model, 50, rng)
        vectors = rng.normal(size=(50, 3))
        for epsilon in (0.75, 0.2):
            zd = katok_zermelo_data(model, epsilon)
            zermelo = zermelo_randers_value(zd.metric_at(points), zd.wind_at(points), vectors)
            randers = randers_batch(model, epsilon, points, vectors, KATOK)
            np.testing.assert_allclose(zermelo, randers, rtol=1e-10)


if __name__ == '__main__':
    unittest.main()
