#!/usr/bin/env python3
"""
Unit tests for geodesic sprays, the integrator and the path functionals.
"""

import unittest
import sys
import os

import numpy as np

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav.exceptions import DomainError, InadmissiblePath, InadmissibleVector, InvalidArgument, KropinaNavError
from kropina_nav.geodesic_flow import (KROPINA, RANDERS, ROUTE_LAGRANGIAN, integrate, kropina_spray, path_energy,
                                       path_length, randers_spray, spacetime_energy_diagnostic)
from kropina_nav.geometries import (flat_constant_form, flat_torus, heisenberg_contact, round_sphere_hopf,
                                    round_sphere_rotation)
from kropina_nav.manifold import sample_chart_points
from kropina_nav.metrics import KATOK
from kropina_nav.models import DiscretePath


def _admissible_velocity(model, x, rng, spread=0.3):
    """Velocity around the direction of -omega#, kept inside the cone."""
    omega_sharp = np.linalg.solve(model.metric_at(x), model.one_form_at(x))
    v = -omega_sharp / np.linalg.norm(omega_sharp) + spread * rng.normal(size=model.dim)
    return v if model.one_form_at(x) @ v < -1e-3 else None


class TestFlatFlow(unittest.TestCase):
    """Straight lines in flat space."""

    def setUp(self):
        self.flat = flat_constant_form()

    def test_flat_geodesic_is_straight(self):
        solution = integrate(self.flat, KROPINA, [0.0, 0.0], [1.0, 0.5], horizon=1.0)
        np.testing.assert_allclose(solution.path.end, [1.0, 0.5], atol=1e-10)
        self.assertAlmostEqual(solution.arrival_time, 0.625, places=10)
        self.assertLess(solution.residuals['conserved_drift'], 1e-12)

    def test_lightlike_lift_has_zero_spacetime_energy(self):
        solution = integrate(self.flat, KROPINA, [0.0, 0.0], [1.0, 0.5], horizon=1.0)
        self.assertAlmostEqual(spacetime_energy_diagnostic(self.flat, KROPINA, solution), 0.0, places=10)

    def test_constant_lift_gives_riemannian_energy(self):
        solution = integrate(self.flat, KROPINA, [0.0, 0.0], [1.0, 0.0], horizon=1.0)
        energy = spacetime_energy_diagnostic(self.flat, KROPINA, solution, lift=np.zeros(solution.path.size))
        self.assertAlmostEqual(energy, 0.5, places=10)

    def test_inadmissible_initial_velocity(self):
        with self.assertRaises(InadmissibleVector):
            integrate(self.flat, KROPINA, [0.0, 0.0], [0.0, 1.0])

    def test_leaving_the_box(self):
        small = flat_constant_form(half_width=1.0)
        with self.assertRaises(DomainError) as ctx:
            integrate(small, KROPINA, [0.0, 0.0], [1.0, 0.0], horizon=3.0)
        self.assertIn('left the chart box', str(ctx.exception))

    def test_kind_validation(self):
        with self.assertRaises(InvalidArgument) as ctx:
            integrate(self.flat, 'riemann', [0.0, 0.0], [1.0, 0.0])
        self.assertIn('[geodesic_flow.integrate]', str(ctx.exception))
        with self.assertRaises(InvalidArgument):
            integrate(self.flat, RANDERS, [0.0, 0.0], [1.0, 0.0])

    def test_randers_geodesic_may_leave_the_cone(self):
        solution = integrate(self.flat, RANDERS, [0.0, 0.0], [0.0, 1.0], horizon=1.0, epsilon=0.5)
        np.testing.assert_allclose(solution.path.end, [0.0, 1.0], atol=1e-10)


class TestConservation(unittest.TestCase):
    """Killing constant and constant speed along random geodesics."""

    def test_conserved_quantity_and_fermat_identity_on_builtins(self):
        rng = np.random.default_rng(20240101)
        models = [flat_constant_form(), flat_torus(), heisenberg_contact(), round_sphere_rotation(),
                  round_sphere_hopf(2), round_sphere_hopf(3)]
        checked = 0
        for model in models:
            points = sample_chart_points(model, 60, rng, margin=0.3)
            for x in points:
                v = _admissible_velocity(model, x, rng)
                if v is None:
                    continue
                try:
                    solution = integrate(model, KROPINA, x, v, horizon=0.2)
                except KropinaNavError:
                    continue
                residuals = solution.residuals
                self.assertLess(residuals['conserved_drift'], 1e-8, model.name)
                self.assertLess(residuals['speed_drift'], 1e-8, model.name)
                length = path_length(model, KROPINA, solution.path)
                self.assertAlmostEqual(solution.arrival_time, length, delta=1e-8 * max(1.0, length), msg=model.name)
                checked += 1
        self.assertGreaterEqual(checked, 200)

    def test_randers_conserved_quantity(self):
        model = round_sphere_hopf(2)
        rng = np.random.default_rng(9)
        for family in ('standard', KATOK):
            for x in sample_chart_points(model, 10, rng, margin=0.45):
                v = 0.5 * rng.normal(size=3)
                solution = integrate(model, RANDERS, x, v, horizon=0.2, epsilon=0.3, family=family)
                self.assertLess(solution.residuals['conserved_drift'], 1e-8)
                self.assertLess(solution.residuals['speed_drift'], 1e-8)

    def test_arrival_time_equals_length(self):
        model = round_sphere_hopf(2)
        x = np.array([0.6, 1.0, 2.0])
        v = _admissible_velocity(model, x, np.random.default_rng(1), spread=0.1)
        solution = integrate(model, KROPINA, x, v, horizon=0.5)
        length = path_length(model, KROPINA, solution.path)
        self.assertAlmostEqual(solution.arrival_time, length, delta=1e-8 * max(1.0, length))


class TestSprays(unittest.TestCase):
    """Agreement between the spray formulations."""

    def test_constraint_and_lagrangian_routes_agree(self):
        rng = np.random.default_rng(12)
        for model in (round_sphere_rotation(), round_sphere_hopf(2), heisenberg_contact()):
            for x in sample_chart_points(model, 10, rng, margin=0.3):
                v = _admissible_velocity(model, x, rng)
                if v is None:
                    continue
                constraint = kropina_spray(model, x, v)
                lagrangian = kropina_spray(model, x, v, route=ROUTE_LAGRANGIAN)
                scale = max(1.0, float(np.max(np.abs(constraint))))
                np.testing.assert_allclose(constraint, lagrangian, atol=1e-7 * scale)

    def test_randers_spray_approaches_kropina_spray(self):
        model = round_sphere_hopf(2)
        x = np.array([0.7, 0.5, 1.5])
        v = _admissible_velocity(model, x, np.random.default_rng(3), spread=0.1)
        kropina = kropina_spray(model, x, v)
        randers = randers_spray(model, 1e-7, x, v)
        scale = max(1.0, float(np.max(np.abs(kropina))))
        np.testing.assert_allclose(randers, kropina, atol=1e-3 * scale)

    def test_spray_rejects_inadmissible_velocity(self):
        with self.assertRaises(InadmissibleVector):
            kropina_spray(flat_constant_form(), [0.0, 0.0], [-1.0, 0.0])

    def test_unknown_route(self):
        with self.assertRaises(InvalidArgument):
            kropina_spray(flat_constant_form(), [0.0, 0.0], [1.0, 0.0], route='shortcut')


class TestFunctionals(unittest.TestCase):
    """Length and energy of discrete paths."""

    def setUp(self):
        self.flat = flat_constant_form()

    def test_straight_segment(self):
        path = DiscretePath.straight([0.0, 0.0], [1.0, 0.0])
        self.assertAlmostEqual(path_length(self.flat, KROPINA, path), 0.5)
        self.assertAlmostEqual(path_energy(self.flat, path), 0.125)

    def test_segment_in_kernel_is_inadmissible(self):
        path = DiscretePath.straight([0.0, 0.0], [0.0, 1.0])
        with self.assertRaises(InadmissiblePath):
            path_length(self.flat, KROPINA, path)
        with self.assertRaises(InadmissiblePath):
            path_energy(self.flat, path)

    def test_randers_lengths_bound_kropina_length(self):
        rng = np.random.default_rng(21)
        for model in (flat_constant_form(), flat_torus(), heisenberg_contact(), round_sphere_rotation(),
                      round_sphere_hopf(2)):
            compared = 0
            for x in sample_chart_points(model, 400, rng, margin=0.3):
                points = [x]
                for _ in range(8):
                    v = _admissible_velocity(model, points[-1], rng)
                    if v is None:
                        break
                    points.append(points[-1] + 0.05 * v / np.linalg.norm(v))
                if len(points) < 9:
                    continue
                path = DiscretePath(params=np.linspace(0.0, 1.0, 9), points=np.asarray(points))
                try:
                    kropina = path_length(model, KROPINA, path)
                except KropinaNavError:
                    continue
                for epsilon in (1.0, 0.25, 0.01):
                    self.assertLessEqual(path_length(model, RANDERS, path, epsilon=epsilon), kropina + 1e-12)
                compared += 1
                if compared == 100:
                    break
            self.assertEqual(compared, 100, model.name)

    def test_loop_length_on_torus(self):
        torus = flat_torus()
        s = np.arange(16) / 16
        loop = DiscretePath.loop(np.column_stack([s, np.full(16, 0.3)]), shift=[1.0, 0.0])
        self.assertAlmostEqual(path_length(torus, KROPINA, loop), 0.5)


if __name__ == '__main__':
    unittest.main()
