#!/usr/bin/env python3
"""
Unit tests for lattice reachable sets and the non-integrability scan.
"""

import unittest
import sys
import os

import numpy as np

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav.connect import minimize_length
from kropina_nav.exceptions import BoundaryEmpty, InvalidArgument, SourceOutsideBox
from kropina_nav.geometries import flat_constant_form, flat_torus, heisenberg_contact, round_sphere_hopf
from kropina_nav.models import CONVERGED, NO_ADMISSIBLE_SEED, ConnectProblem, DiscretePath
from kropina_nav.reachable import (BACKWARD, boundary_tangency_test, chord_costs, nonintegrability_scan,
                                   predecessor_path, propagate, propagate_many, stencil_offsets)


def _flat3():
    return flat_constant_form(dim=3, covector=[0.0, 0.0, -1.0])


CUBE = [[-0.5, 0.5]] * 3


class TestLattice(unittest.TestCase):
    """Stencils and chord costs."""

    def test_stencil_offsets(self):
        offsets = stencil_offsets(2, 1)
        self.assertEqual(len(offsets), 8)
        self.assertFalse(np.any(np.all(offsets == 0, axis=1)))
        self.assertEqual(len(stencil_offsets(3, 2)), 124)

    def test_chord_costs(self):
        model = flat_constant_form()
        costs = chord_costs(model, np.zeros((2, 2)), np.array([[1.0, 0.0], [0.0, 1.0]]))
        self.assertAlmostEqual(float(costs[0]), 0.5)
        self.assertTrue(np.isinf(costs[1]))

    def test_source_outside_box(self):
        with self.assertRaises(SourceOutsideBox) as ctx:
            propagate(_flat3(), [0.0, 0.0, 2.0], CUBE, 0.1)
        self.assertIn('[reachable.propagate]', str(ctx.exception))

    def test_invalid_box_and_spacing(self):
        with self.assertRaises(InvalidArgument) as ctx:
            propagate(_flat3(), [0.0, 0.0, 0.0], [[0.5, -0.5]] * 3, 0.1)
        self.assertIn('[reachable.propagate]', str(ctx.exception))
        with self.assertRaises(InvalidArgument):
            propagate(_flat3(), [0.0, 0.0, 0.0], CUBE, 0.0)


class TestFlatReachability(unittest.TestCase):
    """Integrable kernel: the reachable set is a half-space."""

    @classmethod
    def setUpClass(cls):
        cls.h = 0.1
        cls.model = _flat3()
        cls.rs = propagate(cls.model, [0.0, 0.0, 0.0], CUBE, cls.h)

    def test_half_space_membership(self):
        points = self.rs.node_points()
        z = points[..., 2]
        np.testing.assert_array_equal(self.rs.reached, z >= self.h - 1e-9)

    def test_cost_on_the_axis(self):
        points = self.rs.node_points().reshape(-1, 3)
        cost = self.rs.cost.reshape(-1)
        on_axis = (np.abs(points[:, 0]) < 1e-9) & (np.abs(points[:, 1]) < 1e-9) & (points[:, 2] > 0.05)
        np.testing.assert_allclose(cost[on_axis], points[on_axis, 2] / 2, atol=1e-12)

    def test_boundary_is_tangent_to_kernel(self):
        samples = self.rs.boundary_samples
        self.assertGreater(len(samples), 0)
        np.testing.assert_allclose(samples[:, 2], self.h / 2, atol=1e-12)
        report = boundary_tangency_test(self.model, self.rs)
        self.assertLess(report['max_angle_deg'], 1e-3)
        self.assertEqual(report['boundary_density_max'], 0.0)

    def test_boundary_offset_decays_linearly(self):
        box = [[-0.2, 0.2]] * 3
        offsets = []
        for h in (0.1, 0.05, 0.025):
            rs = propagate(self.model, [0.0, 0.0, 0.0], box, h)
            np.testing.assert_array_equal(rs.reached, rs.node_points()[..., 2] >= h - 1e-9)
            offsets.append(float(np.max(np.abs(rs.boundary_samples[:, 2]))))
        np.testing.assert_allclose(offsets, [0.05, 0.025, 0.0125], atol=1e-12)
        np.testing.assert_allclose(np.array(offsets[:-1]) / np.array(offsets[1:]), 2.0, rtol=1e-9)

    def test_boundary_angle_at_fine_spacing(self):
        rs = propagate(self.model, [0.0, 0.0, 0.0], [[-0.2, 0.2]] * 3, 0.02)
        report = boundary_tangency_test(self.model, rs)
        self.assertGreater(report['evaluated'], 0)
        self.assertLess(report['max_angle_deg'], 5.0)

    def test_backward_direction(self):
        rs = propagate(self.model, [0.0, 0.0, 0.0], CUBE, self.h, direction=BACKWARD)
        z = rs.node_points()[..., 2]
        np.testing.assert_array_equal(rs.reached, z <= -self.h + 1e-9)
        self.assertEqual(rs.direction, BACKWARD)

    def test_budget_cuts_membership(self):
        rs = propagate(self.model, [0.0, 0.0, 0.0], CUBE, self.h, budget=0.1)
        self.assertTrue(np.all(rs.cost[rs.reached] <= 0.1))
        self.assertLess(np.count_nonzero(rs.reached), np.count_nonzero(self.rs.reached))

    def test_predecessor_path_is_admissible(self):
        index = (5, 5, 9)
        chain = predecessor_path(self.rs, index)
        np.testing.assert_allclose(chain[0], [0.0, 0.0, 0.0])
        np.testing.assert_allclose(chain[-1], self.rs.node_points()[index], atol=1e-12)
        self.assertTrue(np.all(np.isfinite(chord_costs(self.model, chain[:-1], np.diff(chain, axis=0)))))

    def test_unreached_predecessor(self):
        with self.assertRaises(InvalidArgument) as ctx:
            predecessor_path(self.rs, (5, 5, 0))
        self.assertIn('[reachable.predecessor_path]', str(ctx.exception))

    def test_flat_plane_kernel_direction_unreached(self):
        rs = propagate(flat_constant_form(half_width=1.0), [0.0, 0.0], [[-1.0, 1.0], [-1.0, 1.0]], 0.25)
        points = rs.node_points()
        target = np.all(np.abs(points - np.array([0.0, 1.0])) < 1e-9, axis=-1)
        self.assertFalse(bool(rs.reached[target][0]))

    def test_grid_rows(self):
        rs = propagate(flat_constant_form(half_width=1.0), [0.0, 0.0], [[-1.0, 1.0], [-1.0, 1.0]], 0.5)
        rows = rs.grid_rows()
        self.assertEqual(len(rows), 25)
        self.assertEqual(list(rows[0].keys()), ['i1', 'i2', 'x1', 'x2', 'reached', 'cost'])
        self.assertEqual(rows[0]['cost'], '')


class TestConnectConsistency(unittest.TestCase):
    """Lattice costs bound the connecting geodesic length."""

    @classmethod
    def setUpClass(cls):
        cls.h = 0.25
        cls.model = flat_constant_form(half_width=2.0)
        cls.rs = propagate(cls.model, [0.0, 0.0], [[-1.0, 1.0], [-1.0, 1.0]], cls.h)

    def _node(self, target):
        points = self.rs.node_points()
        return tuple(int(i) for i in np.argwhere(np.all(np.abs(points - np.array(target)) < 1e-9, axis=-1))[0])

    def test_reached_node_is_connectable(self):
        for target in ([1.0, 0.5], [0.5, -0.75], [1.0, 0.0]):
            index = self._node(target)
            self.assertTrue(bool(self.rs.reached[index]))
            chain = predecessor_path(self.rs, index)
            seed = DiscretePath(params=np.linspace(0.0, 1.0, len(chain)), points=chain)
            result = minimize_length(ConnectProblem(model=self.model, x0=chain[0], x1=chain[-1], seed_path=seed))
            self.assertEqual(result.status, CONVERGED)
            self.assertLessEqual(result.length, float(self.rs.cost[index]) + self.h)
            self.assertAlmostEqual(result.length, (target[0] ** 2 + target[1] ** 2) / (2 * target[0]), places=6)

    def test_unreached_kernel_node_has_no_admissible_seed(self):
        index = self._node([0.0, 0.75])
        self.assertFalse(bool(self.rs.reached[index]))
        seed = DiscretePath.straight([0.0, 0.0], [0.0, 0.75], 17)
        result = minimize_length(ConnectProblem(model=self.model, x0=[0.0, 0.0], x1=[0.0, 0.75], seed_path=seed,
                                                nodes=17))
        self.assertEqual(result.status, NO_ADMISSIBLE_SEED)


class TestContactReachability(unittest.TestCase):
    """Non-integrable kernel: everything nearby is reached."""

    def test_heisenberg_interior_is_reached(self):
        rs = propagate(heisenberg_contact(), [0.0, 0.0, 0.0], [[-1.0, 1.0]] * 3, 0.25)
        points = rs.node_points()
        interior = np.all(np.abs(points) <= 0.5 + 1e-9, axis=-1) & np.any(np.abs(points) > 1e-9, axis=-1)
        self.assertTrue(np.all(rs.reached[interior]))
        self.assertGreater(rs.reached_fraction, 0.5)

    def test_full_torus_has_no_boundary(self):
        torus = flat_torus(dim=2)
        rs = propagate(torus, [0.5, 0.5], [[0.0, 1.0], [0.0, 1.0]], 0.1)
        self.assertTrue(np.all(rs.reached))
        self.assertEqual(rs.reached_fraction, 1.0)
        with self.assertRaises(BoundaryEmpty):
            boundary_tangency_test(torus, rs)

    def test_propagate_many(self):
        sets = propagate_many(_flat3(), [[0.0, 0.0, 0.0], [0.0, 0.0, -0.2]], CUBE, 0.1)
        self.assertEqual(len(sets), 2)
        self.assertGreater(np.count_nonzero(sets[1].reached), np.count_nonzero(sets[0].reached))


class TestNonintegrabilityScan(unittest.TestCase):
    """omega ^ d omega density."""

    def test_contact_form(self):
        report = nonintegrability_scan(heisenberg_contact(), samples=200, rng=np.random.default_rng(1))
        self.assertEqual(report['fraction_nonzero'], 1.0)
        self.assertFalse(report['extension'])

    def test_integrable_form(self):
        report = nonintegrability_scan(_flat3(), samples=200, rng=np.random.default_rng(1))
        self.assertEqual(report['fraction_nonzero'], 0.0)

    def test_higher_dimension_flag(self):
        report = nonintegrability_scan(round_sphere_hopf(3), samples=50, rng=np.random.default_rng(1))
        self.assertTrue(report['extension'])
        self.assertEqual(report['dim'], 5)
        self.assertGreater(report['fraction_nonzero'], 0.9)


if __name__ == '__main__':
    unittest.main()
