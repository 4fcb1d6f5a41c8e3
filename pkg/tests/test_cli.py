#!/usr/bin/env python3
"""
Unit tests for the command line interface.
"""

import glob
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import unittest
from unittest import mock

from click.testing import CliRunner

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav import __version__
from kropina_nav.cli import EXIT_OK, EXIT_STRUCTURAL, EXIT_USAGE, main
from kropina_nav.connect import minimize_length


class TestCli(unittest.TestCase):
    """Test cases for the kropina-nav commands."""

    def setUp(self):
        """Set up spec files in a scratch directory."""
        self.runner = CliRunner()
        self.directory = tempfile.mkdtemp()
        self.manifold = self.write('flat.json', {'name': 'flat', 'builtin': 'flat'})
        self.problem = self.write('problem.json', {'x0': [0, 0], 'x1': [1, 0], 'nodes': 17})

    def tearDown(self):
        """Drop the handlers bound to the runner's streams and the scratch files."""
        logging.getLogger('kropina_nav').handlers.clear()
        shutil.rmtree(self.directory, ignore_errors=True)

    def write(self, name, payload):
        path = os.path.join(self.directory, name)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(payload, handle, indent=2)
        return path

    def invoke(self, *args, out='out'):
        out_dir = os.path.join(self.directory, out)
        result = self.runner.invoke(main, list(args) + ['--out', out_dir])
        return result, out_dir

    def report(self, out_dir):
        reports = glob.glob(os.path.join(out_dir, '*.json'))
        self.assertEqual(len(reports), 1)
        with open(reports[0], 'r', encoding='utf-8') as handle:
            return reports[0], json.load(handle)

    def test_connect_writes_report_and_trajectory(self):
        """Test a converged connect run."""
        result, out_dir = self.invoke('connect', '--manifold', self.manifold, '--problem', self.problem)
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        path, report = self.report(out_dir)
        self.assertTrue(os.path.basename(path).startswith('connect_flat_'))
        self.assertEqual(report['status'], 'Converged')
        self.assertAlmostEqual(report['length'], 0.5, places=8)
        self.assertEqual(report['exit_code'], EXIT_OK)
        self.assertEqual(len(glob.glob(os.path.join(out_dir, '*.csv'))), 1)

    def test_kernel_endpoint_is_structural(self):
        """Test that an empty admissible class exits with the structural code."""
        problem = self.write('kernel.json', {'x0': [0, 0], 'x1': [0, 1], 'nodes': 9})
        result, out_dir = self.invoke('connect', '--manifold', self.manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_STRUCTURAL)
        _, report = self.report(out_dir)
        self.assertEqual(report['status'], 'NoAdmissibleSeed')
        self.assertIn('empty admissible class', report['reason'])

    def test_katok_table(self):
        """Test the Katok command without spec files."""
        result, out_dir = self.invoke('katok', '--eps', '0.75')
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        _, report = self.report(out_dir)
        self.assertEqual(len(report['rows']), 1)
        self.assertLess(report['max_error'], 1e-6)

    def test_perturbed_orbits_without_closed_candidates(self):
        """Test that perturbed lengths are reported when no orbit passes the closed-geodesic checks."""
        manifold = self.write('sphere.json', {'builtin': 'sphere_rotation'})
        problem = self.write('alpha.json', {'alpha': [0.5]})
        result, out_dir = self.invoke('orbits', '--manifold', manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        _, report = self.report(out_dir)
        self.assertEqual(report['candidates'], [])
        row = report['perturbed'][0]
        self.assertAlmostEqual(row['closed_form'], 2 * math.pi / (1 + math.sqrt(0.5)), places=6)
        self.assertAlmostEqual(row['numeric'], row['closed_form'], delta=1e-3)

    def test_unknown_key_is_usage_error(self):
        """Test that a malformed spec exits with the usage code."""
        manifold = self.write('bad.json', {'builtin': 'flat', 'colour': 'red'})
        result, out_dir = self.invoke('connect', '--manifold', manifold, '--problem', self.problem)
        self.assertEqual(result.exit_code, EXIT_USAGE)
        self.assertIn("unknown key 'colour'", result.output)
        self.assertFalse(os.path.exists(out_dir))

    def test_missing_manifold_option(self):
        """Test that commands needing a manifold refuse to run without one."""
        result, _ = self.invoke('connect', '--problem', self.problem)
        self.assertEqual(result.exit_code, EXIT_USAGE)
        self.assertIn('needs --manifold', result.output)

    def test_missing_spec_file(self):
        """Test that a missing spec file is reported before any computation."""
        result, _ = self.invoke('connect', '--manifold', os.path.join(self.directory, 'nope.json'),
                                '--problem', self.problem)
        self.assertEqual(result.exit_code, EXIT_USAGE)
        self.assertIn('spec file not found', result.output)

    def test_seed_not_ending_at_x1_is_usage_error(self):
        """Test that a seed polyline off the endpoints is rejected before solving."""
        problem = self.write('seed.json', {'x0': [0, 0], 'x1': [1, 0], 'seed': [[0, 0], [0.5, 0], [0.9, 0]]})
        result, out_dir = self.invoke('connect', '--manifold', self.manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_USAGE)
        self.assertIn('Error:', result.output)
        self.assertIn("must end at 'x1'", result.output)
        self.assertFalse(os.path.exists(out_dir))

    def test_non_numeric_box_is_usage_error(self):
        """Test that a non-numeric reach box exits with the usage code."""
        problem = self.write('reach.json', {'source': [0, 0], 'spacing': 0.1, 'box': [['a', 1], [-1, 1]]})
        result, _ = self.invoke('reach', '--manifold', self.manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_USAGE)
        self.assertIn("'box' must be a list of numeric", result.output)

    def test_detour_seed(self):
        """Test that a lattice detour seed converges to the straight geodesic."""
        problem = self.write('detour.json', {'x0': [0, 0], 'x1': [1, 0.3], 'seed': 'detour', 'nodes': 17})
        result, out_dir = self.invoke('connect', '--manifold', self.manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        _, report = self.report(out_dir)
        self.assertAlmostEqual(report['length'], 1.09 / 2, places=6)

    def test_integration_tolerance_reaches_shooting(self):
        """Test that the integration tolerance of a problem spec drives the shooting integrator."""
        problem = self.write('tol.json', {'x0': [0, 0], 'x1': [1, 0], 'nodes': 17,
                                          'tolerances': {'integration': 1e-9}})
        with mock.patch('kropina_nav.cli.minimize_length', wraps=minimize_length) as solver:
            result, out_dir = self.invoke('connect', '--manifold', self.manifold, '--problem', problem)
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertEqual(solver.call_args.args[0].integration_tol, 1e-9)
        _, report = self.report(out_dir)
        self.assertEqual(report['solution']['tolerance'], 1e-9)

    def test_identical_runs_give_identical_files(self):

        """Test that reports are byte-identical across runs."""
        first, out_a = self.invoke('connect', '--manifold', self.manifold, '--problem', self.problem, out='a')
        second, out_b = self.invoke('connect', '--manifold', self.manifold, '--problem', self.problem, out='b')
        self.assertEqual(first.exit_code, EXIT_OK)
        self.assertEqual(second.exit_code, EXIT_OK)
        path_a, _ = self.report(out_a)
        path_b, _ = self.report(out_b)
        self.assertEqual(os.path.basename(path_a), os.path.basename(path_b))
        with open(path_a, 'rb') as a, open(path_b, 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_version(self):
        """Test the version option."""
        result = self.runner.invoke(main, ['--version'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn(__version__, result.output)


if __name__ == '__main__':
    unittest.main()
