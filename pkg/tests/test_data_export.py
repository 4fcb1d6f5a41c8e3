#!/usr/bin/env python3
"""
Unit tests for CSV and JSON result export.
"""

import json
import os
import sys
import tempfile
import unittest

import numpy as np

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav.data_export import ResultExporter, config_hash, plain


class TestResultExporter(unittest.TestCase):
    """Test cases for ResultExporter."""

    def setUp(self):
        """Set up test fixtures."""
        self.directory = tempfile.TemporaryDirectory()
        self.exporter = ResultExporter(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_plain_values(self):
        """Test conversion of numpy and non-finite values."""
        self.assertEqual(plain(np.float64(0.25)), 0.25)
        self.assertEqual(plain(float('nan')), 'nan')
        self.assertEqual(plain([float('inf'), -float('inf')]), ['inf', '-inf'])
        self.assertEqual(plain({'a': np.array([1, 2])}), {'a': [1, 2]})

    def test_csv_rows(self):
        """Test CSV formatting of booleans, floats and empty cells."""
        rows = [
            {'s': 0.0, 'reached': True, 'cost': 0.1},
            {'s': 0.5, 'reached': np.bool_(False), 'cost': ''},
        ]
        lines = self.exporter.export_to_csv(rows).splitlines()
        self.assertEqual(lines[0], 's,reached,cost')
        self.assertEqual(lines[1], '0.0,1,0.1')
        self.assertEqual(lines[2], '0.5,0,')
        self.assertEqual(self.exporter.export_to_csv([]), '')

    def test_csv_header_mapping(self):
        """Test that Katok columns get descriptive headers."""
        row = {'epsilon': 0.5, 'short': 1.0, 'long': 2.0, 'numeric': 1.0, 'error': 0.0, 'numeric_long': 2.0}
        text = self.exporter.export_to_csv([row])
        self.assertEqual(text.splitlines()[0], 'epsilon,delta_short,delta_long,numeric_short,short_error,numeric_long')
        self.assertTrue(all(key != name for key, name in self.exporter.field_mappings.items()))

    def test_trajectory_headers_pass_through(self):
        """Test that trajectory columns keep their own names."""
        row = {'s': 0.0, 'x1': 0.0, 'v1': 1.0, 't': 0.0, 'omega_dot': -1.0, 'speed': 0.5}
        text = self.exporter.export_to_csv([row])
        self.assertEqual(text.splitlines()[0], 's,x1,v1,t,omega_dot,speed')

    def test_json_is_sorted(self):
        """Test that JSON reports have sorted keys and a trailing newline."""
        text = self.exporter.export_to_json({'b': 1, 'a': np.float64(2.0)})
        self.assertTrue(text.endswith('\n'))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {'a': 2.0, 'b': 1})

    def test_file_name_is_deterministic(self):
        """Test that names depend on the run payload only."""
        payload = {'command': 'connect', 'seed': 1}
        name = self.exporter.file_name('connect', 'flat', payload)
        self.assertEqual(name, f"connect_flat_{config_hash(payload)}.csv")
        self.assertEqual(len(config_hash(payload)), 12)
        self.assertEqual(config_hash({'seed': 1, 'command': 'connect'}), config_hash(payload))
        self.assertNotEqual(config_hash({'command': 'connect', 'seed': 2}), config_hash(payload))
        self.assertTrue(self.exporter.file_name('orbits', 'torus', payload, tag='orbit0').endswith('_orbit0.csv'))

    def test_write(self):
        """Test writing into a fresh output directory."""
        exporter = ResultExporter(os.path.join(self.directory.name, 'nested'))
        path = exporter.write('report.json', '{}\n')
        with open(path, 'r', encoding='utf-8') as handle:
            self.assertEqual(handle.read(), '{}\n')


if __name__ == '__main__':
    unittest.main()
