#!/usr/bin/env python3
"""
Unit tests for configuration and logging setup.
"""

import logging
import os
import sys
import tempfile
import unittest
from unittest import mock

# Add the package directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from kropina_nav.config import Config, DevelopmentConfig, TestingConfig, get_config
from kropina_nav.logging_config import configure_logging


class TestConfig(unittest.TestCase):
    """Test cases for configuration classes."""

    def test_defaults(self):
        """Test the numerical gates."""
        self.assertEqual(Config.TOL_ADM, 1e-12)
        self.assertEqual(Config.DEFAULT_SEED, 20240101)
        self.assertGreaterEqual(Config().worker_count, 1)

    def test_environment_selection(self):
        """Test picking a configuration by name and from the environment."""
        self.assertIs(get_config('development'), DevelopmentConfig)
        self.assertIs(get_config('unknown'), Config)
        with mock.patch.dict(os.environ, {'KROPINA_NAV_ENV': 'testing'}):
            self.assertIs(get_config(), TestingConfig)
        self.assertEqual(TestingConfig().worker_count, 1)


class TestLogging(unittest.TestCase):
    """Test cases for logging setup."""

    def tearDown(self):
        logging.getLogger('kropina_nav').handlers.clear()

    def test_console_only(self):
        """Test that only a console handler is installed without LOG_DIR."""
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop('LOG_DIR', None)
            logger = configure_logging('tests', level='debug')
        self.assertEqual(logger.level, logging.DEBUG)
        self.assertEqual(len(logger.handlers), 1)

    def test_rotating_file(self):
        """Test the rotating file handler under LOG_DIR."""
        with tempfile.TemporaryDirectory() as directory:
            with mock.patch.dict(os.environ, {'LOG_DIR': directory}):
                logger = configure_logging('tests', level='WARNING')
            self.assertEqual(len(logger.handlers), 2)
            self.assertEqual(logger.level, logging.WARNING)
            logger.warning('written')
            for handler in logger.handlers:
                handler.close()
            logger.handlers.clear()
            names = os.listdir(directory)
            self.assertEqual(len(names), 1)
            self.assertTrue(names[0].startswith('tests_'))


if __name__ == '__main__':
    unittest.main()
