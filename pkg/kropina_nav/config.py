"""
Configuration settings for Kropina Nav.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()


class Config:
    """Base configuration class."""

    # Parallelism
    THREADS = int(os.getenv('KROPINA_NAV_THREADS', '4'))

    # Numerical gates
    TOL_ADM = float(os.getenv('KROPINA_NAV_TOL_ADM', '1e-12'))
    TOL_OMEGA = float(os.getenv('KROPINA_NAV_TOL_OMEGA', '1e-9'))
    GUARD_BAND = float(os.getenv('KROPINA_NAV_GUARD_BAND', '1e-3'))
    CONE_EXIT = float(os.getenv('KROPINA_NAV_CONE_EXIT', '1e-6'))

    # Integrator / finite differences
    INTEGRATION_TOL = float(os.getenv('KROPINA_NAV_INTEGRATION_TOL', '1e-10'))
    FD_STEP = float(os.getenv('KROPINA_NAV_FD_STEP', '1e-5'))

    # Randomized suites and output
    DEFAULT_SEED = int(os.getenv('KROPINA_NAV_SEED', '20240101'))
    OUTPUT_DIR = os.getenv('KROPINA_NAV_OUTPUT_DIR', 'output')

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR = os.getenv('LOG_DIR')

    @property
    def worker_count(self):
        """Number of worker threads, never below one."""
        return max(1, self.THREADS)


class DevelopmentConfig(Config):
    """Development configuration."""
    LOG_LEVEL = 'DEBUG'


class ProductionConfig(Config):
    """Production configuration."""
    pass


class TestingConfig(Config):
    """Testing configuration."""
    TESTING = True
    THREADS = 1


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(name=None):
    """Configuration class for ``name`` (default: ``KROPINA_NAV_ENV``)."""
    return config.get(name or os.getenv('KROPINA_NAV_ENV', 'default'), Config)
