"""
Kropina Nav - geodesics of Kropina metrics.

A numerical toolkit for connecting and closed geodesics of Kropina metrics,
time-optimal Zermelo navigation under critical wind, and admissible
reachable sets, computed through Randers approximations.
"""

__version__ = "1.0.0"
__author__ = "Kropina Nav Team"
