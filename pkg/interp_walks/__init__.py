"""
Interpolated Walks: exact simulator for generalized interpolated quantum walks

This package builds Szegedy walks over reversible Markov chains, runs the
phase-estimation and fast-forwarding search drivers on interpolated chain
schedules, and cross-checks every component against brute-force oracles.
"""

__version__ = "0.1.0"
__author__ = "Interpolated Walks Team"
