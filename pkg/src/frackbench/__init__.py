"""Finite-volume discrete fracture-matrix flow solvers and benchmark harness."""

__version__ = "0.1.0"
