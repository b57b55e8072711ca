"""Numerical construction and verification of boundary-vanishing weights that
represent integration against holomorphic functions on the disc and the ball."""

__version__ = "0.1.0"
