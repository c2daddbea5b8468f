"""Distil recorded web user sessions into small, dependence-adequate test suites."""

__version__ = "0.1.0"
