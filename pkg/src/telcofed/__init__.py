"""Federated agent operating system for multi-operator telecom networks."""

__version__ = "0.1.0"
