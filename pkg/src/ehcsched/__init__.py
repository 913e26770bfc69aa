"""Latency-, energy-, and reliability-aware scheduling of precedence-
constrained IoT workflows on heterogeneous edge-hub-cloud systems."""

__version__ = "0.1.0"
