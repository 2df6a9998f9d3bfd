"""Metrics, negative-transfer reports and benchmarks."""
