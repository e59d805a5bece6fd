"""Benchmark problems, oracles and invariant suites."""
