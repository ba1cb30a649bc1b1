"""Benchmark harness comparing description-only routing with probing."""

from .data import TestCase, build_pool, dump_testset, load_pool, load_testset, validate_testset
from .harness import BenchSettings, RunReport, calibrate, format_table, run_benchmark, sweep
from .metrics import classification_metrics
from .synthetic import Suite, SuiteSpec, generate_suite

__all__ = [
    "BenchSettings",
    "RunReport",
    "Suite",
    "SuiteSpec",
    "TestCase",
    "build_pool",
    "calibrate",
    "classification_metrics",
    "dump_testset",
    "format_table",
    "generate_suite",
    "load_pool",
    "load_testset",
    "run_benchmark",
    "sweep",
    "validate_testset",
]
