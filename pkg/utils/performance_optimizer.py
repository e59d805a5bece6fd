"""
Performance utilities for the contact-geometric PMP solver.

This module provides the order-preserving thread pool used for independent
solves and propagations (multi-start, perturbation bases, oracle chunks) and
a monitor that records timings and memory snapshots to the runtime log.
Timings never reach data files.
"""

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, TypeVar

import psutil

from utils.logger import get_logger
from utils.settings import performance_config

logger = get_logger(__name__)
runtime_logger = get_logger("runtime")

T = TypeVar("T")
R = TypeVar("R")


def thread_count(requested: Optional[int] = None) -> int:
    """Worker count capped by CONTACT_PMP_THREADS."""
    cap = max(1, performance_config.max_threads)
    return cap if requested is None else max(1, min(cap, requested))


def parallel_map(func: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """
    Apply func to every item, results in input order.

    Runs inline when only one worker is allowed or there is a single item.
    Exceptions propagate from the first failing item in input order.
    """
    items = list(items)
    workers = min(thread_count(max_workers), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


class PerformanceMonitor:
    """Monitors and reports performance metrics."""

    def __init__(self):
        """Initialize performance monitor."""
        self.metrics: Dict[str, float] = {}
        self.start_times: Dict[Tuple[str, int], float] = {}

    def start_timer(self, operation_name: str) -> None:
        """Start timing an operation."""
        self.start_times[(operation_name, threading.get_ident())] = time.perf_counter()

    def end_timer(self, operation_name: str) -> float:
        """End timing an operation and return duration."""
        key = (operation_name, threading.get_ident())
        if key not in self.start_times:
            return 0.0

        duration = time.perf_counter() - self.start_times.pop(key)
        self.metrics[operation_name] = duration
        runtime_logger.info(f"{operation_name} took {duration:.4f}s")
        if performance_config.memory_monitoring_enabled:
            runtime_logger.info(f"{operation_name} memory", **self.get_memory_usage())
        return duration

    def get_memory_usage(self) -> Dict[str, float]:
        """Get current memory usage."""
        process = psutil.Process(os.getpid())
        memory_info = process.memory_info()

        return {
            'rss_mb': round(memory_info.rss / 1024 / 1024, 3),
            'vms_mb': round(memory_info.vms / 1024 / 1024, 3),
            'percent': round(process.memory_percent(), 3)
        }

    def clear_metrics(self) -> None:
        """Clear all performance metrics."""
        self.metrics.clear()
        self.start_times.clear()


# Global instance
performance_monitor = PerformanceMonitor()


__all__ = [
    'thread_count',
    'parallel_map',
    'PerformanceMonitor',
    'performance_monitor',
]
