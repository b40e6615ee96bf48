"""Deterministic byte accounting for tensor buffers.

An arena is a per-run context that tracks the live and high-water byte
counts of all value buffers allocated while it is active.  Peak memory
numbers reported by the benchmark harness come from here rather than from
OS-level RSS, so repeated runs with the same configuration report
identical peaks.
"""

from __future__ import annotations

import threading
import weakref
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import NoActiveArena

_PRECISIONS = {"f32": np.float32, "f64": np.float64}


@dataclass
class ArenaStats:
    live_bytes: int
    high_water_bytes: int


class Arena:
    """Tracks bytes of value buffers registered while this arena is active."""

    def __init__(self, precision: str = "f64"):
        if precision not in _PRECISIONS:
            raise ValueError(f"unknown precision {precision!r}")
        self.precision = precision
        self.dtype = np.dtype(_PRECISIONS[precision])
        self.live_bytes = 0
        self.high_water_bytes = 0

    def register(self, nbytes: int) -> None:
        self.live_bytes += nbytes
        if self.live_bytes > self.high_water_bytes:
            self.high_water_bytes = self.live_bytes

    def release(self, nbytes: int) -> None:
        self.live_bytes -= nbytes

    def stats(self) -> ArenaStats:
        return ArenaStats(self.live_bytes, self.high_water_bytes)


_tls = threading.local()


def _stack() -> list:
    if not hasattr(_tls, "stack"):
        _tls.stack = []
    return _tls.stack


def current_arena() -> Arena | None:
    stack = _stack()
    return stack[-1] if stack else None


@contextmanager
def arena(precision: str = "f64"):
    """Activate a fresh arena for the enclosed run."""
    a = Arena(precision)
    _stack().append(a)
    try:
        yield a
    finally:
        _stack().pop()


def arena_stats() -> ArenaStats:
    a = current_arena()
    if a is None:
        raise NoActiveArena("no arena context is active")
    return a.stats()


def active_dtype(default=np.float64) -> np.dtype:
    a = current_arena()
    return a.dtype if a is not None else np.dtype(default)


def track(array: np.ndarray) -> np.ndarray:
    """Register an array's bytes with the active arena (no-op without one).

    Release is tied to the array object's lifetime, which under CPython
    refcounting makes the accounting deterministic.
    """
    a = current_arena()
    if a is not None and array.nbytes:
        a.register(array.nbytes)
        weakref.finalize(array, a.release, array.nbytes)
    return array
