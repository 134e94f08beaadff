"""Instrumented dense solves.

Every linear solve in the package goes through :func:`solve` so that tests
can audit which system sizes each algorithm phase factorizes. Recording is
off unless a :func:`record_solves` block is active.
"""

from __future__ import annotations

from collections import Counter
from contextlib import contextmanager

import numpy as np

_phase = ["update"]
_active: list[Counter] = []


@contextmanager
def phase(name: str):
    """Tag solves issued inside the block with ``name``."""
    _phase.append(name)
    try:
        yield
    finally:
        _phase.pop()


@contextmanager
def record_solves():
    """Collect a ``Counter`` keyed by ``(phase, order)`` of all solves in the block."""
    counts: Counter = Counter()
    _active.append(counts)
    try:
        yield counts
    finally:
        _active.remove(counts)


def _note(order: int, count: int = 1) -> None:
    if _active:
        key = (_phase[-1], int(order))
        for c in _active:
            c[key] += count


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``np.linalg.solve`` on (stacks of) square systems, recorded by order."""
    a = np.asarray(a)
    _note(a.shape[-1], int(np.prod(a.shape[:-2], dtype=int)))
    return np.linalg.solve(a, b)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a.conj(), -1, -2))


def herm(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a.conj(), -1, -2)
