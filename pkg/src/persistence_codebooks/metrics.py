"""1-Wasserstein distance between persistence diagrams.

Ground distance is the sup-norm in birth-persistence coordinates; a point may
be sent to its projection ``(b, 0)`` on the diagonal at a cost equal to its
persistence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diagram import PersistenceDiagram

DIAGONAL = -1

BRUTEFORCE_LIMIT = 8


@dataclass(frozen=True)
class Matching:
    """Optimal partial matching; ``DIAGONAL`` marks a point sent to the diagonal."""

    pairs: tuple[tuple[int, int], ...]
    cost: float


def _points(d) -> np.ndarray:
    if isinstance(d, PersistenceDiagram):
        return d.points
    arr = np.asarray(d, dtype=float)
    return arr.reshape(-1, 2) if arr.size else np.empty((0, 2))


def _augmented_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = len(a), len(b)
    cost = np.zeros((m + n, m + n))
    if m and n:
        cost[:m, :n] = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)
    # forbidden cells: a point may only use its own diagonal slot
    big = 1.0 + 2.0 * (a[:, 1].sum() + b[:, 1].sum()) + (cost[:m, :n].max() if m and n else 0.0)
    upper = np.full((m, m), big)
    np.fill_diagonal(upper, a[:, 1])
    lower = np.full((n, n), big)
    np.fill_diagonal(lower, b[:, 1])
    cost[:m, n:] = upper
    cost[m:, :n] = lower
    return cost


def w1_matching(B, B_prime) -> Matching:
    """Solve the optimal matching on the ``(m+n) x (m+n)`` augmented cost matrix."""
    a, b = _points(B), _points(B_prime)
    m, n = len(a), len(b)
    if m + n == 0:
        return Matching((), 0.0)
    cost = _augmented_cost(a, b)
    rows, cols = linear_sum_assignment(cost)
    pairs = []
    for r, c in zip(rows, cols):
        if r < m and c < n:
            pairs.append((int(r), int(c)))
        elif r < m:
            pairs.append((int(r), DIAGONAL))
        elif c < n:
            pairs.append((DIAGONAL, int(c)))
    total = float(np.sum(cost[rows, cols]))
    return Matching(tuple(pairs), total)


def w1_distance(B, B_prime) -> float:
    """Exact 1-Wasserstein distance between two finite diagrams."""
    return w1_matching(B, B_prime).cost


def w1_bruteforce(B, B_prime) -> float:
    """Exhaustive search over all partial matchings. Test oracle only."""
    a, b = _points(B), _points(B_prime)
    if len(a) + len(b) > BRUTEFORCE_LIMIT:
        raise ValueError(
            f"brute force limited to {BRUTEFORCE_LIMIT} points in total, got {len(a) + len(b)}"
        )
    a = [tuple(map(float, p)) for p in a]
    b = [tuple(map(float, p)) for p in b]
    best = float("inf")

    def search(i: int, used: frozenset, acc: float):
        nonlocal best
        if i == len(a):
            rest = sum(b[j][1] for j in range(len(b)) if j not in used)
            best = min(best, acc + rest)
            return
        x = a[i]
        search(i + 1, used, acc + x[1])
        for j, y in enumerate(b):
            if j not in used:
                d = max(abs(x[0] - y[0]), abs(x[1] - y[1]))
                search(i + 1, used | {j}, acc + d)

    search(0, frozenset(), 0.0)
    return best
