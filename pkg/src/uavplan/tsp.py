"""Open-tour TSP with a fixed start and optionally a fixed end.

Small instances are solved exactly by Held-Karp; larger ones by nearest
neighbour plus 2-opt and or-opt, with seeded random restarts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]  # 0-based node indices in visiting order
    length: float


def tour_length(order, points, q_I, q_F=None) -> float:
    """Path length q_I -> points[order] -> q_F (the last leg dropped when q_F is None)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    order = list(order)
    if sorted(order) != list(range(len(points))):
        raise ValueError(f"order {order} is not a permutation of 0..{len(points) - 1}")
    seq = [np.asarray(q_I, float)] + [points[i] for i in order]
    if q_F is not None:
        seq.append(np.asarray(q_F, float))
    seq = np.array(seq)
    return float(np.sum(np.linalg.norm(np.diff(seq, axis=0), axis=1)))


def _dist_matrix(points, q_I, q_F):
    # node 0 = start, 1..K = points, K+1 = end (zero distance to everything when free)
    P = np.vstack([q_I, points, q_F if q_F is not None else q_I])
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    if q_F is None:
        D[-1, :] = 0.0
        D[:, -1] = 0.0
    return D


def _nearest_neighbor(D, K):
    route = []
    cur = 0
    left = list(range(1, K + 1))
    while left:
        # ties broken by the lowest index
        j = min(left, key=lambda n: (D[cur, n], n))
        route.append(j)
        left.remove(j)
        cur = j
    return route


def _path_len(D, route):
    seq = [0] + route + [len(D) - 1]
    return float(sum(D[a, b] for a, b in zip(seq[:-1], seq[1:])))


def _two_opt(D, route):
    seq = [0] + list(route) + [len(D) - 1]
    n = len(seq)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 2):
            for j in range(i + 1, n - 1):
                a, b, c, d = seq[i - 1], seq[i], seq[j], seq[j + 1]
                delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
                if delta < -1e-10:
                    seq[i : j + 1] = seq[i : j + 1][::-1]
                    improved = True
    return seq[1:-1]


def _or_opt(D, route):
    # move chains of 1..3 consecutive nodes to their best position
    seq = [0] + list(route) + [len(D) - 1]
    improved = True
    while improved:
        improved = False
        for L in (1, 2, 3):
            for i in range(1, len(seq) - L):
                if i + L > len(seq) - 1:
                    break
                chain = seq[i : i + L]
                a, b = seq[i - 1], seq[i + L]
                gain = D[a, chain[0]] + D[chain[-1], b] - D[a, b]
                rest = seq[:i] + seq[i + L :]
                best_j, best_cost = None, gain - 1e-10
                for j in range(len(rest) - 1):
                    c, d = rest[j], rest[j + 1]
                    for ch in (chain, chain[::-1]):
                        cost = D[c, ch[0]] + D[ch[-1], d] - D[c, d]
                        if cost < best_cost:
                            best_j, best_cost, best_ch = j, cost, ch
                if best_j is not None:
                    seq = rest[: best_j + 1] + list(best_ch) + rest[best_j + 1 :]
                    improved = True
    return seq[1:-1]


def _local_search(D, route):
    while True:
        before = _path_len(D, route)
        route = _or_opt(D, _two_opt(D, route))
        if _path_len(D, route) >= before - 1e-9:
            return route


def _held_karp(D, K):
    # best[mask][j]: shortest path from the start through the set mask ending at node j (1..K)
    full = 1 << K
    best = np.full((full, K), np.inf)
    parent = np.full((full, K), -1, dtype=int)
    for j in range(K):
        best[1 << j, j] = D[0, j + 1]
    for mask in range(1, full):
        for j in range(K):
            cur = best[mask, j]
            if not np.isfinite(cur) or not (mask >> j) & 1:
                continue
            for n in range(K):
                if (mask >> n) & 1:
                    continue
                nm = mask | (1 << n)
                c = cur + D[j + 1, n + 1]
                if c < best[nm, n] - 1e-12:
                    best[nm, n] = c
                    parent[nm, n] = j
    end = len(D) - 1
    totals = best[full - 1] + D[1 : K + 1, end]
    j = int(np.argmin(totals))
    route, mask = [], full - 1
    while j >= 0:
        route.append(j + 1)
        j, mask = parent[mask, j], mask & ~(1 << j)
    return route[::-1]


EXACT_MAX_NODES = 10


def solve_open_tour(points, q_I, q_F=None, seed: int = 0, restarts: int = 8) -> Tour:
    """Visiting order for ``points`` starting at q_I and ending at q_F (if given).

    Up to EXACT_MAX_NODES points the order is optimal. Beyond that a
    nearest-neighbour tour and ``restarts`` seeded random tours are improved by
    2-opt and or-opt and the shortest is kept.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    K = len(points)
    if K == 0:
        raise ValueError("at least one point is required")
    D = _dist_matrix(points, np.asarray(q_I, float), None if q_F is None else np.asarray(q_F, float))
    if K <= EXACT_MAX_NODES:
        order = tuple(int(i) - 1 for i in _held_karp(D, K))
        return Tour(order, tour_length(order, points, q_I, q_F))
    best = _local_search(D, _nearest_neighbor(D, K))
    best_len = _path_len(D, best)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        cand = _local_search(D, list(rng.permutation(K) + 1))
        L = _path_len(D, cand)
        if L < best_len - 1e-9:
            best, best_len = cand, L
    order = tuple(int(i) - 1 for i in best)
    return Tour(order, tour_length(order, points, q_I, q_F))
