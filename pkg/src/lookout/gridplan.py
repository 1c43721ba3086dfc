"""8-connected A* on boolean occupancy grids, shared by the simulator and baselines."""

from __future__ import annotations

import heapq
import math

import numpy as np

_NEIGHBORS = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
              (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)),
              (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2))]


def astar(blocked: np.ndarray, start, goal):
    """Shortest 8-connected path of cells from start to goal, or None.

    Diagonal moves cost sqrt(2); the heuristic is Euclidean cell distance.
    """
    rows, cols = blocked.shape
    start, goal = tuple(start), tuple(goal)
    if blocked[start] or blocked[goal]:
        return None
    open_set = [(0.0, start)]
    came_from = {}
    g_score = {start: 0.0}
    closed = set()
    while open_set:
        _, current = heapq.heappop(open_set)
        if current == goal:
            return _reconstruct(came_from, current)
        if current in closed:
            continue
        closed.add(current)
        for di, dj, cost in _NEIGHBORS:
            ni, nj = current[0] + di, current[1] + dj
            if not (0 <= ni < rows and 0 <= nj < cols) or blocked[ni, nj]:
                continue
            tentative = g_score[current] + cost
            nb = (ni, nj)
            if tentative < g_score.get(nb, math.inf):
                came_from[nb] = current
                g_score[nb] = tentative
                h = math.hypot(ni - goal[0], nj - goal[1])
                heapq.heappush(open_set, (tentative + h, nb))
    return None


def _reconstruct(came_from, current):
    path = [current]
    while current in came_from:
        current = came_from[current]
        path.append(current)
    return path[::-1]


def reachable_costs(blocked: np.ndarray, start):
    """Dijkstra flood from start; returns (cost grid with inf for unreachable, parents)."""
    rows, cols = blocked.shape
    cost = np.full(blocked.shape, np.inf)
    start = tuple(start)
    if blocked[start]:
        return cost, {}
    cost[start] = 0.0
    parents = {}
    open_set = [(0.0, start)]
    while open_set:
        c, current = heapq.heappop(open_set)
        if c > cost[current]:
            continue
        for di, dj, step in _NEIGHBORS:
            ni, nj = current[0] + di, current[1] + dj
            if not (0 <= ni < rows and 0 <= nj < cols) or blocked[ni, nj]:
                continue
            nc = c + step
            if nc < cost[ni, nj]:
                cost[ni, nj] = nc
                parents[(ni, nj)] = current
                heapq.heappush(open_set, (nc, (ni, nj)))
    return cost, parents


def path_from_parents(parents, start, end):
    path = [tuple(end)]
    start = tuple(start)
    while path[-1] != start:
        path.append(parents[path[-1]])
    return path[::-1]
