"""Brute-force reference implementations used as test oracles."""
from __future__ import annotations

import itertools
import math


def simple_cycles(edges):
    """Every directed simple cycle as a tuple of edges (exhaustive search)."""
    nodes = sorted({n for e in edges for n in e})
    succ = {n: sorted(j for (i, j) in edges if i == n) for n in nodes}
    cycles = []

    def walk(start, path):
        for v in succ[path[-1]]:
            if v == start:
                cycles.append(tuple(zip(path, path[1:] + [start])))
            elif v > start and v not in path:
                walk(start, path + [v])

    for s in nodes:
        walk(s, [s])
    return cycles


def break_cycles_oracle(edges):
    """Drop the weakest edge (Gamma asc, p_adj desc, (i, j) asc) of every cycle."""
    def key(e):
        g, p = edges[e]
        return (g, -p, e)

    doomed = {min(cyc, key=key) for cyc in simple_cycles(edges)}
    return {e: v for e, v in edges.items() if e not in doomed}


def all_simple_paths(edges):
    nodes = sorted({n for e in edges for n in e})
    succ = {n: [j for (i, j) in edges if i == n] for n in nodes}
    out = []

    def walk(path):
        if len(path) > 1:
            out.append(tuple(path))
        for v in succ[path[-1]]:
            if v not in path:
                walk(path + [v])

    for s in nodes:
        walk([s])
    return out


def best_path_oracle(edges, tol=1e-12):
    """Exhaustive: best maximal simple path of the cycle-broken graph."""
    dag = break_cycles_oracle(edges)
    best = None
    for path in all_simple_paths(dag):
        on = set(path)
        if any(j == path[0] and i not in on for (i, j) in dag):
            continue
        if any(i == path[-1] and j not in on for (i, j) in dag):
            continue
        score = math.fsum(math.log(dag[(a, b)][0]) for a, b in zip(path, path[1:]))
        cand = (score, len(path), path)
        if best is None or _better(cand, best, tol):
            best = cand
    if best is None:
        return (), 0.0
    return best[2], math.prod(dag[(a, b)][0] for a, b in zip(best[2], best[2][1:]))


def _better(a, b, tol):
    if abs(a[0] - b[0]) > tol:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] > b[1]
    return a[2] < b[2]


def random_graph(rng, max_nodes=8, gammas=None):
    n = int(rng.integers(1, max_nodes + 1))
    density = rng.uniform(0.05, 0.6)
    edges = {}
    for i, j in itertools.permutations(range(n), 2):
        if rng.random() < density:
            g = float(rng.choice(gammas)) if gammas is not None else float(rng.uniform(0.05, 1.0))
            p = float(rng.choice([0.0, 0.01, 0.02])) if gammas is not None else float(rng.uniform(0, 0.05))
            edges[(i, j)] = (g, p)
    return edges
