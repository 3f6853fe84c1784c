"""Maximum-strength attack path over a weighted directed graph.

Steps:

1. Cycle breaking. Edges are totally ordered by weakness: smaller Gamma,
   then larger adjusted p-value, then the lexicographically smaller (i, j).
   An edge is removed iff it is the weakest edge of some directed cycle,
   i.e. its head reaches its tail through strictly stronger edges. Every
   cycle loses an edge, so the result is acyclic, and the rule does not
   depend on the order in which cycles are found.
2. Dynamic programme in topological order over the DAG, maximising the sum
   of log Gamma over paths that start at a source (in-degree 0).
3. Candidates are maximal paths: in a DAG these run source to sink. The
   winner maximises the product of Gamma, then length, then the
   lexicographically smallest node sequence.
"""
from __future__ import annotations

import math
from collections import deque
from typing import Mapping

EdgeMap = Mapping[tuple[int, int], tuple[float, float]]   # (i, j) -> (gamma, p_adj)

SCORE_TOL = 1e-12


def weakness_key(edge: tuple[int, int], gamma: float, p_adj: float):
    """Sort key: the first edge in ascending order is the weakest."""
    return (gamma, -p_adj, edge)


def break_cycles(edges: EdgeMap) -> dict[tuple[int, int], tuple[float, float]]:
    keys = {e: weakness_key(e, *v) for e, v in edges.items()}
    succ: dict[int, list[tuple[int, int]]] = {}
    for e in edges:
        succ.setdefault(e[0], []).append(e)
    kept = {}
    for e, val in edges.items():
        i, j = e
        ke = keys[e]
        seen = {j}
        frontier = deque([j])
        closes_cycle = False
        while frontier and not closes_cycle:
            u = frontier.popleft()
            for f in succ.get(u, ()):
                if keys[f] <= ke:
                    continue
                v = f[1]
                if v == i:
                    closes_cycle = True
                    break
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        if not closes_cycle:
            kept[e] = val
    return kept


def _better(a, b) -> bool:
    """Is candidate ``a = (log_score, length, seq)`` preferred over ``b``?"""
    if b is None:
        return True
    if a[0] > b[0] + SCORE_TOL:
        return True
    if a[0] < b[0] - SCORE_TOL:
        return False
    if a[1] != b[1]:
        return a[1] > b[1]
    return a[2] < b[2]


def _topological_order(nodes, succ, indeg) -> list:
    indeg = dict(indeg)
    ready = sorted(n for n in nodes if indeg[n] == 0)
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in sorted(succ.get(u, ())):
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
                ready.sort()
    if len(order) != len(nodes):
        raise AssertionError("graph still contains a cycle")
    return order


def best_dag_path(dag: EdgeMap) -> tuple[tuple[int, ...], float]:
    """Best maximal path of an acyclic edge map; ``((), 0.0)`` when empty."""
    if not dag:
        return (), 0.0
    nodes = sorted({n for e in dag for n in e})
    succ: dict[int, list[int]] = {}
    pred: dict[int, list[int]] = {}
    indeg = {n: 0 for n in nodes}
    for (i, j) in dag:
        succ.setdefault(i, []).append(j)
        pred.setdefault(j, []).append(i)
        indeg[j] += 1
    best: dict[int, tuple[float, int, tuple[int, ...]]] = {}
    for v in _topological_order(nodes, succ, indeg):
        if indeg[v] == 0:
            best[v] = (0.0, 1, (v,))
            continue
        cand = None
        for u in pred[v]:
            s, length, seq = best[u]
            ext = (s + math.log(dag[(u, v)][0]), length + 1, seq + (v,))
            if _better(ext, cand):
                cand = ext
        best[v] = cand
    winner = None
    for v in nodes:
        if v not in succ and indeg[v] > 0 and _better(best[v], winner):
            winner = best[v]
    return winner[2], math.exp(winner[0])


def extract_best_path(edges: EdgeMap) -> tuple[tuple[int, ...], float, dict]:
    """Cycle-break then solve; returns ``(nodes, product, surviving_edges)``."""
    dag = break_cycles(edges)
    nodes, _ = best_dag_path(dag)
    score = 1.0
    for a, b in zip(nodes, nodes[1:]):
        score *= dag[(a, b)][0]
    return nodes, (score if nodes else 0.0), dag
