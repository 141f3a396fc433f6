"""Per-movement costs under the single-hop subset, graph weighting, and
the admissible search heuristic.

A movement's cost is what the single-hop rules would add to the anomaly
score if the agent made just that movement: the lower bound of the meet
of the fired heads.  Because single-hop charges depend only on the two
endpoint categories, they are modular, so they can be precomputed for
every directed edge (G_w) or filled in lazily, frontier by frontier
(ad-hoc weighting), with identical results.

The heuristic lower-bounds the true remaining cost of any completion:
'dijkstra' uses the minimum single-hop-weight walk to the goal (memoized
backward table per goal; consistent), 'depth1' the cheapest single
outgoing movement (admissible, covered on demand), 'none' is zero.
Every full-program completion costs at least its single-hop part, which
is what makes the bound sound.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .errors import GraphError
from .geograph import WeightedGraph
from .language import Program, TAG_SH
from .scoring import abnormal_fired, movement_declarations, occupancy_rules, score_path

INFINITE = float("inf")

HEURISTIC_MODES = ("dijkstra", "depth1", "none")


@dataclass
class MovementCost:
    movement: tuple  # directed (from, to)
    cost: int  # micro-units
    fired: list  # FiredRuleRecords behind the charge


def movement_cost(movement, sh_program, graph):
    """Cost of one directed movement under the single-hop rules, computed
    by a local fixpoint run over a two-timepoint context."""
    u, v = movement
    if v not in graph.adj.get(u, ()):
        raise GraphError(f"movement {movement!r} is not road-adjacent")
    agent = sh_program.domain("agent").constants[0]
    domains, preds = movement_declarations(agent, (u, v), n_max=1)
    mini = Program(
        domains,
        preds,
        occupancy_rules(graph, (u, v)) + sh_program.rules_tagged(TAG_SH),
        [],
    )
    result, value = score_path(mini, agent, [u, v], graph, n_max=1)
    return MovementCost(movement, value, abnormal_fired(result))


def precompute_weights(graph, sh_program):
    """Weight every directed movement; coverage complete."""
    gw = WeightedGraph(graph)
    for movement in graph.directed_movements():
        gw.set_weight(movement, movement_cost(movement, sh_program, graph).cost)
    return gw


def ensure_covered(gw, node, sh_program):
    """Ad-hoc weighting: compute exactly the uncovered outgoing movements
    of a frontier node; previously covered movements are untouched.
    Returns the number of new computations."""
    if node not in gw.base.nodes:
        raise GraphError(f"unknown node {node!r}")
    fresh = 0
    for nbr in gw.base.neighbors(node):
        movement = (node, nbr)
        if movement not in gw.covered:
            gw.set_weight(movement, movement_cost(movement, sh_program, gw.base).cost)
            fresh += 1
    return fresh


class Heuristic:
    """Admissible remaining-cost bound for (node, time) search states."""

    def __init__(self, gw, sh_program, mode="dijkstra"):
        if mode not in HEURISTIC_MODES:
            raise ValueError(f"heuristic mode must be one of {HEURISTIC_MODES}")
        self.gw = gw
        self.sh_program = sh_program
        self.mode = mode
        self._tables = {}

    def bound(self, node, goal_node):
        """Lower bound (micro-units) on the cost of any completion from
        node to goal_node; INFINITE when the goal is unreachable."""
        if self.mode == "none":
            return 0
        if node == goal_node:
            return 0
        if self.mode == "depth1":
            ensure_covered(self.gw, node, self.sh_program)
            weights = [self.gw.weight((node, nbr)) for nbr in self.gw.base.neighbors(node)]
            return min(weights, default=INFINITE)
        return self._table(goal_node).get(node, INFINITE)

    def _table(self, goal_node):
        """Backward Dijkstra over directed single-hop weights, per goal."""
        table = self._tables.get(goal_node)
        if table is not None:
            return table
        if not self.gw.fully_covered:
            for movement in self.gw.base.directed_movements():
                if movement not in self.gw.covered:
                    self.gw.set_weight(
                        movement, movement_cost(movement, self.sh_program, self.gw.base).cost
                    )
        incoming = {nid: [] for nid in self.gw.base.nodes}
        for (u, v), w in self.gw.weights.items():
            incoming[v].append((u, w))
        dist = {goal_node: 0}
        heap = [(0, goal_node)]
        while heap:
            d, v = heapq.heappop(heap)
            if d > dist.get(v, INFINITE):
                continue
            for u, w in incoming[v]:
                nd = d + w
                if nd < dist.get(u, INFINITE):
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
        self._tables[goal_node] = dist
        return dist
