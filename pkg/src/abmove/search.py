"""Observation decomposition, A* over (node, time, window) states, the
exhaustive DFS baseline, and explanation assembly/verification.

Observations split into legs between consecutive timed sightings; each
leg is solved as a deadline-exact walk (waiting in place is a legal,
free action) minimizing the full program's anomaly charge.  The g-cost
charges each arrival through the rule index using the recent-visit
category window carried in the state (and across legs, so leg sums match
the whole-trajectory fixpoint score); the h-cost comes from the
single-hop subset, whose charge can only grow when the rest of the rules
join in, so it never overestimates.  Ties break to fewer charged
movements, then fewer movements overall (equal-cost wandering never
displaces waiting), then the lexicographically smallest node path; runs
are reproducible.

Assembly re-scores the concatenated trajectory through the general
fixpoint engine and gates on consistency, entailment of every
observation, and road adjacency before anything is emitted.
"""

from __future__ import annotations

import heapq
import time as _time
from dataclasses import dataclass, field

from .errors import (
    BudgetExceededError,
    InfeasibleLegError,
    ObservationError,
    VerificationError,
)
from .language import TAF
from .lattice import Literal, micro_to_text
from .scoring import (
    TRUE,
    RuleIndex,
    abnormal_fired,
    score_path,
    visits_of,
)

INFINITE = float("inf")


@dataclass(frozen=True)
class RecurringVisit:
    """The same node every `period` timepoints, `count` times in total."""

    node: str
    first_time: int
    period: int
    count: int

    def expand(self):
        return [(self.node, self.first_time + k * self.period) for k in range(self.count)]


@dataclass
class ObservationSet:
    agent: str
    obs: list  # (node, timepoint)
    recurring: list = field(default_factory=list)

    def expanded(self):
        """All concrete (node, timepoint) sightings, sorted by time."""
        concrete = list(self.obs)
        for r in self.recurring:
            concrete.extend(r.expand())
        by_time = {}
        for node, t in concrete:
            if t < 1:
                raise ObservationError(f"observation time {t} before the horizon start")
            if by_time.setdefault(t, node) != node:
                raise ObservationError(
                    f"conflicting observations at t={t}: {by_time[t]!r} vs {node!r}"
                )
        return sorted(((node, t) for t, node in by_time.items()), key=lambda p: p[1])

    def tafs(self):
        return [
            TAF(Literal("at", (self.agent, node)), TRUE, t) for node, t in self.expanded()
        ]


@dataclass(frozen=True)
class Leg:
    start_node: str
    start_time: int
    end_node: str
    end_time: int

    @property
    def duration(self):
        return self.end_time - self.start_time


def decompose(observations):
    """One leg per consecutive observation pair; the legs partition the
    span between the first and last sighting."""
    points = observations.expanded()
    return [
        Leg(a[0], a[1], b[0], b[1]) for a, b in zip(points, points[1:])
    ]


@dataclass
class SearchCounters:
    expansions: int = 0
    reexpansions: int = 0
    pushes: int = 0
    log_expanded: list = None  # when a list, astar records (node, t, window)


@dataclass
class LegSolution:
    path: tuple  # nodes, one per timepoint of the leg (duration + 1)
    cost: int  # micro-units under the full rule index
    anomalous_moves: int
    end_window: tuple
    counters: SearchCounters


def _normalize_window(window, length):
    window = tuple(window or ())[:length]
    return window + (None,) * (length - len(window))


def _arrival(index, graph, node, window, nxt):
    """Cost and new window for moving node -> nxt given the visit window."""
    back = (graph.category(node),) + window
    cost, _fired = index.arrival_cost(back, graph.category(nxt))
    n_back = len(window)
    new_window = back[:n_back] if n_back else ()
    return cost, new_window


def check_feasible(graph, leg):
    dist = graph.hop_distances(leg.end_node)
    if leg.duration < 0:
        raise ObservationError(f"leg runs backwards: {leg}")
    if dist.get(leg.start_node, INFINITE) > leg.duration:
        raise InfeasibleLegError(
            f"{leg.start_node!r} -> {leg.end_node!r} needs "
            f"{dist.get(leg.start_node, INFINITE)} hops but only {leg.duration} "
            "timepoints remain"
        )
    return dist


def astar_leg(graph, index, heur, leg, start_window=(), counters=None):
    """Deadline-exact minimum-anomaly walk for one leg.

    Returns the optimal LegSolution under the (cost, charged moves, total
    moves, lexicographic path) order.  g uses the full rule index on the
    prefix; h is the single-hop bound.
    """
    dist = check_feasible(graph, leg)
    counters = counters if counters is not None else SearchCounters()
    n_back = max(index.n_max - 1, 0)
    window0 = _normalize_window(start_window, n_back)
    start_key = (leg.start_node, leg.start_time, window0)
    start_path = (leg.start_node,)
    best = {start_key: (0, 0, 0, start_path)}
    h0 = heur.bound(leg.start_node, leg.end_node) if heur else 0
    # The push serial keeps heap comparisons from ever reaching the
    # payload (windows mix None and str, which do not order).
    serial = 0
    heap = [(h0, 0, 0, start_path, serial, 0, leg.start_node, leg.start_time, window0)]
    settled = set()
    while heap:
        f, anom, moves, path, _serial, g, node, t, window = heapq.heappop(heap)
        key = (node, t, window)
        if best.get(key) != (g, anom, moves, path):
            continue  # stale entry
        if node == leg.end_node and t == leg.end_time:
            return LegSolution(path, g, anom, window, counters)
        if key in settled:
            counters.reexpansions += 1
        settled.add(key)
        counters.expansions += 1
        if counters.log_expanded is not None:
            counters.log_expanded.append(key)
        remaining = leg.end_time - t
        for nxt in (node,) + graph.neighbors(node):
            if dist.get(nxt, INFINITE) > remaining - 1:
                continue
            if nxt == node:
                g2, anom2, moves2, window2 = g, anom, moves, window
            else:
                cost, window2 = _arrival(index, graph, node, window, nxt)
                g2 = g + cost
                anom2 = anom + (1 if cost else 0)
                moves2 = moves + 1
            path2 = path + (nxt,)
            key2 = (nxt, t + 1, window2)
            cand = (g2, anom2, moves2, path2)
            if key2 not in best or cand < best[key2]:
                best[key2] = cand
                h = heur.bound(nxt, leg.end_node) if heur else 0
                serial += 1
                heapq.heappush(
                    heap,
                    (g2 + h, anom2, moves2, path2, serial, g2, nxt, t + 1, window2),
                )
                counters.pushes += 1
    raise InfeasibleLegError(f"no walk satisfies {leg}")


def dfs_exhaustive(graph, index, leg, start_window=(), counters=None, budget_secs=None):
    """Uninformed exhaustive enumeration of every feasible walk; the
    optimality oracle and runtime baseline.  Same contract and tie order
    as astar_leg; raises BudgetExceededError past the wall-clock budget."""
    dist = check_feasible(graph, leg)
    counters = counters if counters is not None else SearchCounters()
    n_back = max(index.n_max - 1, 0)
    window0 = _normalize_window(start_window, n_back)
    deadline = _time.monotonic() + budget_secs if budget_secs else None
    best = None
    stack = [((leg.start_node,), 0, 0, 0, window0)]
    while stack:
        path, g, anom, moves, window = stack.pop()
        counters.expansions += 1
        if deadline is not None and counters.expansions % 2048 == 0:
            if _time.monotonic() > deadline:
                raise BudgetExceededError(
                    f"exhaustive search exceeded {budget_secs}s",
                    expansions=counters.expansions,
                    elapsed=budget_secs,
                )
        t = leg.start_time + len(path) - 1
        node = path[-1]
        if t == leg.end_time:
            if node == leg.end_node:
                cand = (g, anom, moves, path)
                if best is None or cand < best:
                    best = cand
            continue
        remaining = leg.end_time - t
        # Reverse-sorted push so lexicographically smaller walks pop first.
        for nxt in sorted({node, *graph.neighbors(node)}, reverse=True):
            if dist.get(nxt, INFINITE) > remaining - 1:
                continue
            if nxt == node:
                stack.append((path + (nxt,), g, anom, moves, window))
            else:
                cost, window2 = _arrival(index, graph, node, window, nxt)
                stack.append(
                    (path + (nxt,), g + cost, anom + (1 if cost else 0), moves + 1, window2)
                )
    if best is None:
        raise InfeasibleLegError(f"no walk satisfies {leg}")
    g, anom, moves, path = best
    end_window = window0
    visits = visits_of(list(path))
    for k in range(1, len(visits)):
        end_window = ((graph.category(visits[k - 1][0]),) + end_window)[:n_back]
    return LegSolution(path, g, anom, end_window, counters)


def dfs_remaining_value(graph, index, state_node, state_time, window, leg, budget_secs=None):
    """True optimal remaining cost from a mid-search state: the oracle the
    heuristic is checked against."""
    sub = Leg(state_node, state_time, leg.end_node, leg.end_time)
    return dfs_exhaustive(graph, index, sub, window, budget_secs=budget_secs).cost


@dataclass
class ExplanationTrajectory:
    agent: str
    t_first: int
    path: tuple  # node per timepoint t_first..t_last
    tafs: list  # at() TAFs covering the span
    total_value: int  # micro-units, from the fixpoint run
    leg_value_sum: int  # micro-units, sum of per-leg search costs
    traces: list  # fired anomaly records from the fixpoint run
    result: object  # FixpointResult

    @property
    def t_last(self):
        return self.t_first + len(self.path) - 1

    def node_at(self, t):
        return self.path[t - self.t_first]


def assemble_and_verify(graph, program, observations, solutions, n_max=None):
    """Concatenate leg solutions, re-score through the fixpoint engine,
    and gate on consistency, entailment, and adjacency.

    A failure here is an engine bug, not bad input."""
    points = observations.expanded()
    if not points:
        raise ObservationError("no observations to explain")
    legs = decompose(observations)
    if len(solutions) != len(legs):
        raise VerificationError(f"expected {len(legs)} leg solutions, got {len(solutions)}")
    t_first = points[0][1]
    path = [points[0][0]]
    leg_value_sum = 0
    for leg, sol in zip(legs, solutions):
        if sol.path[0] != leg.start_node or sol.path[-1] != leg.end_node:
            raise VerificationError(f"solution endpoints do not match {leg}")
        if len(sol.path) != leg.duration + 1:
            raise VerificationError(f"solution length does not match {leg}")
        if sol.path[0] != path[-1]:
            raise VerificationError("legs do not chain")
        path.extend(sol.path[1:])  # shared boundary observation not duplicated
        leg_value_sum += sol.cost
    path = tuple(path)

    for a, b in zip(path, path[1:]):
        if a != b and b not in graph.adj[a]:
            raise VerificationError(f"teleport {a!r} -> {b!r} in assembled trajectory")
    for node, t in points:
        if path[t - t_first] != node:
            raise VerificationError(f"observation at(a,{node})@{t} not covered")

    if n_max is None:
        n_max = RuleIndex.from_program(program).n_max
    result, total_value = score_path(
        program, observations.agent, list(path), graph, n_max, t_start=t_first
    )
    for taf in observations.tafs():
        if not taf.annotation.leq(result.model.get(taf.literal, taf.time)):
            raise VerificationError(f"observation {taf} not entailed by the model")
    if total_value != leg_value_sum:
        raise VerificationError(
            f"fixpoint value {micro_to_text(total_value)} disagrees with "
            f"leg sum {micro_to_text(leg_value_sum)}"
        )
    at_tafs = [
        TAF(Literal("at", (observations.agent, node)), TRUE, t_first + k)
        for k, node in enumerate(path)
    ]
    return ExplanationTrajectory(
        observations.agent,
        t_first,
        path,
        at_tafs,
        total_value,
        leg_value_sum,
        abnormal_fired(result),
        result,
    )


def explain(trajectory):
    """Per-movement report of the rules behind each anomaly charge."""
    movements = []
    for record in trajectory.traces:
        t = record.head_time
        frm = trajectory.node_at(t - 1) if t > trajectory.t_first else None
        movements.append(
            {
                "time": t,
                "from": frm,
                "to": trajectory.node_at(t),
                "rule": str(record.rule),
                "body_time": record.body_time,
                "annotation": str(record.annotation),
            }
        )
    return {
        "agent": trajectory.agent,
        "total_value": micro_to_text(trajectory.total_value),
        "leg_value_sum": micro_to_text(trajectory.leg_value_sum),
        "movements": movements,
    }


def solve_legs(graph, program, observations, heuristic=None, counters=None):
    """Solve every leg in order, carrying the visit window across seams.
    Returns (legs, solutions)."""
    index = RuleIndex.from_program(program)
    legs = decompose(observations)
    window = ()
    solutions = []
    for leg in legs:
        sol = astar_leg(graph, index, heuristic, leg, window, counters)
        window = sol.end_window
        solutions.append(sol)
    return legs, solutions


def abduce(graph, program, observations, heuristic=None, counters=None):
    """Decompose, solve each leg, assemble, and verify.  `heuristic` is a
    Heuristic instance or None for uninformed uniform-cost search."""
    _legs, solutions = solve_legs(graph, program, observations, heuristic, counters)
    return assemble_and_verify(graph, program, observations, solutions)
