"""Bottom-up learning of anomaly rules from one agent's training trace.

The trace is snapped to the graph, movement patterns (ordered landmark
category pairs n hops apart along the visit sequence) are counted, and a
rule is emitted for every graph-possible pair whose observed conditional
frequency falls below the rarity threshold tau.  Rule confidence maps
rarity into [0.5, 1.0]: conf = 0.5 + 0.5 * (1 - f/tau), which hits [1,1]
for never-seen pairs.  Single-hop rules are tagged SH, longer ones MH;
the single-hop subset is what the admissible search heuristic is built
from, so the tags are load-bearing.

Same trace + tau + graph always yields the identical program.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

from .errors import InputError, ProgramError, SnapError
from .geograph import category_predicate
from .language import (
    AnnotatedLiteral,
    GapRule,
    Program,
    TAG_MH,
    TAG_SH,
    TemporalPair,
)
from .lattice import SCALE, Annotation, Literal
from .scoring import (
    TRUE,
    ABNORMAL,
    ago_predicate,
    constant_ok,
    movement_declarations,
    occupancy_rules,
)

DEFAULT_SNAP_RADIUS_M = 250.0
DEFAULT_N_MAX = 3


@dataclass(frozen=True)
class TrainingTrajectory:
    agent: str
    points: tuple  # (lat, lon, timestamp), strictly increasing timestamps
    movtype: str = "personal_vehicle"

    def __post_init__(self):
        ts = [p[2] for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InputError(f"timestamps not strictly increasing for {self.agent!r}")


def load_trajectory(path, agent, movtype="personal_vehicle"):
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"lat", "lon", "timestamp"}.issubset(reader.fieldnames):
            raise InputError(f"{path}: header must contain lat,lon,timestamp")
        for row_no, row in enumerate(reader, start=2):
            try:
                points.append((float(row["lat"]), float(row["lon"]), float(row["timestamp"])))
            except (TypeError, ValueError):
                raise InputError(f"{path} row {row_no}: bad point") from None
    return TrainingTrajectory(agent, tuple(points), movtype)


@dataclass(frozen=True)
class SnappedVisit:
    node: str
    time: int  # discrete timepoint, one per edge traversal
    dwell: int  # raw samples collapsed into this visit


def snap_trajectory(raw, graph, radius_m=DEFAULT_SNAP_RADIUS_M):
    """Snap points to nearest nodes, collapse dwells, discretize time.

    Consecutive visits must be road-adjacent (training traces are assumed
    to be dense enough to touch every traversed node).
    """
    if len(graph) == 0:
        raise SnapError("cannot snap onto an empty graph")
    visits = []
    for lat, lon, ts in raw.points:
        node, dist = graph.nearest_node(lat, lon)
        if dist > radius_m:
            raise SnapError(
                f"point ({lat}, {lon}) at t={ts} is {dist:.0f} m from the nearest "
                f"node, beyond the {radius_m:.0f} m snap radius"
            )
        if visits and visits[-1][0] == node:
            visits[-1][1] += 1
        else:
            visits.append([node, 1])
    out = []
    for k, (node, dwell) in enumerate(visits):
        if k > 0:
            prev = out[-1].node
            if node not in graph.adj[prev]:
                raise SnapError(
                    f"consecutive visits {prev!r} -> {node!r} are not road-adjacent"
                )
        out.append(SnappedVisit(node, k + 1, dwell))
    return out


@dataclass(frozen=True)
class MovementPattern:
    from_category: str
    to_category: str
    hops: int
    frequency: int
    support: int

    def __post_init__(self):
        if self.frequency > self.support:
            raise InputError("pattern frequency cannot exceed its support")


def extract_patterns(visits, graph, n_max=DEFAULT_N_MAX):
    """Observed landmark-pair counts at each hop length <= n_max.

    Hops are steps along the visit sequence (intersections count as hops
    but never as pattern endpoints).  Support for a from-category at hop n
    is the number of departures from that category with n steps left, so
    frequency/support is a conditional frequency.
    """
    cats = [graph.nodes[v.node].category for v in visits]
    freq = {}
    support = {}
    for n in range(1, n_max + 1):
        for i in range(len(visits) - n):
            c1 = cats[i]
            if c1 == "Intersection":
                continue
            support[(c1, n)] = support.get((c1, n), 0) + 1
            c2 = cats[i + n]
            if c2 == "Intersection":
                continue
            freq[(c1, c2, n)] = freq.get((c1, c2, n), 0) + 1
    patterns = []
    for (c1, c2, n) in sorted(freq, key=lambda k: (k[2], k[0], k[1])):
        patterns.append(MovementPattern(c1, c2, n, freq[(c1, c2, n)], support[(c1, n)]))
    return patterns


def possible_pairs(graph, n_max=DEFAULT_N_MAX):
    """Landmark category pairs joinable by a walk of exactly n edges."""
    pairs = set()
    for start_id, start in graph.nodes.items():
        if not start.is_landmark:
            continue
        frontier = {start_id}
        for n in range(1, n_max + 1):
            frontier = {v for u in frontier for v in graph.adj[u]}
            for v in frontier:
                node = graph.nodes[v]
                if node.is_landmark and node.category != start.category:
                    pairs.add((start.category, node.category, n))
    return pairs


def _rarity_confidence(f, tau):
    conf = Fraction(1, 2) + Fraction(1, 2) * (1 - f / tau)
    return int(round(conf * SCALE))


def anchored_rule(from_category, to_category, hops, confidence_micro, tag):
    """An anomaly rule that fires exactly at the completion timepoint of a
    from->to movement of the given hop length."""
    c1 = category_predicate(from_category)
    c2 = category_predicate(to_category)
    head = AnnotatedLiteral(Literal(ABNORMAL, ("A",)), Annotation(confidence_micro, SCALE))
    body = (
        AnnotatedLiteral(Literal(ago_predicate(hops, from_category), ("A",)), TRUE),
        AnnotatedLiteral(Literal(c2, ("A",)), TRUE),
        TemporalPair("AFTER", Literal(c2, ("A",)), Literal(c1, ("A",)), TRUE),
    )
    return GapRule(head, body, 0, tag)


def learn_rules(patterns, tau, graph, agent, n_max=DEFAULT_N_MAX):
    """Program with SH/MH anomaly rules for rare graph-possible patterns.

    tau in (0,1] is the rarity threshold as a Fraction/decimal string;
    pairs with conditional frequency f < tau get a rule at confidence
    0.5 + 0.5*(1 - f/tau), rounded to the fixed-point grid.
    """
    tau = Fraction(tau)
    if not 0 < tau <= 1:
        raise InputError(f"tau must be in (0,1], got {tau}")
    if not constant_ok(agent):
        raise ProgramError(f"agent id {agent!r} is not usable as a program constant")
    freq = {(p.from_category, p.to_category, p.hops): p.frequency for p in patterns}
    support = {}
    for p in patterns:
        key = (p.from_category, p.hops)
        if support.setdefault(key, p.support) != p.support:
            raise InputError(f"inconsistent supports for {key}")
    rules = occupancy_rules(graph)
    for (c1, c2, n) in sorted(possible_pairs(graph, n_max), key=lambda k: (k[2], k[0], k[1])):
        s = support.get((c1, n), 0)
        f = Fraction(freq.get((c1, c2, n), 0), s) if s else Fraction(0)
        if f >= tau:
            continue
        tag = TAG_SH if n == 1 else TAG_MH
        rules.append(anchored_rule(c1, c2, n, _rarity_confidence(f, tau), tag))
    domains, preds = movement_declarations(agent, graph.nodes, n_max)
    return Program(domains, preds, rules, []).validate()


def learn_from_trace(raw, graph, tau, n_max=DEFAULT_N_MAX, radius_m=DEFAULT_SNAP_RADIUS_M):
    """Snap, extract, learn: the whole per-agent pipeline."""
    visits = snap_trajectory(raw, graph, radius_m)
    patterns = extract_patterns(visits, graph, n_max)
    return learn_rules(patterns, tau, graph, raw.agent, n_max), visits
