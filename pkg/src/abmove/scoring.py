"""Scoring trajectories against a movement program, two ways.

Slow path (ground truth): compile a node path into TAFs -- ``at`` facts
plus visit-history facts -- and run the general fixpoint engine over the
program.  ``anomaly_value`` is the parsimony score: the sum over
timepoints of the lower bound of the agent's ``abnormal`` atom, in exact
micro-units.

Fast path: a RuleIndex recognizes the learner's anchored rule shape and
charges arrivals directly from the recent-visit category window, which
is what makes search costs Markovian in a (node, time, window) state.
The two paths are asserted equal at verification time.

Projection (how a path becomes TAFs): the agent's node-by-timepoint path
is collapsed into its visit sequence (waiting merged into dwells).  Every
timepoint asserts ``at(agent, node)``; occupancy category predicates are
derived from those by per-node rules carried in the program.  At each
arrival timepoint, ``ago<k>_<cat>`` facts record the categories of the
k-back visits (k counted in edge traversals, so waits do not advance
it), which is what anchors an anomaly rule to the completion time of the
movement it charges.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ProgramError, VerificationError
from .fixpoint import bottom_interpretation, gamma_star
from .geograph import LANDMARK_CATEGORIES, category_predicate
from .language import (
    TAF,
    AnnotatedLiteral,
    DomainDecl,
    GapRule,
    PredDecl,
    Program,
    TAG_MH,
    TAG_NONE,
    TAG_SH,
    TemporalPair,
)
from .lattice import SCALE, Annotation, Literal, is_empty, meet_all

TRUE = Annotation(SCALE, SCALE)
ABNORMAL = "abnormal"

_CATEGORY_PREDS = {category_predicate(c): c for c in LANDMARK_CATEGORIES}
_AGO_RE = re.compile(r"^ago(\d+)_([a-z]+)$")


def ago_predicate(hops, category):
    return f"ago{hops}_{category_predicate(category)}"


def constant_ok(symbol):
    """Graph/agent ids must be lowercase-initial identifiers to appear as
    program constants."""
    return bool(re.fullmatch(r"[a-z_][A-Za-z0-9_]*", symbol))


def occupancy_rules(graph, node_ids=None):
    """Per-node derivation of agent occupancy categories from at() facts."""
    rules = []
    for nid in sorted(node_ids if node_ids is not None else graph.nodes):
        node = graph.nodes[nid]
        if not node.is_landmark:
            continue
        if not constant_ok(nid):
            raise ProgramError(f"node id {nid!r} is not usable as a program constant")
        head = AnnotatedLiteral(Literal(category_predicate(node.category), ("A",)), TRUE)
        body = (AnnotatedLiteral(Literal("at", ("A", nid)), TRUE),)
        rules.append(GapRule(head, body, 0, TAG_NONE))
    return rules


def movement_declarations(agent, node_ids, n_max):
    """Domains and predicate declarations for a movement program."""
    domains = [
        DomainDecl("agent", (agent,)),
        DomainDecl("loc", tuple(sorted(node_ids))),
    ]
    preds = [PredDecl(ABNORMAL, ("agent",)), PredDecl("at", ("agent", "loc"))]
    preds.append(PredDecl("conn", ("loc", "loc")))
    for cat in LANDMARK_CATEGORIES:
        preds.append(PredDecl(category_predicate(cat), ("agent",)))
    for k in range(1, n_max + 1):
        for cat in LANDMARK_CATEGORIES:
            preds.append(PredDecl(ago_predicate(k, cat), ("agent",)))
    return domains, preds


def visits_of(path):
    """Collapse a node-per-timepoint path into (node, arrival_index) visits.

    Indexes are offsets into the path; waiting extends a dwell instead of
    opening a new visit.
    """
    visits = []
    for k, node in enumerate(path):
        if not visits or visits[-1][0] != node:
            visits.append((node, k))
    return visits


def projection_tafs(agent, path, graph, n_max, t_start=1):
    """at() facts for every timepoint plus ago<k> history facts at arrivals."""
    tafs = []
    for k, node in enumerate(path):
        tafs.append(TAF(Literal("at", (agent, node)), TRUE, t_start + k))
    visits = visits_of(path)
    for v_idx in range(1, len(visits)):
        node, offset = visits[v_idx]
        t = t_start + offset
        for k in range(1, min(n_max, v_idx) + 1):
            back_node = visits[v_idx - k][0]
            back = graph.nodes[back_node]
            if back.is_landmark:
                pred = ago_predicate(k, back.category)
                tafs.append(TAF(Literal(pred, (agent,)), TRUE, t))
    return tafs


def path_program(program, agent, path, graph, n_max, t_start=1):
    """The program extended with a path's projection TAFs."""
    scored = Program(
        list(program.domains),
        list(program.preds),
        list(program.rules),
        list(program.tafs) + projection_tafs(agent, path, graph, n_max, t_start),
    )
    return scored


def anomaly_value(result_or_model, agent):
    """Parsimony score of a minimal model: time-sum of lower bounds on the
    agent's abnormal atom, in micro-units.  Raises on inconsistent input."""
    model = result_or_model
    if hasattr(model, "consistent"):
        if not model.consistent:
            raise VerificationError("anomaly value undefined on an inconsistent model")
        model = model.model
    total = 0
    for (lit, _t), a in model.items():
        if lit.predicate == ABNORMAL and not lit.negated and lit.args == (agent,):
            total += a.lower
    return total


def score_path(program, agent, path, graph, n_max, t_start=1):
    """Ground-truth scoring: gamma* over the program plus the path's TAFs.

    Returns (FixpointResult, value_micro).
    """
    scored = path_program(program, agent, path, graph, n_max, t_start)
    horizon = t_start + len(path) - 1
    result = gamma_star(scored, bottom_interpretation(horizon))
    if not result.consistent:
        raise VerificationError(f"scoring program inconsistent for agent {agent!r}")
    return result, anomaly_value(result.model, agent)


def abnormal_fired(result):
    """Fired records restricted to anomaly conclusions, ordered by time."""
    records = [r for r in result.fired if r.rule.head.literal.predicate == ABNORMAL]
    records.sort(key=lambda r: (r.head_time, str(r.rule)))
    return records


@dataclass(frozen=True)
class IndexedRule:
    hops: int
    from_category: str
    to_category: str
    annotation: Annotation
    rule: GapRule


class RuleIndex:
    """Anchored anomaly rules keyed by (hops, from-category, to-category).

    Only the learner's rule shape is searchable this way; anything else in
    an anomaly position is rejected so the fast path can never silently
    disagree with the fixpoint engine.
    """

    def __init__(self, rules, n_max):
        self.n_max = n_max
        self.by_key = {}
        for r in rules:
            self.by_key.setdefault((r.hops, r.from_category, r.to_category), []).append(r)

    @classmethod
    def from_program(cls, program, tags=(TAG_SH, TAG_MH)):
        indexed = []
        n_max = 1
        for rule in program.rules:
            head = rule.head.literal
            if head.predicate != ABNORMAL:
                if _is_occupancy_rule(rule):
                    continue
                raise ProgramError(f"unsupported infrastructure rule shape: {rule}")
            if rule.tag not in (TAG_SH, TAG_MH):
                raise ProgramError(f"anomaly rule must be tagged SH or MH: {rule}")
            if rule.tag not in tags:
                continue
            indexed.append(_index_anomaly_rule(rule))
            n_max = max(n_max, indexed[-1].hops)
        return cls(indexed, n_max)

    def arrival_cost(self, back_categories, to_category):
        """Cost and fired rules for arriving at a to_category landmark with
        the given history (most recent first; None where unknown)."""
        if to_category is None or to_category == "Intersection":
            return 0, ()
        fired = []
        for n, cat in enumerate(back_categories, start=1):
            if n > self.n_max:
                break
            if cat is None or cat == "Intersection":
                continue
            fired.extend(self.by_key.get((n, cat, to_category), ()))
        if not fired:
            return 0, ()
        meet = meet_all(r.annotation for r in fired)
        if is_empty(meet):
            raise ProgramError(
                f"rules firing together at ({to_category}) have disjoint annotations"
            )
        return meet.lower, tuple(fired)


def _is_occupancy_rule(rule):
    head = rule.head.literal
    return (
        head.predicate in _CATEGORY_PREDS
        and rule.delta_t == 0
        and len(rule.body) == 1
        and isinstance(rule.body[0], AnnotatedLiteral)
        and rule.body[0].literal.predicate == "at"
        and not rule.body[0].literal.negated
    )


def _index_anomaly_rule(rule):
    if rule.delta_t != 0 or len(rule.body) != 3:
        raise ProgramError(f"unsupported anomaly rule shape: {rule}")
    ago, here, after = rule.body
    if not (isinstance(ago, AnnotatedLiteral) and isinstance(here, AnnotatedLiteral)):
        raise ProgramError(f"unsupported anomaly rule shape: {rule}")
    if not isinstance(after, TemporalPair) or after.op != "AFTER":
        raise ProgramError(f"unsupported anomaly rule shape: {rule}")
    m = _AGO_RE.match(ago.literal.predicate)
    if not m or here.literal.predicate not in _CATEGORY_PREDS:
        raise ProgramError(f"unsupported anomaly rule shape: {rule}")
    hops = int(m.group(1))
    from_cat = _CATEGORY_PREDS.get(m.group(2))
    to_cat = _CATEGORY_PREDS[here.literal.predicate]
    if from_cat is None:
        raise ProgramError(f"unknown category in {rule}")
    if (
        after.first.predicate != here.literal.predicate
        or after.second.predicate != category_predicate(from_cat)
    ):
        raise ProgramError(f"AFTER operands do not match the anchored pair in {rule}")
    return IndexedRule(hops, from_cat, to_cat, rule.head.annotation, rule)
