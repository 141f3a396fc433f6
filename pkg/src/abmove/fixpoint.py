"""Satisfaction semantics, the inference operator, and its closure.

One sweep (``gamma_step``) asserts every TAF into the result and, for
every ground rule and timepoint t whose body is satisfied *in the input
interpretation*, narrows the head atom at t + delta_t by meeting in the
head annotation.  Sweeps are simultaneous: all bodies of a sweep read the
same input.  ``gamma_star`` iterates to the least fixpoint, which exists
because every update strictly ascends a finite sublattice (the meet
closure of the program's annotation constants).

Temporal formula semantics (an explicit modelling choice; the source
material gives only the intuition "first occurs after/before second"):
``AFTER(p,q):m`` holds at t iff there are witnesses t2 < t1 <= t with
``m`` contained in both i(p,t1) and i(q,t2); BEFORE swaps the order
(t1 < t2 <= t).  Witness order is strict and both witnesses lie at or
before the evaluation time.  Negated literals are looked up as their own
lattice entries.

Every head update is traced as a FiredRuleRecord for explainability;
records are deduplicated by (rule, head_time), keeping the latest, so a
record's annotation matches the converged model entry it explains.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field

from .lattice import Interpretation, is_empty
from .language import AnnotatedLiteral, ground_program


@dataclass(frozen=True)
class FiredRuleRecord:
    rule: object  # ground GapRule
    body_time: int
    head_time: int
    annotation: object  # head entry after this firing's meet


@dataclass
class FixpointResult:
    model: Interpretation
    fired: list = field(default_factory=list)
    consistent: bool = True
    iterations: int = 0

    def to_json(self):
        """JSON-serializable export: model entries, fired trace, counts."""
        entries = sorted(
            (str(lit), t, str(a)) for (lit, t), a in self.model.items()
        )
        return {
            "consistent": self.consistent,
            "iterations": self.iterations,
            "horizon": self.model.horizon,
            "model": [
                {"literal": lit, "time": t, "annotation": a}
                for lit, t, a in entries
            ],
            "fired": [
                {
                    "rule": str(r.rule),
                    "body_time": r.body_time,
                    "head_time": r.head_time,
                    "annotation": str(r.annotation),
                }
                for r in self.fired
            ],
        }

    def to_json_text(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


class GroundProgram:
    """A program grounded once, eagerly, ready for sweeping."""

    def __init__(self, program):
        self.program = program
        self.rules = ground_program(program)
        self.tafs = list(program.tafs)


def _as_ground(program):
    return program if isinstance(program, GroundProgram) else GroundProgram(program)


class _SweepCache:
    """Per-sweep satisfaction memo for temporal formulas.

    Satisfaction of AFTER/BEFORE is monotone in the evaluation time (the
    witnesses stay in the past), so each formula reduces to an earliest
    satisfaction time, computed once per sweep from the sorted times at
    which each operand's annotation holds.
    """

    def __init__(self, interp):
        self.interp = interp
        self._times = {}
        self._thresholds = {}

    def _holds_times(self, literal, annotation):
        key = (literal, annotation)
        times = self._times.get(key)
        if times is None:
            times = [
                t
                for t in range(1, self.interp.horizon + 1)
                if annotation.leq(self.interp.get(literal, t))
            ]
            self._times[key] = times
        return times

    def earliest(self, pair):
        """Earliest t at which the temporal pair holds, or None."""
        if pair in self._thresholds:
            return self._thresholds[pair]
        mu = pair.annotation
        if pair.op == "AFTER":
            early, late = pair.second, pair.first
        else:  # BEFORE: first occurs before second
            early, late = pair.first, pair.second
        early_times = self._holds_times(early, mu)
        threshold = None
        if early_times:
            late_times = self._holds_times(late, mu)
            idx = bisect_right(late_times, early_times[0])
            if idx < len(late_times):
                threshold = late_times[idx]
        self._thresholds[pair] = threshold
        return threshold


def satisfies_formula(interp, formula, t, _cache=None):
    """Whether the interpretation satisfies the body formula at time t."""
    if not 1 <= t <= interp.horizon:
        raise ValueError(f"timepoint {t} outside 1..{interp.horizon}")
    if isinstance(formula, AnnotatedLiteral):
        return formula.annotation.leq(interp.get(formula.literal, t))
    cache = _cache if _cache is not None else _SweepCache(interp)
    earliest = cache.earliest(formula)
    return earliest is not None and earliest <= t


def _taf_times(taf, horizon):
    if taf.time is None:
        return range(1, horizon + 1)
    if taf.time > horizon:
        return ()
    return (taf.time,)


def gamma_step(program, interp):
    """One simultaneous sweep; result model is >= the input pointwise."""
    gp = _as_ground(program)
    horizon = interp.horizon
    result = interp.copy()
    fired = []
    cache = _SweepCache(interp)

    def narrow(literal, t, annotation):
        m = result.get(literal, t).meet(annotation)
        if is_empty(m):
            return None
        result.set(literal, t, m)
        return m

    for taf in gp.tafs:
        for t in _taf_times(taf, horizon):
            if narrow(taf.literal, t, taf.annotation) is None:
                return FixpointResult(result, fired, False, 0)

    for rule in gp.rules:
        head_lit = rule.head.literal
        head_ann = rule.head.annotation
        for t in range(1, horizon + 1):
            head_time = t + rule.delta_t
            if head_time > horizon:
                break
            if all(satisfies_formula(interp, f, t, cache) for f in rule.body):
                m = narrow(head_lit, head_time, head_ann)
                if m is None:
                    return FixpointResult(result, fired, False, 0)
                fired.append(FiredRuleRecord(rule, t, head_time, m))

    changed = result != interp
    return FixpointResult(result, fired, True, 1 if changed else 0)


def gamma_star(program, interp):
    """Iterate sweeps to the least fixpoint above the start interpretation.

    ``iterations`` counts the sweeps that changed the model.  The fired
    list is the union over sweeps, deduplicated by (rule, head_time) with
    the latest record kept.
    """
    gp = _as_ground(program)
    fired_by_key = {}
    current = interp
    iterations = 0
    while True:
        step = gamma_step(gp, current)
        for rec in step.fired:
            fired_by_key[(rec.rule, rec.head_time)] = rec
        if not step.consistent:
            return FixpointResult(step.model, list(fired_by_key.values()), False, iterations)
        if step.model == current:
            return FixpointResult(current, list(fired_by_key.values()), True, iterations)
        current = step.model
        iterations += 1


def bottom_interpretation(horizon):
    """I_bot: everything totally uncertain."""
    return Interpretation(horizon)


def entails(program, observations, horizon=None):
    """Whether the program's minimal model satisfies every observation TAF."""
    gp = _as_ground(program)
    if horizon is None:
        times = [t.time for t in gp.tafs if t.time is not None]
        times += [o.time for o in observations if o.time is not None]
        horizon = max(times, default=1)
    result = gamma_star(gp, bottom_interpretation(horizon))
    if not result.consistent:
        return False
    for obs in observations:
        for t in _taf_times(obs, horizon):
            if not obs.annotation.leq(result.model.get(obs.literal, t)):
                return False
        if obs.time is not None and obs.time > horizon:
            return False
    return True


