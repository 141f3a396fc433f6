"""Evaluation metrics: relative anomaly ratio and probability of detection.

Ratios and PD values are exact Fractions built from micro-unit scores;
the +inf sentinel marks a generated trajectory scored against an agent
whose training history is perfectly clean.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InputError

RATIO_INFINITE = float("inf")


def relative_anomaly_ratio(generated_value, training_values):
    """generated score / mean training score, both in micro-units.

    0/0 counts as 0 (the generated trajectory is no more anomalous than a
    clean history); x/0 with x > 0 is the +inf sentinel.
    """
    training_values = list(training_values)
    if not training_values:
        raise InputError("relative anomaly ratio needs at least one training score")
    mean = Fraction(sum(training_values), len(training_values))
    if mean == 0:
        return Fraction(0) if generated_value == 0 else RATIO_INFINITE
    return Fraction(generated_value) / mean


def probability_of_detection(flagged, truth):
    """Correctly detected anomalies over all anomalies, exact.

    Works at any granularity: items may be agent ids or (agent, timepoint)
    points, as long as flagged and truth use the same kind.
    """
    truth = set(truth)
    if not truth:
        raise InputError("probability of detection needs a nonempty truth set")
    return Fraction(len(set(flagged) & truth), len(truth))


def load_detector_labels(path):
    """Detector verdicts CSV: agent,timepoint,flagged.

    Rows with an empty timepoint are agent-level verdicts; the rest are
    point-level.  Returns ({agent: bool}, {(agent, t): bool}).
    """
    agent_flags = {}
    point_flags = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"agent", "timepoint", "flagged"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"{path}: header must contain agent,timepoint,flagged")
        for row_no, row in enumerate(reader, start=2):
            flag = row["flagged"].strip()
            if flag not in ("0", "1"):
                raise InputError(f"{path} row {row_no}: flagged must be 0 or 1")
            t = row["timepoint"].strip()
            if t:
                point_flags[(row["agent"], int(t))] = flag == "1"
            else:
                agent_flags[row["agent"]] = flag == "1"
    return agent_flags, point_flags


def pd_from_labels(agent_flags, point_flags, truth_agents):
    """Agent-level and point-level PD for the inserted-agent truth set."""
    truth_agents = set(truth_agents)
    if not truth_agents:
        raise InputError("empty truth set")
    flagged_agents = {a for a, f in agent_flags.items() if f}
    agent_pd = probability_of_detection(flagged_agents, truth_agents)
    truth_points = {k for k in point_flags if k[0] in truth_agents}
    point_pd = None
    if truth_points:
        flagged_points = {k for k, f in point_flags.items() if f}
        point_pd = probability_of_detection(flagged_points, truth_points)
    return agent_pd, point_pd


def _ratio_json(r):
    if r == RATIO_INFINITE:
        return {"exact": "inf", "approx": "inf"}
    return {"exact": f"{r.numerator}/{r.denominator}", "approx": repr(float(r))}


@dataclass
class AgentEval:
    agent: str
    generated_value: int  # micro-units
    training_mean: Fraction  # micro-units
    ratio: object  # Fraction or RATIO_INFINITE


@dataclass
class EvalReport:
    agents: list = field(default_factory=list)
    pd_agent_level: object = None
    pd_point_level: object = None

    @property
    def fraction_ratio_le_1(self):
        if not self.agents:
            raise InputError("empty evaluation")
        ok = sum(1 for a in self.agents if a.ratio != RATIO_INFINITE and a.ratio <= 1)
        return Fraction(ok, len(self.agents))

    def to_json(self):
        from .lattice import micro_to_text

        doc = {
            "agents": [
                {
                    "agent": a.agent,
                    "generated_value": micro_to_text(a.generated_value),
                    "training_mean_micro": f"{a.training_mean.numerator}/{a.training_mean.denominator}",
                    "ratio": _ratio_json(a.ratio),
                }
                for a in sorted(self.agents, key=lambda a: a.agent)
            ],
            "fraction_ratio_le_1": _ratio_json(self.fraction_ratio_le_1),
        }
        if self.pd_agent_level is not None:
            doc["pd_agent_level"] = _ratio_json(self.pd_agent_level)
        if self.pd_point_level is not None:
            doc["pd_point_level"] = _ratio_json(self.pd_point_level)
        return doc

    def to_json_text(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)
