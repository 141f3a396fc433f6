"""Abduction of agent movement trajectories over location graphs, guided
by an anomaly-scoring annotated logic program."""

from .lattice import Annotation, BOTTOM, EMPTY, Interpretation, Literal, ann
from .language import GapRule, Program, TAF, format_program, parse_program
from .fixpoint import entails, gamma_star, gamma_step, satisfies_formula
from .geograph import LocationGraph, LocationNode, WeightedGraph, load_graph, synth_graph
from .learning import extract_patterns, learn_rules, snap_trajectory
from .scoring import RuleIndex, anomaly_value, score_path
from .heuristic import Heuristic, ensure_covered, movement_cost, precompute_weights
from .search import ObservationSet, abduce, astar_leg, decompose, dfs_exhaustive, explain
from .metrics import probability_of_detection, relative_anomaly_ratio

__version__ = "0.1.0"
