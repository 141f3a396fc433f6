"""Command-line pipeline: ingest, learn, weigh, abduce, eval, bench.

A scenario lives in one TOML file (paths relative to it); flags override
individual parameters.  All artifacts are byte-reproducible under a
fixed seed except bench's measured wall times.

Exit codes: 0 ok, 2 infeasible observations, 3 input error, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import (
    AbmoveError,
    BudgetExceededError,
    InfeasibleLegError,
    InputError,
    ObservationError,
)
from .geograph import WeightedGraph, load_graph, synth_graph
from .heuristic import HEURISTIC_MODES, Heuristic, precompute_weights
from .language import format_program
from .lattice import micro_to_text
from .learning import (
    DEFAULT_N_MAX,
    DEFAULT_SNAP_RADIUS_M,
    learn_from_trace,
    load_trajectory,
)
from .metrics import (
    AgentEval,
    EvalReport,
    load_detector_labels,
    pd_from_labels,
    relative_anomaly_ratio,
)
from .scoring import RuleIndex, score_path
from .search import (
    ObservationSet,
    RecurringVisit,
    SearchCounters,
    assemble_and_verify,
    decompose,
    dfs_exhaustive,
    explain,
    solve_legs,
)

DEFAULT_DFS_BUDGET_SECS = 300.0


@dataclass
class AgentSpec:
    id: str
    trajectory: Path
    movtype: str = "personal_vehicle"
    observations: list = field(default_factory=list)  # [node, t] pairs
    recurring: list = field(default_factory=list)  # [node, first, period, count]

    def observation_set(self):
        return ObservationSet(
            self.id,
            [(node, int(t)) for node, t in self.observations],
            [RecurringVisit(n, int(a), int(p), int(c)) for n, a, p, c in self.recurring],
        )


@dataclass
class ScenarioConfig:
    graph_nodes: Path = None
    graph_edges: Path = None
    synth: dict = None
    agents: list = field(default_factory=list)
    tau: Fraction = Fraction(1, 10)
    n_max: int = DEFAULT_N_MAX
    heuristic: str = "dijkstra"
    adhoc: bool = False
    seed: int = 0
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M
    budget_secs: float = DEFAULT_DFS_BUDGET_SECS
    out_dir: Path = Path("out")
    workers: int = 1
    detector_labels: Path = None
    truth_agents: list = field(default_factory=list)

    def load_graph(self):
        if self.synth is not None:
            spec = dict(self.synth)
            return synth_graph(
                spec.pop("kind"),
                int(spec.pop("n")),
                int(spec.pop("seed", self.seed)),
                spec.pop("category_mix", None),
            )
        if not (self.graph_nodes and self.graph_edges):
            raise InputError("scenario needs [graph] nodes+edges files or a synth table")
        return load_graph(self.graph_nodes, self.graph_edges)


def load_config(path, overrides=None):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise InputError(f"{path}: {e}") from None
    base = path.parent
    cfg = ScenarioConfig()
    graph = doc.get("graph", {})
    if "nodes" in graph:
        cfg.graph_nodes = base / graph["nodes"]
        cfg.graph_edges = base / graph["edges"]
    if "synth" in graph:
        cfg.synth = graph["synth"]
    params = doc.get("params", {})
    if "tau" in params:
        cfg.tau = Fraction(str(params["tau"]))
    cfg.n_max = int(params.get("n_max", cfg.n_max))
    cfg.heuristic = params.get("heuristic", cfg.heuristic)
    cfg.adhoc = bool(params.get("adhoc", cfg.adhoc))
    cfg.seed = int(params.get("seed", cfg.seed))
    cfg.snap_radius_m = float(params.get("snap_radius_m", cfg.snap_radius_m))
    cfg.budget_secs = float(params.get("budget_secs", cfg.budget_secs))
    cfg.workers = int(params.get("workers", cfg.workers))
    cfg.out_dir = base / doc.get("output", {}).get("dir", "out")
    for a in doc.get("agents", []):
        cfg.agents.append(
            AgentSpec(
                a["id"],
                base / a["trajectory"],
                a.get("movtype", "personal_vehicle"),
                a.get("observations", []),
                a.get("recurring", []),
            )
        )
    detector = doc.get("detector", {})
    if "labels" in detector:
        cfg.detector_labels = base / detector["labels"]
        cfg.truth_agents = detector.get("truth_agents", [])
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    if cfg.heuristic not in HEURISTIC_MODES:
        raise InputError(f"unknown heuristic mode {cfg.heuristic!r}")
    if cfg.adhoc and cfg.heuristic == "dijkstra":
        raise InputError("--adhoc defers weighting; pair it with --heuristic depth1 or none")
    if not cfg.agents:
        raise InputError("scenario declares no agents")
    return cfg


# ---------------------------------------------------------------------------
# Per-agent pipeline pieces (top-level so worker processes can pickle them)


def _learn_agent(cfg, graph, spec):
    trace = load_trajectory(spec.trajectory, spec.id, spec.movtype)
    program, visits = learn_from_trace(
        trace, graph, cfg.tau, cfg.n_max, cfg.snap_radius_m
    )
    return program, visits


def _make_heuristic(cfg, graph, program):
    sh = program.sh_subset()
    if cfg.heuristic == "dijkstra":
        gw = precompute_weights(graph, sh)
    else:
        gw = WeightedGraph(graph)
    return Heuristic(gw, sh, cfg.heuristic)


def _abduce_agent(task):
    cfg, graph, spec = task
    program, _visits = _learn_agent(cfg, graph, spec)
    heur = _make_heuristic(cfg, graph, program)
    counters = SearchCounters()
    legs, solutions = solve_legs(graph, program, spec.observation_set(), heur, counters)
    trajectory = assemble_and_verify(
        graph, program, spec.observation_set(), solutions
    )
    leg_rows = [
        (
            spec.id,
            i,
            heur.bound(leg.start_node, leg.end_node),
            sol.cost,
        )
        for i, (leg, sol) in enumerate(zip(legs, solutions))
    ]
    return trajectory, leg_rows, counters, heur.gw.computations


def _eval_agent(task):
    cfg, graph, spec = task
    program, visits = _learn_agent(cfg, graph, spec)
    train_path = [v.node for v in visits]
    _result, train_value = score_path(program, spec.id, train_path, graph, cfg.n_max)
    trajectory, leg_rows, _counters, _computed = _abduce_agent(task)
    ratio = relative_anomaly_ratio(trajectory.total_value, [train_value])
    return (
        AgentEval(spec.id, trajectory.total_value, Fraction(train_value), ratio),
        leg_rows,
    )


def _map_agents(fn, cfg, graph, workers):
    tasks = [(cfg, graph, spec) for spec in sorted(cfg.agents, key=lambda s: s.id)]
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(cfg, _args):
    graph = cfg.load_graph()
    print(f"graph: {len(graph)} nodes, {len(graph.edges())} edges, connected={graph.is_connected()}")
    for spec in cfg.agents:
        _program, visits = _learn_agent(cfg, graph, spec)
        points = spec.observation_set().expanded()
        legs = decompose(spec.observation_set())
        for leg in legs:
            dist = graph.hop_distances(leg.end_node).get(leg.start_node)
            if dist is None or dist > leg.duration:
                raise InfeasibleLegError(
                    f"agent {spec.id}: observation leg {leg} infeasible"
                )
        print(f"agent {spec.id}: {len(visits)} visits, {len(points)} observations ok")
    return 0


def cmd_learn(cfg, _args):
    graph = cfg.load_graph()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for spec in sorted(cfg.agents, key=lambda s: s.id):
        program, _visits = _learn_agent(cfg, graph, spec)
        out = cfg.out_dir / f"program_{spec.id}.anl"
        out.write_text(format_program(program), encoding="utf-8")
        print(f"wrote {out}")
    return 0


def cmd_weigh(cfg, _args):
    graph = cfg.load_graph()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for spec in sorted(cfg.agents, key=lambda s: s.id):
        program, _visits = _learn_agent(cfg, graph, spec)
        if cfg.adhoc:
            gw = WeightedGraph(graph)  # deferred: covered during abduce
        else:
            gw = precompute_weights(graph, program.sh_subset())
        out = cfg.out_dir / f"gw_{spec.id}.csv"
        gw.save(out)
        print(f"wrote {out} ({len(gw.covered)} movements covered)")
    return 0


def cmd_abduce(cfg, _args):
    graph = cfg.load_graph()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    results = _map_agents(_abduce_agent, cfg, graph, cfg.workers)
    for (trajectory, _rows, counters, computed) in results:
        agent = trajectory.agent
        traj_path = cfg.out_dir / f"trajectory_{agent}.csv"
        rows = []
        for k, node in enumerate(trajectory.path):
            n = graph.nodes[node]
            rows.append((agent, trajectory.t_first + k, node, repr(n.lat), repr(n.lon)))
        _write_csv(traj_path, ["agent", "timepoint", "node_id", "lat", "lon"], rows)
        _write_json(cfg.out_dir / f"explanation_{agent}.json", explain(trajectory))
        print(
            f"agent {agent}: value={micro_to_text(trajectory.total_value)} "
            f"expansions={counters.expansions} weights_computed={computed}"
        )
    return 0


def cmd_eval(cfg, _args):
    graph = cfg.load_graph()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    results = _map_agents(_eval_agent, cfg, graph, cfg.workers)
    report = EvalReport([r[0] for r in results])
    scatter = [row for _e, rows in results for row in rows]
    _write_csv(
        cfg.out_dir / "fig_heuristic_vs_actual.csv",
        ["agent", "leg", "heuristic", "actual"],
        [(a, i, micro_to_text(h), micro_to_text(c)) for a, i, h, c in scatter],
    )
    _write_csv(
        cfg.out_dir / "fig_anomaly_ratio.csv",
        ["agent", "generated_value", "training_mean", "ratio"],
        [
            (
                e.agent,
                micro_to_text(e.generated_value),
                f"{e.training_mean.numerator}/{e.training_mean.denominator}",
                "inf" if e.ratio == float("inf") else f"{e.ratio.numerator}/{e.ratio.denominator}",
            )
            for e, _rows in results
        ],
    )
    if cfg.detector_labels is not None:
        agent_flags, point_flags = load_detector_labels(cfg.detector_labels)
        report.pd_agent_level, report.pd_point_level = pd_from_labels(
            agent_flags, point_flags, cfg.truth_agents
        )
    _write_json(cfg.out_dir / "eval_report.json", report.to_json())
    ok = sum(1 for e, _rows in results if e.ratio != float("inf") and e.ratio <= 1)
    print(f"ratio<=1 for {ok}/{len(results)} agents")
    return 0


def cmd_bench(cfg, args):
    graph = cfg.load_graph()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for spec in sorted(cfg.agents, key=lambda s: s.id):
        program, _visits = _learn_agent(cfg, graph, spec)
        index = RuleIndex.from_program(program)
        heur = _make_heuristic(cfg, graph, program)
        obs = spec.observation_set()
        t0 = time.monotonic()
        counters = SearchCounters()
        legs, solutions = solve_legs(graph, program, obs, heur, counters)
        astar_secs = time.monotonic() - t0
        for i, (leg, sol) in enumerate(zip(legs, solutions)):
            dfs_counters = SearchCounters()
            t1 = time.monotonic()
            try:
                window = () if i == 0 else solutions[i - 1].end_window
                dfs = dfs_exhaustive(
                    graph, index, leg, window, dfs_counters, budget_secs=cfg.budget_secs
                )
                dfs_secs = time.monotonic() - t1
                dfs_cost = micro_to_text(dfs.cost)
                assert dfs.cost == sol.cost
            except BudgetExceededError:
                dfs_secs = time.monotonic() - t1
                dfs_cost = "timeout"
            rows.append(
                (
                    spec.id,
                    i,
                    f"{astar_secs:.3f}",
                    counters.expansions,
                    micro_to_text(sol.cost),
                    f"{dfs_secs:.3f}",
                    dfs_counters.expansions,
                    dfs_cost,
                )
            )
        print(
            f"agent {spec.id}: astar={astar_secs:.3f}s over {len(legs)} legs, "
            f"weights_computed={heur.gw.computations}"
        )
    _write_csv(
        cfg.out_dir / "bench.csv",
        ["agent", "leg", "astar_secs_total", "astar_expansions", "astar_cost",
         "dfs_secs", "dfs_expansions", "dfs_cost"],
        rows,
    )

    # Weighting comparison: full precompute vs ad-hoc frontier coverage.
    weigh_rows = []
    for spec in sorted(cfg.agents, key=lambda s: s.id):
        program, _visits = _learn_agent(cfg, graph, spec)
        sh = program.sh_subset()
        obs = spec.observation_set()
        t0 = time.monotonic()
        gw_full = precompute_weights(graph, sh)
        full_secs = time.monotonic() - t0
        full_heur = Heuristic(gw_full, sh, "dijkstra")
        t0 = time.monotonic()
        solve_legs(graph, program, obs, full_heur)
        full_search_secs = time.monotonic() - t0
        gw_lazy = WeightedGraph(graph)
        lazy_heur = Heuristic(gw_lazy, sh, "depth1")
        t0 = time.monotonic()
        solve_legs(graph, program, obs, lazy_heur)
        lazy_secs = time.monotonic() - t0
        weigh_rows.append(
            (
                spec.id,
                gw_full.computations,
                f"{full_secs + full_search_secs:.3f}",
                gw_lazy.computations,
                f"{lazy_secs:.3f}",
            )
        )
        print(
            f"agent {spec.id}: precompute {gw_full.computations} weights, "
            f"adhoc {gw_lazy.computations}"
        )
    _write_csv(
        cfg.out_dir / "bench_weighting.csv",
        ["agent", "precomputed_weights", "precomputed_secs",
         "adhoc_weights", "adhoc_secs"],
        weigh_rows,
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and exit-code mapping


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="abmove",
        description="Abduce agent movement trajectories that satisfy timed "
        "location observations while minimizing a rule-based anomaly score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("ingest", cmd_ingest),
        ("learn", cmd_learn),
        ("weigh", cmd_weigh),
        ("abduce", cmd_abduce),
        ("eval", cmd_eval),
        ("bench", cmd_bench),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tau", default=None, help="rarity threshold in (0,1]")
        p.add_argument("--nmax", type=int, default=None, help="max rule hop length")
        p.add_argument("--heuristic", choices=HEURISTIC_MODES, default=None)
        p.add_argument("--adhoc", action="store_true", default=None,
                       help="defer movement weighting to the search frontier")
        p.add_argument("--budget-secs", type=float, default=None,
                       help="wall-clock budget for exhaustive search runs")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        overrides = {
            "seed": args.seed,
            "tau": Fraction(str(args.tau)) if args.tau is not None else None,
            "n_max": args.nmax,
            "heuristic": args.heuristic,
            "adhoc": args.adhoc,
            "budget_secs": args.budget_secs,
            "workers": args.workers,
            "out_dir": Path(args.out) if args.out else None,
        }
        cfg = load_config(args.config, overrides)
        return args.func(cfg, args)
    except (ObservationError, InfeasibleLegError) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 2
    except (InputError, OSError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 3
    except AbmoveError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
