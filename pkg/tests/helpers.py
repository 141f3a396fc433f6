"""Shared test fixtures: random ASTs, random programs, graphs, traces."""

from __future__ import annotations

import random

from abmove.geograph import LocationGraph, LocationNode
from abmove.learning import TrainingTrajectory

from abmove.language import (
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
from abmove.lattice import SCALE, Annotation, Literal

ANNOTATION_GRID = [0, 250_000, 500_000, 750_000, 900_000, SCALE]


def random_annotation(rng, lower_only=False):
    lo = rng.choice(ANNOTATION_GRID)
    if lower_only:
        return Annotation(lo, SCALE)
    hi = rng.choice([g for g in ANNOTATION_GRID if g >= lo])
    return Annotation(lo, hi)


def random_ast(rng):
    """A random valid Program exercising every construct, for round-trips."""
    n_dom = rng.randint(1, 3)
    domains = []
    constants_by_dom = {}
    for d in range(n_dom):
        name = f"dom{d}"
        consts = tuple(f"c{d}_{k}" for k in range(rng.randint(1, 4)))
        domains.append(DomainDecl(name, consts))
        constants_by_dom[name] = consts
    preds = []
    for p in range(rng.randint(1, 6)):
        arity = rng.randint(0, 3)
        arg_doms = tuple(rng.choice(domains).name for _ in range(arity))
        preds.append(PredDecl(f"p{p}", arg_doms))
    program = Program(domains, preds)

    def random_literal(var_domains, allow_vars=True, negatable=True):
        decl = rng.choice(preds)
        args = []
        for dom in decl.arg_domains:
            existing = [v for v, vd in var_domains.items() if vd == dom]
            if allow_vars and rng.random() < 0.4:
                if existing and rng.random() < 0.6:
                    args.append(rng.choice(existing))
                else:
                    v = f"V{len(var_domains)}"
                    var_domains[v] = dom
                    args.append(v)
            else:
                args.append(rng.choice(constants_by_dom[dom]))
        negated = negatable and rng.random() < 0.25
        return Literal(decl.name, tuple(args), negated)

    for _ in range(rng.randint(0, 5)):
        var_domains = {}
        head = AnnotatedLiteral(
            random_literal(var_domains, negatable=False), random_annotation(rng)
        )
        body = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.3:
                body.append(
                    TemporalPair(
                        rng.choice(["AFTER", "BEFORE"]),
                        random_literal(var_domains),
                        random_literal(var_domains),
                        random_annotation(rng),
                    )
                )
            else:
                body.append(
                    AnnotatedLiteral(random_literal(var_domains), random_annotation(rng))
                )
        tag = rng.choice([TAG_NONE, TAG_SH, TAG_MH])
        program.rules.append(GapRule(head, tuple(body), rng.randint(0, 3), tag))

    for _ in range(rng.randint(0, 5)):
        lit = None
        while lit is None or not lit.is_ground:
            lit = Literal(
                (decl := rng.choice(preds)).name,
                tuple(rng.choice(constants_by_dom[d]) for d in decl.arg_domains),
                rng.random() < 0.2,
            )
        time = None if rng.random() < 0.2 else rng.randint(1, 9)
        program.tafs.append(TAF(lit, random_annotation(rng), time))
    return program.validate()


def random_ground_program(rng, max_rules=15, t_max=6, n_atoms=6, lower_only=True):
    """Small ground program for fixpoint property trials.

    lower_only keeps all annotations of the form [x,1] so meets never
    empty out and runs stay consistent.
    """
    atoms = [Literal(f"q{k}") for k in range(n_atoms)]
    domains = []
    preds = [PredDecl(f"q{k}", ()) for k in range(n_atoms)]
    program = Program(domains, preds)
    for _ in range(rng.randint(0, max_rules)):
        head = AnnotatedLiteral(rng.choice(atoms), random_annotation(rng, lower_only))
        body = []
        for _ in range(rng.randint(1, 2)):
            if rng.random() < 0.35:
                body.append(
                    TemporalPair(
                        rng.choice(["AFTER", "BEFORE"]),
                        rng.choice(atoms),
                        rng.choice(atoms),
                        random_annotation(rng, lower_only),
                    )
                )
            else:
                lit = rng.choice(atoms)
                if rng.random() < 0.2:
                    lit = lit.negate()
                body.append(AnnotatedLiteral(lit, random_annotation(rng, lower_only)))
        program.rules.append(GapRule(head, tuple(body), rng.randint(0, 2)))
    for _ in range(rng.randint(1, 5)):
        lit = rng.choice(atoms)
        if rng.random() < 0.2:
            lit = lit.negate()
        program.tafs.append(
            TAF(lit, random_annotation(rng, lower_only), rng.randint(1, t_max))
        )
    return program.validate()


# ---------------------------------------------------------------------------
# Graph and trajectory fixtures


def corridor_graph():
    """Six nodes: a costly Education->Utility corridor (e0-u1) and a free
    detour through residential nodes (e0-r2-r3-u1), plus spurs.

        e0 -- u1
        |      |
        r2 -- r3 -- c4
        |
        i5
    """
    nodes = [
        LocationNode("e0", 36.000, -84.000, "Education"),
        LocationNode("u1", 36.000, -83.994, "Utility"),
        LocationNode("r2", 36.006, -84.000, "Residential"),
        LocationNode("r3", 36.006, -83.994, "Residential"),
        LocationNode("c4", 36.006, -83.988, "Commercial"),
        LocationNode("i5", 36.012, -84.000, "Intersection"),
    ]
    edges = [
        ("e0", "u1"),
        ("e0", "r2"),
        ("u1", "r3"),
        ("r2", "r3"),
        ("r3", "c4"),
        ("r2", "i5"),
    ]
    return LocationGraph(nodes, edges)


def walk_trace(graph, agent, node_walk, start_ts=1_700_000_000.0, step_s=60.0):
    """TrainingTrajectory visiting the given adjacent node sequence."""
    points = []
    for k, nid in enumerate(node_walk):
        n = graph.nodes[nid]
        points.append((n.lat, n.lon, start_ts + k * step_s))
    return TrainingTrajectory(agent, tuple(points))


def pick_anchors(graph, rng, count):
    """Spread-out landmark nodes to serve as an agent's routine anchors."""
    landmarks = sorted(n.id for n in graph.nodes.values() if n.is_landmark)
    anchors = [rng.choice(landmarks)]
    while len(anchors) < count:
        candidate = rng.choice(landmarks)
        if candidate not in anchors:
            anchors.append(candidate)
    return anchors


def write_trace_csv(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("lat,lon,timestamp\n")
        for lat, lon, ts in trace.points:
            fh.write(f"{lat!r},{lon!r},{ts!r}\n")


def build_scenario(
    tmp_path,
    n_agents=3,
    graph_n=40,
    seed=7,
    tau="0.25",
    n_max=2,
    heuristic="dijkstra",
    adhoc=False,
    laps=6,
    anchor_count=3,
    slack=3,
    obs_count=3,
    span_days=14.0,
    workers=1,
    graph_kind="random-geometric",
):
    """Write a complete scenario directory: graph CSVs, per-agent training
    traces (anchored routines with one rare detour), observations hitting
    the anchors at feasible times, and the TOML config.  Returns the
    config path."""
    from abmove.geograph import save_graph, synth_graph

    rng = random.Random(seed)
    graph = synth_graph(graph_kind, graph_n, seed=seed)
    save_graph(graph, tmp_path / "nodes.csv", tmp_path / "edges.csv")
    agent_blocks = []
    for k in range(n_agents):
        agent = f"a{k:03d}"
        anchors = pick_anchors(graph, rng, anchor_count)
        landmarks = sorted(
            n.id for n in graph.nodes.values() if n.is_landmark and n.id not in anchors
        )
        detour = None
        for u in rng.sample(landmarks, min(len(landmarks), 20)):
            nbrs = [v for v in graph.adj[u] if graph.nodes[v].is_landmark]
            if nbrs:
                detour = [u, rng.choice(nbrs)]
                break
        walk = routine_walk(graph, rng, anchors, laps, detour)
        step_s = span_days * 86400.0 / max(len(walk), 1)
        trace = walk_trace(graph, agent, walk, step_s=step_s)
        write_trace_csv(tmp_path / f"trace_{agent}.csv", trace)
        t = 1
        obs = [(anchors[0], t)]
        for i in range(1, obs_count):
            target = anchors[i % len(anchors)]
            dist = graph.hop_distances(target)[obs[-1][0]]
            t = obs[-1][1] + max(dist, 1) + slack
            obs.append((target, t))
        obs_toml = ", ".join(f'["{node}", {when}]' for node, when in obs)
        agent_blocks.append(
            f'[[agents]]\nid = "{agent}"\ntrajectory = "trace_{agent}.csv"\n'
            f"observations = [{obs_toml}]\n"
        )
    config = (
        "[graph]\nnodes = \"nodes.csv\"\nedges = \"edges.csv\"\n\n"
        f"[params]\ntau = \"{tau}\"\nn_max = {n_max}\nheuristic = \"{heuristic}\"\n"
        f"adhoc = {str(adhoc).lower()}\nseed = {seed}\nworkers = {workers}\n\n"
        "[output]\ndir = \"out\"\n\n" + "\n".join(agent_blocks)
    )
    config_path = tmp_path / "scenario.toml"
    config_path.write_text(config, encoding="utf-8")
    return config_path


def routine_walk(graph, rng, anchors, laps, detour=None):
    """A training walk cycling between anchor nodes along BFS-shortest
    paths, with an optional one-off detour walk spliced in the middle."""
    def shortest(u, v):
        dist = graph.hop_distances(v)
        path = [u]
        while path[-1] != v:
            nxt = min(
                (w for w in graph.adj[path[-1]] if dist[w] < dist[path[-1]]),
            )
            path.append(nxt)
        return path

    walk = [anchors[0]]
    for lap in range(laps):
        for a, b in zip(anchors, anchors[1:] + anchors[:1]):
            seg = shortest(a, b)
            walk.extend(seg[1:])
        if detour is not None and lap == laps // 2:
            here = walk[-1]
            seg = shortest(here, detour[0])
            walk.extend(seg[1:])
            for d in detour[1:]:
                walk.append(d)
            seg = shortest(walk[-1], anchors[0])
            walk.extend(seg[1:])
    return walk
