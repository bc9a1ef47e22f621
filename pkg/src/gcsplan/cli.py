"""Command-line harness: scenario generation, bound synthesis, rollouts,
ground-truth queries, benchmarks, and SVG rendering."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .graph import GcsGraph, Trajectory, validate_graph
from .oracle import exact_sppgcs, relaxed_walk_oracle
from .policy import rollout
from .synthesis import (LowerBoundCertificate, SynthesisOptions,
                        synthesize_bounds)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
    try:
        result = args.func(args)
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result is not None and args.json_out:
        with open(args.json_out, "w") as f:
            json.dump(result, f, indent=2, sort_keys=True, default=_jsonify)
            f.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--accuracy", type=float, default=1e-8)
    common.add_argument("--threads", type=int, default=0)
    common.add_argument("--json-out", help="write the command summary as JSON")
    parser = argparse.ArgumentParser(
        prog="gcsplan",
        description="Multi-query shortest paths in graphs of convex sets: "
                    "offline lower-bound synthesis and online lookahead rollouts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common],
                       help="generate a random 2D environment")
    p.add_argument("--kind", choices=("boxes", "layered", "digraph"),
                   default="boxes")
    p.add_argument("--n-boxes", type=int, default=10)
    p.add_argument("--world", type=float, default=10.0)
    p.add_argument("--n-layers", type=int, default=12)
    p.add_argument("--per-layer", type=int, default=4)
    p.add_argument("--n-vertices", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bezier", parents=[common], help="smooth-curve scenario over given boxes")
    p.add_argument("--boxes", required=True,
                   help="JSON file: list of {lo: [...], hi: [...]} boxes")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--smoothness", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bezier)

    p = sub.add_parser("reference", parents=[common], help="frozen reference scenarios")
    p.add_argument("--variant", choices=("two-segment", "nine-vertex"),
                   default="two-segment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("synthesize", parents=[common], help="offline lower-bound synthesis")
    p.add_argument("--scenario", required=True)
    p.add_argument("--target", help="target vertex id (default: first target)")
    p.add_argument("--mode", choices=("quadratic", "affine"),
                   default="quadratic")
    p.add_argument("--no-penalties", action="store_true")
    p.add_argument("--joint-target", action="store_true",
                   help="bounds parameterized by the target point")
    p.add_argument("--cycle-penalties", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("rollout", parents=[common], help="online lookahead rollout")
    p.add_argument("--scenario", required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--source-vertex", required=True)
    p.add_argument("--source-point", required=True,
                   help="comma-separated coordinates")
    p.add_argument("--target-vertex")
    p.add_argument("--target-point", help="comma-separated coordinates")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=10000)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("oracle", parents=[common], help="exact / relaxed ground-truth query")
    p.add_argument("--scenario", required=True)
    p.add_argument("--source-vertex", required=True)
    p.add_argument("--source-point", required=True)
    p.add_argument("--target-vertex")
    p.add_argument("--target-point")
    p.add_argument("--max-edges", type=int)
    p.add_argument("--walks", action="store_true",
                   help="allow vertex revisits (relaxed oracle)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", parents=[common], help="benchmark rollouts against ground truth")
    p.add_argument("--scenario", required=True)
    p.add_argument("--cert", action="append", required=True,
                   help="label=path, repeatable")
    p.add_argument("--queries", type=int, default=120)
    p.add_argument("--horizons", default="1,2,3")
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--oracle-max-edges", type=int)
    p.add_argument("--skip-oracle", action="store_true")
    p.add_argument("--out", required=True,
                   help="base path for .json/.csv/.txt/.png outputs")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", parents=[common], help="render a 2D scenario to SVG")
    p.add_argument("--scenario", required=True)
    p.add_argument("--cert")
    p.add_argument("--trajectories",
                   help="JSON file: list of {path: [...], points: [[...]]}")
    p.add_argument("--target-point")
    p.add_argument("--contour-levels", type=int, default=12)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def _point(text):
    return np.array([float(x) for x in text.split(",")])


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _endpoints(graph, args):
    target = args.target_vertex or (graph.targets[0] if graph.targets else None)
    if target is None:
        raise ValueError("scenario has no target vertex; pass --target-vertex")
    if args.target_point:
        x_t = _point(args.target_point)
    else:
        lo, hi = graph.vertices[target].set.bounding_box()
        x_t = 0.5 * (lo + hi)
    return args.source_vertex, _point(args.source_point), target, x_t


def cmd_gen(args):
    from .scenarios import (EnvGenParams, LayeredEnvParams,
                            build_singleton_digraph, generate_layered_env,
                            generate_random_env)
    if args.kind == "boxes":
        graph = generate_random_env(EnvGenParams(seed=args.seed,
                                                 n_boxes=args.n_boxes,
                                                 world=args.world))
    elif args.kind == "layered":
        graph = generate_layered_env(LayeredEnvParams(seed=args.seed,
                                                      n_layers=args.n_layers,
                                                      per_layer=args.per_layer))
    else:
        graph = build_singleton_digraph(seed=args.seed,
                                        n_vertices=args.n_vertices)
    report = validate_graph(graph)
    if not report.ok:
        raise RuntimeError(f"generated scenario is invalid: {report.issues}")
    graph.save(args.out)
    return {"out": args.out, "vertices": len(graph.vertices),
            "edges": len(graph.edges)}


def cmd_bezier(args):
    from .scenarios import build_bezier_scenario
    with open(args.boxes) as f:
        boxes = json.load(f)
    graph = build_bezier_scenario([(b["lo"], b["hi"]) for b in boxes],
                                  degree=args.degree,
                                  smoothness=args.smoothness)
    graph.save(args.out)
    return {"out": args.out, "vertices": len(graph.vertices),
            "edges": len(graph.edges)}


def cmd_reference(args):
    from .scenarios import build_nine_vertex_scenario, build_two_segment_scenario
    if args.variant == "two-segment":
        graph = build_two_segment_scenario()
    else:
        graph = build_nine_vertex_scenario()
    graph.save(args.out)
    return {"out": args.out, "vertices": len(graph.vertices),
            "edges": len(graph.edges)}


def cmd_synthesize(args):
    graph = GcsGraph.load(args.scenario)
    target = args.target or (graph.targets[0] if graph.targets else None)
    if target is None:
        raise ValueError("scenario has no target vertex; pass --target")
    options = SynthesisOptions(
        mode=args.mode, penalties=not args.no_penalties,
        target_mode="joint" if args.joint_target else "fixed",
        cycle_penalties=args.cycle_penalties, accuracy=args.accuracy)
    cert = synthesize_bounds(graph, target, options)
    cert.save(args.out)
    return {"out": args.out, "target": target,
            "objective_value": cert.objective_value}


def cmd_rollout(args):
    graph = GcsGraph.load(args.scenario)
    cert = LowerBoundCertificate.load(args.cert)
    source, x_s, target, x_t = _endpoints(graph, args)
    res = rollout(graph, cert, source, x_s, target, x_t, horizon=args.horizon,
                  max_iters=args.max_iters, accuracy=args.accuracy)
    summary = {"status": res.status, "path": list(res.path),
               "cost": res.cost if res.ok else None,
               "iterations": res.iterations, "backtracks": res.backtracks,
               "qps_solved": res.qps_solved, "wall_time": res.wall_time}
    if res.trajectory is not None:
        summary["points"] = [p.tolist() for p in res.trajectory.points]
    print(f"{res.status}: path {'/'.join(res.path)}"
          + (f" cost {res.cost:.6f}" if res.ok else ""))
    return summary


def cmd_oracle(args):
    graph = GcsGraph.load(args.scenario)
    source, x_s, target, x_t = _endpoints(graph, args)
    if args.walks:
        sol = relaxed_walk_oracle(graph, source, x_s, target, x_t,
                                  max_walk_edges=args.max_edges,
                                  accuracy=args.accuracy)
    else:
        max_edges = args.max_edges or len(graph.vertices) - 1
        sol = exact_sppgcs(graph, source, x_s, target, x_t,
                           max_path_edges=max_edges, accuracy=args.accuracy)
    cost = sol.cost if sol.feasible else None
    print(f"cost {cost}  path {'/'.join(sol.path) if sol.path else '-'}")
    return {"cost": cost, "path": list(sol.path or ()),
            "paths_examined": sol.paths_examined}


def cmd_bench(args):
    from .bench import run_benchmark, sample_queries, write_report
    graph = GcsGraph.load(args.scenario)
    certs = {}
    for spec_item in args.cert:
        label, _, path = spec_item.partition("=")
        if not path:
            label, path = os.path.splitext(os.path.basename(spec_item))[0], spec_item
        certs[label] = LowerBoundCertificate.load(path)
    horizons = tuple(int(h) for h in args.horizons.split(","))
    queries = sample_queries(graph, args.queries, seed=args.seed)
    report = run_benchmark(graph, certs, queries, horizons,
                           max_iters=args.max_iters,
                           oracle_max_edges=args.oracle_max_edges,
                           skip_oracle=args.skip_oracle,
                           accuracy=args.accuracy)
    paths = write_report(report, args.out)
    print(report.table())
    return {"outputs": paths, "records": len(report.records)}


def cmd_render(args):
    from .render import render_svg
    graph = GcsGraph.load(args.scenario)
    cert = LowerBoundCertificate.load(args.cert) if args.cert else None
    trajectories = []
    if args.trajectories:
        with open(args.trajectories) as f:
            for doc in json.load(f):
                trajectories.append(Trajectory(
                    path=tuple(doc["path"]),
                    points=[np.asarray(p, dtype=float) for p in doc["points"]]))
    x_t = _point(args.target_point) if args.target_point else None
    render_svg(graph, args.out, cert=cert, trajectories=trajectories,
               contour_levels=args.contour_levels, x_t=x_t)
    return {"out": args.out}


if __name__ == "__main__":
    sys.exit(main())
