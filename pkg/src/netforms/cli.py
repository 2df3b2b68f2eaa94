"""Command line entry point.

Subcommands: build, metrics, dirac, connes, verify, report.  All
structured output is JSON (CSV for metric tables), written atomically,
with the run configuration and seed echoed so identical inputs give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import io as _stdio
import sys

import numpy as np

from . import connes as _connes
from . import dirac as _dirac
from . import metrics as _metrics
from .io import ParseError, atomic_write_json, atomic_write_text, load_json, network_from_obj, network_to_obj
from .network import NetworkError
from .reports import CheckReport
from .spaces import (
    GasketApprox,
    MetricTree,
    build_coordinate_sequence,
    build_gasket,
    build_path,
    build_star,
    kusuoka_measure,
)
from .verify import run_property_suite

DEFAULT_TOLERANCES = {
    "intrinsic_gap": 1e-9,
    "connes_gap": 1e-6,
    "triangle": 1e-9,
    "final_rel_gap": 0.05,
}


def _parse_tols(pairs) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    for item in pairs or []:
        if "=" not in item:
            raise ParseError(f"--tol expects name=value, got {item!r}")
        name, value = item.split("=", 1)
        if name not in tols:
            raise ParseError(f"unknown tolerance {name!r}; known: {sorted(tols)}")
        tols[name] = float(value)
    return tols


def _build_space(args):
    """Resolve --space/--input into (net, mu, geometry, tree_builder)."""
    space = args.space
    if space == "path":
        tree = build_path(args.k, args.length, args.density)
        geom = _tree_geometry(tree, {"type": "path", "k": args.k, "length": args.length})
        return tree.net, tree.mu, geom, (lambda k: build_path(k, args.length, args.density))
    if space == "star":
        a = [float(s) for s in args.a.split(",")] if args.a else [1.0] * args.N
        tree = build_star(args.N, args.k, a)
        geom = _tree_geometry(tree, {"type": "star", "N": args.N, "k": args.k, "a": a})
        return tree.net, tree.mu, geom, (lambda k: build_star(args.N, k, a))
    if space == "gasket":
        g = build_gasket(args.level)
        mu = _resolve_mu(args, g.network, gasket=g)
        return g.network, mu, {"type": "gasket", "level": args.level}, None
    if space == "file":
        if not args.input:
            raise ParseError("--space file requires --input")
        net, mu, _ = network_from_obj(load_json(args.input))
        if getattr(args, "mu", None) and args.mu != "embedded":
            mu = _resolve_mu(args, net)
        if mu is None:
            mu = np.ones(net.n_vertices)
        return net, mu, {"type": "file", "path": args.input}, None
    raise ParseError(f"unknown space {space!r}")


def _tree_geometry(tree: MetricTree, base: dict) -> dict:
    net = tree.net
    base["edge_length"] = {
        f"{net.vertices[int(t)]}|{net.vertices[int(h)]}": float(l)
        for t, h, l in zip(net.tails, net.heads, tree.edge_length)
    }
    base["density"] = {
        f"{net.vertices[int(t)]}|{net.vertices[int(h)]}": float(d)
        for t, h, d in zip(net.tails, net.heads, tree.density)
    }
    return base


def _resolve_mu(args, net, gasket: GasketApprox | None = None) -> np.ndarray:
    choice = getattr(args, "mu", None) or "uniform"
    if choice == "uniform":
        return np.ones(net.n_vertices)
    if choice == "kusuoka":
        if gasket is None:
            raise ParseError("--mu kusuoka is only available for --space gasket")
        return kusuoka_measure(gasket)
    if choice in ("lumped", "embedded"):
        raise ParseError(f"--mu {choice} is not valid here")
    obj = load_json(choice)
    if not isinstance(obj, dict):
        raise ParseError(f"{choice}: measure file must map vertex to weight")
    return net.check_measure(obj)


def _parse_pairs(spec: str, net) -> list[tuple[str, str]]:
    if spec == "all":
        vs = net.vertices
        return [(vs[i], vs[j]) for i in range(len(vs)) for j in range(i + 1, len(vs))]
    parts = spec.split(",")
    if len(parts) != 2:
        raise ParseError(f"--pairs expects 'all' or 'x,y', got {spec!r}")
    return [(parts[0], parts[1])]


def _echo(args, tols) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    return {"config": config, "tolerances": tols, "seed": args.seed}


def cmd_build(args, tols):
    net, mu, geom, _ = _build_space(args)
    payload = network_to_obj(net, mu=mu, geometry=geom)
    payload.update()
    if args.out:
        atomic_write_json(args.out, payload)
    else:
        import json

        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_metrics(args, tols):
    net, mu, _, _ = _build_space(args)
    kind = args.kind
    stats = {}
    if kind == "resistance":
        d = _metrics.resistance_metric(net)
    elif kind == "sqrt_resistance":
        d = _metrics.sqrt_resistance_metric(net)
    elif kind == "coordinate":
        d = _metrics.coordinate_metric(build_coordinate_sequence(net))
    elif kind == "intrinsic":
        m = net.check_measure(load_json(args.m)) if args.m else mu
        pairs = _parse_pairs(args.pairs, net)
        rows = []
        for x, y in pairs:
            sol = _metrics.intrinsic_metric(net, m, x, y, gap_tol=tols["intrinsic_gap"])
            rows.append((x, y, sol.distance, sol.stats.get("newton_iterations", 0), sol.stats["gap"]))
        return _write_csv(args, rows)
    else:
        raise ParseError(f"unknown metric kind {kind!r}")
    pairs = _parse_pairs(args.pairs, net)
    rows = [(x, y, d.at(x, y), 0, 0.0) for x, y in pairs]
    return _write_csv(args, rows)


def _write_csv(args, rows) -> int:
    buf = _stdio.StringIO()
    buf.write("x,y,value,solver_iterations,certified_gap\n")
    for x, y, value, iters, gap in rows:
        buf.write(f"{x},{y},{value!r},{iters},{gap!r}\n")
    if args.out:
        atomic_write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_dirac(args, tols):
    net, mu, _, _ = _build_space(args)
    report = _dirac.spectral_structure_report(net, mu)
    payload = _echo(args, tols)
    payload["spectrum"] = report
    if args.out:
        atomic_write_json(args.out, payload)
    else:
        import json

        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if report["pass"] else 1


def cmd_connes(args, tols):
    payload = _echo(args, tols)
    if args.refine:
        ks = [int(s) for s in args.refine.split(",")]
        net0, _, _, builder = _build_space(args)
        if builder is None:
            raise ParseError("--refine requires --space path or star")
        x, y = _parse_pairs(args.pairs, net0)[0]
        rep = _connes.metric_coincidence_check(
            builder, x, y, refinement=ks,
            final_rel_gap=tols["final_rel_gap"], gap_tol=tols["connes_gap"],
        )
        payload["coincidence"] = rep.as_dict()
        ok = rep.passed
    else:
        net, mu, _, _ = _build_space(args)
        D = _dirac.dirac_operator(net, mu)
        rows = []
        ok = True
        for x, y in _parse_pairs(args.pairs, net):
            sol = _connes.connes_distance(D, x, y, gap_tol=tols["connes_gap"])
            intr = _metrics.intrinsic_metric(net, mu, x, y, gap_tol=tols["intrinsic_gap"])
            rows.append({
                "x": x, "y": y,
                "connes": sol.distance, "intrinsic": intr.distance,
                "certified_gap": sol.gap,
            })
        rng = np.random.default_rng(args.seed)
        brackets = []
        for _ in range(10):
            rep = _connes.commutator_norm(D, rng.standard_normal(net.n_vertices))
            brackets.append(rep.as_dict())
            ok = ok and rep.passed
        payload["distances"] = rows
        payload["bracket_samples"] = brackets
    if args.out:
        atomic_write_json(args.out, payload)
    else:
        import json

        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if ok else 1


def _space_dict(args) -> dict | None:
    if args.space == "star":
        a = [float(s) for s in args.a.split(",")] if args.a else [1.0] * args.N
        return {"type": "star", "N": args.N, "k": args.k, "a": a}
    if args.space == "path":
        return {"type": "path", "k": args.k, "length": args.length, "density": args.density}
    if args.space == "gasket":
        return {"type": "gasket", "level": args.level}
    return None


def cmd_verify(args, tols):
    reports = run_property_suite(_space_dict(args), args.seed)
    failures = 0
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {rep.check}: lhs={rep.lhs:.3e} rhs={rep.rhs:.3e} tol={rep.tolerance:.1e}")
        failures += 0 if rep.passed else 1
    if args.out:
        payload = _echo(args, tols)
        payload["checks"] = [r.as_dict() for r in reports]
        payload["failures"] = failures
        atomic_write_json(args.out, payload)
    print(f"{len(reports) - failures}/{len(reports)} checks passed (seed {args.seed})")
    return 0 if failures == 0 else 1


def cmd_report(args, tols):
    net, mu, geom, _ = _build_space(args)
    payload = _echo(args, tols)
    d = _metrics.resistance_metric(net)
    payload["resistance_table"] = [
        {"x": net.vertices[i], "y": net.vertices[j], "value": float(d.values[i, j])}
        for i in range(net.n_vertices)
        for j in range(i + 1, net.n_vertices)
    ]
    payload["spectrum"] = _dirac.spectral_structure_report(net, mu)
    D = _dirac.dirac_operator(net, mu)
    rng = np.random.default_rng(args.seed)
    payload["bracket_samples"] = [
        _connes.commutator_norm(D, rng.standard_normal(net.n_vertices)).as_dict()
        for _ in range(10)
    ]
    payload["kernel_dimensions"] = {
        "dirac": payload["spectrum"]["kernel_dimension"],
        "cycle_space": payload["spectrum"]["cycle_space_dimension"],
    }
    payload["geometry"] = geom
    if args.out:
        atomic_write_json(args.out, payload)
    else:
        import json

        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _add_space_args(p: argparse.ArgumentParser):
    p.add_argument("--space", choices=["path", "star", "gasket", "file"], default="file")
    p.add_argument("--input", help="network JSON (for --space file)")
    p.add_argument("--level", type=int, default=2, help="gasket level")
    p.add_argument("--N", type=int, default=3, help="star branch count")
    p.add_argument("--k", type=int, default=4, help="segments per branch or path")
    p.add_argument("--length", type=float, default=1.0, help="path total length")
    p.add_argument("--density", type=float, default=1.0, help="path measure density")
    p.add_argument("--a", help="comma separated star branch densities")
    p.add_argument("--mu", help="uniform, kusuoka, or a measure JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE")
    p.add_argument("--out")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="netforms",
        description="Energy forms, metrics, and Dirac operators on resistance networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a network and write its JSON description")
    _add_space_args(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("metrics", help="metric tables as CSV")
    _add_space_args(p)
    p.add_argument("--kind", default="resistance",
                   choices=["resistance", "sqrt_resistance", "coordinate", "intrinsic"])
    p.add_argument("--m", help="dominant measure JSON for the intrinsic metric")
    p.add_argument("--pairs", default="all")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("dirac", help="spectral structure of the Dirac operator")
    _add_space_args(p)
    p.add_argument("--check", default="spectral-structure", choices=["spectral-structure"])
    p.set_defaults(func=cmd_dirac)

    p = sub.add_parser("connes", help="Connes distances and the norm bracket")
    _add_space_args(p)
    p.add_argument("--pairs", default="all")
    p.add_argument("--refine", help="comma separated refinement levels, e.g. 4,16,64")
    p.set_defaults(func=cmd_connes)

    p = sub.add_parser("verify", help="run the full property suite")
    _add_space_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="bundle metrics, spectra, and bracket constants")
    _add_space_args(p)
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        tols = _parse_tols(args.tol)
        # eigensolves are single threaded by contract; on small operators
        # BLAS thread pools only add overhead
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            return args.func(args, tols)
    except (ParseError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
