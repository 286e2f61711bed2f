"""Command-line front door: build triangulations, run flows and experiments,
emit reports/SVGs, and run the built-in invariant suites.

Exit codes: 0 success, 1 monitor/assertion failure, 2 input error. Every run
is reproducible from (config, seed); the resolved configuration is echoed
into each JSON report. A JSON config file mirroring the flag names can seed
any subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import flow as flow_mod
from . import geometry as geom
from . import hexlab as hex_mod
from . import layout as layout_mod
from . import report as report_mod
from . import triangulation as tri_mod
from . import vel as vel_mod

EXIT_OK = 0
EXIT_MONITOR = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _parse_u0(spec, metric_base, rng, n, interior):
    """u0 specs: const:<v> or uniform:<a>[:<base>] (random on interior)."""
    parts = spec.split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            return np.full(n, float(parts[1]))
        if parts[0] == "uniform" and len(parts) in (2, 3):
            amp = float(parts[1])
            base = float(parts[2]) if len(parts) == 3 else 0.0
            u = np.full(n, base)
            u[interior] = base + rng.uniform(-amp, amp, len(interior))
            return u
    except ValueError:
        pass
    raise InputError(f"bad u0 spec {spec!r} (const:<v> | uniform:<a>[:<base>])")


def _parse_khat(spec):
    parts = spec.split(":")
    if parts[0] == "const" and len(parts) == 2:
        try:
            return float(parts[1])
        except ValueError:
            pass
    raise InputError(f"bad khat spec {spec!r} (const:<v>)")


def _radii(text):
    try:
        vals = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise InputError(f"bad radii list {text!r}")
    if not vals:
        raise InputError("empty radii list")
    return vals


def _echo(args):
    skip = {"func", "config", "out", "figures"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    if args.family == "hex":
        tri = tri_mod.build_hexagonal(args.radius)
    elif args.family == "constdeg":
        if args.d is None:
            raise InputError("--d is required for the constdeg family")
        tri = tri_mod.build_constant_degree(args.d, args.radius)
    else:
        raise InputError(f"unknown family {args.family!r}")
    tri_mod.save(tri, args.out)
    print(f"wrote {args.out}: {tri.n_vertices} vertices, "
          f"{len(tri.edges)} edges, {len(tri.faces)} faces")
    return EXIT_OK


def _load_tri(path):
    if not os.path.exists(path):
        raise InputError(f"no such triangulation file: {path}")
    try:
        return tri_mod.load(path)
    except tri_mod.TriangulationError as exc:
        raise InputError(str(exc))


def cmd_flow(args):
    tri = _load_tri(args.tri)
    geometry = (geom.EUCLIDEAN if args.geometry == "euclidean"
                else geom.HYPERBOLIC)
    phi = dict(tri.phi)
    if args.phi is not None:
        if not (0.0 <= args.phi <= math.pi / 2):
            raise InputError("--phi must lie in [0, pi/2]")
        phi = {e: args.phi for e in tri.edges}
    radii = _radii(args.radii)
    if max(radii) > tri.available_radius:
        raise InputError(
            f"radius {max(radii)} exceeds the file's radius {tri.available_radius}"
        )

    rng = np.random.default_rng(args.seed)
    trunc = tri_mod.truncate(tri, max(radii))
    u0 = _parse_u0(args.u0, None, rng, tri.n_vertices, trunc.interior)
    if geometry is geom.HYPERBOLIC and np.any(u0 >= 0):
        raise InputError("hyperbolic initial factors must be < 0")
    khat = _parse_khat(args.khat)
    try:
        metric0 = geom.PackingMetric(geometry, u0, phi)
    except geom.MetricDomainError as exc:
        raise InputError(str(exc))

    stepper = flow_mod.StepperConfig(kind=args.stepper, max_step=args.max_step)
    os.makedirs(args.out, exist_ok=True)
    echo = _echo(args)

    if len(radii) == 1:
        problem = flow_mod.FlowProblem(
            truncation=tri_mod.truncate(tri, radii[0]), metric0=metric0,
            target=khat, t_max=args.t_max, tolerance=args.tol, stepper=stepper,
        )
        traj = flow_mod.solve_finite(problem, state_stride=args.state_stride)
        report_mod.dump_json(report_mod.flow_report(traj, echo),
                             os.path.join(args.out, "flow.json"))
        report_mod.flow_csv(traj, os.path.join(args.out, "flow.csv"))
        report_mod.dump_json(report_mod.metric_json(traj),
                             os.path.join(args.out, "metric.json"))
        if args.figures:
            report_mod.flow_figure(traj, os.path.join(args.out, "flow.png"))
        print(f"status={traj.status} t_end={traj.t_end:.6g} "
              f"residual={traj.residual:.3e}")
        mp = flow_mod.max_principle_monitor(traj)
        cb = flow_mod.curvature_bound_monitor(traj)
        bad = (mp["asserted"] and not mp["ok"]) or not cb["ok"]
        bad = bad or traj.status in ("step failure", "barrier violation")
        return EXIT_MONITOR if bad else EXIT_OK

    if args.inner_k is None or args.inner_k >= min(radii):
        raise InputError("--inner-k < min(radii) is required for exhaustion runs")
    rep = flow_mod.solve_exhaustion(
        tri, metric0, khat, radii, args.inner_k,
        t_max=args.t_max, tolerance=args.tol, stepper=stepper,
    )
    doc = {
        "kind": "exhaustion",
        "config": echo,
        "radii": rep.radii,
        "inner_vertices": rep.inner_vertices,
        "discrepancies": [
            {"radius_a": a, "radius_b": b, "sup": d}
            for a, b, d in rep.discrepancies
        ],
        "runs": [report_mod.flow_report(t, None) for t in rep.trajectories],
    }
    report_mod.dump_json(doc, os.path.join(args.out, "exhaustion.json"))
    report_mod.dump_csv(
        os.path.join(args.out, "exhaustion.csv"),
        ["radius_a", "radius_b", "sup_discrepancy"],
        [[a for a, _, _ in rep.discrepancies],
         [b for _, b, _ in rep.discrepancies],
         rep.discrepancy_values],
    )
    if args.figures:
        report_mod.exhaustion_figure(rep, os.path.join(args.out, "exhaustion.png"))
    print("discrepancies:",
          " ".join(f"{a}->{b}:{d:.3e}" for a, b, d in rep.discrepancies))
    bad = any(t.status in ("step failure", "barrier violation")
              for t in rep.trajectories)
    for t in rep.trajectories:
        mp = flow_mod.max_principle_monitor(t)
        if mp["asserted"] and not mp["ok"]:
            bad = True
        if not flow_mod.curvature_bound_monitor(t)["ok"]:
            bad = True
    return EXIT_MONITOR if bad else EXIT_OK


def cmd_hexlab(args):
    if args.N < 1:
        raise InputError("--N must be >= 1")
    field0 = hex_mod.HexField.random_l2(
        args.N, args.l2, seed=args.seed, boundary_rule=args.boundary
    )
    try:
        ev = hex_mod.evolve(field0, args.t_max, stop_energy=args.stop_energy)
    except hex_mod.HexDomainError as exc:
        print(f"domain violation: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    os.makedirs(args.out, exist_ok=True)
    report_mod.dump_csv(
        os.path.join(args.out, "hexlab.csv"),
        ["t", "l2", "linf", "energy", "decay_residual"],
        [ev.t, ev.l2, ev.linf, ev.energy, ev.decay_residual],
    )
    lat_coords = ev.final.ball_coords
    doc = {
        "kind": "hexlab",
        "config": _echo(args),
        "status": ev.status,
        "final": {
            "t": float(ev.t[-1]),
            "l2": float(ev.l2[-1]),
            "linf": float(ev.linf[-1]),
            "energy": float(ev.energy[-1]),
        },
        "snapshot": {
            "order": "row-major over (m, n)",
            "coords": [list(c) for c in lat_coords],
            "values": ev.final.values,
        },
    }
    report_mod.dump_json(doc, os.path.join(args.out, "hexlab.json"))
    if args.figures:
        report_mod.hexlab_figure(ev, os.path.join(args.out, "hexlab.png"))
    print(f"status={ev.status} t_end={ev.t[-1]:.6g} "
          f"E={ev.energy[-1]:.3e} linf={ev.linf[-1]:.3e}")
    ok = bool(np.all(np.diff(ev.l2) <= 1e-7 * max(1.0, ev.l2[0])))
    return EXIT_OK if ok else EXIT_MONITOR


def cmd_vel(args):
    tri = _load_tri(args.tri)
    radii = _radii(args.radii)
    if max(radii) > tri.available_radius:
        raise InputError(
            f"radius {max(radii)} exceeds the file's radius {tri.available_radius}"
        )
    try:
        rep = vel_mod.classify(tri, {tri.root}, radii, tol=args.tol)
    except vel_mod.VelError as exc:
        raise InputError(str(exc))
    os.makedirs(args.out, exist_ok=True)
    doc = {
        "kind": "vel",
        "config": _echo(args),
        "radii": rep.radii,
        "vel": rep.vels,
        "gaps": rep.gaps,
        "iterations": rep.iterations,
        "label": rep.label,
        "plateau_threshold": rep.plateau_threshold,
    }
    if args.dump_weights:
        est = vel_mod.vel_between(
            _ball_adj(tri, radii[-1]),
            {tri.root},
            set(np.flatnonzero(tri.depth == radii[-1]).tolist()),
            tol=args.tol,
        )
        doc["weights"] = [[int(v), w] for v, w in est.m.items()]
    report_mod.dump_json(doc, os.path.join(args.out, "vel.json"))
    if args.figures:
        report_mod.vel_figure(rep, os.path.join(args.out, "vel.png"))
    print(f"label={rep.label} vel=" + ",".join(f"{v:.6g}" for v in rep.vels))
    return EXIT_OK


def _ball_adj(tri, n):
    keep = set(np.flatnonzero(tri.depth <= n).tolist())
    return {v: [w for w in tri.adjacency[v] if w in keep] for v in keep}


def cmd_layout(args):
    tri = _load_tri(args.tri)
    with open(args.metric) as fh:
        doc = json.load(fh)
    try:
        geometry = (geom.EUCLIDEAN if doc["geometry"] == "euclidean"
                    else geom.HYPERBOLIC)
        u = np.asarray(doc["u"], dtype=float)
        radius = int(doc.get("radius", args.radius or tri.available_radius))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad metric file: {exc}")
    if len(u) != tri.n_vertices:
        raise InputError(
            f"metric has {len(u)} factors but triangulation has {tri.n_vertices}"
        )
    trunc = tri_mod.truncate(tri, radius)
    metric = geom.PackingMetric(geometry, u, dict(tri.phi))
    try:
        emb = layout_mod.embed(trunc, metric)
        layout_mod.emit_svg(
            emb, args.out,
            show_edges=not args.no_edges,
            show_circles=not args.no_circles,
            scale=args.scale,
        )
    except layout_mod.LayoutError as exc:
        print(f"layout failed: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    print(f"wrote {args.out}: {len(emb)} circles, "
          f"holonomy residual {emb.holonomy_residual:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# invariant suites


def _check_geometry_derivatives():
    rng = np.random.default_rng(0)
    for geometry, lo, hi in ((geom.EUCLIDEAN, -3, 1), (geom.HYPERBOLIC, -4, -0.05)):
        for _ in range(200):
            u = rng.uniform(lo, hi, 3)
            phi = rng.uniform(0, math.pi / 2, 3)
            r = geom.radius_from_factor(geometry, u)
            J = geom.angle_jacobian(geometry, r, phi)
            assert np.all(np.diag(J) < 0), "diagonal sign"
            assert np.all(J[~np.eye(3, dtype=bool)] > 0), "off-diagonal sign"
            assert np.allclose(J, J.T, rtol=1e-8, atol=1e-12), "symmetry"
            rs = J.sum(axis=1)
            if geometry is geom.EUCLIDEAN:
                assert np.all(np.abs(rs) < 1e-9), "row sums"
            else:
                assert np.all(rs < 0), "row sums"
            h = 1e-6
            for d in range(3):
                e = np.zeros(3)
                e[d] = h
                th = lambda uu: geom.triangle_angles(
                    geometry, geom.radius_from_factor(geometry, uu), phi).angles
                d1 = (th(u + e) - th(u - e)) / (2 * h)
                d2 = (th(u + 2 * e) - th(u - 2 * e)) / (4 * h)
                fd = (4 * d1 - d2) / 3
                assert np.all(
                    np.abs(J[:, d] - fd)
                    <= 1e-5 * np.maximum(np.abs(J[:, d]), 1e-2) + 1e-8
                ), "finite differences"
    print("ok geometry-derivatives")


def _check_max_principle():
    rng = np.random.default_rng(0)
    hx = tri_mod.build_hexagonal(4)
    tr = tri_mod.truncate(hx, 4)
    u0 = np.zeros(hx.n_vertices)
    u0[tr.interior] = rng.uniform(-0.05, 0.05, len(tr.interior))
    traj = flow_mod.solve_finite(flow_mod.FlowProblem(
        tr, geom.PackingMetric(geom.EUCLIDEAN, u0), tolerance=1e-7, t_max=100.0))
    mp = flow_mod.max_principle_monitor(traj)
    assert mp["ok"], mp
    assert flow_mod.curvature_bound_monitor(traj)["ok"]

    d7 = tri_mod.build_constant_degree(7, 3)
    tr7 = tri_mod.truncate(d7, 3)
    traj7 = flow_mod.solve_finite(flow_mod.FlowProblem(
        tr7, geom.PackingMetric(geom.HYPERBOLIC, np.full(d7.n_vertices, -3.0)),
        tolerance=1e-7, t_max=100.0))
    assert traj7.status == "converged", traj7.status
    mp7 = flow_mod.max_principle_monitor(traj7)
    assert mp7["ok"], mp7
    assert flow_mod.curvature_bound_monitor(traj7)["ok"]
    assert float(np.max(traj7.monitor["barrier_excess"])) <= 0.0
    print("ok max-principle")


def _check_hexlab_identities():
    assert abs(hex_mod.angle_G(0, 0) - math.pi / 3) < 1e-14
    gx, gy = hex_mod.angle_G_partials(0.0, 0.0)
    assert abs(2 * gx - math.sqrt(3) / 3) < 1e-13
    assert abs(gx - gy) < 1e-15
    rng = np.random.default_rng(1)
    tri = tri_mod.build_hexagonal(6)
    tr = tri_mod.truncate(tri, 6)
    for trial in range(5):
        field = hex_mod.HexField(6, rng.uniform(-0.2, 0.2, 127))
        u = np.zeros(tri.n_vertices)
        for vid in range(tri.n_vertices):
            u[vid] = field.value_at(tri.labels[vid])
        metric = geom.PackingMetric(geom.EUCLIDEAN, u)
        for v in tr.interior[:: max(1, len(tr.interior) // 15)]:
            K = geom.curvature(tr, metric, int(v))
            s = hex_mod.semilinear_rhs(field, tri.labels[int(v)])
            assert abs(s + K) < 1e-10, (s, K)
        H = hex_mod.hessian(field, (0, 0))
        assert np.allclose(H, H.T, atol=0.0), "difference operators commute"
    print("ok hexlab-identities")


def _check_vel_oracle():
    for n in range(2, 7):
        adj = {i: [j for j in (i - 1, i + 1) if 0 <= j <= n] for i in range(n + 1)}
        est = vel_mod.vel_between(adj, {0}, {n})
        assert abs(est.vel - n) < 1e-6 * n, (n, est.vel)
    # two fully disjoint length-3 branches: VEL halves
    adj = {
        "a": [1, 4], 1: ["a", 2], 2: [1, 3], 3: [2],
        4: ["a", 5], 5: [4, 6], 6: [5],
    }
    est = vel_mod.vel_between(adj, {"a"}, {3, 6})
    assert abs(est.vel - 1.5) < 1e-6, est.vel
    adj = {0: [1], 1: [0]}
    assert vel_mod.vel_between(adj, {0}, {1}).vel <= 1.0 + 1e-6
    print("ok vel-oracle")


_SUITES = {
    "geometry-derivatives": _check_geometry_derivatives,
    "max-principle": _check_max_principle,
    "hexlab-identities": _check_hexlab_identities,
    "vel-oracle": _check_vel_oracle,
}


def cmd_check(args):
    if args.suite not in _SUITES:
        raise InputError(
            f"unknown suite {args.suite!r}; available: {', '.join(sorted(_SUITES))}"
        )
    try:
        _SUITES[args.suite]()
    except AssertionError as exc:
        print(f"FAIL {args.suite}: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="crflab",
        description="Curvature flows on circle-packing metrics of disk "
                    "triangulations: builders, flows, lattice experiments, "
                    "extremal length, layouts.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a triangulation file")
    g.add_argument("--family", required=True, choices=["hex", "constdeg"])
    g.add_argument("--d", type=int, default=None, help="interior degree (constdeg)")
    g.add_argument("--radius", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("flow", help="run the curvature flow on truncations")
    f.add_argument("--tri", required=True)
    f.add_argument("--geometry", required=True, choices=["euclidean", "hyperbolic"])
    f.add_argument("--phi", type=float, default=None,
                   help="constant intersection angle overriding the file")
    f.add_argument("--u0", default="const:0", help="const:<v> | uniform:<a>[:<base>]")
    f.add_argument("--khat", default="const:0", help="const:<v>")
    f.add_argument("--radii", required=True, help="comma list; >1 runs exhaustion")
    f.add_argument("--inner-k", type=int, default=None)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--t-max", type=float, default=50.0)
    f.add_argument("--stepper", choices=["rk45", "rk4"], default="rk45")
    f.add_argument("--max-step", type=float, default=0.1)
    f.add_argument("--state-stride", type=int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=True)
    f.set_defaults(func=cmd_flow)

    hx = sub.add_parser("hexlab", help="semilinear lattice decay experiment")
    hx.add_argument("--N", type=int, required=True)
    hx.add_argument("--l2", type=float, required=True,
                    help="l2 norm of the seeded random initial field")
    hx.add_argument("--boundary", choices=["zero", "frozen"], default="zero")
    hx.add_argument("--t-max", type=float, default=5000.0)
    hx.add_argument("--stop-energy", type=float, default=1e-9)
    hx.add_argument("--seed", type=int, default=0)
    hx.add_argument("--out", required=True)
    hx.add_argument("--figures", action=argparse.BooleanOptionalAction,
                    default=True)
    hx.set_defaults(func=cmd_hexlab)

    v = sub.add_parser("vel", help="extremal-length trend on truncations")
    v.add_argument("--tri", required=True)
    v.add_argument("--radii", required=True)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--dump-weights", action="store_true")
    v.add_argument("--out", required=True)
    v.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=True)
    v.set_defaults(func=cmd_vel)

    l = sub.add_parser("layout", help="embed a metric and write an SVG")
    l.add_argument("--tri", required=True)
    l.add_argument("--metric", required=True, help="metric JSON (flow output)")
    l.add_argument("--radius", type=int, default=None)
    l.add_argument("--out", required=True)
    l.add_argument("--no-edges", action="store_true")
    l.add_argument("--no-circles", action="store_true")
    l.add_argument("--scale", type=float, default=100.0)
    l.set_defaults(func=cmd_layout)

    c = sub.add_parser("check", help="run a built-in invariant suite")
    c.add_argument("suite")
    c.set_defaults(func=cmd_check)

    for p in (g, f, hx, v, l, c):
        p.add_argument("--config", default=None,
                       help="JSON file of defaults mirroring the flag names")
    return ap


def _apply_config(argv):
    """Inject config-file entries before the explicit flags (which then win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise InputError("--config needs a path")
    path = argv[i + 1]
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"bad config file {path}: {exc}")
    if not isinstance(cfg, dict):
        raise InputError("config file must hold a JSON object")
    tokens = []
    for key, val in sorted(cfg.items()):
        flag = "--" + str(key).replace("_", "-")
        if isinstance(val, bool):
            if val:
                tokens.append(flag)
        else:
            tokens.extend([flag, str(val)])
    return [argv[0]] + tokens + argv[1:]


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = _build_parser()
    try:
        if argv and not argv[0].startswith("-"):
            argv = _apply_config(argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (tri_mod.TriangulationError, geom.MetricDomainError,
            flow_mod.FlowSetupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
