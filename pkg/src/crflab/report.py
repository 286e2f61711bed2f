"""Report serialization: deterministic JSON, CSV series, and figures.

JSON output formats every float with 17 significant digits and sorts object
keys, so identical runs produce bit-identical documents. Figure rendering is
optional and imports matplotlib lazily.
"""

from __future__ import annotations

import hashlib
import io
import json

import numpy as np


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        return "null"
    return format(float(x), ".17g")


def _write_json(obj, out: io.StringIO):
    if obj is None:
        out.write("null")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(_fmt_float(obj))
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    elif isinstance(obj, dict):
        out.write("{")
        keys = sorted(obj, key=str)
        for i, k in enumerate(keys):
            if i:
                out.write(",")
            out.write(json.dumps(str(k)))
            out.write(":")
            _write_json(obj[k], out)
        out.write("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.write("[")
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, item in enumerate(seq):
            if i:
                out.write(",")
            _write_json(item, out)
        out.write("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    out = io.StringIO()
    _write_json(obj, out)
    return out.getvalue()


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def dump_csv(path, header, columns) -> None:
    """Write columns (same length) under the comma-joined header."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt_float(float(c[i])) for c in cols) + "\n")


def triangulation_hash(tri) -> str:
    """Stable content hash of the combinatorial data."""
    h = hashlib.sha256()
    h.update(f"tri v={tri.n_vertices} root={tri.root}\n".encode())
    for f in tri.faces:
        h.update(f"f {f[0]} {f[1]} {f[2]}\n".encode())
    for e in sorted(tri.phi):
        h.update(f"phi {e[0]} {e[1]} {tri.phi[e]!r}\n".encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# flow reports


def flow_report(trajectory, config_echo=None) -> dict:
    """One JSON document per run: problem echo, states, monitors, status."""
    from .flow import barrier_monitor, curvature_bound_monitor, max_principle_monitor

    p = trajectory.problem
    tr = p.truncation
    phis = sorted(p.metric0.phi.values())
    khat = p.khat_interior()
    doc = {
        "kind": "flow",
        "config": config_echo or {},
        "problem": {
            "triangulation_hash": triangulation_hash(tr.parent),
            "radius": tr.radius,
            "geometry": p.metric0.geometry.value,
            "n_interior": int(len(tr.interior)),
            "n_boundary": int(len(tr.boundary)),
            "phi": {
                "count_nonzero": int(sum(1 for v in phis if v != 0.0)),
                "min": float(min(phis)) if phis else 0.0,
                "max": float(max(phis)) if phis else 0.0,
            },
            "khat": {"min": float(khat.min()), "max": float(khat.max())},
            "t_max": p.t_max,
            "tolerance": p.tolerance,
            "stepper": {
                "kind": p.stepper.kind,
                "atol": p.stepper.atol,
                "rtol": p.stepper.rtol,
                "max_step": p.stepper.max_step,
                "fixed_step": p.stepper.fixed_step,
            },
        },
        "status": trajectory.status,
        "t_end": trajectory.t_end,
        "residual": trajectory.residual,
        # wall-clock time stays off the report so identical (config, seed)
        # runs serialize bit-identically
        "stats": {k: v for k, v in trajectory.stats.items() if k != "wall_time"},
        "monitor": {
            "t": trajectory.times,
            **{k: v for k, v in trajectory.monitor.items()},
        },
        "states": {
            "t": [s.t for s in trajectory.states],
            "vertex_ids": tr.vertices,
            "u": [s.u[tr.vertices] for s in trajectory.states],
            "interior_ids": tr.interior,
            "K": [s.K for s in trajectory.states],
        },
        "monitors_report": {
            "max_principle": max_principle_monitor(trajectory),
            "curvature_bounds": curvature_bound_monitor(trajectory),
            "barrier": barrier_monitor(trajectory)
            if trajectory.barrier is not None
            else None,
        },
    }
    if trajectory.barrier is not None:
        doc["barrier"] = trajectory.barrier
    return doc


def flow_csv(trajectory, path) -> None:
    """The (t, m, M, energy) series of a run."""
    dump_csv(
        path,
        ["t", "m", "M", "energy"],
        [
            trajectory.times,
            trajectory.monitor["resid_min"],
            trajectory.monitor["resid_max"],
            trajectory.monitor["energy"],
        ],
    )


def metric_json(trajectory) -> dict:
    """Final metric of a run, consumable by the layout command."""
    p = trajectory.problem
    final = trajectory.states[-1]
    return {
        "kind": "metric",
        "geometry": p.metric0.geometry.value,
        "triangulation_hash": triangulation_hash(p.truncation.parent),
        "radius": p.truncation.radius,
        "u": final.u,
    }


# ---------------------------------------------------------------------------
# figures (lazy matplotlib)


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "figure.figsize": (6.4, 4.0),
        "font.size": 10,
        "lines.linewidth": 1.4,
        "axes.grid": True,
        "grid.alpha": 0.3,
    })
    return plt


def flow_figure(trajectory, path) -> None:
    """Curvature extrema and residual energy against time."""
    plt = _mpl()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
    t = trajectory.times
    ax1.plot(t, trajectory.monitor["resid_min"], label="min (K - Khat)")
    ax1.plot(t, trajectory.monitor["resid_max"], label="max (K - Khat)")
    ax1.set_ylabel("curvature residual")
    ax1.legend(loc="best")
    e = np.maximum(trajectory.monitor["energy"], 1e-300)
    ax2.semilogy(t, e, color="#aa3333")
    ax2.set_ylabel("sum (K - Khat)^2")
    ax2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def hexlab_figure(evolution, path) -> None:
    """Norm and energy decay of a lattice run."""
    plt = _mpl()
    fig, ax = plt.subplots()
    ax.semilogy(evolution.t, np.maximum(evolution.l2, 1e-300), label="|u|_2")
    ax.semilogy(evolution.t, np.maximum(evolution.linf, 1e-300), label="|u|_inf")
    ax.semilogy(evolution.t, np.maximum(evolution.energy, 1e-300), label="E(u)")
    ax.set_xlabel("t")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def vel_figure(trend, path) -> None:
    """Extremal length against truncation radius."""
    plt = _mpl()
    fig, ax = plt.subplots()
    ax.plot(trend.radii, trend.vels, marker="o")
    ax.set_xlabel("radius")
    ax.set_ylabel("VEL(A, sphere)")
    ax.set_title(trend.label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def exhaustion_figure(report, path) -> None:
    """Consecutive-radius discrepancies of an exhaustion run."""
    plt = _mpl()
    fig, ax = plt.subplots()
    labels = [f"{a}->{b}" for a, b, _ in report.discrepancies]
    ax.semilogy(range(len(labels)), [max(d, 1e-300) for d in report.discrepancy_values],
                marker="o")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_ylabel("sup |u_n - u_n'| on inner ball")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
