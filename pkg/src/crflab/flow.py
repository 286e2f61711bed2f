"""Curvature flow du/dt = -(K - Khat) on truncations with Dirichlet boundary.

Boundary conformal factors stay frozen at their initial values. Hyperbolic
runs keep u < 0 by rejecting and halving steps, never by projecting the
state. Monitors track curvature extrema, the degree bounds, componentwise
monotonicity of u, and (hyperbolic) the barrier that caps u away from zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import ode
from ._util import parallel_map
from .geometry import (
    HYPERBOLIC,
    DegenerateTriangleError,
    MetricDomainError,
    PackingMetric,
    angle_jacobians,
    angle_sums,
    face_phi,
    radius_from_factor,
    triangle_angles,
)
from .triangulation import Truncation, ball

TWO_PI = 2.0 * math.pi


class FlowSetupError(ValueError):
    """Invalid flow problem data."""


@dataclass
class StepperConfig:
    kind: str = "rk45"  # "rk45" | "rk4"
    atol: float = 1e-10
    rtol: float = 1e-8
    h0: float = 1e-3
    max_step: float = 0.1
    min_step: float = 1e-13
    fixed_step: float = 0.01

    @property
    def tolerance_scale(self) -> float:
        return self.atol + self.rtol


@dataclass
class FlowProblem:
    truncation: Truncation
    metric0: PackingMetric
    target: float | np.ndarray = 0.0  # Khat, constant or per-vertex over parent ids
    t_max: float = 50.0
    tolerance: float = 1e-6
    stepper: StepperConfig = field(default_factory=StepperConfig)
    enforce_barrier: bool | None = None  # None: auto (hyperbolic and Khat == 0)

    def __post_init__(self):
        if self.tolerance <= 0:
            raise FlowSetupError("tolerance must be > 0")
        tr = self.truncation
        khat = self.khat_interior()
        if np.any(khat >= TWO_PI):
            raise FlowSetupError("target curvatures must be < 2*pi")
        verts = tr.vertices
        if self.metric0.geometry is HYPERBOLIC and np.any(self.metric0.u[verts] >= 0):
            raise FlowSetupError("hyperbolic initial factors must be < 0")

    def khat_interior(self) -> np.ndarray:
        if np.isscalar(self.target):
            return np.full(len(self.truncation.interior), float(self.target))
        return np.asarray(self.target, dtype=float)[self.truncation.interior]

    @property
    def khat_is_zero(self) -> bool:
        return bool(np.all(self.khat_interior() == 0.0))


@dataclass
class FlowState:
    t: float
    u: np.ndarray  # full vector over parent ids, boundary frozen
    K: np.ndarray  # interior curvatures in truncation.interior order


@dataclass
class Trajectory:
    problem: FlowProblem
    times: np.ndarray
    monitor: dict[str, np.ndarray]
    states: list[FlowState]
    status: str  # converged | t_max reached | step failure | barrier violation
    residual: float
    barrier: np.ndarray | None
    stats: dict

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state_at(self, t: float) -> FlowState | None:
        for st in self.states:
            if abs(st.t - t) <= 1e-9 * max(1.0, abs(t)):
                return st
        return None


class _Workspace:
    """Precomputed arrays for fast curvature evaluation on one truncation."""

    def __init__(self, problem: FlowProblem):
        tr = problem.truncation
        m = problem.metric0
        self.geometry = m.geometry
        self.n = tr.parent.n_vertices
        self.faces = tr.faces_arr
        self.phi_faces = face_phi(self.faces, m.phi)
        self.interior = tr.interior
        self.boundary = tr.boundary
        self.khat = problem.khat_interior()
        self.deg = np.array([tr.parent.degree(v) for v in tr.interior])
        self.u_template = m.u.copy()

    def full_u(self, y):
        u = self.u_template.copy()
        u[self.interior] = y
        return u

    def curvature_interior(self, u_full):
        sums = angle_sums(self.geometry, self.faces, self.phi_faces, u_full, self.n)
        return TWO_PI - sums[self.interior]


def rhs(problem: FlowProblem, u_full) -> np.ndarray:
    """-(K - Khat) on interior vertices for the given full factor vector."""
    ws = _Workspace(problem)
    K = ws.curvature_interior(np.asarray(u_full, dtype=float))
    return -(K - ws.khat)


def hyperbolic_barrier(metric: PackingMetric, degrees: dict, complex_like=None,
                       margin=1e-9) -> dict:
    """Per-vertex cap delta-bar keeping hyperbolic factors away from zero.

    For each vertex, bisection finds the largest threshold delta < 0 at which
    the vertex's inner angle (with both neighbor factors pushed to their
    supremum 0-) still stays below 2*pi/deg; by angle monotonicity any
    u_v >= delta then forces every incident angle under 2*pi/deg. Returns
    0.5 * max(u_v(0), delta_v), which the flow monitor checks u_v(t) against.
    """
    if metric.geometry is not HYPERBOLIC:
        raise MetricDomainError("barrier is defined for hyperbolic metrics")
    out = {}
    memo: dict[tuple, float] = {}
    for v, deg in degrees.items():
        target = TWO_PI / deg - margin
        deltas = []
        for p in _vertex_face_phis(metric, complex_like, v):
            key = (deg, tuple(np.round(p, 15)))
            if key not in memo:
                memo[key] = _bisect_angle_threshold(p, target, v)
            deltas.append(memo[key])
        out[v] = 0.5 * max(float(metric.u[v]), max(deltas))
    return out


def _vertex_face_phis(metric, complex_like, v):
    if complex_like is None or not metric.phi:
        return [np.zeros(3)]
    tri = complex_like.parent if hasattr(complex_like, "parent") else complex_like
    phis = []
    for fi in tri.vertex_faces[v]:
        face = tri.faces[fi]
        p3 = face_phi(np.array([face]), metric.phi)[0]
        a = face.index(v)
        phis.append(np.roll(p3, -a))  # slot 0 = opposite the vertex itself
    return phis or [np.zeros(3)]


_NEIGHBOR_SUP = -1e-12  # stand-in for the neighbor supremum u -> 0-


def _center_angle(u_v, phi3):
    u = np.array([u_v, _NEIGHBOR_SUP, _NEIGHBOR_SUP])
    r = radius_from_factor(HYPERBOLIC, u)
    return float(triangle_angles(HYPERBOLIC, r, phi3).angles[0])


def _bisect_angle_threshold(phi3, target, v):
    lo, hi = -60.0, _NEIGHBOR_SUP
    if _center_angle(hi, phi3) >= target:
        raise FlowSetupError(
            f"barrier bisection failed at vertex {v}: angle target {target:.4f} "
            "unreachable even as u -> 0-"
        )
    if _center_angle(lo, phi3) < target:
        return lo  # angle never reaches the target; any u works
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _center_angle(mid, phi3) < target:
            hi = mid
        else:
            lo = mid
    return hi


_MONITOR_KEYS = (
    "h", "K_min", "K_max", "resid_min", "resid_max", "mstar", "Mstar",
    "energy", "max_rate", "deg_margin_min", "u_max", "u_backstep",
    "barrier_excess",
)


def solve_finite(problem: FlowProblem, sample_times=None, state_stride=1,
                 stop_at_tolerance=True) -> Trajectory:
    """Integrate the Dirichlet flow until the curvature residual converges.

    States are recorded at t=0, at every accepted step (thinned by
    state_stride) or exactly at `sample_times`, and at the final time.
    """
    ws = _Workspace(problem)
    cfg = problem.stepper
    hyp = ws.geometry is HYPERBOLIC

    barrier = None
    enforce = problem.enforce_barrier
    if enforce is None:
        enforce = hyp and problem.khat_is_zero
    if hyp:
        degrees = {int(v): int(d) for v, d in zip(ws.interior, ws.deg)}
        bmap = hyperbolic_barrier(problem.metric0, degrees, problem.truncation)
        barrier = np.array([bmap[int(v)] for v in ws.interior])
    barrier_slack = 10.0 * cfg.tolerance_scale

    y0 = problem.metric0.u[ws.interior].astype(float)
    times = [0.0]
    mon = {k: [] for k in _MONITOR_KEYS}
    states: list[FlowState] = []
    prev_y = y0.copy()
    step_counter = {"n": 0}
    t_start = time.perf_counter()

    def record(t, y, h):
        u_full = ws.full_u(y)
        K = ws.curvature_interior(u_full)
        resid = K - ws.khat
        mon["h"].append(h)
        mon["K_min"].append(K.min())
        mon["K_max"].append(K.max())
        mon["resid_min"].append(resid.min())
        mon["resid_max"].append(resid.max())
        mon["mstar"].append(min(resid.min(), 0.0))
        mon["Mstar"].append(max(resid.max(), 0.0))
        mon["energy"].append(float(resid @ resid))
        mon["max_rate"].append(np.abs(resid).max())
        mon["deg_margin_min"].append((K - (TWO_PI - ws.deg * math.pi)).min())
        mon["u_max"].append(y.max())
        mon["u_backstep"].append(max(0.0, float((prev_y - y).max())))
        mon["barrier_excess"].append(
            float((y - barrier).max()) if barrier is not None else -np.inf
        )
        return K, resid

    K0, resid0 = record(0.0, y0, 0.0)
    want_state = _StateFilter(sample_times, state_stride)
    states.append(FlowState(0.0, ws.full_u(y0), K0))

    if stop_at_tolerance and np.abs(resid0).max() < problem.tolerance:
        return Trajectory(
            problem, np.array(times), {k: np.array(v) for k, v in mon.items()},
            states, "converged", float(np.abs(resid0).max()), barrier,
            {"steps": 0, "wall_time": 0.0},
        )

    def f(t, y):
        if hyp and np.any(y >= 0):
            raise ode.DomainViolation()
        try:
            K = ws.curvature_interior(ws.full_u(y))
        except (DegenerateTriangleError, MetricDomainError) as exc:
            raise ode.DomainViolation() from exc
        return -(K - ws.khat)

    def accept_state(y):
        if hyp and np.any(y >= 0):
            return False
        if barrier is not None and enforce and np.any(y > barrier + barrier_slack):
            return False
        return True

    def on_step(t, y, h):
        nonlocal prev_y
        times.append(t)
        record(t, y, h)
        step_counter["n"] += 1
        if want_state(t, step_counter["n"]):
            states.append(FlowState(t, ws.full_u(y), ws.curvature_interior(ws.full_u(y))))
        prev_y = y.copy()

    def stop(t, y):
        if not stop_at_tolerance or t == 0.0:
            return False
        resid = ws.curvature_interior(ws.full_u(y)) - ws.khat
        return bool(np.abs(resid).max() < problem.tolerance)

    status = "t_max reached"
    try:
        if cfg.kind == "rk4":
            res = ode.integrate_rk4(
                f, 0.0, y0, problem.t_max, cfg.fixed_step, on_step=on_step, stop=stop
            )
        else:
            res = ode.integrate_rk45(
                f, 0.0, y0, problem.t_max,
                atol=cfg.atol, rtol=cfg.rtol, h0=cfg.h0,
                max_step=cfg.max_step, min_step=cfg.min_step,
                accept_state=accept_state, on_step=on_step, stop=stop,
                sample_times=sample_times if sample_times is not None else (),
            )
        y_end = res.y
        if res.status == "stopped":
            status = "converged"
        stats = {
            "steps": res.stats.accepted,
            "rejected_error": res.stats.rejected_error,
            "rejected_domain": res.stats.rejected_domain,
            "rhs_evals": res.stats.rhs_evals,
        }
    except ode.StepFailure as exc:
        y_end = prev_y
        status = (
            "barrier violation" if exc.reason == "state rejection" else "step failure"
        )
        stats = {"steps": step_counter["n"], "failure": str(exc)}
    except ode.DomainViolation:
        y_end = prev_y
        status = "step failure"
        stats = {"steps": step_counter["n"], "failure": "left domain mid-stage"}
    stats["wall_time"] = time.perf_counter() - t_start

    K_end = ws.curvature_interior(ws.full_u(y_end))
    residual = float(np.abs(K_end - ws.khat).max())
    if not states or states[-1].t < times[-1] - 1e-12:
        states.append(FlowState(times[-1], ws.full_u(y_end), K_end))
    return Trajectory(
        problem, np.array(times), {k: np.array(v) for k, v in mon.items()},
        states, status, residual, barrier, stats,
    )


class _StateFilter:
    def __init__(self, sample_times, stride):
        self.grid = None if sample_times is None else np.asarray(sample_times, float)
        self.stride = max(1, int(stride))

    def __call__(self, t, step_index):
        if self.grid is not None:
            return bool(np.any(np.abs(self.grid - t) <= 1e-9 * max(1.0, abs(t))))
        return step_index % self.stride == 0


# ---------------------------------------------------------------------------
# monitors


def max_principle_monitor(trajectory: Trajectory, slack=None) -> dict:
    """Monotonicity of the clipped residual extrema along the run.

    min(m(t), 0) must be non-decreasing and max(M(t), 0) non-increasing, up to
    10x the integrator tolerance between consecutive samples. Asserted for
    Khat == 0 runs; for prescribed targets the same series is reported without
    a verdict (the monotonicity claim is only established for Khat == 0).
    """
    cfg = trajectory.problem.stepper
    if slack is None:
        slack = 10.0 * cfg.tolerance_scale
    mstar = trajectory.monitor["mstar"]
    Mstar = trajectory.monitor["Mstar"]
    worst_drop = float(np.max(mstar[:-1] - mstar[1:])) if len(mstar) > 1 else 0.0
    worst_rise = float(np.max(Mstar[1:] - Mstar[:-1])) if len(Mstar) > 1 else 0.0
    asserted = trajectory.problem.khat_is_zero
    ok = worst_drop <= slack and worst_rise <= slack
    return {
        "asserted": asserted,
        "ok": bool(ok) if asserted else None,
        "worst_mstar_drop": worst_drop,
        "worst_Mstar_rise": worst_rise,
        "slack": slack,
    }


def curvature_bound_monitor(trajectory: Trajectory, slack=None) -> dict:
    """Uniform curvature bound and the degree bound at every sample."""
    cfg = trajectory.problem.stepper
    if slack is None:
        slack = 10.0 * cfg.tolerance_scale
    K_min = trajectory.monitor["K_min"]
    K_max = trajectory.monitor["K_max"]
    bound = max(abs(float(K_min[0])), TWO_PI)
    sup_abs = float(np.max(np.maximum(np.abs(K_min), np.abs(K_max))))
    deg_margin = float(np.min(trajectory.monitor["deg_margin_min"]))
    ok = sup_abs <= bound + slack and deg_margin >= -1e-12 and np.all(K_max < TWO_PI)
    return {
        "ok": bool(ok),
        "sup_abs_K": sup_abs,
        "uniform_bound": bound,
        "deg_margin_min": deg_margin,
        "K_max_overall": float(np.max(K_max)),
        "slack": slack,
    }


def barrier_monitor(trajectory: Trajectory) -> dict:
    """Worst excess of u over the hyperbolic barrier, and of u over 0."""
    excess = trajectory.monitor["barrier_excess"]
    return {
        "asserted": trajectory.problem.khat_is_zero
        and trajectory.problem.metric0.geometry is HYPERBOLIC,
        "max_barrier_excess": float(np.max(excess)),
        "max_u": float(np.max(trajectory.monitor["u_max"])),
    }


# ---------------------------------------------------------------------------
# uniqueness diagnostics


@dataclass
class UniquenessWeights:
    omega: dict  # sorted edge pair -> positive weight
    h: dict      # interior vertex -> non-negative damping
    row_sums: dict  # interior vertex -> sum of omega over incident edges

    @property
    def max_row_sum(self) -> float:
        return max(self.row_sums.values())


def uniqueness_weights(truncation: Truncation, metric_a: PackingMetric,
                       metric_b: PackingMetric, nodes: int = 16) -> UniquenessWeights:
    """Path-integral edge weights and damping between two metrics.

    omega_ij integrates -dK_i/du_j along the straight segment between the two
    factor vectors (Gauss-Legendre, `nodes` points); h_i integrates the full
    row sum of dK_i/du. Signs: omega > 0 always, h == 0 in Euclidean
    background and h >= 0 in hyperbolic background.
    """
    if metric_a.geometry is not metric_b.geometry:
        raise FlowSetupError("metrics must share a background geometry")
    geom = metric_a.geometry
    faces = truncation.faces_arr
    phi_faces = face_phi(faces, metric_a.phi)
    interior = set(int(v) for v in truncation.interior)

    x, w = np.polynomial.legendre.leggauss(nodes)
    s_nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w

    omega: dict[tuple[int, int], float] = {}
    h: dict[int, float] = {int(v): 0.0 for v in truncation.interior}
    for s, wt in zip(s_nodes, weights):
        u_s = s * metric_a.u + (1.0 - s) * metric_b.u
        r = radius_from_factor(geom, u_s)
        J = angle_jacobians(geom, r[faces], phi_faces)
        rows = -J.sum(axis=2)  # per-face contribution to dK_i/du row sums
        for fi, face in enumerate(faces):
            for a in range(3):
                i = int(face[a])
                if i not in interior:
                    continue
                h[i] += wt * float(rows[fi, a])
                for d in range(3):
                    if d == a:
                        continue
                    j = int(face[d])
                    e = (min(i, j), max(i, j))
                    # omega_ij = -int dK_i/du_j = +int sum_faces J[a, d]
                    omega[e] = omega.get(e, 0.0) + wt * float(J[fi, a, d])
    # interior-interior edges were accumulated from both endpoints; halve them
    for e in omega:
        if e[0] in interior and e[1] in interior:
            omega[e] *= 0.5
    row_sums = {v: 0.0 for v in h}
    for (i, j), val in omega.items():
        if i in row_sums:
            row_sums[i] += val
        if j in row_sums:
            row_sums[j] += val
    return UniquenessWeights(omega=omega, h=h, row_sums=row_sums)


def uniqueness_harness(problem: FlowProblem, h: float = 0.05,
                       rk45_tols=(1e-12, 1e-10)) -> dict:
    """Cross-integrator agreement on one problem: RK4 at h and h/2 vs RK45.

    All runs share the grid of multiples of h up to t_max; the report carries
    the sup-norm pairwise discrepancies over grid x vertices and the
    order-four refinement ratio sup|RK4(h) - ref| / sup|RK4(h/2) - ref|.
    """
    grid = np.arange(0.0, problem.t_max + 1e-12, h)

    def run(cfg):
        p = FlowProblem(
            truncation=problem.truncation, metric0=problem.metric0,
            target=problem.target, t_max=problem.t_max,
            tolerance=problem.tolerance, stepper=cfg,
            enforce_barrier=problem.enforce_barrier,
        )
        return solve_finite(p, sample_times=grid, stop_at_tolerance=False)

    base = problem.stepper
    runs = {
        "rk4_h": run(StepperConfig(kind="rk4", fixed_step=h)),
        "rk4_h2": run(StepperConfig(kind="rk4", fixed_step=h / 2)),
        "rk45": run(StepperConfig(
            kind="rk45", atol=rk45_tols[0], rtol=rk45_tols[1],
            h0=base.h0, max_step=base.max_step,
        )),
    }

    def sup_diff(a: Trajectory, b: Trajectory) -> float:
        worst = 0.0
        for t in grid:
            sa, sb = a.state_at(t), b.state_at(t)
            if sa is None or sb is None:
                continue
            worst = max(worst, float(np.abs(sa.u - sb.u).max()))
        return worst

    d_h = sup_diff(runs["rk4_h"], runs["rk45"])
    d_h2 = sup_diff(runs["rk4_h2"], runs["rk45"])
    return {
        "h": h,
        "sup_rk4h_vs_rk45": d_h,
        "sup_rk4h2_vs_rk45": d_h2,
        "sup_rk4h_vs_rk4h2": sup_diff(runs["rk4_h"], runs["rk4_h2"]),
        "refinement_ratio": d_h / d_h2 if d_h2 > 0 else np.inf,
        "grid": grid,
        "runs": runs,
    }


# ---------------------------------------------------------------------------
# exhaustion


@dataclass
class ExhaustionReport:
    radii: list[int]
    trajectories: list[Trajectory]
    discrepancies: list[tuple[int, int, float]]
    inner_vertices: list[int]
    grid: np.ndarray

    @property
    def discrepancy_values(self) -> list[float]:
        return [d for _, _, d in self.discrepancies]


def solve_exhaustion(tri, metric0: PackingMetric, target, radii, inner_radius,
                     *, t_max=50.0, tolerance=1e-6, stepper=None,
                     n_samples=41) -> ExhaustionReport:
    """Dirichlet runs on nested truncations with shared initial data.

    Consecutive radii are compared on the inner ball B_k(root) over the shared
    sample grid; the sup discrepancies are the finite stand-in for the
    compactly-convergent subsequence of the infinite flow.
    """
    radii = list(radii)
    if sorted(radii) != radii or len(set(radii)) != len(radii):
        raise FlowSetupError("radii must be strictly increasing")
    if inner_radius >= min(radii):
        raise FlowSetupError("inner radius must be < min(radii)")
    from .triangulation import truncate

    stepper = stepper or StepperConfig()
    grid = np.linspace(0.0, t_max, n_samples)

    def run_one(n):
        problem = FlowProblem(
            truncation=truncate(tri, n), metric0=metric0, target=target,
            t_max=t_max, tolerance=tolerance, stepper=stepper,
        )
        return solve_finite(problem, sample_times=grid)

    trajectories = parallel_map(run_one, radii)
    inner = sorted(ball(tri, tri.root, inner_radius))

    discrepancies = []
    for (na, ta), (nb, tb) in zip(
        zip(radii, trajectories), zip(radii[1:], trajectories[1:])
    ):
        horizon = min(ta.t_end, tb.t_end)
        worst = 0.0
        for t in grid[grid <= horizon + 1e-12]:
            sa, sb = ta.state_at(t), tb.state_at(t)
            if sa is None or sb is None:
                continue
            worst = max(worst, float(np.abs(sa.u[inner] - sb.u[inner]).max()))
        discrepancies.append((na, nb, worst))
    return ExhaustionReport(radii, trajectories, discrepancies, inner, grid)
