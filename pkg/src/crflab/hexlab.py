"""Difference calculus and the semilinear flow on the hexagonal lattice.

Fields live on a radius-N ball of the triangular lattice; reads outside the
ball are zero. The six first differences follow the counterclockwise neighbor
order, so consecutive stencil entries are the two edge-differences of one
incident face; that ordering is what makes the face-sum nonlinearity line up
with the curvature of the corresponding circle packing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .triangulation import HEX_STEPS, hex_distance

OMEGA0 = math.sqrt(3.0) / 3.0  # constant edge weight of the lattice Laplacian
GX0 = math.sqrt(3.0) / 6.0     # d/dx of the angle function at the origin
_PAD = 3                       # zero halo so all second differences are exact


class HexDomainError(ValueError):
    """Field values outside the region where the angle function is defined."""


_LATTICE_CACHE: dict[int, "_Lattice"] = {}


class _Lattice:
    """Index maps and neighbor tables for the ball of radius N + halo."""

    def __init__(self, N: int):
        self.N = N
        R = N + _PAD
        coords = [
            (m, n)
            for m in range(-R, R + 1)
            for n in range(-R, R + 1)
            if hex_distance(m, n) <= R
        ]
        coords.sort(key=lambda c: c)  # row-major over (m, n)
        self.coords = coords
        self.index = {c: i for i, c in enumerate(coords)}
        self.dist = np.array([hex_distance(m, n) for m, n in coords])
        self.size = len(coords)
        nbr = np.full((self.size, 6), self.size, dtype=np.int64)  # sentinel
        for i, (m, n) in enumerate(coords):
            for d, (dm, dn) in enumerate(HEX_STEPS):
                j = self.index.get((m + dm, n + dn))
                if j is not None:
                    nbr[i, d] = j
        self.nbr = nbr
        self.in_ball = self.dist <= N
        self.ball_ids = np.flatnonzero(self.in_ball)


def _lattice(N: int) -> _Lattice:
    if N not in _LATTICE_CACHE:
        _LATTICE_CACHE[N] = _Lattice(N)
    return _LATTICE_CACHE[N]


@dataclass
class HexField:
    """Real field on the radius-N ball with a boundary rule.

    boundary_rule "zero": everything in the ball evolves, exterior reads are
    zero (the finite stand-in for square-summable fields on the full lattice).
    boundary_rule "frozen": the ring at distance exactly N is pinned, only the
    open ball evolves (mirrors the Dirichlet flow runs).
    """

    N: int
    values: np.ndarray = field(default=None)
    boundary_rule: str = "zero"

    def __post_init__(self):
        if self.boundary_rule not in ("zero", "frozen"):
            raise ValueError(f"unknown boundary rule {self.boundary_rule!r}")
        lat = _lattice(self.N)
        if self.values is None:
            self.values = np.zeros(len(lat.ball_ids))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(lat.ball_ids),):
            raise ValueError(
                f"need {len(lat.ball_ids)} values for the radius-{self.N} ball"
            )

    @property
    def lattice(self) -> _Lattice:
        return _lattice(self.N)

    @property
    def ball_coords(self) -> list[tuple[int, int]]:
        lat = self.lattice
        return [lat.coords[i] for i in lat.ball_ids]

    def value_at(self, v) -> float:
        lat = self.lattice
        i = lat.index.get(tuple(v))
        if i is None or not lat.in_ball[i]:
            return 0.0
        return float(self._extended()[i])

    def _extended(self) -> np.ndarray:
        """Values on the padded lattice, zero outside the ball, plus sentinel."""
        lat = self.lattice
        ext = np.zeros(lat.size + 1)
        ext[lat.ball_ids] = self.values
        return ext

    def with_values(self, values) -> "HexField":
        return HexField(self.N, np.asarray(values, dtype=float), self.boundary_rule)

    @classmethod
    def random_l2(cls, N, l2_norm, seed=0, boundary_rule="zero") -> "HexField":
        """Seeded uniform field rescaled to the requested l2 norm."""
        lat = _lattice(N)
        rng = np.random.default_rng(seed)
        vals = rng.uniform(-1.0, 1.0, len(lat.ball_ids))
        if boundary_rule == "frozen":
            vals[lat.dist[lat.ball_ids] == N] = 0.0
        norm = np.linalg.norm(vals)
        if norm > 0:
            vals *= l2_norm / norm
        return cls(N, vals, boundary_rule)


def _grad_matrix(field: HexField) -> np.ndarray:
    """(padded_size, 6) first differences of the zero-extended field."""
    lat = field.lattice
    ext = field._extended()
    return ext[lat.nbr] - ext[: lat.size, None]


def difference(field: HexField, v, i: int) -> float:
    """i-th basic difference (1-based, counterclockwise) at lattice point v."""
    if not (1 <= i <= 6):
        raise ValueError("difference index must be in 1..6")
    return float(gradient(field, v)[i - 1])


def gradient(field: HexField, v) -> np.ndarray:
    """The six first differences at v, cyclic face order (z7 = z1)."""
    lat = field.lattice
    idx = lat.index.get(tuple(v))
    if idx is None:
        return np.zeros(6)  # deep exterior: field is identically zero there
    ext = field._extended()
    return ext[lat.nbr[idx]] - ext[idx]


def hessian(field: HexField, v) -> np.ndarray:
    """6x6 matrix of iterated differences D_i D_j u at v.

    Evaluated from the four-point form (u(v+ei+ej) + u(v)) - (u(v+ei) +
    u(v+ej)), which makes the shift commutation D_i D_j = D_j D_i hold to
    bitwise equality.
    """
    m, n = tuple(v)
    u0 = field.value_at((m, n))
    shifted = [field.value_at((m + dm, n + dn)) for dm, dn in HEX_STEPS]
    out = np.empty((6, 6))
    for i, (dm, dn) in enumerate(HEX_STEPS):
        for j, (em, en) in enumerate(HEX_STEPS):
            far = field.value_at((m + dm + em, n + dn + en))
            out[i, j] = (far + u0) - (shifted[i] + shifted[j])
    return out


def laplacian(field: HexField, v) -> float:
    """Constant-weight lattice Laplacian: omega0 times the stencil sum."""
    return OMEGA0 * float(gradient(field, v).sum())


# ---------------------------------------------------------------------------
# the angle nonlinearity


def angle_G(x, y):
    """Inner angle of the tangential lattice triangle with log-radius offsets.

    G(0, 0) = pi/3; symmetric in its arguments; defined for all real inputs
    (the arccos argument can only leave [-1, 1] by floating fuzz, clamped at
    1e-12 slack).
    """
    ex, ey = np.exp(x), np.exp(y)
    a, b = 1.0 + ex, 1.0 + ey
    g = (a * a + b * b - (ex + ey) ** 2) / (2.0 * a * b)
    if np.any(np.abs(g) > 1.0 + 1e-12):
        raise HexDomainError("angle argument left [-1, 1] beyond slack")
    return np.arccos(np.clip(g, -1.0, 1.0))


def angle_G_partials(x, y):
    """(G_x, G_y), analytic."""
    ex, ey = np.exp(x), np.exp(y)
    a, b = 1.0 + ex, 1.0 + ey
    g = (a * a + b * b - (ex + ey) ** 2) / (2.0 * a * b)
    root = np.sqrt(np.maximum(1.0 - g * g, 0.0))
    gx = 2.0 * ex * ey / (a * a * b * root)
    gy = 2.0 * ex * ey / (a * b * b * root)
    return gx, gy


def F_tilde(x, y):
    """Angle minus its linearization at the regular packing."""
    return angle_G(x, y) - math.pi / 3.0 - GX0 * (np.asarray(x) + np.asarray(y))


def F_tilde_gradient(x, y):
    gx, gy = angle_G_partials(x, y)
    return gx - GX0, gy - GX0


def stencil_F(z) -> float:
    """Face sum of the quadratic remainder over one six-stencil.

    z must be in the cyclic face order produced by `gradient`; F(0) = 0 and
    the gradient of F vanishes at 0.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (6,):
        raise ValueError("stencil has six entries")
    return float(np.sum(F_tilde(z, np.roll(z, -1))))


def stencil_F_gradient(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    gx_r, _ = F_tilde_gradient(z, np.roll(z, -1))
    _, gy_l = F_tilde_gradient(np.roll(z, 1), z)
    return gx_r + gy_l


def semilinear_rhs(field: HexField, v) -> float:
    """Laplacian plus face-sum nonlinearity; equals minus the curvature of
    the Euclidean tangential packing with radii e^u at interior points."""
    z = gradient(field, v)
    return laplacian(field, v) + stencil_F(z)


def _rhs_all(field: HexField, values) -> np.ndarray:
    """Vectorized RHS over the ball, honoring the boundary rule."""
    lat = field.lattice
    work = field.with_values(values)
    Z = _grad_matrix(work)[lat.ball_ids]
    if np.any(np.abs(values) > 20.0):
        worst = int(np.argmax(np.abs(values)))
        raise HexDomainError(
            f"field value {values[worst]:.3g} at {lat.coords[lat.ball_ids[worst]]} "
            "is outside the supported range"
        )
    lap = OMEGA0 * Z.sum(axis=1)
    fsum = np.sum(F_tilde(Z, np.roll(Z, -1, axis=1)), axis=1)
    out = lap + fsum
    if field.boundary_rule == "frozen":
        out[lat.dist[lat.ball_ids] == field.N] = 0.0
    return out


# ---------------------------------------------------------------------------
# energies


def energy(field: HexField) -> float:
    """Sum of squared differences over edges, per the boundary rule.

    zero rule: all edges meeting the ball (exterior endpoint contributes 0);
    frozen rule: only edges with both endpoints inside the ball.
    """
    lat = field.lattice
    ext = field._extended()
    total = 0.0
    if field.boundary_rule == "zero":
        # half the full stencil sum over the padded lattice = one term per edge
        diffs = ext[lat.nbr] - ext[: lat.size, None]
        return float(0.5 * np.sum(diffs * diffs))
    in_ball = np.zeros(lat.size + 1, dtype=bool)
    in_ball[: lat.size] = lat.in_ball
    for d in range(3):  # one orientation per undirected edge
        j = lat.nbr[lat.ball_ids, d]
        ok = in_ball[j]
        diff = ext[j[ok]] - ext[lat.ball_ids[ok]]
        total += float(np.sum(diff * diff))
    return total


def dirichlet_norms(field: HexField):
    """(|Du|_2, |Du|_4, |D^2 u|_2) with the boundary rule's index sets."""
    lat = field.lattice
    if field.boundary_rule == "zero":
        idx = np.arange(lat.size)
    else:
        idx = lat.ball_ids[lat.dist[lat.ball_ids] <= field.N - 1]
    Z = _grad_matrix(field)[idx]
    du2 = math.sqrt(0.5 * float(np.sum(Z * Z)))
    du4 = (0.5 * float(np.sum(Z**4))) ** 0.25
    # second differences: rows of the per-point 6x6 difference matrix
    if field.boundary_rule == "zero":
        idx2 = np.arange(lat.size)
    else:
        idx2 = lat.ball_ids[lat.dist[lat.ball_ids] <= field.N - 2]
    ext = field._extended()
    G = np.zeros((lat.size + 1, 6))
    G[: lat.size] = ext[lat.nbr] - ext[: lat.size, None]
    total2 = 0.0
    for j in range(6):
        col = G[:, j]
        dd = col[lat.nbr[idx2]] - col[idx2, None]
        total2 += float(np.sum(dd * dd))
    return du2, du4, math.sqrt(total2)


def norms(field: HexField):
    """(l2, linf) of the field itself."""
    return float(np.linalg.norm(field.values)), float(np.abs(field.values).max())


# ---------------------------------------------------------------------------
# evolution


@dataclass
class HexEvolution:
    t: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    energy: np.ndarray
    l2sq_rate: np.ndarray       # d/dt |u|_2^2 along the semi-discrete flow
    decay_residual: np.ndarray  # l2sq_rate + omega0 * energy
    final: HexField
    status: str
    stats: dict


def evolve(field0: HexField, t_max: float, *, atol=1e-10, rtol=1e-8,
           max_step=0.5, stop_energy=None, record_every=1) -> HexEvolution:
    """Integrate du/dt = Laplacian u + F(Du) with the field's boundary rule.

    Records (t, |u|_2, |u|_inf, E(u), d/dt |u|_2^2) at accepted steps and the
    decay residual d/dt |u|_2^2 + omega0 E(u), which stays non-positive while
    |u|_2 remains in the certified small-data regime.
    """
    lat = field0.lattice
    rows = {k: [] for k in ("t", "l2", "linf", "energy", "rate")}
    counter = {"n": 0}

    def f(t, y):
        try:
            return _rhs_all(field0, y)
        except HexDomainError:
            raise ode.DomainViolation() from None

    def record(t, y):
        fld = field0.with_values(y)
        rate = 2.0 * float(y @ _rhs_all(field0, y))
        rows["t"].append(t)
        rows["l2"].append(float(np.linalg.norm(y)))
        rows["linf"].append(float(np.abs(y).max()))
        rows["energy"].append(energy(fld))
        rows["rate"].append(rate)

    record(0.0, field0.values)

    def on_step(t, y, h):
        counter["n"] += 1
        if counter["n"] % record_every == 0:
            record(t, y)

    def stop(t, y):
        if stop_energy is None:
            return False
        return energy(field0.with_values(y)) < stop_energy

    res = ode.integrate_rk45(
        f, 0.0, field0.values, t_max,
        atol=atol, rtol=rtol, h0=1e-3, max_step=max_step,
        on_step=on_step, stop=stop,
    )
    if rows["t"][-1] < res.t:
        record(res.t, res.y)
    t = np.array(rows["t"])
    e = np.array(rows["energy"])
    rate = np.array(rows["rate"])
    return HexEvolution(
        t=t, l2=np.array(rows["l2"]), linf=np.array(rows["linf"]), energy=e,
        l2sq_rate=rate, decay_residual=rate + OMEGA0 * e,
        final=field0.with_values(res.y),
        status="energy target" if res.status == "stopped" else res.status,
        stats={"steps": res.stats.accepted, "rhs_evals": res.stats.rhs_evals},
    )
