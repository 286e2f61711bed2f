"""Background-geometry kernel for circle-packing metrics.

Conformal-factor conversions, edge lengths, inner angles (laws of cosines),
discrete Gaussian curvature, and the analytic angle/curvature derivative
matrices. Formulas branch on a two-case background geometry tag; hyperbolic
evaluations switch to log-domain forms past the overflow threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

COS_SLACK = 1e-12          # clamp window for law-of-cosines arguments
LOG_DOMAIN_CUTOFF = 350.0  # switch hyperbolic lengths to log-domain past this
_LN2 = math.log(2.0)


class BackgroundGeometry(Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"


EUCLIDEAN = BackgroundGeometry.EUCLIDEAN
HYPERBOLIC = BackgroundGeometry.HYPERBOLIC


class MetricDomainError(ValueError):
    """Inputs outside the metric's domain (radii, factors, phi range)."""


class DegenerateTriangleError(ValueError):
    """Law-of-cosines argument left [-1, 1] beyond the clamp slack."""


# ---------------------------------------------------------------------------
# conformal factors


def factor_from_radius(geometry, r):
    """u = ln r (Euclidean) or ln tanh(r/2) (hyperbolic), elementwise."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise MetricDomainError("radii must be positive")
    if geometry is EUCLIDEAN:
        return np.log(r)
    # ln tanh(r/2) = log1p(-e^-r) - log1p(e^-r), stable for r large and small
    e = np.exp(-r)
    return np.log1p(-e) - np.log1p(e)


def radius_from_factor(geometry, u):
    """Inverse of factor_from_radius; hyperbolic factors must be negative."""
    u = np.asarray(u, dtype=float)
    if geometry is EUCLIDEAN:
        return np.exp(u)
    if np.any(u >= 0):
        raise MetricDomainError("hyperbolic conformal factors must be < 0")
    # r = 2 artanh(e^u); 1 - e^u via expm1 keeps factors near zero exact
    return np.log1p(np.exp(u)) - np.log(-np.expm1(u))


# ---------------------------------------------------------------------------
# edge lengths


def _check_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any((phi < -1e-15) | (phi > math.pi / 2 + 1e-12)):
        raise MetricDomainError("intersection angles must lie in [0, pi/2]")
    return phi


def _logsinh(x):
    # log sinh x for x > 0, stable at both ends
    x = np.asarray(x, dtype=float)
    return x - _LN2 + np.log(-np.expm1(-2.0 * x))


def _logcosh(x):
    x = np.asarray(x, dtype=float)
    return x - _LN2 + np.log1p(np.exp(-2.0 * x))


def _edge_length_euclidean(r_i, r_j, cphi):
    return np.sqrt(r_i * r_i + r_j * r_j + 2.0 * cphi * r_i * r_j)


def _edge_length_hyperbolic(r_i, r_j, cphi):
    scalar = np.isscalar(r_i) or (np.ndim(r_i) == 0 and np.ndim(r_j) == 0)
    r_i = np.atleast_1d(np.asarray(r_i, dtype=float))
    r_j = np.atleast_1d(np.asarray(r_j, dtype=float))
    cphi = np.atleast_1d(np.asarray(cphi, dtype=float))
    s = r_i + r_j
    out = np.empty(np.broadcast(r_i, r_j, cphi).shape)
    s = np.broadcast_to(s, out.shape)
    small = s <= LOG_DOMAIN_CUTOFF
    if np.any(small):
        ri, rj, c = (np.broadcast_to(a, out.shape)[small] for a in (r_i, r_j, cphi))
        # z - 1 built from non-negative terms; arcosh(1 + t) = log1p(t + sqrt(t(t+2)))
        zm1 = (
            2.0 * np.sinh(ri / 2) ** 2 * np.cosh(rj)
            + 2.0 * np.sinh(rj / 2) ** 2
            + c * np.sinh(ri) * np.sinh(rj)
        )
        out[small] = np.log1p(zm1 + np.sqrt(zm1 * (zm1 + 2.0)))
    big = ~small
    if np.any(big):
        ri, rj, c = (np.broadcast_to(a, out.shape)[big] for a in (r_i, r_j, cphi))
        sb = ri + rj
        lnz = sb - 2.0 * _LN2 + np.log(
            (1.0 + c) * (1.0 + np.exp(-2.0 * sb))
            + (1.0 - c) * (np.exp(-2.0 * ri) + np.exp(-2.0 * rj))
        )
        out[big] = lnz + _LN2  # arcosh(z) = ln 2z up to O(z^-2), negligible here
    return float(out[0]) if scalar else out


def edge_length(geometry, r_i, r_j, phi):
    """Length of the edge between circles of radii r_i, r_j meeting at angle phi."""
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j, dtype=float)
    if np.any(r_i <= 0) or np.any(r_j <= 0):
        raise MetricDomainError("radii must be positive")
    cphi = np.cos(_check_phi(phi))
    if geometry is EUCLIDEAN:
        out = _edge_length_euclidean(r_i, r_j, cphi)
        return out if out.shape else float(out)
    return _edge_length_hyperbolic(r_i, r_j, cphi)


# ---------------------------------------------------------------------------
# triangle angles

# index juggling: slot a of a face has opposite edge (b, c) with
# b, c = (a+1) % 3, (a+2) % 3; lengths/phis are stored per opposite slot.
_B = np.array([1, 2, 0])
_C = np.array([2, 0, 1])


@dataclass
class FaceAngles:
    """Inner angles and edge lengths of one face.

    angles[a] sits at vertex slot a; lengths[a] and phi[a] belong to the edge
    opposite slot a.
    """

    angles: np.ndarray
    lengths: np.ndarray
    face: tuple[int, int, int] | None = None


def _face_lengths(geometry, r3, phi3):
    """(..., 3) lengths; slot a holds the edge opposite vertex slot a."""
    r3 = np.asarray(r3, dtype=float)
    phi3 = np.asarray(phi3, dtype=float)
    cphi = np.cos(phi3)
    if geometry is EUCLIDEAN:
        return _edge_length_euclidean(r3[..., _B], r3[..., _C], cphi)
    return np.stack(
        [
            _edge_length_hyperbolic(r3[..., b], r3[..., c], cphi[..., a])
            for a, (b, c) in enumerate(zip(_B, _C))
        ],
        axis=-1,
    )


def _cos_angles(geometry, l3):
    """(..., 3) cosines of the inner angles from the laws of cosines."""
    if geometry is EUCLIDEAN:
        opp, adj1, adj2 = l3, l3[..., _B], l3[..., _C]
        return (adj1**2 + adj2**2 - opp**2) / (2.0 * adj1 * adj2)
    e = np.exp(-2.0 * l3)
    one_m = -np.expm1(-2.0 * l3)  # 1 - e^{-2l}
    opp_e, adj1_e, adj2_e = e, e[..., _B], e[..., _C]
    adj1_m, adj2_m = one_m[..., _B], one_m[..., _C]
    expo = np.exp(l3 - l3[..., _B] - l3[..., _C])  # e^{opp - adj1 - adj2} <= 1
    num = (1.0 + adj1_e) * (1.0 + adj2_e) - 2.0 * expo * (1.0 + opp_e)
    return num / (adj1_m * adj2_m)


def _angles_from_lengths(geometry, l3):
    cosv = _cos_angles(geometry, l3)
    if np.any(np.abs(cosv) > 1.0 + COS_SLACK):
        raise DegenerateTriangleError(
            f"cosine argument outside [-1, 1] beyond slack: {cosv}"
        )
    return np.arccos(np.clip(cosv, -1.0, 1.0)), cosv


def triangle_angles(geometry, r, phi) -> FaceAngles:
    """Angles of the face with vertex radii r = (r0, r1, r2).

    phi[a] is the intersection angle on the edge opposite slot a. Degenerate
    cosine arguments (beyond the 1e-12 clamp slack) raise rather than clamp:
    they indicate invalid metric data.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise MetricDomainError("need exactly three radii")
    if np.any(r <= 0):
        raise MetricDomainError("radii must be positive")
    phi = _check_phi(phi)
    lengths = _face_lengths(geometry, r, phi)
    angles, _ = _angles_from_lengths(geometry, lengths)
    return FaceAngles(angles=angles, lengths=lengths)


# ---------------------------------------------------------------------------
# derivatives


def _angle_length_jacobian(geometry, l3, cosv, sinv):
    """T[..., a, e] = d theta_a / d l_e.

    Euclidean rows are l_a/(l_b l_c sin) * (1, -cos theta_c, -cos theta_b);
    hyperbolic rows are the same with sinh-lengths.
    """
    if geometry is EUCLIDEAN:
        ratio = l3 / (l3[..., _B] * l3[..., _C])
    else:
        logs = _logsinh(l3)
        ratio = np.exp(logs - logs[..., _B] - logs[..., _C])
    base = ratio / sinv
    T = np.zeros(l3.shape + (3,))
    for a in range(3):
        b, c = _B[a], _C[a]
        T[..., a, a] = base[..., a]
        T[..., a, b] = -base[..., a] * cosv[..., c]
        T[..., a, c] = -base[..., a] * cosv[..., b]
    return T


def _length_radius_jacobian(geometry, r3, phi3, l3):
    """L[..., e, d] = d l_e / d r_d (zero when vertex d lies on edge e's slot)."""
    cphi = np.cos(np.asarray(phi3, dtype=float))
    L = np.zeros(l3.shape + (3,))
    if geometry is EUCLIDEAN:
        for a in range(3):
            b, c = _B[a], _C[a]
            L[..., a, b] = (r3[..., b] + cphi[..., a] * r3[..., c]) / l3[..., a]
            L[..., a, c] = (r3[..., c] + cphi[..., a] * r3[..., b]) / l3[..., a]
    else:
        logs_r = _logsinh(r3)
        logc_r = _logcosh(r3)
        logs_l = _logsinh(l3)
        for a in range(3):
            b, c = _B[a], _C[a]
            L[..., a, b] = np.exp(logs_r[..., b] + logc_r[..., c] - logs_l[..., a]) + (
                cphi[..., a]
            ) * np.exp(logc_r[..., b] + logs_r[..., c] - logs_l[..., a])
            L[..., a, c] = np.exp(logs_r[..., c] + logc_r[..., b] - logs_l[..., a]) + (
                cphi[..., a]
            ) * np.exp(logc_r[..., c] + logs_r[..., b] - logs_l[..., a])
    return L


def angle_jacobians(geometry, r_faces, phi_faces):
    """Batched d theta_a / d u_d over faces: (..., 3, 3) arrays.

    Chain rule through edge lengths; with the packing constraints
    (phi in [0, pi/2]) the off-diagonal entries are positive, the diagonal
    negative, the matrix symmetric, and each row sums to zero (Euclidean)
    or to a negative value (hyperbolic).
    """
    r3 = np.asarray(r_faces, dtype=float)
    phi3 = np.asarray(phi_faces, dtype=float)
    l3 = _face_lengths(geometry, r3, phi3)
    _, cosv = _angles_from_lengths(geometry, l3)
    cosv = np.clip(cosv, -1.0, 1.0)
    sinv = np.sqrt(np.maximum(1.0 - cosv * cosv, 0.0))
    if np.any(sinv == 0.0):
        raise DegenerateTriangleError("flat angle: Jacobian undefined")
    T = _angle_length_jacobian(geometry, l3, cosv, sinv)
    L = _length_radius_jacobian(geometry, r3, phi3, l3)
    drdu = r3 if geometry is EUCLIDEAN else np.sinh(r3)
    return (T @ L) * drdu[..., None, :]


def angle_jacobian(geometry, r, phi):
    """3x3 matrix of d theta_a / d u_d for a single face."""
    r = np.asarray(r, dtype=float)
    phi = _check_phi(phi)
    if np.any(r <= 0):
        raise MetricDomainError("radii must be positive")
    return angle_jacobians(geometry, r[None, :], phi[None, :])[0]


def angle_derivative_ratio(geometry, r, phi, power_center=False):
    """max over a != d of (d theta_a / d u_d) / theta_a for one face.

    With power_center=True (hyperbolic only) also returns the per-edge
    quantity tanh(dist(O, edge)) / sinh(l_edge), where O is the common point
    of the three radical lines; it coincides with the mixed derivative.
    """
    fa = triangle_angles(geometry, r, phi)
    if np.any(fa.angles <= 0.0):
        raise DegenerateTriangleError("zero angle: ratio undefined")
    J = angle_jacobian(geometry, r, phi)
    off = ~np.eye(3, dtype=bool)
    ratio = float(np.max(J[off] / np.repeat(fa.angles, 2)))
    if not power_center:
        return ratio
    if geometry is not HYPERBOLIC:
        raise MetricDomainError("power-center report is hyperbolic-only")
    return ratio, _power_center_edge_ratios(np.asarray(r, float), fa)


def _minkowski_cross(p, q):
    c = np.cross(p, q)
    c[2] = -c[2]
    return c


def _power_center_edge_ratios(r, fa):
    """tanh(l_OD)/sinh(l_e) per edge slot, via the hyperboloid model.

    Vertices are placed on the hyperboloid; the locus of equal circle power
    w.r.t. two packing circles is a plane through the origin, so the power
    center is the (timelike) Minkowski cross of two such plane normals.
    """
    l = fa.lengths
    th0 = fa.angles[0]
    P = np.zeros((3, 3))
    P[0] = (0.0, 0.0, 1.0)
    P[1] = (math.sinh(l[2]), 0.0, math.cosh(l[2]))
    P[2] = (
        math.sinh(l[1]) * math.cos(th0),
        math.sinh(l[1]) * math.sin(th0),
        math.cosh(l[1]),
    )
    W = [P[i] / math.cosh(r[i]) for i in range(3)]
    O = _minkowski_cross(W[0] - W[1], W[0] - W[2])
    s = O[0] ** 2 + O[1] ** 2 - O[2] ** 2
    if s >= 0:
        raise DegenerateTriangleError("power center not inside the hyperbolic plane")
    O = O / math.sqrt(-s)
    if O[2] < 0:
        O = -O
    out = np.zeros(3)
    for a in range(3):
        b, c = int(_B[a]), int(_C[a])
        N = _minkowski_cross(P[b], P[c])
        nn = N[0] ** 2 + N[1] ** 2 - N[2] ** 2
        N = N / math.sqrt(nn)
        sinh_d = abs(O[0] * N[0] + O[1] * N[1] - O[2] * N[2])
        dist = math.asinh(sinh_d)
        out[a] = math.tanh(dist) / math.sinh(l[a])
    return out


# ---------------------------------------------------------------------------
# packing metrics on complexes


@dataclass
class PackingMetric:
    """Per-vertex conformal factor u plus per-edge intersection angles.

    u is indexed by vertex id over the carrying triangulation; phi maps sorted
    edge pairs to [0, pi/2] and defaults to 0 (tangency) where absent.
    """

    geometry: BackgroundGeometry
    u: np.ndarray
    phi: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if not np.all(np.isfinite(self.u)):
            raise MetricDomainError("conformal factors must be finite")
        if self.geometry is HYPERBOLIC and np.any(self.u >= 0):
            raise MetricDomainError("hyperbolic conformal factors must be < 0")
        for e, val in self.phi.items():
            if not (0.0 <= val <= math.pi / 2 + 1e-12):
                raise MetricDomainError(f"phi out of [0, pi/2] on edge {e}")

    @property
    def radii(self) -> np.ndarray:
        return radius_from_factor(self.geometry, self.u)

    def with_u(self, u) -> "PackingMetric":
        return PackingMetric(self.geometry, np.asarray(u, dtype=float), self.phi)


def face_phi(faces_arr: np.ndarray, phi: dict) -> np.ndarray:
    """(F, 3) intersection angles; slot a carries the edge opposite slot a."""
    out = np.zeros(faces_arr.shape, dtype=float)
    if phi:
        for fi, (a, b, c) in enumerate(faces_arr):
            out[fi, 0] = phi.get((min(b, c), max(b, c)), 0.0)
            out[fi, 1] = phi.get((min(a, c), max(a, c)), 0.0)
            out[fi, 2] = phi.get((min(a, b), max(a, b)), 0.0)
    return out


def face_angles_all(geometry, faces_arr, phi_faces, u):
    """(F, 3) inner angles for every face under conformal factors u."""
    r = radius_from_factor(geometry, u)
    r_faces = r[faces_arr]
    l3 = _face_lengths(geometry, r_faces, phi_faces)
    angles, _ = _angles_from_lengths(geometry, l3)
    return angles


def angle_sums(geometry, faces_arr, phi_faces, u, n_vertices):
    """Total inner angle at every vertex id (zero where no face touches)."""
    angles = face_angles_all(geometry, faces_arr, phi_faces, u)
    sums = np.zeros(n_vertices)
    np.add.at(sums, faces_arr.ravel(), angles.ravel())
    return sums


def curvature(complex_like, metric: PackingMetric, v: int) -> float:
    """Discrete Gaussian curvature 2*pi - (angle sum) at an interior vertex."""
    tri, interior_ok = _resolve(complex_like, v)
    if not interior_ok:
        raise MetricDomainError(
            f"vertex {v} has no complete angle star here; curvature undefined"
        )
    total = 0.0
    for fi in _faces_at(complex_like, tri, v):
        face = tri.faces[fi]
        r = metric.radii[list(face)]
        phis = face_phi(np.array([face]), metric.phi)[0]
        fa = triangle_angles(metric.geometry, r, phis)
        total += float(fa.angles[face.index(v)])
    return 2.0 * math.pi - total


def _resolve(complex_like, v):
    if hasattr(complex_like, "parent"):  # Truncation
        tri = complex_like.parent
        return tri, bool(np.isin(v, complex_like.interior))
    tri = complex_like
    return tri, bool(tri.star_complete[v])


def _faces_at(complex_like, tri, v):
    if hasattr(complex_like, "parent"):
        keep = set(complex_like.face_ids.tolist())
        return [fi for fi in tri.vertex_faces[v] if fi in keep]
    return tri.vertex_faces[v]


def curvature_jacobian_row(complex_like, metric: PackingMetric, v: int):
    """Sparse row of dK_v/du_w over w in {v} union neighbors, plus defect.

    Returns (row, defect) where defect = sum of the whole row; it vanishes in
    Euclidean background and is strictly positive in hyperbolic background.
    """
    tri, interior_ok = _resolve(complex_like, v)
    if not interior_ok:
        raise MetricDomainError(f"vertex {v} is not interior")
    row: dict[int, float] = {}
    for fi in _faces_at(complex_like, tri, v):
        face = tri.faces[fi]
        r = metric.radii[list(face)]
        phis = face_phi(np.array([face]), metric.phi)[0]
        J = angle_jacobian(metric.geometry, r, phis)
        a = face.index(v)
        for d, w in enumerate(face):
            row[w] = row.get(w, 0.0) - J[a, d]
    defect = sum(row.values())
    return row, defect
