"""Realize packing metrics as circle configurations and render them to SVG.

A breadth-first walk over the face adjacency graph places one vertex per new
face from the two already-placed endpoints and the metric's edge lengths;
revisits measure the holonomy residual, which vanishes exactly when the
metric is flat. Euclidean layouts live in the plane, hyperbolic layouts in
the unit disk with placements done in a Mobius-normalized local frame.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import EUCLIDEAN, HYPERBOLIC, PackingMetric, edge_length, face_phi
from .triangulation import Truncation


class LayoutError(ValueError):
    """Placement failed (inconsistent edge lengths beyond slack)."""


@dataclass
class Embedding:
    geometry: object
    centers: dict       # vertex -> complex (plane or open unit disk)
    radii: dict         # vertex -> rendering radius in the model
    hyper_radii: dict   # hyperbolic radii (empty for Euclidean layouts)
    holonomy_residual: float
    edges: list

    def __len__(self):
        return len(self.centers)


def _hyp_dist(z, w):
    q = abs(z - w) / abs(1.0 - np.conjugate(z) * w)
    q = min(q, 1.0 - 1e-17)
    return 2.0 * math.atanh(q)


def _mobius_to_origin(a):
    """Disk automorphism sending a to 0 and its inverse."""
    ac = np.conjugate(a)

    def fwd(z):
        return (z - a) / (1.0 - ac * z)

    def inv(w):
        return (w + a) / (1.0 + ac * w)

    return fwd, inv


def _hyp_angle(adj1, adj2, opp):
    num = math.cosh(adj1) * math.cosh(adj2) - math.cosh(opp)
    den = math.sinh(adj1) * math.sinh(adj2)
    c = num / den
    if abs(c) > 1.0 + 1e-9:
        raise LayoutError(f"impossible hyperbolic triangle: cos={c}")
    return math.acos(max(-1.0, min(1.0, c)))


def _place_euclidean(pa, pb, d_a, d_b):
    """Third corner at distance d_a from pa, d_b from pb, left of pa -> pb."""
    chord = pb - pa
    L = abs(chord)
    t = (d_a * d_a - d_b * d_b + L * L) / (2.0 * L)
    h2 = d_a * d_a - t * t
    if h2 < -1e-9 * max(d_a * d_a, 1.0):
        raise LayoutError(f"circles at distance {L} with radii {d_a}, {d_b} miss")
    h = math.sqrt(max(h2, 0.0))
    dirv = chord / L
    return pa + dirv * complex(t, h)


def _place_hyperbolic(pa, pb, d_a, d_b):
    fwd, inv = _mobius_to_origin(pa)
    wb = fwd(pb)
    base = math.atan2(wb.imag, wb.real)
    l_ab = _hyp_dist(pa, pb)
    theta = _hyp_angle(d_a, l_ab, d_b)
    w = math.tanh(d_a / 2.0) * complex(
        math.cos(base + theta), math.sin(base + theta)
    )
    return inv(w)


def _orient_faces(faces):
    """Consistent orientations by propagation over shared edges."""
    edge_faces: dict[tuple, list[int]] = {}
    for fi, (a, b, c) in enumerate(faces):
        for e in ((a, b), (a, c), (b, c)):
            edge_faces.setdefault(e, []).append(fi)
    oriented: dict[int, tuple] = {0: tuple(faces[0])}
    queue = deque([0])
    while queue:
        fi = queue.popleft()
        tri = oriented[fi]
        directed = {(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])}
        a, b, c = faces[fi]
        for u, w in ((a, b), (a, c), (b, c)):
            for gj in edge_faces[(u, w)]:
                if gj == fi or gj in oriented:
                    continue
                third = next(x for x in faces[gj] if x not in (u, w))
                # shared edge must be traversed oppositely by the neighbor
                if (u, w) in directed:
                    oriented[gj] = (w, u, third)
                else:
                    oriented[gj] = (u, w, third)
                queue.append(gj)
    if len(oriented) != len(faces):
        raise LayoutError("face adjacency graph is disconnected")
    return oriented, edge_faces


def embed(truncation: Truncation, metric: PackingMetric) -> Embedding:
    """Place every vertex of the truncation by walking the face graph.

    The first face containing the root seeds the layout; each later face
    contributes one new vertex via a two-length intersection on the left of
    its oriented base edge. Vertices reached along a second face path are
    compared against their first placement; the max model-distance mismatch
    is the holonomy residual.
    """
    faces = truncation.faces
    if not faces:
        raise LayoutError("empty truncation: nothing to embed")
    geometry = metric.geometry
    radii = metric.radii
    root = truncation.parent.root
    root_faces = [i for i, f in enumerate(faces) if root in f]
    start = root_faces[0] if root_faces else 0
    faces = [faces[start]] + faces[:start] + faces[start + 1 :]

    oriented, edge_faces = _orient_faces(faces)
    phis = face_phi(np.asarray(faces, dtype=np.int64), metric.phi)

    def elen(i, j, fi):
        f = faces[fi]
        slot = [k for k in range(3) if f[k] not in (i, j)][0]
        return float(edge_length(geometry, radii[i], radii[j], phis[fi][slot]))

    pos: dict[int, complex] = {}
    a0, b0, c0 = oriented[0]
    l_ab = elen(a0, b0, 0)
    pos[a0] = 0.0 + 0.0j
    if geometry is EUCLIDEAN:
        pos[b0] = complex(l_ab, 0.0)
    else:
        pos[b0] = complex(math.tanh(l_ab / 2.0), 0.0)
    dist = (lambda z, w: abs(z - w)) if geometry is EUCLIDEAN else _hyp_dist
    place = _place_euclidean if geometry is EUCLIDEAN else _place_hyperbolic

    residual = 0.0
    visited = {0}
    queue = deque([0])
    while queue:
        fi = queue.popleft()
        fa, fb, fc = oriented[fi]
        # rotate so the first two corners are placed
        corners = (fa, fb, fc)
        for _ in range(3):
            if corners[0] in pos and corners[1] in pos:
                break
            corners = (corners[1], corners[2], corners[0])
        u, w, x = corners
        if u not in pos or w not in pos:
            raise LayoutError(f"face {faces[fi]} reached before its base edge")
        d_u = elen(u, x, fi)
        d_w = elen(w, x, fi)
        cand = place(pos[u], pos[w], d_u, d_w)
        if x in pos:
            residual = max(residual, dist(pos[x], cand))
        else:
            pos[x] = cand
        a, b, c = faces[fi]
        for e in ((a, b), (a, c), (b, c)):
            for gj in edge_faces[e]:
                if gj not in visited:
                    visited.add(gj)
                    queue.append(gj)

    centers = dict(sorted(pos.items()))
    if geometry is EUCLIDEAN:
        out_radii = {v: float(radii[v]) for v in centers}
        hyper = {}
    else:
        out_radii = {}
        hyper = {v: float(radii[v]) for v in centers}
        for v, c in centers.items():
            t = math.tanh(hyper[v] / 2.0)
            rho2 = abs(c) ** 2
            out_radii[v] = t * (1.0 - rho2) / (1.0 - t * t * rho2)
    return Embedding(
        geometry=geometry,
        centers=centers,
        radii=out_radii,
        hyper_radii=hyper,
        holonomy_residual=residual,
        edges=truncation.edge_list,
    )


def _euclidean_center_of_hyperbolic_circle(c, r):
    t = math.tanh(r / 2.0)
    rho2 = abs(c) ** 2
    scale = (1.0 - t * t) / (1.0 - t * t * rho2)
    return c * scale


def emit_svg(embedding: Embedding, path, show_edges=True, show_circles=True,
             scale=100.0) -> None:
    """Write an SVG 1.1 document of the embedding.

    One circle per vertex (optional), one line per edge (optional); the
    hyperbolic mode also draws the unit-circle boundary. The viewBox fits the
    drawing with a 5% margin. Y is flipped so the layout displays with the
    usual mathematical orientation.
    """
    if len(embedding) == 0:
        raise LayoutError("empty embedding")
    hyp = embedding.geometry is HYPERBOLIC

    pts, rads = [], []
    for v, c in embedding.centers.items():
        if hyp:
            ce = _euclidean_center_of_hyperbolic_circle(c, embedding.hyper_radii[v])
        else:
            ce = c
        pts.append((v, ce))
        rads.append(embedding.radii[v])

    xs = [p.real * scale for _, p in pts]
    ys = [-p.imag * scale for _, p in pts]
    rr = [r * scale for r in rads]
    if hyp:
        lo_x = lo_y = -scale
        hi_x = hi_y = scale
    else:
        lo_x = min(x - r for x, r in zip(xs, rr))
        hi_x = max(x + r for x, r in zip(xs, rr))
        lo_y = min(y - r for y, r in zip(ys, rr))
        hi_y = max(y + r for y, r in zip(ys, rr))
    margin = 0.05 * max(hi_x - lo_x, hi_y - lo_y, 1e-9)
    view = (lo_x - margin, lo_y - margin,
            (hi_x - lo_x) + 2 * margin, (hi_y - lo_y) + 2 * margin)

    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        viewBox=" ".join(f"{v:.6f}" for v in view),
    )
    stroke_w = f"{0.004 * view[2]:.6f}"
    if show_edges:
        grp = ET.SubElement(svg, "g", stroke="#3366aa", fill="none")
        grp.set("stroke-width", stroke_w)
        for (i, j) in embedding.edges:
            zi, zj = embedding.centers[i], embedding.centers[j]
            ET.SubElement(
                grp, "line",
                x1=f"{zi.real * scale:.6f}", y1=f"{-zi.imag * scale:.6f}",
                x2=f"{zj.real * scale:.6f}", y2=f"{-zj.imag * scale:.6f}",
            )
    if show_circles:
        grp = ET.SubElement(svg, "g", stroke="#222222", fill="none")
        grp.set("stroke-width", stroke_w)
        for (v, ce), r in zip(pts, rr):
            ET.SubElement(
                grp, "circle",
                cx=f"{ce.real * scale:.6f}", cy=f"{-ce.imag * scale:.6f}",
                r=f"{r:.6f}",
            )
    if hyp:
        boundary = ET.SubElement(
            svg, "circle", cx="0", cy="0", r=f"{scale:.6f}",
            stroke="#000000", fill="none",
        )
        boundary.set("stroke-width", stroke_w)
        boundary.set("stroke-dasharray", "4 3")
    ET.ElementTree(svg).write(path, xml_declaration=True, encoding="unicode")
