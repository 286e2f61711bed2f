"""Disk triangulations: built-in lattice families, truncations, and a text format.

Vertices are contiguous integer ids. Faces are unordered triples; edges are
implied by faces. The two built-in infinite families are realized lazily up to
a requested combinatorial radius around a distinguished root vertex.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# Neighbor offsets of the triangular lattice generated by 1 and e^{2*pi*i/3},
# listed in counterclockwise angular order (0, 60, ..., 300 degrees).
HEX_STEPS = ((1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1))


class TriangulationError(ValueError):
    """Malformed combinatorial data (bad faces, dangling ids, bad file)."""


def hex_distance(m, n):
    """Graph distance from the origin on the triangular lattice."""
    if (m >= 0) == (n >= 0):
        return max(abs(m), abs(n))
    return abs(m) + abs(n)


@dataclass
class Triangulation:
    """Finite realization of a (possibly infinite) disk triangulation.

    `star_complete[v]` is True when the faces around v close up into a cycle;
    only such vertices can ever be interior in a truncation. For lazily
    generated families the outermost generated ring is star-incomplete.
    """

    n_vertices: int
    faces: list[tuple[int, int, int]]
    adjacency: dict[int, list[int]]
    root: int = 0
    labels: dict[int, tuple[int, int]] | None = None
    phi: dict[tuple[int, int], float] = field(default_factory=dict)

    # derived, filled by from_faces
    edges: set[tuple[int, int]] = field(default_factory=set)
    vertex_faces: dict[int, list[int]] = field(default_factory=dict)
    star_complete: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    depth: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @property
    def available_radius(self) -> int:
        return int(self.depth.max()) if self.n_vertices else 0

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @classmethod
    def from_faces(cls, faces, root=0, n_vertices=None, labels=None, phi=None):
        norm_faces = []
        for f in faces:
            f = tuple(sorted(int(v) for v in f))
            if len(f) != 3 or len(set(f)) != 3:
                raise TriangulationError(f"face must have 3 distinct vertices, got {f}")
            if f[0] < 0:
                raise TriangulationError(f"negative vertex id in face {f}")
            norm_faces.append(f)
        norm_faces = sorted(set(norm_faces))
        if not norm_faces:
            raise TriangulationError("triangulation has no faces")

        max_id = max(v for f in norm_faces for v in f)
        if n_vertices is None:
            n_vertices = max_id + 1
        elif max_id >= n_vertices:
            raise TriangulationError(
                f"face references vertex {max_id} but only {n_vertices} declared"
            )
        if not (0 <= root < n_vertices):
            raise TriangulationError(f"root {root} out of range")

        edge_face_count: dict[tuple[int, int], int] = {}
        adjacency: dict[int, set[int]] = {v: set() for v in range(n_vertices)}
        vertex_faces: dict[int, list[int]] = {v: [] for v in range(n_vertices)}
        for idx, (a, b, c) in enumerate(norm_faces):
            for u, w in ((a, b), (a, c), (b, c)):
                edge_face_count[(u, w)] = edge_face_count.get((u, w), 0) + 1
                adjacency[u].add(w)
                adjacency[w].add(u)
            for v in (a, b, c):
                vertex_faces[v].append(idx)
        for e, k in edge_face_count.items():
            if k > 2:
                raise TriangulationError(f"edge {e} belongs to {k} > 2 faces")

        tri = cls(
            n_vertices=n_vertices,
            faces=norm_faces,
            adjacency={v: sorted(s) for v, s in adjacency.items()},
            root=root,
            labels=labels,
            phi=dict(phi) if phi else {},
        )
        tri.edges = set(edge_face_count)
        tri.vertex_faces = vertex_faces
        tri.star_complete = np.array(
            [_link_is_cycle(v, tri) for v in range(n_vertices)], dtype=bool
        )
        tri.depth = _bfs_depth(tri, root)
        if np.any(tri.depth < 0):
            raise TriangulationError("triangulation is not connected from the root")
        tri._validate_phi()
        return tri

    def _validate_phi(self):
        for (i, j), val in self.phi.items():
            if (min(i, j), max(i, j)) not in self.edges:
                raise TriangulationError(f"phi given for non-edge ({i}, {j})")
            if not (0.0 <= val <= math.pi / 2 + 1e-12):
                raise TriangulationError(f"phi out of [0, pi/2] on edge ({i}, {j}): {val}")


def _link_is_cycle(v, tri):
    """True iff the faces at v form one closed fan (complete angle star)."""
    nbrs = tri.adjacency[v]
    if not nbrs:
        return False
    link_deg = {w: 0 for w in nbrs}
    for fi in tri.vertex_faces[v]:
        a, b, c = tri.faces[fi]
        w1, w2 = [x for x in (a, b, c) if x != v]
        link_deg[w1] += 1
        link_deg[w2] += 1
    if any(d != 2 for d in link_deg.values()):
        return False
    # 2-regular link on deg(v) vertices is a cycle iff it has deg(v) edges
    # and is connected; #link edges == #faces at v.
    return len(tri.vertex_faces[v]) == len(nbrs)


def _bfs_depth(tri, source):
    depth = np.full(tri.n_vertices, -1, dtype=np.int64)
    depth[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for w in tri.adjacency[u]:
            if depth[w] < 0:
                depth[w] = depth[u] + 1
                q.append(w)
    return depth


def ball(tri: Triangulation, v: int, n: int) -> set[int]:
    """Vertices at graph distance <= n from v (breadth-first)."""
    if not (0 <= v < tri.n_vertices):
        raise TriangulationError(f"unknown vertex {v}")
    if n < 0:
        raise TriangulationError("ball radius must be >= 0")
    seen = {v}
    frontier = [v]
    for _ in range(n):
        nxt = []
        for u in frontier:
            for w in tri.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return seen


@dataclass
class Truncation:
    """Subcomplex of all faces whose vertices lie in B_n(root).

    A vertex is interior iff its parent star is complete and every parent face
    at it belongs to the truncation; the rest of the face-covered vertices
    form the boundary (Dirichlet) set.
    """

    parent: Triangulation
    radius: int
    interior: np.ndarray
    boundary: np.ndarray
    faces: list[tuple[int, int, int]]
    face_ids: np.ndarray  # indices into parent.faces

    @property
    def vertices(self) -> np.ndarray:
        return np.sort(np.concatenate([self.interior, self.boundary]))

    @property
    def faces_arr(self) -> np.ndarray:
        return np.asarray(self.faces, dtype=np.int64)

    @property
    def edge_list(self) -> list[tuple[int, int]]:
        es = set()
        for a, b, c in self.faces:
            es.update(((a, b), (a, c), (b, c)))
        return sorted(es)

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edge_list) + len(self.faces)

    def is_interior(self, v: int) -> bool:
        return bool(np.isin(v, self.interior))


def truncate(tri: Triangulation, n: int) -> Truncation:
    """Truncation at combinatorial radius n around the root."""
    if not (1 <= n <= tri.available_radius):
        raise TriangulationError(
            f"truncation radius {n} outside [1, {tri.available_radius}]"
        )
    depth = tri.depth
    face_ids = [
        i for i, f in enumerate(tri.faces) if max(depth[v] for v in f) <= n
    ]
    face_id_set = set(face_ids)
    verts = sorted({v for i in face_ids for v in tri.faces[i]})
    interior, boundary = [], []
    for v in verts:
        if tri.star_complete[v] and all(
            fi in face_id_set for fi in tri.vertex_faces[v]
        ):
            interior.append(v)
        else:
            boundary.append(v)
    return Truncation(
        parent=tri,
        radius=n,
        interior=np.array(interior, dtype=np.int64),
        boundary=np.array(boundary, dtype=np.int64),
        faces=[tri.faces[i] for i in face_ids],
        face_ids=np.array(face_ids, dtype=np.int64),
    )


def build_hexagonal(radius: int) -> Triangulation:
    """Ball of the regular triangular (hexagonal) lattice around the origin."""
    if radius < 1:
        raise TriangulationError("radius must be >= 1")
    coords = [
        (m, n)
        for m in range(-radius, radius + 1)
        for n in range(-radius, radius + 1)
        if hex_distance(m, n) <= radius
    ]
    coords.sort(key=lambda c: (hex_distance(*c), c))
    index = {c: i for i, c in enumerate(coords)}
    faces = []
    for (m, n) in coords:
        up = ((m, n), (m + 1, n), (m + 1, n + 1))
        down = ((m, n), (m + 1, n + 1), (m, n + 1))
        for tri_coords in (up, down):
            if all(c in index for c in tri_coords):
                faces.append(tuple(index[c] for c in tri_coords))
    labels = {i: c for c, i in index.items()}
    return Triangulation.from_faces(faces, root=index[(0, 0)], labels=labels)


def constant_degree_layer_sizes(d: int, radius: int) -> list[int]:
    """Layer sizes of the degree-d triangular tessellation, by type counting.

    Tracks how many vertices of each layer have one vs two parents; used both
    by the builder's tests and as an independent growth oracle.
    """
    if d < 7:
        raise TriangulationError("constant-degree family needs d >= 7")
    sizes = [1]
    if radius >= 1:
        sizes.append(d)
    a, b = d, 0  # (one-parent count, two-parent count) of the current layer
    for _ in range(radius - 1):
        total_arcs = a * (d - 3) + b * (d - 4)
        m = a + b
        new_total = total_arcs - m
        b, a = m, new_total - m
        sizes.append(new_total)
    return sizes


def build_constant_degree(d: int, radius: int) -> Triangulation:
    """Truncation of the disk triangulation with constant interior degree d.

    Built layer by layer: each ring vertex fans out to d - 2 - (#parents)
    children, consecutive fans sharing one child. Every vertex at distance
    < radius from the root ends up with degree exactly d.
    """
    if d < 7:
        raise TriangulationError(
            "constant-degree family needs d >= 7 (d = 6 is the hexagonal "
            "lattice, d <= 5 does not triangulate the open disk)"
        )
    if radius < 1:
        raise TriangulationError("radius must be >= 1")

    faces = []
    ring = list(range(1, d + 1))
    for i, v in enumerate(ring):
        faces.append((0, v, ring[(i + 1) % d]))
    down = {v: 1 for v in ring}
    nxt = d + 1

    for _ in range(radius - 1):
        m = len(ring)
        counts = [d - 2 - down[v] for v in ring]
        arcs: list[list[int]] = []
        arc0 = list(range(nxt, nxt + counts[0]))
        nxt += counts[0]
        arcs.append(arc0)
        for i in range(1, m):
            c = counts[i]
            if i < m - 1:
                fresh = list(range(nxt, nxt + c - 1))
                nxt += c - 1
                arcs.append([arcs[i - 1][-1]] + fresh)
            else:
                fresh = list(range(nxt, nxt + c - 2))
                nxt += c - 2
                arcs.append([arcs[i - 1][-1]] + fresh + [arc0[0]])

        for i, v in enumerate(ring):
            arc = arcs[i]
            for j in range(len(arc) - 1):
                faces.append((v, arc[j], arc[j + 1]))
            faces.append((v, ring[(i + 1) % m], arc[-1]))

        new_ring: list[int] = []
        for i, arc in enumerate(arcs):
            seg = arc if i == 0 else arc[1:]
            if i == m - 1:
                seg = seg[:-1]
            new_ring.extend(seg)
        down = {}
        for arc in arcs:
            for w in arc:
                down[w] = down.get(w, 0) + 1
        ring = new_ring

    return Triangulation.from_faces(faces, root=0)


def save(tri: Triangulation, path) -> None:
    """Write the line-oriented text format (header, faces, optional phi)."""
    lines = [f"tri v={tri.n_vertices} root={tri.root}"]
    for a, b, c in tri.faces:
        lines.append(f"f {a} {b} {c}")
    for (i, j) in sorted(tri.phi):
        lines.append(f"phi {i} {j} {tri.phi[(i, j)]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> Triangulation:
    """Parse the text format; rejects malformed headers, faces, and phi lines."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("tri "):
        raise TriangulationError("missing 'tri' header line")
    header = dict(
        tok.split("=", 1) for tok in lines[0].split()[1:] if "=" in tok
    )
    try:
        n_vertices = int(header["v"])
        root = int(header["root"])
    except (KeyError, ValueError) as exc:
        raise TriangulationError(f"bad header: {lines[0]!r}") from exc

    faces, phi = [], {}
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "f":
            ids = parts[1:]
            if len(ids) != 3:
                raise TriangulationError(
                    f"face line must have exactly 3 vertices: {ln!r}"
                )
            try:
                f = tuple(int(x) for x in ids)
            except ValueError as exc:
                raise TriangulationError(f"bad face line: {ln!r}") from exc
            if any(not (0 <= v < n_vertices) for v in f):
                raise TriangulationError(f"face references undeclared vertex: {ln!r}")
            faces.append(f)
        elif parts[0] == "phi":
            if len(parts) != 4:
                raise TriangulationError(f"bad phi line: {ln!r}")
            try:
                i, j, val = int(parts[1]), int(parts[2]), float(parts[3])
            except ValueError as exc:
                raise TriangulationError(f"bad phi line: {ln!r}") from exc
            if any(not (0 <= v < n_vertices) for v in (i, j)):
                raise TriangulationError(f"phi references undeclared vertex: {ln!r}")
            phi[(min(i, j), max(i, j))] = val
        else:
            raise TriangulationError(f"unrecognized line: {ln!r}")
    return Triangulation.from_faces(faces, root=root, n_vertices=n_vertices, phi=phi)
