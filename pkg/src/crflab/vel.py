"""Vertex extremal length between finite vertex sets, by cutting planes.

Minimizes the squared l2 norm of a non-negative vertex weight subject to
every A-to-B path carrying weight at least one, the weight of a path counting
every vertex except its starting point. Constraints are generated lazily by a
vertex-weighted shortest-path separation oracle (vertex splitting reduces it
to an ordinary Dijkstra); each restricted problem is solved to stationarity
by active-set ascent on the dual of the path Gram system.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ._util import parallel_map


class VelError(ValueError):
    """Bad inputs for an extremal-length computation."""


@dataclass
class VelEstimate:
    m: dict                       # vertex -> optimal weight (nonzero entries)
    norm_sq: float
    vel: float
    certificate_paths: list      # paths the oracle found tight at the optimum
    iterations: int
    gap: float                   # 1 - (min path weight), clipped at 0

    @property
    def converged(self) -> bool:
        return self.gap <= self._tol

    _tol: float = 1e-8


def _as_adjacency(graph):
    if hasattr(graph, "adjacency"):
        return graph.adjacency
    return graph


def _min_weight_paths(nbrs, weight, sources, is_target, cutoff, batch):
    """Cheapest source-to-target paths on the relabeled graph; entering v
    costs weight[v], the source vertex is free.

    Returns (best_cost, [(cost, path), ...]) with up to `batch` paths of cost
    below `cutoff`, cheapest first. The search stops once costs reach the
    cutoff (any remaining target is at least as expensive)."""
    n = len(nbrs)
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, s) for s in sources]
    dist[list(sources)] = 0.0
    heapq.heapify(heap)
    best = np.inf
    found = []
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if is_target[u]:
            best = min(best, d)
            if d < cutoff and len(found) < batch:
                node, path = u, [u]
                while pred[node] >= 0:
                    node = pred[node]
                    path.append(node)
                found.append((d, tuple(reversed(path))))
            if d >= cutoff or len(found) >= batch:
                return best, found
            continue
        if d >= cutoff and found:
            return best, found
        for w in nbrs[u]:
            if done[w]:
                continue
            nd = d + weight[w]
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = u
                heapq.heappush(heap, (nd, w))
    return best, found


class _DualActiveSet:
    """Active-set ascent on the dual of the restricted weight problem.

    Maximizes 1'lam - lam'G lam / 2 over lam >= 0 for a growing Gram matrix
    G of path-support overlaps. The Cholesky factor of the active block is
    maintained incrementally: entering rows border the factor (one triangular
    solve), leaving rows delete a row and re-triangularize with Givens
    rotations, so each pivot costs O(active^2). A tiny ridge on the diagonal
    keeps near-dependent path rows factorable; it perturbs the weights at the
    1e-9 scale, far below the termination tolerance.
    """

    RIDGE = 1e-9

    def __init__(self):
        self.order: list[int] = []  # active row ids, factor order
        self.L = np.zeros((0, 0))

    def _try_add(self, G, j):
        a = len(self.order)
        djj = G[j, j] + self.RIDGE
        if a == 0:
            self.L = np.array([[np.sqrt(djj)]])
            self.order = [j]
            return True
        g = G[self.order, j]
        w = solve_triangular(self.L, g, lower=True, check_finite=False)
        d2 = djj - w @ w
        if d2 <= 0.25 * self.RIDGE:
            return False  # pathologically dependent even with the ridge
        L2 = np.zeros((a + 1, a + 1))
        L2[:a, :a] = self.L
        L2[a, :a] = w
        L2[a, a] = np.sqrt(d2)
        self.L = L2
        self.order.append(j)
        return True

    def _remove(self, pos):
        a = len(self.order)
        M = np.delete(self.L, pos, axis=0)
        self.order.pop(pos)
        # wipe the super-diagonal band introduced by the deletion
        for j in range(pos, a - 1):
            x, y = M[j, j], M[j, j + 1]
            r = float(np.hypot(x, y))
            if r == 0.0:
                continue
            c, s = x / r, y / r
            cj = M[:, j].copy()
            ck = M[:, j + 1].copy()
            M[:, j] = c * cj + s * ck
            M[:, j + 1] = -s * cj + c * ck
            M[j, j + 1] = 0.0
        self.L = M[:, : a - 1]

    def solve_active(self):
        if not self.order:
            return np.zeros(0)
        y = solve_triangular(self.L, np.ones(len(self.order)), lower=True,
                             check_finite=False)
        return solve_triangular(self.L.T, y, lower=False, check_finite=False)

    def optimize(self, G, kkt_tol=1e-10, max_pivots=None):
        k = G.shape[0]
        if max_pivots is None:
            max_pivots = 30 * k + 300
        self.order = [j for j in self.order if j < k]
        if len(self.order) != self.L.shape[0]:
            self._refactor(G)
        if not self.order:
            self._try_add(G, int(np.argmax(np.diag(G))))
        lam = np.zeros(k)
        skipped: set[int] = set()
        for _ in range(max_pivots):
            la = self.solve_active()
            if la.size and np.min(la) < -1e-12:
                self._remove(int(np.argmin(la)))
                continue
            lam = np.zeros(k)
            lam[self.order] = np.maximum(la, 0.0)
            grad = 1.0 - G @ lam
            if self.order:
                grad[self.order] = -np.inf
            if skipped:
                grad[list(skipped)] = -np.inf
            worst = int(np.argmax(grad))
            if grad[worst] <= kkt_tol:
                return lam
            if not self._try_add(G, worst):
                skipped.add(worst)  # dependent direction: noise-level KKT slack
        return lam

    def _refactor(self, G):
        self.L = np.zeros((0, 0))
        order, self.order = self.order, []
        for j in order:
            self._try_add(G, j)


def vel_between(graph, A, B, tol=1e-8, max_iterations=20000, batch=1) -> VelEstimate:
    """Extremal length between disjoint vertex sets A and B.

    Solves min |m|_2^2 over non-negative vertex weights that give every
    A-to-B path total weight >= 1 (weights counted on all path vertices
    except the first). Terminates when the cheapest path reaches 1 - tol.
    """
    adj = _as_adjacency(graph)
    A = set(A)
    B = set(B)
    if not A or not B:
        raise VelError("A and B must be nonempty")
    if A & B:
        raise VelError("A and B must be disjoint")
    missing = (A | B) - set(adj)
    if missing:
        raise VelError(f"vertices not in graph: {sorted(missing)[:5]}")

    # relabel to 0..n-1 for array-based search
    try:
        names = sorted(adj)
    except TypeError:
        names = sorted(adj, key=lambda v: (type(v).__name__, str(v)))
    pos = {v: i for i, v in enumerate(names)}
    nbrs = [np.array(sorted(pos[w] for w in adj[v]), dtype=np.int64) for v in names]
    src = [pos[v] for v in A]
    is_target = np.zeros(len(names), dtype=bool)
    is_target[[pos[v] for v in B]] = True

    rows: list[frozenset] = []      # constraint supports (path minus start)
    paths: list[tuple] = []
    lam = np.zeros(0)
    G = np.zeros((0, 0))
    weight = np.zeros(len(names))

    iterations = 0
    gap = 1.0
    known: set[frozenset] = set()
    solver = _DualActiveSet()
    while iterations < max_iterations:
        iterations += 1
        best, violated = _min_weight_paths(nbrs, weight, src, is_target,
                                           1.0 - tol, batch)
        if not np.isfinite(best):
            raise VelError("no path from A to B; graph disconnected between them")
        gap = max(0.0, 1.0 - best)
        if best >= 1.0 - tol:
            break
        added = 0
        for _, path in violated:
            support = frozenset(path[1:])
            if support in known:
                continue
            known.add(support)
            rows.append(support)
            paths.append(path)
            added += 1
        if added:
            k = len(rows)
            G2 = np.zeros((k, k))
            G2[: k - added, : k - added] = G
            for j in range(k - added, k):
                for i in range(k):
                    ov = len(rows[i] & rows[j])
                    G2[j, i] = G2[i, j] = ov
            G = G2
            lam = solver.optimize(G)
        else:
            # every violated path is already a row: residual is inner-solve
            # roundoff; tighten once, then stop and report the gap honestly
            tightened = solver.optimize(G, kkt_tol=1e-15)
            if np.array_equal(tightened, lam):
                break
            lam = tightened
        weight[:] = 0.0
        for lv, r in zip(lam, rows):
            if lv > 0.0:
                weight[list(r)] += lv

    norm_sq = float(weight @ weight)
    certs = []
    for p in paths:
        w = float(weight[list(p[1:])].sum())
        if w <= 1.0 + tol:
            certs.append(tuple(names[i] for i in p))
    est = VelEstimate(
        m={names[i]: float(w) for i, w in enumerate(weight) if w > 0.0},
        norm_sq=norm_sq,
        vel=1.0 / norm_sq if norm_sq > 0 else np.inf,
        certificate_paths=certs,
        iterations=iterations,
        gap=gap,
    )
    est._tol = tol
    return est


# ---------------------------------------------------------------------------
# trend classification on truncations


@dataclass
class TrendReport:
    radii: list[int]
    vels: list[float]
    gaps: list[float]
    iterations: list[int]
    label: str  # parabolic-leaning | hyperbolic-leaning | inconclusive
    plateau_threshold: float

    def estimates(self):
        return list(zip(self.radii, self.vels))


def classify(tri, A, radii, tol=1e-8, plateau_threshold=0.05) -> TrendReport:
    """Extremal-length growth from A to the distance-n sphere, over radii.

    The sequence is non-decreasing by constraint containment (checked). The
    label is a documented heuristic: the last two values within the plateau
    threshold lean hyperbolic, a strictly increasing tail leans parabolic.
    """
    radii = list(radii)
    if sorted(radii) != radii:
        raise VelError("radii must be increasing")
    depth = tri.depth
    A = set(int(a) for a in A)
    if any(depth[a] >= min(radii) for a in A):
        raise VelError("A must lie strictly inside the smallest ball")

    def run_one(n):
        verts = np.flatnonzero(depth <= n)
        keep = set(verts.tolist())
        adj = {v: [w for w in tri.adjacency[v] if w in keep] for v in keep}
        sphere = set(np.flatnonzero(depth == n).tolist())
        return vel_between(adj, A, sphere, tol=tol)

    ests = parallel_map(run_one, radii)
    vels = [e.vel for e in ests]
    for a, b in zip(vels, vels[1:]):
        if b < a - 1e-9 * max(1.0, a):
            raise VelError(
                f"extremal length decreased ({a} -> {b}); solver inconsistency"
            )
    if len(vels) < 2:
        label = "inconclusive"
    elif (vels[-1] - vels[-2]) / max(vels[-2], 1e-300) <= plateau_threshold:
        label = "hyperbolic-leaning"
    elif all(b > a for a, b in zip(vels, vels[1:])):
        label = "parabolic-leaning"
    else:
        label = "inconclusive"
    return TrendReport(
        radii=radii,
        vels=vels,
        gaps=[e.gap for e in ests],
        iterations=[e.iterations for e in ests],
        label=label,
        plateau_threshold=plateau_threshold,
    )
