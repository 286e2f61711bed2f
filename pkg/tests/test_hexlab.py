import math

import numpy as np
import pytest

from crflab import _certified
from crflab import geometry as G
from crflab import hexlab as H
from crflab import triangulation as T
from crflab.triangulation import HEX_STEPS


def linear_field(N, a, b, rule="zero"):
    f = H.HexField(N, boundary_rule=rule)
    vals = np.array([a * m + b * n for (m, n) in f.ball_coords])
    return H.HexField(N, vals, rule)


def test_differences_on_linear_field():
    f = linear_field(5, 0.3, -0.2)
    g = H.gradient(f, (0, 0))
    assert np.allclose(g, [0.3, 0.1, -0.2, -0.3, -0.1, 0.2], atol=1e-15)
    assert H.difference(f, (0, 0), 1) == pytest.approx(0.3)
    assert H.difference(f, (0, 0), 4) == pytest.approx(-0.3)
    assert np.abs(H.hessian(f, (0, 0))).max() == 0.0
    assert H.laplacian(f, (0, 0)) == 0.0


def test_constant_field_differences():
    f = H.HexField(4, np.full(61, 2.5))
    assert np.allclose(H.gradient(f, (0, 0)), 0.0)
    assert H.laplacian(f, (1, 1)) == 0.0


def test_hessian_symmetry_random():
    rng = np.random.default_rng(0)
    f = H.HexField(5, rng.normal(size=91))
    for v in [(0, 0), (2, 1), (-3, -3)]:
        Hm = H.hessian(f, v)
        assert np.array_equal(Hm, Hm.T)


def test_opposite_pair_identity():
    rng = np.random.default_rng(1)
    f = H.HexField(5, rng.normal(size=91))
    for (m, n) in [(0, 0), (1, -1), (2, 2)]:
        for i, (dm, dn) in ((3, (1, 0)), (4, (1, 1)), (5, (0, 1))):
            d_i = H.difference(f, (m, n), i + 1)
            d_opp = H.difference(f, (m - dm, n - dn), i - 2)
            assert d_i == pytest.approx(-d_opp, abs=1e-15)


def test_laplacian_delta():
    f = H.HexField(4)
    vals = f.values.copy()
    vals[f.ball_coords.index((0, 0))] = 1.0
    f = H.HexField(4, vals)
    assert H.laplacian(f, (0, 0)) == pytest.approx(-2 * math.sqrt(3), abs=1e-14)
    assert H.energy(f) == pytest.approx(6.0, abs=1e-14)


def test_angle_function_constants():
    assert H.angle_G(0.0, 0.0) == pytest.approx(math.pi / 3, abs=1e-14)
    gx, gy = H.angle_G_partials(0.0, 0.0)
    assert 2 * gx == pytest.approx(math.sqrt(3) / 3, abs=1e-13)
    assert gx == gy
    # symmetry and the closed-form diagonal limit toward a flat angle
    assert H.angle_G(0.3, -0.7) == pytest.approx(H.angle_G(-0.7, 0.3), abs=1e-15)
    for t in (1.0, 5.0, 20.0):
        closed = math.acos(1 - 2 * math.exp(2 * t) / (1 + math.exp(t)) ** 2)
        assert H.angle_G(t, t) == pytest.approx(closed, abs=1e-12)
    assert H.angle_G(20.0, 20.0) == pytest.approx(math.pi, abs=1e-3)


def test_angle_partials_vs_fd():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(50):
        x, y = rng.uniform(-1.5, 1.5, 2)
        gx, gy = H.angle_G_partials(x, y)
        fx = (H.angle_G(x + h, y) - H.angle_G(x - h, y)) / (2 * h)
        fy = (H.angle_G(x, y + h) - H.angle_G(x, y - h)) / (2 * h)
        assert gx == pytest.approx(fx, rel=1e-6, abs=1e-9)
        assert gy == pytest.approx(fy, rel=1e-6, abs=1e-9)


def test_stencil_nonlinearity_at_zero():
    z0 = np.zeros(6)
    assert H.stencil_F(z0) == 0.0
    assert np.allclose(H.stencil_F_gradient(z0), 0.0, atol=1e-15)
    # central differences of F at 0 vanish
    h = 1e-8
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (H.stencil_F(e) - H.stencil_F(-e)) / (2 * h)
        assert abs(fd) < 1e-8


def test_stencil_quadratic_bound_fixture():
    rng = np.random.default_rng(3)
    for _ in range(500):
        z = rng.uniform(-1, 1, 6)
        nz = np.linalg.norm(z)
        if nz == 0 or nz > _certified.F_EPS1:
            z = z / (nz + 1e-12) * rng.uniform(0.01, _certified.F_EPS1)
            nz = np.linalg.norm(z)
        assert abs(H.stencil_F(z)) <= _certified.F_C1 * nz**2
        assert np.linalg.norm(H.stencil_F_gradient(z)) <= _certified.F_C1 * nz


def test_stencil_order_matches_lattice_faces():
    # consecutive stencil directions (with wraparound) must span faces of the
    # built hexagonal triangulation, or the face-sum identity silently rotates
    tri = T.build_hexagonal(2)
    coord_to_id = {c: v for v, c in tri.labels.items()}
    faces = set(tri.faces)
    for i in range(6):
        a = HEX_STEPS[i]
        b = HEX_STEPS[(i + 1) % 6]
        face = tuple(sorted((coord_to_id[(0, 0)], coord_to_id[a], coord_to_id[b])))
        assert face in faces


def test_semilinear_identity_vs_curvature(hex6):
    rng = np.random.default_rng(4)
    tr = T.truncate(hex6, 6)
    for _ in range(10):
        field = H.HexField(6, rng.uniform(-0.2, 0.2, 127))
        u = np.zeros(hex6.n_vertices)
        for vid in range(hex6.n_vertices):
            u[vid] = field.value_at(hex6.labels[vid])
        metric = G.PackingMetric(G.EUCLIDEAN, u)
        for v in tr.interior[::4]:
            K = G.curvature(tr, metric, int(v))
            assert H.semilinear_rhs(field, hex6.labels[int(v)]) == pytest.approx(
                -K, abs=1e-10
            )


def test_semilinear_rhs_trivial_cases():
    f0 = H.HexField(5)
    assert H.semilinear_rhs(f0, (0, 0)) == 0.0
    # constant field: interior vertices still see a uniformly scaled flat
    # packing, so the curvature term vanishes (scale invariance)
    fc = H.HexField(5, np.full(91, 0.7))
    assert H.semilinear_rhs(fc, (0, 0)) == pytest.approx(0.0, abs=1e-13)
    assert H.semilinear_rhs(fc, (1, 1)) == pytest.approx(0.0, abs=1e-13)


def test_energy_constant_field_counts_crossing_edges():
    N, c = 4, 0.8
    f = H.HexField(N, np.full(61, c))
    # crossing edges: each ring vertex at distance N reaches outside
    lat = f.lattice
    crossing = 0
    for i in lat.ball_ids:
        for d in range(6):
            j = lat.nbr[i, d]
            if j == lat.size or not lat.in_ball[j]:
                crossing += 1
    assert H.energy(f) == pytest.approx(crossing * c * c, abs=1e-12)
    # frozen rule: only interior edges count, constant field has zero energy
    assert H.energy(H.HexField(N, np.full(61, c), "frozen")) == 0.0


def test_hessian_norm_identity():
    rng = np.random.default_rng(5)
    f = H.HexField(5, rng.normal(size=91))
    _, _, d2 = H.dirichlet_norms(f)
    total = 0.0
    for i in range(6):
        col = np.array([H.gradient(f, c)[i] for c in f.ball_coords])
        # the column field reads as zero outside the ball, matching the
        # zero-extension in dirichlet_norms only for first differences taken
        # of the derivative field; rebuild it on a larger ball for exactness
        big = H.HexField(5 + 1)
        vals = np.array([
            H.gradient(f, c)[i] for c in big.ball_coords
        ])
        colf = H.HexField(5 + 1, vals)
        total += 2.0 * H.dirichlet_norms(colf)[0] ** 2
    assert d2**2 == pytest.approx(total, rel=1e-12)


def test_summation_by_parts_compact_support():
    rng = np.random.default_rng(6)
    N = 8
    base = H.HexField(N)
    coords = base.ball_coords
    inner = [c for c in coords if T.hex_distance(*c) <= N - 3]
    fv = np.zeros(len(coords))
    gv = np.zeros(len(coords))
    idx = {c: i for i, c in enumerate(coords)}
    for c in inner:
        fv[idx[c]] = rng.normal()
        gv[idx[c]] = rng.normal()
    f = H.HexField(N, fv)
    g = H.HexField(N, gv)
    lhs = sum(fv[idx[c]] * H.laplacian(g, c) for c in coords)
    rhs = 0.0
    for c in coords:
        zi = H.gradient(f, c)
        wi = H.gradient(g, c)
        rhs += -H.OMEGA0 * 0.5 * float(zi @ wi)  # each edge counted twice
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_linf_below_l2():
    rng = np.random.default_rng(7)
    for _ in range(20):
        f = H.HexField(6, rng.normal(size=127) * rng.uniform(0.01, 3))
        l2, linf = H.norms(f)
        assert linf <= l2 + 1e-15


def test_evolve_zero_initial():
    ev = H.evolve(H.HexField(6), 2.0)
    assert np.all(ev.l2 == 0.0)
    assert np.all(ev.energy == 0.0)


def test_evolve_decay_and_residual():
    f0 = H.HexField.random_l2(12, 0.05, seed=1)
    assert np.linalg.norm(f0.values) == pytest.approx(0.05, rel=1e-12)
    ev = H.evolve(f0, 2000.0, stop_energy=1e-9)
    assert ev.status == "energy target"
    assert np.all(np.diff(ev.l2) <= 1e-12)
    assert ev.energy[-1] < 1e-8
    assert ev.linf[-1] < 1e-4
    # the certified small-data regime holds along the whole run
    assert ev.l2[0] <= _certified.F_EPS2
    assert np.all(ev.decay_residual <= 10 * (1e-10 + 1e-8))


def test_evolve_frozen_ring_pinned():
    f0 = H.HexField.random_l2(6, 0.05, seed=2, boundary_rule="frozen")
    lat = f0.lattice
    ring = lat.dist[lat.ball_ids] == 6
    ring_vals = f0.values[ring].copy()
    ev = H.evolve(f0, 5.0)
    assert np.array_equal(ev.final.values[ring], ring_vals)


def test_evolve_domain_guard():
    f0 = H.HexField(4, np.full(61, 25.0))
    with pytest.raises(H.HexDomainError):
        H.evolve(f0, 1.0)


def test_field_validation():
    with pytest.raises(ValueError):
        H.HexField(4, np.zeros(3))
    with pytest.raises(ValueError):
        H.HexField(4, boundary_rule="periodic")
