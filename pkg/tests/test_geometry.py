import math

import numpy as np
import pytest

from crflab import _certified
from crflab import geometry as G
from crflab import triangulation as T


def fd_angle_jacobian(geometry, u, phi, h=1e-6):
    """Richardson-extrapolated central differences through the factor map."""
    def angles(uu):
        r = G.radius_from_factor(geometry, uu)
        return G.triangle_angles(geometry, r, phi).angles
    J = np.zeros((3, 3))
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        d1 = (angles(u + e) - angles(u - e)) / (2 * h)
        d2 = (angles(u + 2 * e) - angles(u - 2 * e)) / (4 * h)
        J[:, d] = (4 * d1 - d2) / 3
    return J


def sample_factors(rng, geometry):
    if geometry is G.EUCLIDEAN:
        return rng.uniform(-3, 1, 3)
    return rng.uniform(-4, -0.05, 3)


# ---------------------------------------------------------------------------
# conformal factors


def test_factor_round_trips():
    r = np.logspace(-6, 2, 40)
    for geometry in (G.EUCLIDEAN, G.HYPERBOLIC):
        u = G.factor_from_radius(geometry, r)
        back = G.radius_from_factor(geometry, u)
        assert np.allclose(back, r, rtol=1e-12)
    assert G.factor_from_radius(G.EUCLIDEAN, 1.0) == 0.0
    r_half = G.radius_from_factor(G.HYPERBOLIC, math.log(0.5))
    assert abs(r_half - 2 * math.atanh(0.5)) < 1e-14


def test_factor_domain_errors():
    with pytest.raises(G.MetricDomainError):
        G.factor_from_radius(G.EUCLIDEAN, -1.0)
    with pytest.raises(G.MetricDomainError):
        G.radius_from_factor(G.HYPERBOLIC, 0.0)


# ---------------------------------------------------------------------------
# edge lengths


def test_edge_length_values():
    assert G.edge_length(G.EUCLIDEAN, 1, 1, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert G.edge_length(G.EUCLIDEAN, 1, 1, math.pi / 2) == pytest.approx(
        math.sqrt(2), abs=1e-15
    )
    for a in (0.1, 0.7, 2.0):
        assert G.edge_length(G.HYPERBOLIC, a, a, 0.0) == pytest.approx(
            2 * a, rel=1e-13
        )


def test_edge_length_log_domain_guard():
    # cosh(400) overflows; the log-domain branch must still give r_i + r_j
    assert G.edge_length(G.HYPERBOLIC, 400.0, 400.0, 0.0) == pytest.approx(
        800.0, rel=1e-12
    )
    # orthogonal circles: cosh l = cosh r_i cosh r_j ~ e^(r_i + r_j)/4
    assert G.edge_length(G.HYPERBOLIC, 500.0, 30.0, math.pi / 2) == pytest.approx(
        530.0 - math.log(2), rel=1e-12
    )


def test_edge_length_symmetry_and_errors():
    rng = np.random.default_rng(0)
    for _ in range(50):
        ri, rj = rng.uniform(0.05, 5, 2)
        phi = rng.uniform(0, math.pi / 2)
        for geometry in (G.EUCLIDEAN, G.HYPERBOLIC):
            assert G.edge_length(geometry, ri, rj, phi) == pytest.approx(
                G.edge_length(geometry, rj, ri, phi), rel=1e-14
            )
    with pytest.raises(G.MetricDomainError):
        G.edge_length(G.EUCLIDEAN, -1, 1, 0.0)
    with pytest.raises(G.MetricDomainError):
        G.edge_length(G.EUCLIDEAN, 1, 1, 2.5)


# ---------------------------------------------------------------------------
# angles


def test_equilateral_angles():
    fa = G.triangle_angles(G.EUCLIDEAN, [1, 1, 1], [0, 0, 0])
    assert np.allclose(fa.angles, math.pi / 3, atol=1e-14)
    assert np.allclose(fa.lengths, 2.0, atol=1e-14)


def test_hyperbolic_equilateral_frozen_value():
    # oracle: direct law-of-cosines evaluation at side length 2
    ref = math.acos(math.cosh(2) * (math.cosh(2) - 1) / math.sinh(2) ** 2)
    fa = G.triangle_angles(G.HYPERBOLIC, [1, 1, 1], [0, 0, 0])
    assert np.allclose(fa.lengths, 2.0, atol=1e-12)
    assert np.allclose(fa.angles, ref, atol=1e-12)
    assert ref == pytest.approx(0.6599664, abs=1e-7)


def test_angle_sums_and_domains():
    rng = np.random.default_rng(1)
    for _ in range(200):
        phi = rng.uniform(0, math.pi / 2, 3)
        u = sample_factors(rng, G.EUCLIDEAN)
        fa = G.triangle_angles(G.EUCLIDEAN, np.exp(u), phi)
        assert abs(fa.angles.sum() - math.pi) < 1e-10
        assert np.all(fa.angles > 0) and np.all(fa.angles < math.pi)
        a, b, c = sorted(fa.lengths)
        assert a + b > c

        uh = sample_factors(rng, G.HYPERBOLIC)
        fah = G.triangle_angles(
            G.HYPERBOLIC, G.radius_from_factor(G.HYPERBOLIC, uh), phi
        )
        assert fah.angles.sum() < math.pi
        assert np.all(fah.angles > 0)


def test_degenerate_lengths_raise():
    with pytest.raises(G.DegenerateTriangleError):
        G._angles_from_lengths(G.EUCLIDEAN, np.array([1.0, 1.0, 3.0]))


# ---------------------------------------------------------------------------
# curvature


def test_hexagonal_flat_curvature(hex6):
    m = G.PackingMetric(G.EUCLIDEAN, np.zeros(hex6.n_vertices))
    tr = T.truncate(hex6, 6)
    for v in tr.interior[::7]:
        assert abs(G.curvature(tr, m, int(v))) < 1e-13


def test_symmetric_star_curvature(d7_radius4):
    m = G.PackingMetric(G.EUCLIDEAN, np.zeros(d7_radius4.n_vertices))
    assert G.curvature(d7_radius4, m, 0) == pytest.approx(
        2 * math.pi - 7 * math.pi / 3, abs=1e-12
    )


def test_curvature_needs_interior(hex6):
    m = G.PackingMetric(G.EUCLIDEAN, np.zeros(hex6.n_vertices))
    tr = T.truncate(hex6, 3)
    boundary_v = int(tr.boundary[0])
    with pytest.raises(G.MetricDomainError):
        G.curvature(tr, m, boundary_v)


def test_curvature_degree_bounds(hex6):
    rng = np.random.default_rng(2)
    tr = T.truncate(hex6, 4)
    for geometry in (G.EUCLIDEAN, G.HYPERBOLIC):
        for _ in range(5):
            if geometry is G.EUCLIDEAN:
                u = rng.uniform(-1.5, 1.0, hex6.n_vertices)
            else:
                u = rng.uniform(-3.0, -0.1, hex6.n_vertices)
            m = G.PackingMetric(geometry, u)
            for v in tr.interior[::5]:
                K = G.curvature(tr, m, int(v))
                deg = hex6.degree(int(v))
                assert 2 * math.pi - deg * math.pi <= K < 2 * math.pi


# ---------------------------------------------------------------------------
# derivatives


@pytest.mark.parametrize("geometry", [G.EUCLIDEAN, G.HYPERBOLIC])
def test_angle_jacobian_vs_fd_and_structure(geometry):
    rng = np.random.default_rng(3)
    for _ in range(200):
        u = sample_factors(rng, geometry)
        phi = rng.uniform(0, math.pi / 2, 3)
        r = G.radius_from_factor(geometry, u)
        J = G.angle_jacobian(geometry, r, phi)
        fd = fd_angle_jacobian(geometry, u, phi)
        theta = G.triangle_angles(geometry, r, phi).angles
        noise = 20 * 2.2e-16 / (1e-6 * np.sin(theta))[:, None]
        assert np.all(
            np.abs(J - fd) <= 1e-6 * np.maximum(np.abs(J), np.abs(fd)) + noise
        )
        # monotonicity/symmetry/row-sum structure
        assert np.all(np.diag(J) < 0)
        assert np.all(J[~np.eye(3, dtype=bool)] > 0)
        assert np.allclose(J, J.T, rtol=1e-9, atol=1e-13)
        rs = J.sum(axis=1)
        if geometry is G.EUCLIDEAN:
            assert np.all(np.abs(rs) < 1e-10)
        else:
            assert np.all(rs < 0)


def test_angle_ratio_within_certified_bound():
    rng = np.random.default_rng(4)
    for geometry, bound in (
        (G.EUCLIDEAN, _certified.ANGLE_RATIO_BOUND_EUCLIDEAN),
        (G.HYPERBOLIC, _certified.ANGLE_RATIO_BOUND_HYPERBOLIC),
    ):
        for _ in range(300):
            u = sample_factors(rng, geometry)
            phi = rng.uniform(0, math.pi / 2, 3)
            r = G.radius_from_factor(geometry, u)
            assert G.angle_derivative_ratio(geometry, r, phi) <= bound


def test_hyperbolic_derivative_at_most_one():
    rng = np.random.default_rng(5)
    for _ in range(300):
        u = rng.uniform(-4, -0.01, 3)
        phi = rng.uniform(0, math.pi / 2, 3)
        r = G.radius_from_factor(G.HYPERBOLIC, u)
        J = G.angle_jacobian(G.HYPERBOLIC, r, phi)
        assert np.all(J[~np.eye(3, dtype=bool)] <= 1.0 + 1e-12)


def test_power_center_matches_derivative_for_tangencies():
    rng = np.random.default_rng(6)
    for _ in range(100):
        u = rng.uniform(-4, -0.05, 3)
        r = G.radius_from_factor(G.HYPERBOLIC, u)
        J = G.angle_jacobian(G.HYPERBOLIC, r, np.zeros(3))
        _, pc = G.angle_derivative_ratio(G.HYPERBOLIC, r, np.zeros(3),
                                         power_center=True)
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            assert pc[a] == pytest.approx(J[b, c], rel=1e-9)
        # the hyperbolic chain bound: tanh <= sinh makes every ratio <= 1
        assert np.all(pc <= 1.0 + 1e-12)


def test_euclidean_scale_invariance():
    rng = np.random.default_rng(7)
    r = rng.uniform(0.2, 3.0, 3)
    phi = rng.uniform(0, math.pi / 2, 3)
    base = G.triangle_angles(G.EUCLIDEAN, r, phi).angles
    for lam in (1e-3, 0.1, 7.0, 500.0):
        scaled = G.triangle_angles(G.EUCLIDEAN, lam * r, phi).angles
        assert np.allclose(scaled, base, rtol=1e-12)


def test_curvature_jacobian_row(hex6):
    m = G.PackingMetric(G.EUCLIDEAN, np.zeros(hex6.n_vertices))
    tr = T.truncate(hex6, 6)
    v = int(hex6.root)
    row, defect = G.curvature_jacobian_row(tr, m, v)
    assert abs(defect) < 1e-12  # Euclidean: rows balance exactly

    # FD oracle with step 1e-5 and a Richardson check
    h = 1e-5
    def K_at(u):
        return G.curvature(tr, m.with_u(u), v)
    for w, val in row.items():
        e = np.zeros(hex6.n_vertices)
        e[w] = h
        d1 = (K_at(m.u + e) - K_at(m.u - e)) / (2 * h)
        d2 = (K_at(m.u + 2 * e) - K_at(m.u - 2 * e)) / (4 * h)
        fd = (4 * d1 - d2) / 3
        assert abs(val - fd) <= 1e-6 * max(1.0, abs(val))
    assert row[v] > 0
    assert all(val < 0 for w, val in row.items() if w != v)

    # symmetry across an interior edge
    w = next(w for w in hex6.adjacency[v])
    roww, _ = G.curvature_jacobian_row(tr, m, int(w))
    assert row[int(w)] == pytest.approx(roww[v], rel=1e-12)


def test_curvature_jacobian_row_hyperbolic_defect(d7_radius4):
    m = G.PackingMetric(G.HYPERBOLIC, np.full(d7_radius4.n_vertices, -1.2))
    tr = T.truncate(d7_radius4, 4)
    _, defect = G.curvature_jacobian_row(tr, m, 0)
    assert defect > 0


# ---------------------------------------------------------------------------
# metric container


def test_packing_metric_validation():
    with pytest.raises(G.MetricDomainError):
        G.PackingMetric(G.HYPERBOLIC, np.array([-1.0, 0.0]))
    with pytest.raises(G.MetricDomainError):
        G.PackingMetric(G.EUCLIDEAN, np.array([np.inf]))
    with pytest.raises(G.MetricDomainError):
        G.PackingMetric(G.EUCLIDEAN, np.zeros(3), {(0, 1): 3.0})
    m = G.PackingMetric(G.HYPERBOLIC, np.array([-1.0, -2.0]))
    assert np.allclose(
        G.factor_from_radius(G.HYPERBOLIC, m.radii), m.u, rtol=1e-13
    )
