import time

import numpy as np
import pytest

from crflab import flow as flow_mod
from crflab import geometry as geom
from crflab import triangulation as tri_mod


@pytest.fixture(scope="session")
def hex6():
    return tri_mod.build_hexagonal(6)


@pytest.fixture(scope="session")
def d7_radius4():
    return tri_mod.build_constant_degree(7, 4)


@pytest.fixture(scope="session")
def d7_flow_run(d7_radius4):
    """Converged hyperbolic run on the degree-7 radius-4 truncation.

    Shared across the flow, layout, and acceptance tests: u(0) = -3,
    tangential packing, zero target curvature, residual pushed to 1e-8.
    Returns (trajectory, wall_seconds).
    """
    trunc = tri_mod.truncate(d7_radius4, 4)
    metric0 = geom.PackingMetric(
        geom.HYPERBOLIC, np.full(d7_radius4.n_vertices, -3.0)
    )
    problem = flow_mod.FlowProblem(
        truncation=trunc, metric0=metric0, target=0.0,
        t_max=80.0, tolerance=1e-8,
    )
    t0 = time.perf_counter()
    traj = flow_mod.solve_finite(problem)
    wall = time.perf_counter() - t0
    assert traj.status == "converged", traj.status
    return traj, wall
