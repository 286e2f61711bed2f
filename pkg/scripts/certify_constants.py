#!/usr/bin/env python3
"""Regenerate the empirically certified constants in crflab/_certified.py.

Two dense-grid oracle runs back the constants:

1. Angle-derivative ratio bound per geometry: the supremum of
   (d theta_i / d u_j) / theta_i over a dense grid of triangles
   (Euclidean radii log-spaced in [1e-3, 1e3]^3; hyperbolic factors in
   [-4, -0.05]^3; intersection angles in {0, pi/8, pi/4, 3pi/8, pi/2}^3),
   inflated by a 5% safety margin.

2. Quadratic bound of the stencil nonlinearity: |F(z)| <= C1 |z|^2 and
   |grad F(z)| <= C1 |z| for |z| <= eps1 = 1, certified on a dense 2-D grid
   of the single-face remainder. Since F is a cyclic sum of six single-face
   terms and sum (z_i^2 + z_{i+1}^2) = 2 |z|^2, the 2-D supremum transfers to
   the 6-D ball with factor 2 (value) and 2 sqrt(6) (gradient). The derived
   small-data radius eps2 = min(omega0 / (4 C1), eps1 / 2) gates the energy
   decay inequality.

Run:  python3 scripts/certify_constants.py [--out src/crflab/_certified.py]
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from crflab import geometry as G  # noqa: E402
from crflab import hexlab as H  # noqa: E402

MARGIN = 1.05


def ratio_sup(geometry, factor_grid, phi_values) -> float:
    worst = 0.0
    phis = [np.array(p) for p in itertools.product(phi_values, repeat=3)]
    triples = np.array(list(itertools.product(factor_grid, repeat=3)))
    for phi in phis:
        r = G.radius_from_factor(geometry, triples)
        phi_b = np.broadcast_to(phi, r.shape)
        J = G.angle_jacobians(geometry, r, phi_b)
        lengths = G._face_lengths(geometry, r, phi_b)
        angles, _ = G._angles_from_lengths(geometry, lengths)
        off = ~np.eye(3, dtype=bool)
        ratios = J[:, off] / np.repeat(angles, 2, axis=-1)
        worst = max(worst, float(np.max(ratios)))
    return worst


def f_bounds(grid_n=801, extent=1.0):
    x = np.linspace(-extent, extent, grid_n)
    X, Y = np.meshgrid(x, x)
    R2 = X * X + Y * Y
    mask = R2 > 0
    Ft = H.F_tilde(X, Y)
    val_ratio = float(np.max(np.abs(Ft[mask]) / R2[mask]))
    gx, gy = H.F_tilde_gradient(X, Y)
    grad_ratio = float(np.max(np.hypot(gx[mask], gy[mask]) / np.sqrt(R2[mask])))
    c1_value = 2.0 * val_ratio
    c1_grad = 2.0 * math.sqrt(6.0) * grad_ratio
    return val_ratio, grad_ratio, max(c1_value, c1_grad)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "src", "crflab", "_certified.py"))
    ap.add_argument("--grid", type=int, default=13,
                    help="points per factor axis for the ratio grids")
    args = ap.parse_args()

    phi_values = [0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2]
    eu_grid = np.log(np.logspace(-3, 3, args.grid))
    sup_eu = ratio_sup(G.EUCLIDEAN, eu_grid, phi_values)
    hyp_grid = np.linspace(-4.0, -0.05, args.grid)
    sup_hyp = ratio_sup(G.HYPERBOLIC, hyp_grid, phi_values)

    val_ratio, grad_ratio, c1 = f_bounds()
    eps1 = 1.0
    eps2 = min(H.OMEGA0 / (4.0 * c1), eps1 / 2.0)

    body = f'''"""Empirically certified constants; regenerate with
scripts/certify_constants.py (documented pre-build oracle step)."""

# sup of (d theta_i / d u_j) / theta_i over the dense triangle grids,
# inflated by a {MARGIN:.2f} safety factor
ANGLE_RATIO_BOUND_EUCLIDEAN = {MARGIN * sup_eu!r}
ANGLE_RATIO_BOUND_HYPERBOLIC = {MARGIN * sup_hyp!r}

# raw grid suprema (no margin), for reference
ANGLE_RATIO_SUP_EUCLIDEAN = {sup_eu!r}
ANGLE_RATIO_SUP_HYPERBOLIC = {sup_hyp!r}

# quadratic bound of the stencil nonlinearity on |z| <= F_EPS1:
# |F(z)| <= F_C1 |z|^2 and |grad F(z)| <= F_C1 |z|
F_EPS1 = {eps1!r}
F_C1 = {MARGIN * c1!r}
F_TILDE_VALUE_RATIO = {val_ratio!r}
F_TILDE_GRAD_RATIO = {grad_ratio!r}

# small-data radius for the energy decay inequality
F_EPS2 = {min(H.OMEGA0 / (4.0 * MARGIN * c1), eps1 / 2.0)!r}
'''
    with open(args.out, "w") as fh:
        fh.write(body)
    print(f"euclidean ratio sup  : {sup_eu:.6f}")
    print(f"hyperbolic ratio sup : {sup_hyp:.6f}")
    print(f"F value ratio (2-D)  : {val_ratio:.6f}")
    print(f"F grad ratio (2-D)   : {grad_ratio:.6f}")
    print(f"C1 (6-D, with margin): {MARGIN * c1:.6f}")
    print(f"eps2                 : {min(H.OMEGA0 / (4.0 * MARGIN * c1), eps1 / 2.0):.6f}")
    print(f"wrote {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
