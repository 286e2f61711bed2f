"""Empirically certified constants; regenerate with
scripts/certify_constants.py (documented pre-build oracle step)."""

# sup of (d theta_i / d u_j) / theta_i over the dense triangle grids,
# inflated by a 1.05 safety factor
ANGLE_RATIO_BOUND_EUCLIDEAN = 1.0501398198691687
ANGLE_RATIO_BOUND_HYPERBOLIC = 1.0492934177656799

# raw grid suprema (no margin), for reference
ANGLE_RATIO_SUP_EUCLIDEAN = 1.0001331617801605
ANGLE_RATIO_SUP_HYPERBOLIC = 0.9993270645387428

# quadratic bound of the stencil nonlinearity on |z| <= F_EPS1:
# |F(z)| <= F_C1 |z|^2 and |grad F(z)| <= F_C1 |z|
F_EPS1 = 1.0
F_C1 = 0.7424612179494483
F_TILDE_VALUE_RATIO = 0.07216872726090481
F_TILDE_GRAD_RATIO = 0.14433739188741898

# small-data radius for the energy decay inequality
F_EPS2 = 0.1944041840946821
