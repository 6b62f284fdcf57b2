"""Frozen values from independent oracles.

Pair integrals over the unit cube were computed with adaptive cubature of
the covariogram form ``8 ∫_[0,1]^3 k(|z|) Π(1 - z_i) dz`` in spherical
coordinates (scipy ``tplquad``, abs/rel tolerance 1e-11).
"""
import math

CUBE_E2 = 5.6337151581125235
CUBE_INV_R = 1.882312644373719  # ∫∫ |x-y|^-1
# ∫∫ (1 - exp(-t r / 2)) / r^2 over the unit cube
CUBE_VAR = {0.75: 0.6409827679274946, 1.0: 0.8287401265398712, 1.5: 1.1711550860453441}
CUBE_VAR_R8_SHIFTED = 3.7662418292666135  # same integral at t = 8 * (1 + log 8 / 8)

# symbolic: ∫_0^1 (1-s)^2 e^s ds / 2 = e - 5/2
ITERATED_EXP = math.e - 2.5

# mean formula plugged by hand, unit cube, t = 1.5
MEAN_CUBE_15 = {
    2: 1.5,
    1: math.pi / 4 * (1.5**2 / 2 + 3 * 1.5),
    0: 0.5 * math.pi / 4 * 1.5**3 / 6 + 0.5 * math.pi / 4 * 1.5**2 / 2 * 3 + 0.5 * 1.5 * 3,
}
