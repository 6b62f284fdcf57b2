from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import CUBE_E2, CUBE_INV_R, CUBE_VAR, ITERATED_EXP, MEAN_CUBE_15
from stitlab import theory
from stitlab.functionals import FunctionalSpec, SimulatedMomentOracle, sigma
from stitlab.engine import run_mnw
from stitlab.geometry import make_box, make_simplex
from stitlab.measure import gamma
from stitlab.stats import estimate, replication_rng, run_replications

G2 = math.pi / 4


# -- means and densities ------------------------------------------------------


def test_mean_sigma_cube(cube):
    for j, v in MEAN_CUBE_15.items():
        assert theory.mean_sigma(j, 1.5, cube) == pytest.approx(v, rel=1e-12)
    assert theory.mean_sigma(1, 1.5, cube) == pytest.approx(4.4179, abs=1e-4)


@given(t=st.floats(0, 5))
def test_mean_top_order(t):
    W = make_box([1.0, 2.0, 0.5])
    assert theory.mean_sigma(2, t, W) == pytest.approx(t * 1.0)


def test_mean_from_volumes(cube):
    assert theory.mean_sigma(0, 2.0, [1, 3, 3, 1]) == pytest.approx(theory.mean_sigma(0, 2.0, cube))
    with pytest.raises(ValueError):
        theory.mean_sigma(3, 1.0, cube)


def test_mean_planar():
    sq = make_box(1.0, d=2)
    assert theory.mean_sigma(1, 2.0, sq) == pytest.approx(2.0)
    # facet count: γ_1 t V_1 with γ_1 = 2/π, V_1 = 2
    assert theory.mean_sigma(0, 2.0, sq) == pytest.approx(2 / math.pi * 2 * 2 + 2 / math.pi * 2.0**2 / 2)


def test_density_values():
    assert theory.density_phibar(2, 1.7, 3) == pytest.approx(1.7)
    assert theory.density_phibar(1, 1.0, 3) == pytest.approx(math.pi / 8)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_density_forms_agree(d, t):
    for j in range(d):
        a = theory.density_phibar(j, t, d)
        b = theory.density_phibar_kappa(j, t, d)
        assert a == pytest.approx(b, rel=1e-12)


def test_density_invalid():
    with pytest.raises(ValueError):
        theory.density_phibar(3, 1.0, 3)
    with pytest.raises(ValueError):
        theory.density_phibar_kappa(-1, 1.0, 3)


# -- pair integrals -------------------------------------------------------------


def test_var_zero_time(cube, rng):
    assert theory.var_sigma_dminus1(0.0, cube, 1000, rng).value == 0.0


@pytest.mark.parametrize("t", sorted(CUBE_VAR))
def test_var_against_quadrature(cube, t):
    v = theory.var_sigma_dminus1(t, cube, 200_000, replication_rng(1, int(t * 100)))
    assert abs(v.value - CUBE_VAR[t]) < 3 * v.se


def test_var_small_time(cube):
    t = 1e-3
    v = theory.var_sigma_dminus1(t, cube, 100_000, replication_rng(2, 0))
    direct = theory.riesz_pair_integral(cube, 1.0, 100_000, replication_rng(2, 1))
    lin = 0.5 * t * direct.value  # (d-1)/2 * c * t * ∫∫ 1/r with c = 1/2
    assert abs(v.value - lin) < 3 * math.hypot(v.se, 0.5 * t * direct.se) + 1e-3 * lin
    assert abs(direct.value - CUBE_INV_R) < 3 * direct.se


def test_var_large_time(cube):
    v = theory.var_sigma_dminus1(1e5, cube, 200_000, replication_rng(3, 0))
    assert v.value == pytest.approx(CUBE_E2, rel=0.01)


def test_var_planar_rejected():
    with pytest.raises(ValueError):
        theory.var_sigma_dminus1(1.0, make_box(1.0, d=2), 1000, replication_rng(0, 0))


def test_budget_check(cube, rng):
    with pytest.raises(ValueError):
        theory.energy_E2(cube, 999, rng)


def test_energy_cube(cube):
    e = theory.energy_E2(cube, 400_000, replication_rng(4, 0))
    assert abs(e.value - CUBE_E2) < 3 * e.se
    assert e.value == pytest.approx(5.6337, rel=0.01)


def test_chord_ball_closed_form():
    assert theory.chord_power_ball(3) == pytest.approx(4 * math.pi**2, rel=1e-12)
    assert theory.chord_power_ball(3, 2.0) == pytest.approx(16 * 4 * math.pi**2)


@pytest.mark.parametrize("method", ["pairs", "lines"])
def test_chord_ball_mc(method):
    c = theory.chord_power(theory.Ball(3), 400_000, replication_rng(5, 0), method=method)
    assert c.value == pytest.approx(4 * math.pi**2, rel=0.01)


def test_chord_ball_d4():
    B = theory.Ball(4)
    c = theory.chord_power(B, 400_000, replication_rng(6, 0), method="lines")
    p = theory.chord_power(B, 400_000, replication_rng(6, 1), method="pairs")
    ref = theory.chord_power_ball(4)
    assert abs(c.value - ref) < 3 * c.se
    assert abs(p.value - ref) < 3 * p.se


def test_chord_cube_methods_agree(cube):
    a = theory.chord_power(cube, 300_000, replication_rng(7, 0))
    b = theory.chord_power(cube, 300_000, replication_rng(7, 1), method="lines")
    assert abs(a.value - b.value) < 3 * math.hypot(a.se, b.se)
    with pytest.raises(ValueError):
        theory.chord_power(cube, 300_000, replication_rng(7, 1), method="other")


def test_polytope_body_sampling(simplex):
    body = theory.PolytopeBody(simplex)
    x = body.sample(replication_rng(8, 0), 5000)
    assert (x @ body.N.T <= body.b + 1e-12).all()
    assert x.mean(0) == pytest.approx([0.25] * 3, abs=0.01)


# -- iterated integrals and covariance weights ------------------------------------


def test_iterated_integral_examples():
    assert theory.iterated_integral(lambda s: np.ones_like(s), 2, 1.3) == pytest.approx(1.3**2 / 2)
    assert theory.iterated_integral(lambda s: s, 1, 1.3) == pytest.approx(1.3**2 / 2)
    assert theory.iterated_integral(np.exp, 3, 1.0) == pytest.approx(ITERATED_EXP, rel=1e-12)
    assert theory.iterated_integral(math.exp, 3, 1.0) == pytest.approx(ITERATED_EXP, rel=1e-12)


def test_iterated_integral_errors():
    with pytest.raises(ValueError):
        theory.iterated_integral(lambda s: np.full_like(s, np.nan), 1, 1.0)
    with pytest.raises(ValueError):
        theory.iterated_integral(np.exp, 0, 1.0)


@given(n=st.integers(1, 6), t=st.floats(0.1, 3.0))
def test_iterated_integral_monomial(n, t):
    # I^n(s^2; t) = 2 t^{n+2} / (n+2)!
    assert theory.iterated_integral(lambda s: s**2, n, t) == pytest.approx(2 * t ** (n + 2) / math.factorial(n + 2))


def test_cov_weights_d3():
    w = {(m, n): (wt, o) for m, n, wt, o in theory.cov_weights(1, 1, 3)}
    assert set(w) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert w[0, 0] == (pytest.approx(2 * G2**2), 3)
    assert w[0, 1] == (pytest.approx(G2), 2)
    assert w[1, 0] == (pytest.approx(G2), 2)
    assert w[1, 1] == (1, 1)
    assert theory.cov_weights(0, 0, 3) == [(0, 0, 1, 1)]


def test_limit_coeff():
    assert theory.limit_coeff(0, 1.0, 3) == 1
    assert theory.limit_coeff(1, 1.0, 3) == pytest.approx(math.pi / 4)
    assert theory.limit_coeff(2, 1.0, 3) == pytest.approx(math.pi / 16)
    with pytest.raises(ValueError):
        theory.limit_coeff(3, 1.0, 3)


def test_asymptotic_cov(cube):
    I2 = 5.6337
    t, R = 1.3, 2.0
    assert theory.asymptotic_cov(1, 1, t, cube, R, chord=I2) == pytest.approx(math.pi**2 / 16 * t**2 * I2 * R**4)
    # the general formula carries 1/(k! l!) = 1/4 here, giving pi^2/256
    assert theory.asymptotic_cov(2, 2, t, cube, R, chord=I2) == pytest.approx(math.pi**2 / 256 * t**4 * I2 * R**4)
    # consistent with the rank-one limit: Var_k = limit_coeff(k)^2 * Var_0
    for k in range(3):
        assert theory.asymptotic_cov(k, k, t, cube, R, chord=I2) == pytest.approx(
            theory.limit_coeff(k, t, 3) ** 2 * theory.asymptotic_cov(0, 0, t, cube, R, chord=I2)
        )
    assert theory.asymptotic_cov(0, 0, t, cube, R, chord=I2) == pytest.approx(I2 * R**4)
    with pytest.raises(ValueError):
        theory.asymptotic_cov(0, 0, t, make_box(1.0, d=2), R, chord=1.0)


def test_asymptotic_cov_k0_is_energy(cube):
    # k = l = 0: I_{d-1} R^{2(d-1)} / (d-2) = (d-1)/2 E_2 R^{2(d-1)}
    val = theory.asymptotic_cov(0, 0, 1.0, cube, 3.0, rng=replication_rng(9, 0))
    assert val == pytest.approx(CUBE_E2 * 81, rel=0.01)


# -- the exact covariance skeleton with simulated moments --------------------------


@pytest.fixture(scope="module")
def oracle():
    return SimulatedMomentOracle(make_box([1.0, 1.0, 1.0]), 1.0, 60, 150, seed=31)


def test_skeleton_reduces_to_variance(oracle):
    W = make_box([1.0, 1.0, 1.0])
    v = theory.exact_cov_skeleton(0, 0, 1.0, W, oracle)
    ref = theory.var_sigma_dminus1(1.0, W, 200_000, replication_rng(10, 0))
    assert abs(v.value - ref.value) < 3 * math.hypot(v.se, ref.se)


def test_skeleton_deterministic_oracle():
    W = make_box([1.0, 1.0, 1.0])
    # with the exact surface moment the skeleton is the variance integral itself
    def moment(m, n, s):
        return np.array([theory.mean_A_surface_squared(x, W, 50_000, replication_rng(11, 0)).value for x in s])

    v = theory.exact_cov_skeleton(0, 0, 1.0, W, moment)
    assert v.se == 0.0
    assert v.value == pytest.approx(CUBE_VAR[1.0], rel=0.01)


def test_skeleton_mixed_vs_simulation(oracle):
    W = make_box([1.0, 1.0, 1.0])
    v = theory.exact_cov_skeleton(1, 0, 1.0, W, oracle)

    def row(rng):
        tess = run_mnw(W, 1.0, rng, keep_history=False)
        return [sigma(tess, FunctionalSpec.volume(1)), sigma(tess, FunctionalSpec.volume(2))]

    est = estimate(run_replications(row, 2000, seed=32).values)
    assert abs(v.value - est.cov[0, 1]) < 3 * math.hypot(v.se, est.cov_se[0, 1])


def test_skeleton_oracle_failure(cube):
    with pytest.raises(ValueError):
        theory.exact_cov_skeleton(0, 0, 1.0, cube, lambda m, n, s: np.full(len(s), np.inf))


def test_order_bound_and_leading_term():
    """ℐ-terms with m+n >= 1 grow slower than R^4; the m=n=0 term approaches its limit."""
    W = make_box([1.0, 1.0, 1.0])
    Rs = [1.0, 2.0, 4.0, 8.0]
    t = 1.0
    lower, lead = [], []
    for R in Rs:
        WR = W.scaled(R)
        orc = SimulatedMomentOracle(WR, t, 6, 40, seed=40 + int(R))
        total = 0.0
        for m, n, w, order in theory.cov_weights(1, 1, 3):
            if m + n == 0:
                continue
            s, qw = theory.iterated_integral_weights(order, t, 16)
            total += w * float(orc(m, n, s).mean(0) @ qw)
        lower.append(total)
        s, qw = theory.iterated_integral_weights(3, t, 16)
        vals = np.array([theory.mean_A_surface_squared(x, WR, 20_000, replication_rng(41, 0)).value for x in s])
        lead.append(float(vals @ qw) / R**4)
    slope = np.polyfit(np.log(Rs), np.log(lower), 1)[0]
    assert slope < 4 - 0.3
    limit = 1 / math.factorial(2) * 1.0 * t**2 * CUBE_E2
    dist = np.abs(np.array(lead) - limit)
    assert (np.diff(dist) < 0).all()
