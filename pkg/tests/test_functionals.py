from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import CUBE_INV_R
from stitlab import theory
from stitlab.engine import CellRecord, Kind, Tessellation, run_mnw
from stitlab.functionals import (
    BoxIndicator,
    Constant,
    FunctionalSpec,
    Quadratic,
    a_phi_exact,
    a_phi_mc,
    cells_functional,
    face_measure_integral,
    rescaled_process,
    sample_uniform,
    sigma,
    sigma_path,
    time_integral,
    write_functional_csv,
)
from stitlab.geometry import make_box, make_simplex
from stitlab.measure import gamma
from stitlab.stats import estimate, replication_rng, run_replications


def one_cell(W):
    return Tessellation(W, 0.0, [], [CellRecord(0, W, 0.0)], Kind.STIT, None)


@pytest.fixture(scope="module")
def run10():
    """A realization with exactly ten facets."""
    W = make_box([1.0, 1.0, 1.0])
    for r in range(200):
        tess = run_mnw(W, 3.0, replication_rng(99, r))
        if len(tess.facets) >= 10:
            s = tess.facets[9].birth_time
            return tess, s
    raise RuntimeError("no realization with ten facets")


def test_spec_validation():
    with pytest.raises(ValueError):
        FunctionalSpec.volume(3).validate(3)
    with pytest.raises(ValueError):
        FunctionalSpec("bogus", 0).validate(3)
    with pytest.raises(ValueError):
        FunctionalSpec("weighted", 1).validate(3)
    FunctionalSpec.product(1, 2).validate(3)


def test_sigma_basic(run10):
    tess, s = run10
    assert sigma(tess, FunctionalSpec.volume(2), 0.0) == 0.0
    assert sigma(tess, FunctionalSpec.volume(0), s) == 10
    assert sigma(tess, FunctionalSpec.volume(0)) == len(tess.cells) - 1


def test_sigma_path_matches_sigma(run10):
    tess, _ = run10
    times = np.linspace(0, 3.0, 7)
    for j in range(3):
        path = sigma_path(tess, FunctionalSpec.volume(j), times)
        assert path == pytest.approx([sigma(tess, FunctionalSpec.volume(j), x) for x in times])


def test_time_integral_exact(run10):
    tess, _ = run10
    spec = FunctionalSpec.volume(1)
    # fine Riemann sum of the step function converges to the exact value
    grid = np.linspace(0, 3.0, 30001)
    vals = sigma_path(tess, spec, grid)
    assert time_integral(tess, spec) == pytest.approx(np.sum(vals[:-1]) * (grid[1] - grid[0]), rel=1e-3)


@pytest.mark.parametrize("j", range(4))
def test_fj_identity_ten_facets(run10, j):
    tess, s = run10
    W = tess.window
    lhs = cells_functional(tess, j, s)
    sj = sigma(tess, FunctionalSpec.volume(j), s) if j < 3 else 0.0
    assert lhs == pytest.approx(sj + W.intrinsic_volume(j), rel=1e-9)


@given(seed=st.integers(0, 10_000), t=st.floats(0.2, 3.0))
def test_fj_identity_property(seed, t):
    W = make_box([1.0, 0.8, 1.2])
    tess = run_mnw(W, t, replication_rng(seed, 0))
    for j in range(4):
        sj = sigma(tess, FunctionalSpec.volume(j)) if j < 3 else 0.0
        assert cells_functional(tess, j) == pytest.approx(sj + W.intrinsic_volume(j), rel=1e-9)


def test_a_phi_exact_one_cell(cube):
    tess = one_cell(cube)
    for j in range(3):
        assert a_phi_exact(tess, j) == pytest.approx(gamma(j + 1, 3) * cube.intrinsic_volume(j + 1))
    assert a_phi_exact(tess, 2) == pytest.approx(1.0)


def test_a_phi_top_order_is_volume(run10):
    tess, _ = run10
    assert a_phi_exact(tess, 2) == pytest.approx(1.0)


def test_a_phi_mc_agrees(run10):
    tess, _ = run10
    rng = replication_rng(1, 0)
    for j in range(3):
        est = a_phi_mc(tess, FunctionalSpec.volume(j), 3000, rng)
        assert abs(est.value - a_phi_exact(tess, j)) < 3 * est.se


def test_a_phi_mc_crofton_v0(cube):
    est = a_phi_mc(one_cell(cube), FunctionalSpec.volume(0), 100, replication_rng(2, 0))
    assert est.value == pytest.approx(1.5)


def test_squared_area_two_ways(cube):
    """∫ Vol_2(W ∩ H)^2 Λ(dH) by hyperplane sampling vs the pair-integral form."""
    a = a_phi_mc(one_cell(cube), FunctionalSpec.product(2, 2), 20_000, replication_rng(3, 0))
    b = theory.mean_A_surface_squared(0.0, cube, 200_000, replication_rng(3, 1))
    assert abs(a.value - b.value) < 3 * math.hypot(a.se, b.se)
    # and the quadrature oracle: (d-1)/2 * c * ∫∫ 1/r with c = 1/2
    assert abs(b.value - 0.5 * CUBE_INV_R) < 3 * b.se


def test_a_phi_mc_zero_samples(cube):
    with pytest.raises(ValueError):
        a_phi_mc(one_cell(cube), FunctionalSpec.volume(0), 0, replication_rng(0, 0))


def test_martingale_expectation(cube):
    """E[Σ_{V_j;t} - γ_{j+1} ∫_0^t Σ_{V_{j+1};s} ds - t γ_{j+1} V_{j+1}(W)] = 0."""
    t = 1.5

    def row(rng):
        tess = run_mnw(cube, t, rng, keep_history=False)
        out = []
        for j in range(2):
            g = gamma(j + 1, 3)
            out.append(
                sigma(tess, FunctionalSpec.volume(j))
                - g * time_integral(tess, FunctionalSpec.volume(j + 1))
                - t * g * cube.intrinsic_volume(j + 1)
            )
        return out

    X = run_replications(row, 1500, seed=17).values
    m, se = X.mean(0), X.std(0, ddof=1) / math.sqrt(len(X))
    assert (np.abs(m) < 3 * se).all()


def test_face_measure_total_mass(run10):
    tess, _ = run10
    one = Constant(1.0)
    assert face_measure_integral(tess, 2, one).value == pytest.approx(sigma(tess, FunctionalSpec.volume(2)))
    assert face_measure_integral(tess, 1, one).value == pytest.approx(2 * sigma(tess, FunctionalSpec.volume(1)))
    nverts = sum(len(f.facet.vertices) for f in tess.facets)
    assert face_measure_integral(tess, 0, one).value == nverts


def test_face_measure_box_sampled_vs_exact(run10):
    tess, _ = run10
    g = BoxIndicator([0.2, 0.1, 0.3], [0.7, 0.9, 0.8])
    for j in (1, 2):
        exact = face_measure_integral(tess, j, g).value
        est = face_measure_integral(tess, j, g, n=400, rng=replication_rng(4, j))
        assert abs(est.value - exact) < 3 * est.se


def test_face_measure_errors(run10):
    tess, _ = run10
    with pytest.raises(ValueError):
        face_measure_integral(tess, 3, Constant())
    with pytest.raises(ValueError):
        face_measure_integral(tess, 1, Constant(), n=0, rng=replication_rng(0, 0))
    with pytest.raises(TypeError):
        face_measure_integral(tess, 1, lambda x: x)


def test_quadratic_exact_integrals(cube, simplex):
    q = Quadratic(np.diag([1.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    assert q.integrate(cube) == pytest.approx(1 / 3)
    lin = Quadratic(np.zeros((3, 3)), [1.0, 0.0, 0.0], 2.0)
    assert lin.integrate(simplex) == pytest.approx(1 / 24 + 2 / 6)
    xy = Quadratic(np.array([[0, 0.5, 0], [0.5, 0, 0], [0, 0, 0]]), [0, 0, 0])
    assert xy.integrate(simplex) == pytest.approx(1 / 120)
    face = cube.faces(2)[0]
    assert Quadratic(np.eye(3), [0, 0, 0]).integrate(cube.faces(0)[0]) == pytest.approx(
        float(np.sum(cube.faces(0)[0].vertices ** 2))
    )
    assert Constant(2.0).integrate(face) == pytest.approx(2.0)


@given(seed=st.integers(0, 1000))
def test_quadratic_vs_sampling(seed):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(3, 3))
    q = Quadratic(Q + Q.T, rng.normal(size=3), rng.normal())
    P = make_simplex(3)
    x = sample_uniform(P, 4000, rng)
    vals = q(x) * P.content
    assert abs(vals.mean() - q.integrate(P)) < 4 * vals.std() / math.sqrt(len(vals)) + 1e-12


def test_box_indicator_exact(cube):
    g = BoxIndicator([0.25, 0.25, 0.25], [0.75, 0.75, 0.75])
    assert g.integrate(cube) == pytest.approx(0.125)
    assert g.integrate(cube.faces(2)[0]) == 0.0
    assert BoxIndicator([0.5, 0, 0], [2, 2, 2]).integrate(cube.faces(1)[0]) in (0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        BoxIndicator([1, 0, 0], [0, 1, 1])


def test_rescaled_process_centered(cube):
    X = run_replications(lambda rng: rescaled_process(cube, 1.0, [0.5, 1.0], rng).ravel(), 1500, seed=21).values
    m, se = X.mean(0), X.std(0, ddof=1) / math.sqrt(len(X))
    assert (np.abs(m) <= 3 * se + 1e-12).all()


def test_rescaled_process_surface_variance(cube):
    # R = 1: S_{V_2;1} = Σ_{V_2} - 1, variance of the total surface area at t = 1
    from oracles import CUBE_VAR

    X = run_replications(lambda rng: rescaled_process(cube, 1.0, [1.0], rng)[2], 3000, seed=22).values[:, 0]
    est = estimate(X)
    err = abs(est.var[0] - CUBE_VAR[1.0])
    assert err <= max(0.05 * CUBE_VAR[1.0], 3 * est.var_se[0])


def test_rescaled_process_grid(cube):
    with pytest.raises(ValueError):
        rescaled_process(cube, 2.0, [1.5], replication_rng(0, 0))
    with pytest.raises(ValueError):
        rescaled_process(cube, 0.5, [1.0], replication_rng(0, 0))


def test_functional_csv(tmp_path):
    p = write_functional_csv([(0, 1.0, "V2", 1.25)], tmp_path / "x.csv")
    assert p.read_text().splitlines() == ["replication_id,t,functional,value", "0,1.0,V2,1.25"]
