"""Replication harness, estimators, comparisons and the gated experiment suites."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import theory
from .engine import iterate, run_mnw, run_pht, section
from .functionals import (
    BoxIndicator,
    FunctionalSpec,
    TestFunction,
    a_phi_mc,
    cells_functional,
    facet_weights,
    rescaled_process,
    sigma_path,
)
from .geometry import Hyperplane, Polytope
from .measure import gamma, sample_hitting_hyperplanes
from .engine import CellRecord, Kind, Tessellation

SCHEMA_VERSION = 1
K_SIGMA = 3.0


def replication_rng(seed: int, r: int) -> np.random.Generator:
    """Stream of replication ``r``; depends only on ``(seed, r)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(r)]))


# ---------------------------------------------------------------------------
# replications


@dataclass
class ReplicationPlan:
    n_reps: int
    seed: int
    window: Polytope
    t: float
    R_list: tuple[float, ...] = (1.0,)
    functionals: tuple[int, ...] | None = None  # orders j of Σ_{V_j}; default all

    def __post_init__(self):
        if self.n_reps < 2:
            raise ValueError("a plan needs at least two replications")

    @property
    def d(self) -> int:
        return self.window.ambient_dim

    def row(self, r: int) -> np.ndarray:
        return sigma_row(self.window, self.t, self.functionals, replication_rng(self.seed, r))


def sigma_row(W: Polytope, t: float, orders, rng) -> np.ndarray:
    tess = run_mnw(W, t, rng, keep_history=False)
    orders = range(W.ambient_dim) if orders is None else orders
    V = tess.facet_volumes
    return np.array([V[:, j].sum() if len(V) else 0.0 for j in orders])


@dataclass
class SampleMatrix:
    values: np.ndarray  # (n_done, k)
    n_requested: int
    partial: bool = False
    runtime: float = 0.0

    @property
    def n(self) -> int:
        return len(self.values)


def _call_row(fn, seed, r):
    return np.atleast_1d(np.asarray(fn(replication_rng(seed, r)), dtype=float))


def run_replications(
    fn: Callable[[np.random.Generator], np.ndarray] | ReplicationPlan,
    n_reps: int | None = None,
    seed: int = 0,
    threads: int = 1,
    time_budget: float | None = None,
) -> SampleMatrix:
    """Evaluate ``fn(rng_r)`` for ``r = 0..n_reps-1``.

    Rows are ordered by ``r`` whatever the worker count.  When
    ``time_budget`` (seconds) runs out the rows done so far are returned with
    ``partial=True``.
    """
    if isinstance(fn, ReplicationPlan):
        plan = fn
        fn = partial(sigma_row, plan.window, plan.t, plan.functionals)
        n_reps, seed = plan.n_reps, plan.seed
    if n_reps is None or n_reps < 1:
        raise ValueError("n_reps must be positive")
    start = time.monotonic()
    rows = []
    partial_flag = False
    if threads <= 1:
        for r in range(n_reps):
            if time_budget is not None and time.monotonic() - start > time_budget:
                partial_flag = True
                break
            rows.append(_call_row(fn, seed, r))
    else:
        chunk = max(1, threads * 4)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for lo in range(0, n_reps, chunk):
                if time_budget is not None and time.monotonic() - start > time_budget:
                    partial_flag = True
                    break
                rs = range(lo, min(lo + chunk, n_reps))
                rows.extend(pool.map(partial(_call_row, fn, seed), rs))
    values = np.vstack(rows) if rows else np.zeros((0, 0))
    return SampleMatrix(values, n_reps, partial_flag, time.monotonic() - start)


# ---------------------------------------------------------------------------
# estimators


@dataclass
class RunningMoments:
    """Mergeable count/mean/M2 accumulator."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        n = self.n + other.n
        if n == 0:
            return RunningMoments()
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta**2 * self.n * other.n / n
        return RunningMoments(n, mean, m2)

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan


@dataclass
class Estimate:
    n: int
    mean: np.ndarray
    mean_se: np.ndarray
    var: np.ndarray
    var_se: np.ndarray
    cov: np.ndarray
    cov_se: np.ndarray

    def corr(self) -> np.ndarray:
        sd = np.sqrt(np.diag(self.cov))
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.cov / np.outer(sd, sd)


def estimate(samples) -> Estimate:
    """Means, unbiased variances and covariances with standard errors.

    The variance SE uses ``(μ4 - (n-3)/(n-1) σ⁴) / n``, the covariance SE the
    delta-method ``(E[(x-x̄)²(y-ȳ)²] - c²) / n``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    mean = x.mean(0)
    c = x - mean
    cov = c.T @ c / (n - 1)
    var = np.diag(cov).copy()
    mu4 = (c**4).mean(0)
    sig2 = (c**2).mean(0) * n / (n - 1)
    var_se = np.sqrt(np.maximum(mu4 - (n - 3) / (n - 1) * sig2**2, 0.0) / n)
    m22 = np.einsum("ia,ib->ab", c**2, c**2) / n
    cov_se = np.sqrt(np.maximum(m22 - cov**2, 0.0) / n)
    np.fill_diagonal(cov_se, var_se)
    return Estimate(n, mean, np.sqrt(var / n), var, var_se, cov, cov_se)


def excess_kurtosis(x) -> float:
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    return float((c**4).mean() / (c**2).mean() ** 2 - 3.0)


@dataclass
class Verdict:
    name: str
    estimate: float
    se: float
    theory: float
    theory_se: float = 0.0
    z: float = math.nan
    rel_err: float = math.nan
    passed: bool = True
    gated: bool = True
    mode: str = "z"
    tolerance: float = K_SIGMA
    note: str = ""

    def row(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in asdict(self).items()}


def compare(
    name: str,
    est: float,
    se: float,
    theory_value: float,
    theory_se: float = 0.0,
    k_sigma: float | None | str = "default",
    rel_tol: float | None = None,
    note: str = "",
) -> Verdict:
    """Pass iff ``|z| <= k_sigma`` or the relative error is within ``rel_tol``.

    Passing ``k_sigma=None`` gives a purely relative gate; the default is
    the module-wide ``K_SIGMA`` (see ``set_k_sigma``).
    """
    if k_sigma == "default":
        k_sigma = K_SIGMA
    combined = math.hypot(se, theory_se)
    diff = est - theory_value
    if combined > 0:
        z = diff / combined
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    rel = abs(diff) / abs(theory_value) if theory_value != 0 else (0.0 if diff == 0 else math.inf)
    ok_z = k_sigma is not None and abs(z) <= k_sigma
    ok_rel = rel_tol is not None and rel <= rel_tol
    mode = "+".join(m for m, on in (("z", k_sigma is not None), ("rel", rel_tol is not None)) if on)
    tol = rel_tol if k_sigma is None else k_sigma
    return Verdict(name, float(est), float(se), float(theory_value), float(theory_se), float(z), float(rel),
                   bool(ok_z or ok_rel), True, mode, float(tol), note)


def set_k_sigma(k: float) -> None:
    global K_SIGMA
    if not k > 0:
        raise ValueError("k_sigma must be positive")
    K_SIGMA = float(k)


def info(name: str, value: float, se: float = math.nan, note: str = "") -> Verdict:
    """Reported, ungated row."""
    return Verdict(name, float(value), float(se), math.nan, passed=True, gated=False, mode="none", note=note)


def check(name: str, ok: bool, value: float = math.nan, note: str = "") -> Verdict:
    """Boolean gate."""
    return Verdict(name, float(value), 0.0, math.nan, passed=bool(ok), gated=True, mode="bool", tolerance=0.0, note=note)


@dataclass
class ExperimentReport:
    name: str
    rows: list[Verdict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.gated)

    def extend(self, rows: Sequence[Verdict]) -> "ExperimentReport":
        self.rows.extend(rows)
        return self

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "passed": self.passed,
            "meta": self.meta,
            "rows": [r.row() for r in self.rows],
            "tables": self.tables,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    CSV_COLUMNS = ("suite", "name", "estimate", "se", "theory", "theory_se", "z", "rel_err", "passed", "gated", "mode", "tolerance", "note")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            d = r.row()
            w.writerow([self.name] + [d[k] for k in self.CSV_COLUMNS[1:]])
        return buf.getvalue()

    def save(self, out_dir, fmt: str = "json") -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.name}.{fmt}"
        path.write_text(self.to_json() if fmt == "json" else self.to_csv())
        return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------------------
# per-replication workers (top level so that they pickle)


def _w_sigma_path(W, times, rng):
    tess = run_mnw(W, float(max(times)), rng, keep_history=False)
    return np.concatenate([sigma_path(tess, FunctionalSpec.volume(j), times) for j in range(W.ambient_dim)])


def _w_cells_stit(W, t, rng):
    tess = run_mnw(W, t, rng, keep_history=False)
    return [len(tess.cells), cells_functional(tess, 1)]


def _w_cells_pht(W, t, rng):
    tess = run_pht(W, t, rng, faces=False)
    return [len(tess.cells), cells_functional(tess, 1)]


def _w_pht_faces(W, s, rng):
    tess = run_pht(W, s, rng, faces=True)
    return [len(tess.facets)]


def _w_facets_stit(W, t, rng):
    return [len(run_mnw(W, t, rng, keep_history=False).facets)]


def _w_section(W, t, E, rng):
    tess = section(run_mnw(W, t, rng, keep_history=False), E)
    if tess.empty:
        return [0.0, 0.0]
    area = tess.window.content
    return [tess.facet_volumes[:, 1].sum() / area if len(tess.facets) else 0.0, area]


def _w_planar(W2, t, rng):
    tess = run_mnw(W2, t, rng, keep_history=False)
    return [tess.facet_volumes[:, 1].sum() / W2.content if len(tess.facets) else 0.0]


def _w_iterated(W, t1, t2, rng):
    tess = iterate(run_mnw(W, t1, rng), t2, rng)
    V = tess.facet_volumes
    return [V[:, W.ambient_dim - 1].sum() if len(V) else 0.0]


def _w_surface(W, t, rng):
    V = run_mnw(W, t, rng, keep_history=False).facet_volumes
    return [V[:, W.ambient_dim - 1].sum() if len(V) else 0.0]


def _w_rescaled(W, R, t_grid, shift, rng):
    return rescaled_process(W, R, t_grid, rng, shift=shift).ravel()


def _w_face_weights(W, t, g, h, rng):
    tess = run_mnw(W, t, rng, keep_history=False)
    return [facet_weights(tess, g).sum(), facet_weights(tess, h).sum()]


def _w_pht_face_products(W, s, g, h, rng):
    tess = run_pht(W, s, rng, faces=True)
    if not tess.facets:
        return [0.0]
    return [float(facet_weights(tess, g) @ facet_weights(tess, h))]


# ---------------------------------------------------------------------------
# gated suites


def suite_mean(W, t=1.5, n_reps=2000, seed=1, threads=1) -> list[Verdict]:
    d = W.ambient_dim
    S = run_replications(partial(_w_sigma_path, W, (t,)), n_reps, seed, threads)
    est = estimate(S.values)
    return [
        compare(f"mean Sigma_V{j} t={t}", est.mean[j], est.mean_se[j], theory.mean_sigma(j, t, W))
        for j in range(d)
    ]


def suite_var(W, t_list=(0.75, 1.5), n_reps=5000, mc_pairs=1_000_000, seed=2, threads=1, rel_tol=0.05) -> list[Verdict]:
    d = W.ambient_dim
    times = tuple(sorted(t_list))
    S = run_replications(partial(_w_sigma_path, W, times), n_reps, seed, threads)
    surf = S.values[:, (d - 1) * len(times):]
    rng = replication_rng(seed, 10**9)
    rows = []
    for k, t in enumerate(times):
        est = estimate(surf[:, k])
        ref = theory.var_sigma_dminus1(t, W, mc_pairs, rng)
        rows.append(compare(f"var Sigma_V{d - 1} t={t}", est.var[0], est.var_se[0], ref.value, ref.se, rel_tol=rel_tol))
    return rows


def crofton_estimates(W, n_planes=100_000, seed=3) -> list[tuple[int, float, float, float]]:
    """``(j, estimate, se, γ_{j+1} V_{j+1}(W))`` from one shared hyperplane sample."""
    d = W.ambient_dim
    one = Tessellation(W, 0.0, [], [CellRecord(0, W, 0.0)], Kind.STIT, None)
    rng = replication_rng(seed, 0)
    out = []
    from .functionals import section_volumes
    from .measure import lambda_hitting

    normals, offsets = sample_hitting_hyperplanes(W, n_planes, rng)
    _, pi, vols = section_volumes([W], normals, offsets)
    lam = lambda_hitting(W)
    for j in range(d):
        per = np.zeros(n_planes)
        np.add.at(per, pi, vols[:, j])
        out.append((j, lam * per.mean(), lam * per.std(ddof=1) / math.sqrt(n_planes), gamma(j + 1, d) * W.intrinsic_volume(j + 1)))
    del one
    return out


def suite_crofton(windows: dict, n_planes=100_000, seed=3, rel_tol=0.01) -> list[Verdict]:
    rows = []
    for label, W in windows.items():
        for j, est, se, ref in crofton_estimates(W, n_planes, seed):
            rows.append(compare(f"crofton {label} j={j}", est, se, ref, k_sigma=None, rel_tol=rel_tol,
                                note=f"ratio={est / ref:.5f}"))
    return rows


def suite_chord(mc_pairs=1_000_000, seed=4, rel_tol=0.01) -> list[Verdict]:
    from .geometry import make_box

    rng = replication_rng(seed, 0)
    cube = make_box([1.0, 1.0, 1.0])
    ball = theory.Ball(3)
    golden_ball = 4 * math.pi**2
    rows = []
    b = theory.chord_power(ball, mc_pairs, rng)
    rows.append(compare("chord I2(B3) pairs", b.value, b.se, golden_ball, k_sigma=None, rel_tol=rel_tol))
    bl = theory.chord_power(ball, mc_pairs, rng, method="lines")
    rows.append(compare("chord I2(B3) lines", bl.value, bl.se, golden_ball, k_sigma=None, rel_tol=rel_tol))
    rows.append(compare("chord I2(B3) closed form", theory.chord_power_ball(3), 0.0, golden_ball, k_sigma=None, rel_tol=1e-12))
    c = theory.chord_power(cube, mc_pairs, rng)
    rows.append(compare("chord I2(cube) pairs", c.value, c.se, 5.6337, k_sigma=None, rel_tol=rel_tol))
    e2 = theory.energy_E2(cube, mc_pairs, rng)
    cl = theory.chord_power(cube, mc_pairs, rng, method="lines")
    rows.append(compare("E2(cube) vs I2(cube) lines", e2.value, e2.se, cl.value, cl.se))
    return rows


def suite_pht(W, t=1.5, n_reps=2000, seed=5, threads=1) -> list[Verdict]:
    a = estimate(run_replications(partial(_w_cells_stit, W, t), n_reps, seed, threads).values)
    b = estimate(run_replications(partial(_w_cells_pht, W, t), n_reps, seed + 1, threads).values)
    return [
        compare(f"cells STIT vs PHT t={t}", a.mean[0], a.mean_se[0], b.mean[0], b.mean_se[0]),
        compare(f"sum V1(cells) STIT vs PHT t={t}", a.mean[1], a.mean_se[1], b.mean[1], b.mean_se[1]),
    ]


def pht_mixture(worker, W, t, grid_points=16, reps_per_point=500, seed=0, threads=1, extra=()):
    """``∫_0^t (1/s) E[worker(PHT(s))] ds`` by Gauss quadrature with independent grid replications."""
    s, w = theory.gauss_nodes(t, grid_points)
    means = np.empty(len(s))
    ses = np.empty(len(s))
    for k, sk in enumerate(s):
        vals = run_replications(partial(worker, W, float(sk), *extra), reps_per_point, seed * 1000 + k, threads).values[:, 0]
        means[k] = vals.mean()
        ses[k] = vals.std(ddof=1) / math.sqrt(len(vals))
    coef = w / s
    return float(coef @ means), float(math.sqrt(((coef * ses) ** 2).sum())), s, means


def suite_facet_mixture(W, t=1.5, n_reps=2000, grid_points=16, reps_per_point=500, seed=6, threads=1) -> list[Verdict]:
    lhs = run_replications(partial(_w_facets_stit, W, t), n_reps, seed, threads).values[:, 0]
    rhs, rhs_se, _, _ = pht_mixture(_w_pht_faces, W, t, grid_points, reps_per_point, seed + 1, threads)
    return [
        compare(f"facets STIT vs PHT mixture t={t}", lhs.mean(), lhs.std(ddof=1) / math.sqrt(len(lhs)), rhs, rhs_se),
        compare(f"PHT mixture vs exact facet mean t={t}", rhs, rhs_se, theory.mean_sigma(0, t, W)),
    ]


def suite_section(W, t=1.5, n_reps=2000, seed=7, threads=1, plane: Hyperplane | None = None) -> list[Verdict]:
    if plane is None:
        c = W.centroid
        plane = Hyperplane(np.array([0.0, 0.0, 1.0]), float(c[2]))
    sec = run_replications(partial(_w_section, W, t, plane), n_reps, seed, threads).values
    from .geometry.polytope import section as cut

    W2 = cut(W, plane).intrinsic()
    t2 = gamma(2, 3) * t
    pl = run_replications(partial(_w_planar, W2, t2), n_reps, seed + 1, threads).values[:, 0]
    a = sec[:, 0]
    return [
        compare(f"section edge intensity vs planar STIT at gamma2*t", a.mean(), a.std(ddof=1) / math.sqrt(len(a)),
                pl.mean(), pl.std(ddof=1) / math.sqrt(len(pl))),
        compare("section edge intensity vs pi t/4", a.mean(), a.std(ddof=1) / math.sqrt(len(a)), t2),
    ]


def suite_iterate(W, t1=0.75, t2=0.75, n_reps=2000, seed=8, threads=1) -> list[Verdict]:
    it = estimate(run_replications(partial(_w_iterated, W, t1, t2), n_reps, seed, threads).values)
    dr = estimate(run_replications(partial(_w_surface, W, t1 + t2), n_reps, seed + 1, threads).values)
    d = W.ambient_dim
    return [
        compare(f"iterated mean Sigma_V{d - 1}", it.mean[0], it.mean_se[0], theory.mean_sigma(d - 1, t1 + t2, W)),
        compare(f"iterated var vs direct var Sigma_V{d - 1}", it.var[0], it.var_se[0], dr.var[0], dr.var_se[0]),
    ]


def suite_scaling(W, t=2.0, n_reps=2000, seed=9, threads=1) -> list[Verdict]:
    d = W.ambient_dim
    a = run_replications(partial(_w_surface, W, t), n_reps, seed, threads).values[:, 0]
    b = run_replications(partial(_w_surface, W.scaled(t), 1.0), n_reps, seed + 1, threads).values[:, 0]
    b = b / t ** (d - 1)
    ea, eb = estimate(a), estimate(b)
    m2a, m2b = a**2, b**2
    se = lambda x: x.std(ddof=1) / math.sqrt(len(x))  # noqa: E731
    return [
        compare(f"scaling first moment t={t}", ea.mean[0], ea.mean_se[0], eb.mean[0], eb.mean_se[0]),
        compare(f"scaling second moment t={t}", m2a.mean(), se(m2a), m2b.mean(), se(m2b)),
    ]


def identity_residuals(tess: Tessellation) -> dict[str, float]:
    """Largest relative residuals of the exact per-realization identities."""
    W = tess.window
    d = W.ambient_dim
    res = {}
    vol = sum(c.polytope.content for c in tess.cells)
    res["volume_partition"] = abs(vol - W.content) / W.content
    V = tess.facet_volumes
    worst = 0.0
    for j in range(d + 1):
        lhs = cells_functional(tess, j)
        rhs = (V[:, j].sum() if (j < d and len(V)) else 0.0) + W.intrinsic_volume(j)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    res["F_j"] = worst
    if d == 3:
        res["euler"] = float(max([abs(c.polytope.euler_characteristic() - 2) for c in tess.cells] + [0]))
    res["cells_minus_facets"] = float(abs(len(tess.cells) - len(tess.facets) - 1))
    if tess.history is not None:
        by_id = {c.cell_id: c.polytope for c in tess.history}
        worst = 0.0
        for f in tess.facets:
            p = by_id[f.parent_cell_id]
            a, b = (by_id[k] for k in f.child_ids)
            for j in range(d + 1):
                lhs = p.intrinsic_volume(j) + (f.facet.intrinsic_volume(j) if j < d else 0.0)
                rhs = a.intrinsic_volume(j) + b.intrinsic_volume(j)
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        res["valuation"] = worst
    return res


def suite_identities(W, t=1.5, n_reps=50, seed=10, tol=1e-9) -> list[Verdict]:
    worst: dict[str, float] = {}
    for r in range(n_reps):
        tess = run_mnw(W, t, replication_rng(seed, r))
        for k, v in identity_residuals(tess).items():
            worst[k] = max(worst.get(k, 0.0), v)
    return [check(f"identity {k}", v <= tol, v) for k, v in worst.items()]


# ---------------------------------------------------------------------------
# CLT sweeps and asymptotic coefficients


def clt_sweep(
    W,
    t_grid=(1.0,),
    R_list=(1, 2, 4, 8),
    n_reps=1000,
    seed=11,
    threads=1,
    mc_pairs=1_000_000,
    corr_min=0.9,
    ratio_tol=0.10,
    var_tol=0.10,
) -> ExperimentReport:
    d = W.ambient_dim
    if d != 3:
        raise ValueError("clt_sweep is implemented for d = 3")
    if list(R_list) != sorted(R_list):
        raise ValueError("R_list must be increasing")
    if n_reps < 10:
        raise ValueError("too few replications for covariance standard errors")
    t_grid = tuple(float(x) for x in t_grid)
    if 1.0 not in t_grid:
        t_grid = t_grid + (1.0,)
    i1 = t_grid.index(1.0)
    nt = len(t_grid)
    rep = ExperimentReport("clt", meta=dict(seed=seed, n_reps=n_reps, R_list=list(R_list), t_grid=list(t_grid),
                                            mc_pairs=mc_pairs, time_shift="log(R)/R"))
    e2 = theory.energy_E2(W, mc_pairs, replication_rng(seed, 10**9))
    target = (d - 1) / 2 * e2.value
    corr_tab, ratio_tab, corrs = {}, {}, []
    last = None
    for R in R_list:
        S = run_replications(partial(_w_rescaled, W, float(R), t_grid, True), n_reps, seed + int(R), threads).values
        S = S.reshape(len(S), d, nt)
        at1 = S[:, :, i1]
        est = estimate(at1)
        C = est.corr()
        corr_tab[str(R)] = C.tolist()
        c12 = C[d - 2, d - 1]
        corrs.append(c12)
        rep.rows.append(info(f"corr(V{d - 2},V{d - 1}) R={R}", c12))
        sd = np.sqrt(est.var)
        ratios = {k: sd[d - 1 - k] / sd[d - 1] for k in range(1, d)}
        ratio_tab[str(R)] = {str(k): v for k, v in ratios.items()}
        for k, v in ratios.items():
            rep.rows.append(info(f"sd ratio k={k} R={R}", v, note=f"limit={theory.limit_coeff(k, 1.0, d):.6f}"))
        rep.rows.append(info(f"var S_V{d - 1} R={R}", est.var[d - 1], est.var_se[d - 1]))
        rep.rows.append(info(f"excess kurtosis S_V{d - 1} R={R}", excess_kurtosis(at1[:, d - 1])))
        if nt > 1:
            sup = np.abs(S[:, d - 1, :]).max(axis=1)
            rep.rows.append(info(f"mean sup_t |S_V{d - 1}| R={R}", sup.mean(), sup.std(ddof=1) / math.sqrt(len(sup))))
        last = (R, est, ratios, S)
    rep.tables["correlation"] = corr_tab
    rep.tables["sd_ratio"] = ratio_tab
    rep.rows.append(check(f"corr(V{d - 2},V{d - 1}) nondecreasing in R", all(np.diff(corrs) >= 0), corrs[-1]))
    rep.rows.append(check(f"corr(V{d - 2},V{d - 1}) >= {corr_min} at R={R_list[-1]}", corrs[-1] >= corr_min, corrs[-1]))
    R, est, ratios, _ = last
    rep.rows.append(compare(f"sd ratio k=1 at R={R}", ratios[1], math.nan, theory.limit_coeff(1, 1.0, d),
                            k_sigma=None, rel_tol=ratio_tol))
    rep.rows.append(compare(f"var S_V{d - 1} at R={R} vs (d-1)/2 E2", est.var[d - 1], est.var_se[d - 1], target, e2.se,
                            k_sigma=None, rel_tol=var_tol))
    return rep


def variance_coefficient_sweep(
    W, t=1.0, R_list=(1, 2, 4, 8), n_reps=1000, seed=12, threads=1, mc_pairs=1_000_000, rel_tol=0.15, k=1
) -> ExperimentReport:
    """``Var(Σ_{V_{d-1-k}; t}(R W)) / R^{2(d-1)}`` against its asymptotic coefficient."""
    d = W.ambient_dim
    rep = ExperimentReport("variance_coefficient", meta=dict(seed=seed, n_reps=n_reps, R_list=list(R_list), t=t,
                                                             mc_pairs=mc_pairs, time_shift="none"))
    chord = theory.chord_power(W, mc_pairs, replication_rng(seed, 10**9))
    target = theory.asymptotic_cov(k, k, t, W, 1.0, chord=chord.value)
    target_se = target * chord.se / chord.value
    ratios, dist = [], []
    for R in R_list:
        S = run_replications(partial(_w_rescaled, W, float(R), (t,), False), n_reps, seed + int(R), threads).values
        est = estimate(S[:, d - 1 - k])
        # the rescaled values are already divided by R^{d-1}
        rep.rows.append(info(f"Var/R^{2 * (d - 1)} R={R}", est.var[0], est.var_se[0], note=f"target={target:.6f}"))
        ratios.append(est.var[0] / target)
        dist.append(abs(est.var[0] - target))
        last = (R, est)
    rep.tables["ratio_to_asymptote"] = {str(R): r for R, r in zip(R_list, ratios)}
    rep.rows.append(check("approaches asymptote monotonically", all(np.diff(dist) <= 0), ratios[-1]))
    R, est = last
    rep.rows.append(compare(f"Var/R^{2 * (d - 1)} at R={R}", est.var[0], est.var_se[0], target, target_se,
                            k_sigma=None, rel_tol=rel_tol,
                            note="slow convergence: corrections are O(R^-1 log R) relative"))
    return rep


# ---------------------------------------------------------------------------
# face-measure covariance


class SupportError(ValueError):
    pass


def check_support(g: TestFunction, W: Polytope, rng, n: int = 2000) -> None:
    box = g.support_box()
    if box is None:
        raise SupportError("test function support is unbounded")
    lo, hi = box
    body = theory.PolytopeBody(W)
    corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(len(lo), -1).T
    pts = np.vstack([corners, lo + (hi - lo) * rng.random((n, len(lo)))])
    slack = body.b[None, :] - pts @ body.N.T
    if not (slack > 0).all():
        raise SupportError(f"support box [{lo}, {hi}] is not inside the window interior")


def face_measure_cov_experiment(
    W,
    t: float,
    g: TestFunction,
    h: TestFunction,
    n_reps: int = 2000,
    pht_grid: int = 16,
    pht_reps: int = 500,
    seed: int = 13,
    threads: int = 1,
) -> ExperimentReport:
    rng = replication_rng(seed, 10**9)
    check_support(g, W, rng)
    check_support(h, W, rng)
    rep = ExperimentReport("facecov", meta=dict(seed=seed, n_reps=n_reps, t=t, pht_grid=pht_grid, pht_reps=pht_reps))
    X = run_replications(partial(_w_face_weights, W, t, g, h), n_reps, seed, threads).values
    est = estimate(X)
    lhs, lhs_se = est.cov[0, 1], est.cov_se[0, 1]
    rhs, rhs_se, s, means = pht_mixture(_w_pht_face_products, W, t, pht_grid, pht_reps, seed + 1, threads, extra=(g, h))
    rep.tables["pht_grid"] = {"s": s.tolist(), "mean": means.tolist()}
    rep.rows.append(info("STIT mean <g,V>", est.mean[0], est.mean_se[0]))
    rep.rows.append(compare("Cov(<g,V>,<h,V>) STIT vs PHT mixture", lhs, lhs_se, rhs, rhs_se))
    return rep


def default_box(W: Polytope, frac: float = 0.5) -> BoxIndicator:
    lo, hi = W.vertices.min(0), W.vertices.max(0)
    c, half = (lo + hi) / 2, (hi - lo) * frac / 2
    return BoxIndicator(c - half, c + half)
