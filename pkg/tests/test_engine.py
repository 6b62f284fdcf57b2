from __future__ import annotations

import numpy as np
import pytest

from stitlab.engine import Kind, iterate, run_mnw, run_pht, section, state_at
from stitlab.geometry import Hyperplane, make_box, read_off
from stitlab.stats import identity_residuals, replication_rng


def test_reproducible(cube):
    a = run_mnw(cube, 2.0, replication_rng(5, 3))
    b = run_mnw(cube, 2.0, replication_rng(5, 3))
    assert a.summary_hash() == b.summary_hash()
    c = run_mnw(cube, 2.0, replication_rng(5, 4))
    assert a.summary_hash() != c.summary_hash()


@pytest.mark.parametrize("seed", range(8))
def test_structure(cube, seed):
    tess = run_mnw(cube, 2.5, replication_rng(seed, 0))
    assert len(tess.cells) == len(tess.facets) + 1
    assert np.all(np.diff(tess.birth_times) >= 0)
    assert all(0 < f.birth_time <= 2.5 for f in tess.facets)
    res = identity_residuals(tess)
    assert max(res.values()) <= 1e-9


def test_state_at_and_history(cube):
    tess = run_mnw(cube, 3.0, replication_rng(1, 0))
    s = float(np.median(tess.birth_times)) if tess.facets else 1.0
    k = len(state_at(tess, s))
    assert len(tess.cells_at(s)) == k + 1
    assert sum(c.polytope.content for c in tess.cells_at(s)) == pytest.approx(1.0)
    assert state_at(tess, 0.0) == []
    with pytest.raises(ValueError):
        tess.state_at(3.5)


def test_bad_time(cube):
    with pytest.raises(ValueError):
        run_mnw(cube, 0.0, replication_rng(0, 0))
    with pytest.raises(ValueError):
        run_pht(cube, -1.0, replication_rng(0, 0))


def test_planar_run():
    W = make_box(1.0, d=2)
    tess = run_mnw(W, 4.0, replication_rng(2, 0))
    assert tess.d == 2
    assert len(tess.cells) == len(tess.facets) + 1
    assert sum(c.polytope.content for c in tess.cells) == pytest.approx(1.0)


def test_pht(cube):
    tess = run_pht(cube, 3.0, replication_rng(3, 0))
    assert tess.kind is Kind.PHT
    assert sum(c.polytope.content for c in tess.cells) == pytest.approx(1.0)
    n = tess.meta["n_hyperplanes"]
    # every hyperplane hitting W contributes at least one face
    assert len(tess.facets) >= n
    # faces of the arrangement tile the hyperplane sections
    total = tess.facet_volumes[:, 2].sum() if len(tess.facets) else 0.0
    assert total == pytest.approx(sum(c.polytope.intrinsic_volume(2) for c in tess.cells) - 3.0, abs=1e-9)


def test_iterate(cube):
    rng = replication_rng(4, 0)
    frame = run_mnw(cube, 1.0, rng)
    it = iterate(frame, 1.0, rng)
    assert it.kind is Kind.ITERATED
    assert it.horizon == pytest.approx(2.0)
    assert sum(c.polytope.content for c in it.cells) == pytest.approx(1.0)
    assert len(it.cells) == len(it.facets) + 1
    assert len(it.facets) >= len(frame.facets)
    assert max(identity_residuals(it).values()) <= 1e-9
    assert iterate(frame, 0.0, rng) is frame


def test_section(cube):
    tess = run_mnw(cube, 3.0, replication_rng(6, 0))
    E = Hyperplane([0, 0, 1], 0.5)
    sec = section(tess, E)
    assert sec.d == 2
    assert sum(c.polytope.content for c in sec.cells) == pytest.approx(1.0)
    assert section(tess, Hyperplane([0, 0, 1], 5.0)).empty


def test_exports(cube, tmp_path):
    tess = run_mnw(cube, 2.0, replication_rng(7, 0))
    path = tess.write_facet_csv(tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "facet_id,birth_time,area,perimeter,n_vertices,parent_cell_id"
    assert len(lines) == len(tess.facets) + 1
    tess.write_off(tmp_path / "c.off", tmp_path / "f.off")
    assert len(read_off((tmp_path / "c.off").read_text())) == len(tess.cells)
