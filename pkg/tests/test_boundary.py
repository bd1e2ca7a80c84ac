from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdlab.regions.boundary import (
    BASE_COLUMNS,
    Corner,
    assemble_region,
    boundary_distance,
    boundary_rows,
    envelope_sup_gap,
    lower_envelope,
    lower_hull,
    read_region_csv,
    region_contains,
    render_csv,
    render_provenance,
)
from rdlab.regions.schemes import RDTuple
from rdlab.textio import fmt_float


def pts(*xy, d=(0.0, 0.0)):
    return [RDTuple(a, b, *d) for a, b in xy]


def test_single_and_dominated():
    b = assemble_region(pts((1, 1)), (0, 0))
    assert b.points.tolist() == [[1, 1]]
    b = assemble_region(pts((1, 1), (2, 2)), (0, 0))
    assert b.points.tolist() == [[1, 1]]
    b = assemble_region(pts((1, 1), (1, 1)), (0, 0))
    assert len(b) == 1


def test_distortion_filter_and_errors():
    corners = [RDTuple(0, 0, 0.5, 0.5), RDTuple(1, 1, 0.1, 0.1)]
    assert assemble_region(corners, (0.2, 0.2)).points.tolist() == [[1, 1]]
    with pytest.raises(ValueError, match="no corner meets"):
        assemble_region(corners, (0.05, 0.05))
    with pytest.raises(ValueError, match="no corners"):
        assemble_region([], (0, 0))


def test_hull_drops_concave_point():
    b = assemble_region(pts((0, 2), (1, 1.5), (2, 0)), (0, 0), hull=True)
    assert b.points.tolist() == [[0, 2], [2, 0]]
    s = assemble_region(pts((0, 2), (1, 1.5), (2, 0)), (0, 0), hull=False)
    assert len(s) == 3 and not s.hulled and b.hulled


def test_swap_merges_exchanged_rates():
    b = assemble_region(pts((0, 2)), (0.1, 0.2), swapped=[RDTuple(0, 2, 0.2, 0.1)])
    assert sorted(b.points.tolist()) == [[0, 2], [2, 0]]
    assert any(c.provenance.get("swapped") for c in b.corners)


point_sets = st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=25)


@settings(max_examples=150, deadline=None)
@given(point_sets)
def test_assembly_invariants(xy):
    corners = pts(*xy)
    b = assemble_region(corners, (0, 0))
    p = b.points
    assert np.all(np.diff(p[:, 0]) > 0)
    assert np.all(np.diff(p[:, 1]) < 0)
    for i in range(1, len(p) - 1):
        cross = (p[i, 0] - p[i - 1, 0]) * (p[i + 1, 1] - p[i - 1, 1]) \
            - (p[i, 1] - p[i - 1, 1]) * (p[i + 1, 0] - p[i - 1, 0])
        assert cross > 0
    again = assemble_region(list(b.corners), (0, 0))
    assert np.array_equal(again.points, p)
    raw = assemble_region(corners, (0, 0), hull=False)
    ok, worst = region_contains(b, raw, 1e-12)
    assert ok, worst
    for a, c in xy:
        assert lower_envelope(p, a) <= c + 1e-9


def test_contains_self_and_violation():
    b = assemble_region(pts((0, 2), (1, 0.5), (3, 0)), (0, 0))
    assert region_contains(b, b, 0.0) == (True, 0.0)
    inner = assemble_region(pts((0.5, 0.5)), (0, 0))
    ok, worst = region_contains(b, inner, 0.0)
    # envelope at r1 = 0.5 + t is 1.25 - 1.5 t until r1 = 1; diagonal hits at t = 0.3
    assert not ok and worst == pytest.approx(0.3, abs=1e-9)
    assert region_contains(b, inner, 0.31)[0]
    with pytest.raises(ValueError, match="distortion mismatch"):
        region_contains(b, assemble_region(pts((1, 1), d=(0.1, 0)), (0.1, 0)))


def test_envelope_and_distances():
    b = assemble_region(pts((0, 2), (2, 0)), (0, 0))
    assert lower_envelope(b.points, 1.0) == pytest.approx(1.0)
    assert np.isinf(lower_envelope(b.points, -0.1))
    assert lower_envelope(b.points, 5.0) == 0.0
    c = assemble_region(pts((0, 2.5), (2, 0.5)), (0, 0))
    assert envelope_sup_gap(b, c, np.linspace(0, 2, 11)) == pytest.approx(0.5)
    assert boundary_distance(c, b) == 0.0
    # (2, 0) projects past c's last vertex, so its nearest point is (2, 0.5)
    assert boundary_distance(b, c) == pytest.approx(0.5, rel=1e-12)


def test_boundary_distance_exact():
    outer = assemble_region(pts((0, 2), (2, 0)), (0, 0))
    inner = assemble_region(pts((0.5, 0.5)), (0, 0))
    # distance from (0.5, 0.5) to the line r1 + r2 = 2
    assert boundary_distance(inner, outer) == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_csv_round_trip(tmp_path):
    corners = [Corner(RDTuple(0.1, 0.9, 0, 0.15), {"scheme": "boho-flmc", "n": 1200, "tau": 0.07,
                                                   "epsilon": 1e-4, "delta": 0.3, "delta1": 0.1}),
               Corner(RDTuple(0.5, 0.3, 0, 0.14), {"scheme": "boho-flmc", "n": 1500, "tau": 0.05,
                                                   "epsilon": 1e-4, "delta": 0.2, "delta1": 0.12})]
    b = assemble_region(corners, (0, 0.15))
    extra = ("epsilon", "delta", "delta1")
    rows, prov = boundary_rows(b, "boho", extra=extra)
    path = tmp_path / "r.csv"
    path.write_text(render_csv(rows, extra))
    back = read_region_csv(str(path))
    assert list(back[0]) == BASE_COLUMNS + list(extra)
    assert [float(r["r1_bits"]) for r in back] == b.points[:, 0].tolist()
    assert back[0]["provenance_id"] in prov
    text = render_provenance(prov, "r.csv.manifest")
    assert text.startswith("manifest = r.csv.manifest")
    assert f"p00001.delta = {fmt_float(0.3)}" in text


def test_lower_hull_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        xy = rng.random((12, 2))
        hull = lower_hull([Corner(RDTuple(a, b, 0, 0)) for a, b in xy])
        hp = np.array([[c.rd.r1, c.rd.r2] for c in hull])
        # every input lies on or above each hull edge line (brute-force support check)
        for i in range(len(hp) - 1):
            (x0, y0), (x1, y1) = hp[i], hp[i + 1]
            for a, b in xy:
                if x0 <= a <= x1:
                    assert b >= y0 + (y1 - y0) * (a - x0) / (x1 - x0) - 1e-12
