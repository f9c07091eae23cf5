import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from saucebot import curves, dataset, grid, lineart, pipeline
from saucebot.config import DEFAULT_CONFIG as CFG
from saucebot.errors import DomainError, FormatError

from conftest import SAMPLE_DRAWING

SVG_NS = "{http://www.w3.org/2000/svg}"
GRID = grid.build_grid(CFG)
W = np.linspace(5, 20, 10)
WINDOW = CFG.window_end_s - CFG.window_start_s


def budget_prediction(budget_cm, thickness=10.0):
    """Constant-flow curves whose planned arclength per squeeze is ``budget_cm``."""
    stacking = curves.fit_spline(W, 0.1 * (W / 10) ** 2, curves.STACKING)
    q = stacking(thickness) * budget_cm / WINDOW
    t = np.concatenate([[0.0], CFG.flow_knot_times])
    return pipeline.Prediction(curves.fit_spline(t, np.full(len(t), q), curves.FLOW), stacking)


def drawing(*polys):
    return lineart.parse_drawing({"polylines": [
        {"liquid": liq, "thickness_mm": th, "points": pts} for liq, th, pts in polys
    ]})


def truth_preds(d, fill=CFG.draw_fill_ml):
    return {name: pipeline.truth_prediction(GRID.liquid(name), fill) for name in d.liquids}


def test_load_single_segment(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"polylines": [{"liquid": "test-1", "thickness_mm": 8, "points": [[0, 0], [10, 0]]}]}))
    d = lineart.load_drawing(path)
    assert len(d.polylines) == 1
    assert d.polylines[0].length_cm == pytest.approx(10.0)


def test_duplicate_points_collapse_with_warning(caplog):
    d = drawing(("test-1", 8, [[0, 0], [0, 0], [3, 4], [3, 4]]))
    assert d.polylines[0].points.shape == (2, 2)
    assert "duplicate" in caplog.text


def test_load_errors(tmp_path):
    with pytest.raises(DomainError, match="empty drawing"):
        lineart.parse_drawing({"polylines": []})
    with pytest.raises(DomainError):
        drawing(("test-1", 25, [[0, 0], [1, 0]]))
    with pytest.raises(DomainError):
        drawing(("test-1", 8, [[0, 0]]))
    with pytest.raises(FormatError):
        lineart.parse_drawing({"lines": []})
    with pytest.raises(FormatError):
        drawing(("test-1", 8, [[0, 0, 1], [1, 0, 1]]))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(FormatError):
        lineart.load_drawing(bad)


def test_short_stroke_single_cycle():
    d = drawing(("test-2", 10, [[0, 0], [10, 0]]))
    traj = lineart.plan_trajectory(d, truth_preds(d))
    assert len(traj.strokes) == 1


def test_long_stroke_splits_on_budget():
    d = drawing(("a", 10, [[0, 0], [80, 0]]))
    traj = lineart.plan_trajectory(d, {"a": budget_prediction(30.0)})
    assert len(traj.strokes) == 3
    lengths = [s.length_cm for s in traj.strokes]
    assert lengths == pytest.approx([30.0, 30.0, 20.0])
    assert sum(lengths) == pytest.approx(80.0)
    assert [s.s_start_cm for s in traj.strokes] == pytest.approx([0.0, 30.0, 60.0])


def test_cycles_are_sequential():
    d = drawing(("a", 10, [[0, 0], [40, 0]]), ("b", 10, [[0, 5], [10, 5]]))
    traj = lineart.plan_trajectory(d, {"a": budget_prediction(30.0), "b": budget_prediction(30.0)})
    spans = [(s.waypoint_t_s[0], s.waypoint_t_s[-1]) for s in traj.strokes]
    starts = [s.squeeze_start_s for s in traj.strokes]
    assert len(spans) == 3
    for (_, end), nxt in zip(spans, starts[1:]):
        assert end <= nxt
    assert np.all(np.diff(starts) >= CFG.squeeze_duration_s)


def test_waypoint_spacing_matches_speed():
    d = drawing(("test-3", 10, [[0, 0], [6, 0], [6, 5]]))
    traj = lineart.plan_trajectory(d, truth_preds(d))
    for st in traj.strokes:
        dt = np.diff(st.waypoint_t_s)
        step = np.hypot(*np.diff(st.waypoints_cm, axis=0).T)
        expected = 0.5 * (st.waypoint_speed_cm_s[1:] + st.waypoint_speed_cm_s[:-1]) * dt
        # corners cut the straight-line distance, so compare only straight steps
        straight = np.abs(st.waypoints_cm[1:, 1] - st.waypoints_cm[:-1, 1]) < 1e-12
        straight |= np.abs(st.waypoints_cm[1:, 0] - st.waypoints_cm[:-1, 0]) < 1e-12
        ok = straight & (expected > 1e-6)
        assert np.allclose(step[ok], expected[ok], rtol=0.01)


def test_insufficient_flow():
    pred = budget_prediction(30.0)
    t = np.concatenate([[0.0], CFG.flow_knot_times])
    starved = pipeline.Prediction(curves.fit_spline(t, np.zeros(len(t)), curves.FLOW), pred.stacking)
    with pytest.raises(DomainError, match="insufficient flow for target thickness"):
        lineart.plan_trajectory(drawing(("a", 10, [[0, 0], [5, 0]])), {"a": starved})


def test_liquid_isolation_and_determinism():
    d = drawing(("test-1", 8, [[0, 0], [10, 0]]), ("test-3", 12, [[0, 3], [8, 3]]))
    preds = truth_preds(d)
    a = lineart.plan_trajectory(d, preds)
    other = dict(preds, **{"test-1": budget_prediction(12.0, 8.0)})
    b = lineart.plan_trajectory(d, other)
    c = lineart.plan_trajectory(d, preds)
    sa = [s for s in a.strokes if s.liquid == "test-3"]
    sb = [s for s in b.strokes if s.liquid == "test-3"]
    assert len(sa) == len(sb)
    for x, y in zip(sa, sb):
        assert np.array_equal(x.waypoints_cm, y.waypoints_cm)
        assert np.array_equal(x.profile.speeds_cm_s, y.profile.speeds_cm_s)
    for x, y in zip(a.strokes, c.strokes):
        assert np.array_equal(x.waypoint_t_s, y.waypoint_t_s)


def test_empty_svg_is_valid():
    root = ET.fromstring(lineart.empty_svg())
    assert root.tag == SVG_NS + "svg"
    assert root.get("version") == "1.1"
    assert not root.findall(f".//{SVG_NS}path")


def test_render_structure_and_arclength():
    d = lineart.load_drawing(SAMPLE_DRAWING)
    truth = {name: GRID.liquid(name) for name in d.liquids}
    traj = lineart.plan_trajectory(d, truth_preds(d))
    svg, rendered = lineart.render_result(traj, truth, seed=1)
    root = ET.fromstring(svg)
    groups = {g.get("id"): g for g in root.findall(f"{SVG_NS}g")}
    assert set(groups) == {f"liquid-{n}" for n in d.liquids} | {"target"}
    n_paths = sum(len(g.findall(f"{SVG_NS}path")) for gid, g in groups.items() if gid != "target")
    assert n_paths == sum(len(r.runs) for r in rendered)
    assert len(groups["target"].findall(f"{SVG_NS}path")) == len(d.polylines)
    for i, poly in enumerate(d.polylines):
        covered = sum(r.result.deposit.traversed_cm for r in rendered if r.stroke.polyline_index == i)
        assert covered == pytest.approx(poly.length_cm, rel=0.005)


def test_cell_runs():
    assert lineart.cell_runs(np.array([1.0, 1.01, 1.3, 1.3, 2.0])) == [(0, 2), (2, 4), (4, 5)]
    assert lineart.cell_runs(np.array([])) == []


def test_heldout_liquid_width_with_models(models):
    d = drawing(("test-2", 12, [[0, 0], [10, 0]]), ("test-4", 10, [[0, 4], [10, 4]]))
    truth = {name: GRID.liquid(name) for name in d.liquids}
    preds = {}
    for k, name in enumerate(d.liquids):
        feature = dataset.observe(truth[name], 400.0, 42 + k)
        preds[name] = pipeline.predict_curves(feature, *models.pair("ours"))
    _, rendered = lineart.render_result(lineart.plan_trajectory(d, preds), truth, seed=42)
    for r in rendered:
        width = float(np.mean(r.result.thickness_mm[r.result.scored]))
        assert abs(width - r.stroke.thickness_mm) / r.stroke.thickness_mm <= 0.35
