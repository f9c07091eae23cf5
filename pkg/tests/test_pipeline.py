import json

import numpy as np
import pytest

from saucebot import curves, grid, liquid_sim, neuralnet, pipeline
from saucebot.config import DEFAULT_CONFIG as CFG
from saucebot.errors import DomainError

GRID = grid.build_grid(CFG)
CONST_T = np.concatenate([[0.0], CFG.flow_knot_times])


def constant_flow(q):
    return curves.fit_spline(CONST_T, np.full(len(CONST_T), q), curves.FLOW)


def random_models(seed=0):
    rng = np.random.default_rng(seed)
    return (neuralnet.init_model([33, 8, 17], rng), neuralnet.init_model([33, 8, 10], rng))


def test_drawing_speed_examples():
    assert pipeline.drawing_speed(0.5, 0.25) == (2.0, False)
    assert pipeline.drawing_speed(0.0, 0.25) == (0.2, True)
    assert pipeline.drawing_speed(10.0, 0.1) == (15.0, True)
    with pytest.raises(DomainError):
        pipeline.drawing_speed(1.0, 0.0)


def test_predict_curves_contract_and_determinism():
    flow_m, stack_m = random_models()
    x = np.random.default_rng(1).normal(size=33)
    a = pipeline.predict_curves(x, flow_m, stack_m)
    b = pipeline.predict_curves(x, flow_m, stack_m)
    assert len(a.flow.knot_x) == 18 and len(a.stacking.knot_x) == 10
    assert a.flow.kind == curves.FLOW and a.stacking.kind == curves.STACKING
    assert np.array_equal(a.flow.knot_y, b.flow.knot_y)
    assert np.array_equal(a.stacking.knot_y, b.stacking.knot_y)
    assert np.all(a.flow.knot_y >= 0)
    assert np.all(np.diff(a.stacking.knot_y) > 0)


def test_predict_curves_dimension_mismatch():
    flow_m, stack_m = random_models()
    with pytest.raises(DomainError):
        pipeline.predict_curves(np.zeros(32), flow_m, stack_m)


def test_negative_flow_knots_are_clamped_with_warning(caplog):
    flow_m, stack_m = random_models()
    flow_m.biases[-1][:] = -1e3
    pred = pipeline.predict_curves(np.zeros(33), flow_m, stack_m)
    assert np.all(pred.flow.knot_y == 0.0)
    assert any("clamped" in n for n in pred.notes)
    assert "clamped" in caplog.text


def test_constant_flow_profile():
    prof = pipeline.plan_speed_profile(constant_flow(0.6), None, rho=0.2)
    assert np.allclose(prof.speeds_cm_s, 3.0)
    assert prof.arclength_cm == pytest.approx(3.0 * (CFG.window_end_s - CFG.window_start_s))
    assert np.allclose(np.diff(prof.times_s), 0.05)
    assert not prof.clamped.any()


def test_doubling_rho_halves_speed():
    truth = pipeline.truth_prediction(GRID.liquid("test-2"), 300)
    a = pipeline.plan_speed_profile(truth.flow, None, rho=0.1)
    b = pipeline.plan_speed_profile(truth.flow, None, rho=0.2)
    free = ~a.clamped & ~b.clamped
    assert free.sum() > 0
    assert np.allclose(b.speeds_cm_s[free], a.speeds_cm_s[free] / 2)


def test_common_scaling_leaves_speeds_unchanged():
    truth = pipeline.truth_prediction(GRID.liquid("test-3"), 250)
    scaled = curves.fit_spline(truth.flow.knot_x, 3.7 * truth.flow.knot_y, curves.FLOW)
    a = pipeline.plan_speed_profile(truth.flow, None, rho=0.05)
    b = pipeline.plan_speed_profile(scaled, None, rho=0.05 * 3.7)
    free = ~a.clamped & ~b.clamped
    assert np.allclose(a.speeds_cm_s[free], b.speeds_cm_s[free])


def test_profile_invariants_and_clamp_log():
    truth = pipeline.truth_prediction(GRID.liquid("test-4"), 140)
    prof = pipeline.plan_speed_profile(truth.flow, truth.stacking, thickness_mm=20.0)
    assert np.all(np.isfinite(prof.speeds_cm_s))
    assert np.all((prof.speeds_cm_s >= 0.2) & (prof.speeds_cm_s <= 15.0))
    assert len(prof.clamp_events) == int(prof.clamped.sum())
    json.dumps(prof.to_json())


def test_thickness_outside_domain():
    truth = pipeline.truth_prediction(GRID.liquid("test-1"), 300)
    with pytest.raises(DomainError, match="outside stacking domain"):
        pipeline.plan_speed_profile(truth.flow, truth.stacking, thickness_mm=25.0)
    with pytest.raises(DomainError):
        pipeline.plan_speed_profile(truth.flow, truth.stacking, thickness_mm=10.0, window=(2.0, 18.0))


def test_truth_profile_open_loop_ceiling():
    liquid = GRID.liquid("test-2")
    for fill in (200.0, 400.0):
        truth = pipeline.truth_prediction(liquid, fill)
        ep = pipeline.run_episode(liquid, fill, None, 10.0, seed=3, prediction=truth)
        rho_star = ep.profile.target_rho_ml_per_cm
        scored = ep.stroke.scored
        assert np.mean(ep.stroke.rho_ml_per_cm[scored]) == pytest.approx(rho_star, rel=0.02)
        assert ep.stroke.metrics.pct_error <= 5.0


def test_plan_happens_before_dispensing(monkeypatch):
    calls = []
    real_plan, real_dispense = pipeline.plan_speed_profile, liquid_sim.simulate_dispense

    def plan(*a, **k):
        calls.append("plan")
        return real_plan(*a, **k)

    def dispense(*a, **k):
        calls.append("dispense")
        return real_dispense(*a, **k)

    monkeypatch.setattr(pipeline, "plan_speed_profile", plan)
    monkeypatch.setattr(liquid_sim, "simulate_dispense", dispense)
    pipeline.run_episode(GRID.liquid("test-3"), 300, random_models(), 10.0, seed=0)
    assert calls == ["plan", "dispense"]


def test_plan_ignores_dispense_noise():
    liquid, models = GRID.liquid("test-3"), random_models()
    a = pipeline.run_episode(liquid, 300, models, 10.0, seed=4, dispense_seed=1)
    b = pipeline.run_episode(liquid, 300, models, 10.0, seed=4, dispense_seed=2)
    assert np.array_equal(a.profile.speeds_cm_s, b.profile.speeds_cm_s)


def test_episode_is_reproducible(tmp_path):
    liquid, models = GRID.liquid("test-4"), random_models(2)
    a = pipeline.run_episode(liquid, 200, models, 15.0, seed=9)
    b = pipeline.run_episode(liquid, 200, models, 15.0, seed=9)
    a.write_json(tmp_path / "a.json")
    b.write_json(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["format_version"] == 1
    assert len(doc["flow_knots"]) == 18


def test_repair_stacking_knots():
    fixed, changed = pipeline.repair_stacking_knots([0.1, 0.05, -0.2, 0.3])
    assert changed
    assert np.all(np.diff(fixed) > 0) and fixed.min() > 0
    same, changed = pipeline.repair_stacking_knots([0.1, 0.2, 0.3])
    assert not changed and np.array_equal(same, [0.1, 0.2, 0.3])
