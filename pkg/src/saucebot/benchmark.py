"""Benchmark harness: curve errors and stroke-thickness statistics per method.

Methods:

* ``ours``   haptic feature, both curves predicted, open loop
* ``simple`` bottle-volume matching on a constant-rate squeeze, true stacking
* ``pp``     curves predicted from true log-viscosity and fill
* ``wf``     closed-loop weight feedback from the wrist sensor, true stacking

An extra ``oracle`` row runs the open-loop planner with simulator-truth
curves, bounding what the control law and evaluator can achieve.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, curves, liquid_sim, stroke_eval
from .config import DEFAULT_CONFIG, Config
from .dataset import observe, row_seed
from .errors import DomainError
from .grid import ExperimentGrid, bottle, build_grid
from .neuralnet import MlpModel, load_model
from .pipeline import Prediction, plan_speed_profile, predict_curves, run_episode, truth_prediction
from .training import pp_inputs

REPORT_FORMAT_VERSION = 1
METHODS = ("ours", "simple", "pp", "wf")
MODEL_FILES = {"ours": ("flow", "stacking"), "pp": ("pp-flow", "pp-stacking")}
THICKNESS_KEYS = ("mean_abs_error_mm", "std_dev_mm", "pct_error", "pct_variance")


@dataclass
class ModelSet:
    models: dict[str, MlpModel]

    def pair(self, method: str) -> tuple[MlpModel, MlpModel]:
        a, b = MODEL_FILES[method]
        return self.models[a], self.models[b]


def required_model_files(methods) -> list[str]:
    return [name for m in methods for name in MODEL_FILES.get(m, ())]


def load_models(directory: str | Path, methods=METHODS) -> ModelSet:
    directory = Path(directory)
    out = {}
    for name in required_model_files(methods):
        path = directory / f"{name}.json"
        if not path.is_file():
            raise FileNotFoundError(f"model file not found: {path}")
        out[name] = load_model(path)
    return ModelSet(out)


def parse_methods(text: str) -> tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise DomainError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    return methods


def _wf_sensor(log, liquid, b, seed, cfg, noise=True):
    moving = lambda t: t >= cfg.window_start_s  # noqa: E731
    return liquid_sim.simulate_weight_sensor(log, liquid, b, moving, seed, cfg, noise=noise, vibration=noise)


def wf_flow_curve(liquid, fill_ml, seed, cfg: Config = DEFAULT_CONFIG) -> curves.Curve:
    """The flow curve as the weight-feedback policy perceives it."""
    b = bottle(fill_ml, cfg)
    log = liquid_sim.simulate_dispense(liquid, b, liquid_sim.SqueezeProfile.from_config(cfg), seed + 1, cfg)
    t, force = _wf_sensor(log, liquid, b, seed + 2, cfg)
    run = baselines.wf_policy(t, force, liquid.density_g_per_ml, 1.0, cfg=cfg)
    knots = np.asarray(cfg.flow_knot_times)
    q = np.maximum(np.interp(knots, run.time_s, run.flow_estimate_ml_s), 0.0)
    return curves.fit_spline(np.concatenate([[0.0], knots]), np.concatenate([[0.0], q]), curves.FLOW)


def curve_table(models: ModelSet, methods, cfg: Config, seed: int, grid: ExperimentGrid) -> dict:
    two_stage = liquid_sim.SqueezeProfile.from_config(cfg)
    constant = liquid_sim.SqueezeProfile.from_config(cfg, liquid_sim.CONSTANT_RATE)
    errs = {m: {"flow": {}, "stacking": {}} for m in methods}
    for i, (liquid, fill) in enumerate(grid.test_rows()):
        s = row_seed(seed, 50_000 + i)
        b = bottle(fill, cfg)
        flow_truth = liquid_sim.true_flow_rate_curve(liquid, b, two_stage, cfg)
        stack_truth = liquid_sim.true_stacking_curve(liquid, cfg)
        for m in methods:
            if m == "ours":
                pred = predict_curves(observe(liquid, fill, s, cfg), *models.pair("ours"), cfg)
            elif m == "pp":
                pred = predict_curves(pp_inputs(liquid.viscosity_cp, fill), *models.pair("pp"), cfg)
            elif m == "simple":
                truth_c = liquid_sim.true_flow_rate_curve(liquid, b, constant, cfg)
                e = curves.curve_error(baselines.simple_flow_curve(constant, cfg), truth_c)
                errs[m]["flow"].setdefault(liquid.name, []).append(e)
                continue
            else:
                e = curves.curve_error(wf_flow_curve(liquid, fill, s, cfg), flow_truth)
                errs[m]["flow"].setdefault(liquid.name, []).append(e)
                continue
            errs[m]["flow"].setdefault(liquid.name, []).append(curves.curve_error(pred.flow, flow_truth))
            errs[m]["stacking"].setdefault(liquid.name, []).append(curves.curve_error(pred.stacking, stack_truth))
    table = {}
    for m in methods:
        entry = {}
        for key, unit in (("flow", "flow_ml_s"), ("stacking", "stacking_ml_cm")):
            per = {k: float(np.mean(v)) for k, v in errs[m][key].items()}
            entry[unit] = float(np.mean([e for v in errs[m][key].values() for e in v])) if per else None
            entry[f"{unit}_per_liquid"] = per or None
        if m in ("simple", "wf"):
            entry["stacking_source"] = "ground truth"
        table[m] = entry
    return table


def _episode_record(method, liquid, fill, target, stroke: stroke_eval.StrokeResult, clamped: int, speeds) -> dict:
    speeds = np.asarray(speeds)
    return {
        "method": method,
        "liquid": liquid.name,
        "fill_ml": fill,
        "target_mm": target,
        "speed_cv": float(np.std(speeds) / np.mean(speeds)),
        "clamped_samples": int(clamped),
        "volume_error": stroke.volume_error,
        **stroke.metrics.as_dict(),
    }


def thickness_episodes(models: ModelSet, methods, cfg: Config, seed: int, grid: ExperimentGrid) -> list[dict]:
    constant = liquid_sim.SqueezeProfile.from_config(cfg, liquid_sim.CONSTANT_RATE)
    records = []
    idx = 0
    for liquid in grid.test_liquids:
        for fill in cfg.bench_fills_ml:
            b = bottle(fill, cfg)
            s = row_seed(seed, 80_000 + idx)
            idx += 1
            stacking = liquid_sim.true_stacking_curve(liquid, cfg)
            preds = {"oracle": truth_prediction(liquid, fill, cfg)}
            if "ours" in methods:
                preds["ours"] = predict_curves(observe(liquid, fill, s, cfg), *models.pair("ours"), cfg)
            if "pp" in methods:
                preds["pp"] = predict_curves(pp_inputs(liquid.viscosity_cp, fill), *models.pair("pp"), cfg)
            for target in cfg.bench_targets_mm:
                for m in ("oracle", *methods):
                    if m in preds:
                        ep = run_episode(liquid, fill, None, target, s, cfg, prediction=preds[m])
                        records.append(_episode_record(m, liquid, fill, target, ep.stroke,
                                                       ep.profile.clamped.sum(), ep.profile.speeds_cm_s))
                    elif m == "simple":
                        flow = baselines.simple_flow_curve(constant, cfg)
                        ep = run_episode(liquid, fill, None, target, s, cfg,
                                         prediction=Prediction(flow, stacking), profile=constant)
                        records.append(_episode_record(m, liquid, fill, target, ep.stroke,
                                                       ep.profile.clamped.sum(), ep.profile.speeds_cm_s))
                    elif m == "wf":
                        log = liquid_sim.simulate_dispense(liquid, b, liquid_sim.SqueezeProfile.from_config(cfg),
                                                           s + 1, cfg)
                        t, force = _wf_sensor(log, liquid, b, s + 2, cfg)
                        run = baselines.wf_policy(t, force, liquid.density_g_per_ml, stacking(target), cfg=cfg)
                        prof = run.profile
                        stroke = stroke_eval.evaluate_stroke(prof.times_s, prof.speeds_cm_s, log.dense_time_s,
                                                             log.dense_dispensed_ml, stacking, target, cfg)
                        records.append(_episode_record(m, liquid, fill, target, stroke,
                                                       prof.clamped.sum(), prof.speeds_cm_s))
    return records


def summarize(records: list[dict], methods) -> dict:
    out = {}
    for m in ("oracle", *methods):
        rows = [r for r in records if r["method"] == m]
        if not rows:
            continue
        entry = {k: float(np.mean([r[k] for r in rows])) for k in THICKNESS_KEYS}
        entry["speed_cv"] = float(np.mean([r["speed_cv"] for r in rows]))
        per = {}
        for name in sorted({r["liquid"] for r in rows}):
            sub = [r for r in rows if r["liquid"] == name]
            per[name] = {k: float(np.mean([r[k] for r in sub])) for k in (*THICKNESS_KEYS, "speed_cv")}
        entry["per_liquid"] = per
        entry["strokes"] = len(rows)
        entry["max_volume_error"] = float(max(r["volume_error"] for r in rows))
        out[m] = entry
    return out


def run_benchmark(models: ModelSet, methods=METHODS, cfg: Config = DEFAULT_CONFIG, seed: int = 42) -> dict:
    grid = build_grid(cfg)
    records = thickness_episodes(models, methods, cfg, seed, grid)
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "seed": seed,
        "methods": list(methods),
        "test_liquids": [dataclasses.asdict(l) for l in grid.test_liquids],
        "curve_errors": curve_table(models, methods, cfg, seed, grid),
        "thickness": summarize(records, methods),
        "episodes": records,
    }


def format_report(report: dict) -> str:
    lines = ["curve error (5-point mean absolute difference)",
             f"  {'method':<8} {'flow ml/s':>11} {'stack ml/cm':>12}"]
    for m, e in report["curve_errors"].items():
        st = "GT" if e["stacking_ml_cm"] is None else f"{e['stacking_ml_cm']:.4f}"
        lines.append(f"  {m:<8} {e['flow_ml_s']:>11.4f} {st:>12}")
    lines += ["", "stroke thickness",
              f"  {'method':<8} {'err mm':>8} {'std mm':>8} {'err %':>8} {'var %':>8}"]
    for m, e in report["thickness"].items():
        lines.append(f"  {m:<8} {e['mean_abs_error_mm']:>8.3f} {e['std_dev_mm']:>8.3f}"
                     f" {e['pct_error']:>8.2f} {e['pct_variance']:>8.2f}")
    return "\n".join(lines)
