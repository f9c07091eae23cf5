"""Exploration to feature to predicted curves to an open-loop speed schedule.

The speed law is ``v(t) = q(t) / rho*`` where ``q`` is the predicted flow
rate and ``rho*`` the volume-per-length that the predicted stacking curve
associates with the requested stream thickness.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curves, liquid_sim, stroke_eval
from .config import DEFAULT_CONFIG, Config
from .dataset import observe
from .errors import DomainError
from .grid import bottle as make_bottle
from .haptics import LiquidFeature
from .neuralnet import MlpModel, forward

log = logging.getLogger(__name__)

EPISODE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Prediction:
    flow: curves.Curve
    stacking: curves.Curve | None
    notes: tuple[str, ...] = ()


def repair_stacking_knots(values, floor: float = 1e-4) -> tuple[np.ndarray, bool]:
    """Force predicted stacking knots to be positive and strictly increasing."""
    y = np.maximum(np.asarray(values, dtype=float), floor)
    fixed = y.copy()
    for i in range(1, len(fixed)):
        if fixed[i] <= fixed[i - 1]:
            fixed[i] = fixed[i - 1] * (1 + 1e-6) + 1e-9
    return fixed, bool(np.any(fixed != np.asarray(values)))


def flow_curve_from_knots(values, cfg: Config = DEFAULT_CONFIG) -> tuple[curves.Curve, bool]:
    q = np.asarray(values, dtype=float)
    negative = bool(np.any(q < 0))
    q = np.maximum(q, 0.0)
    knots_t = np.concatenate([[0.0], cfg.flow_knot_times])
    return curves.fit_spline(knots_t, np.concatenate([[0.0], q]), curves.FLOW), negative


def stacking_curve_from_knots(values, cfg: Config = DEFAULT_CONFIG) -> tuple[curves.Curve, bool]:
    rho, repaired = repair_stacking_knots(values)
    w = liquid_sim.thickness_knots_mm(cfg)
    return curves.fit_spline(w, rho, curves.STACKING), repaired


def predict_curves(feature, flow_model: MlpModel, stacking_model: MlpModel | None, cfg: Config = DEFAULT_CONFIG) -> Prediction:
    x = feature.as_array() if isinstance(feature, LiquidFeature) else np.asarray(feature, dtype=float)
    notes = []
    flow, negative = flow_curve_from_knots(forward(flow_model, x), cfg)
    if negative:
        notes.append("negative flow knots clamped to 0")
        log.warning("negative flow knots clamped to 0")
    stacking = None
    if stacking_model is not None:
        stacking, repaired = stacking_curve_from_knots(forward(stacking_model, x), cfg)
        if repaired:
            notes.append("stacking knots repaired to be strictly increasing")
            log.warning("stacking knots repaired to be strictly increasing")
    return Prediction(flow, stacking, tuple(notes))


def drawing_speed(q, rho, cfg: Config = DEFAULT_CONFIG):
    """Return ``(speed_cm_s, clamped)`` for flow ``q`` and volume-per-length ``rho``."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0):
        raise DomainError("volume-per-length must be positive")
    raw = np.asarray(q, dtype=float) / rho_arr
    v = np.clip(raw, cfg.v_min_cm_s, cfg.v_max_cm_s)
    clamped = (raw < cfg.v_min_cm_s) | (raw > cfg.v_max_cm_s)
    if np.ndim(v) == 0:
        return float(v), bool(clamped)
    return v, clamped


@dataclass(frozen=True)
class SpeedProfile:
    times_s: np.ndarray
    speeds_cm_s: np.ndarray
    clamped: np.ndarray
    target_rho_ml_per_cm: float
    target_thickness_mm: float | None = None

    @property
    def arclength_cm(self) -> float:
        return float(np.sum(0.5 * (self.speeds_cm_s[1:] + self.speeds_cm_s[:-1]) * np.diff(self.times_s)))

    @property
    def clamp_events(self) -> list[dict]:
        out = []
        for t, v, c in zip(self.times_s, self.speeds_cm_s, self.clamped):
            if c:
                out.append({"t_s": float(t), "speed_cm_s": float(v)})
        return out

    def to_json(self) -> dict:
        return {
            "times_s": self.times_s.tolist(),
            "speeds_cm_s": self.speeds_cm_s.tolist(),
            "target_rho_ml_per_cm": self.target_rho_ml_per_cm,
            "target_thickness_mm": self.target_thickness_mm,
            "arclength_cm": self.arclength_cm,
            "clamp_events": self.clamp_events,
        }


def window_times(window: tuple[float, float], dt: float) -> np.ndarray:
    t0, t1 = window
    n = int(round((t1 - t0) / dt))
    return t0 + dt * np.arange(n + 1)


def plan_speed_profile(
    flow: curves.Curve,
    stacking: curves.Curve | None,
    thickness_mm: float | None = None,
    rho: float | None = None,
    window: tuple[float, float] | None = None,
    cfg: Config = DEFAULT_CONFIG,
) -> SpeedProfile:
    if (thickness_mm is None) == (rho is None):
        raise DomainError("give exactly one of a target thickness or a volume-per-length")
    if window is None:
        window = (cfg.window_start_s, cfg.window_end_s)
    if not 0 <= window[0] < window[1] <= cfg.squeeze_duration_s:
        raise DomainError(f"window {window} must lie inside [0, {cfg.squeeze_duration_s}] s")
    if thickness_mm is not None:
        if stacking is None:
            raise DomainError("a thickness target needs a stacking curve")
        lo, hi = stacking.domain
        if not lo <= thickness_mm <= hi:
            raise DomainError(f"thickness {thickness_mm} mm is outside stacking domain [{lo}, {hi}]")
        if not np.all(np.diff(stacking.knot_y) > 0):
            raise DomainError("stacking curve is not strictly increasing")
        rho = stacking(thickness_mm)
    if not rho > 0:
        raise DomainError("volume-per-length must be positive")
    t = window_times(window, cfg.profile_dt_s)
    v, clamped = drawing_speed(flow(t), rho, cfg)
    return SpeedProfile(t, v, clamped, float(rho), thickness_mm)


@dataclass(frozen=True)
class Episode:
    liquid: liquid_sim.LiquidSpec
    fill_ml: float
    seed: int
    prediction: Prediction
    profile: SpeedProfile
    stroke: stroke_eval.StrokeResult

    def to_json(self) -> dict:
        pred = self.prediction
        return {
            "format_version": EPISODE_FORMAT_VERSION,
            "inputs": {
                "liquid": self.liquid.name,
                "viscosity_cp": self.liquid.viscosity_cp,
                "density_g_per_ml": self.liquid.density_g_per_ml,
                "fill_ml": self.fill_ml,
                "target_thickness_mm": self.profile.target_thickness_mm,
                "seed": self.seed,
            },
            "flow_knots": pred.flow.knot_y.tolist(),
            "stacking_knots": None if pred.stacking is None else pred.stacking.knot_y.tolist(),
            "notes": list(pred.notes),
            "profile": self.profile.to_json(),
            "metrics": self.stroke.summary(),
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def run_episode(
    liquid: liquid_sim.LiquidSpec,
    fill_ml: float,
    models: tuple[MlpModel, MlpModel] | None,
    thickness_mm: float,
    seed: int,
    cfg: Config = DEFAULT_CONFIG,
    prediction: Prediction | None = None,
    dispense_seed: int | None = None,
    profile: liquid_sim.SqueezeProfile | None = None,
) -> Episode:
    """One open-loop stroke.

    Pass ``prediction`` to bypass exploration and the models (for instance
    with simulator-truth curves). The plan is fixed before dispensing starts.
    """
    b = make_bottle(fill_ml, cfg)
    if prediction is None:
        if models is None:
            raise DomainError("either models or a prediction is required")
        feature = observe(liquid, fill_ml, seed, cfg)
        prediction = predict_curves(feature, models[0], models[1], cfg)
    plan = plan_speed_profile(prediction.flow, prediction.stacking, thickness_mm=thickness_mm, cfg=cfg)

    if profile is None:
        profile = liquid_sim.SqueezeProfile.from_config(cfg)
    dseed = seed + 1 if dispense_seed is None else dispense_seed
    dlog = liquid_sim.simulate_dispense(liquid, b, profile, dseed, cfg)
    truth = liquid_sim.true_stacking_curve(liquid, cfg)
    stroke = stroke_eval.evaluate_stroke(plan.times_s, plan.speeds_cm_s, dlog.dense_time_s, dlog.dense_dispensed_ml,
                                         truth, thickness_mm, cfg)
    return Episode(liquid, fill_ml, seed, prediction, plan, stroke)


def truth_prediction(liquid: liquid_sim.LiquidSpec, fill_ml: float, cfg: Config = DEFAULT_CONFIG) -> Prediction:
    profile = liquid_sim.SqueezeProfile.from_config(cfg)
    flow = liquid_sim.true_flow_rate_curve(liquid, make_bottle(fill_ml, cfg), profile, cfg)
    return Prediction(flow, liquid_sim.true_stacking_curve(liquid, cfg))
