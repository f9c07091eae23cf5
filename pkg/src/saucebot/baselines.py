"""Comparison policies: bottle-volume matching, privileged truth features,
and closed-loop weight feedback through a scalar Kalman filter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import curves, liquid_sim
from .config import DEFAULT_CONFIG, Config
from .errors import DomainError
from .pipeline import SpeedProfile, drawing_speed


def simple_flow_curve(profile: liquid_sim.SqueezeProfile, cfg: Config = DEFAULT_CONFIG) -> curves.Curve:
    """Assume every millilitre of bottle compression leaves through the nozzle."""
    if profile.mode != liquid_sim.CONSTANT_RATE:
        raise DomainError("the volume-matching baseline needs a constant-rate squeeze")
    q = profile.dv_max_ml / profile.duration_s
    knots_t = np.concatenate([[0.0], cfg.flow_knot_times])
    return curves.fit_spline(knots_t, np.full(len(knots_t), q), curves.FLOW)


def pp_feature(liquid: liquid_sim.LiquidSpec, bottle: liquid_sim.BottleState) -> np.ndarray:
    return np.array([math.log10(liquid.viscosity_cp), bottle.fill_ml])


@dataclass(frozen=True)
class KalmanState:
    """Random-walk estimate of dispensed mass.

    ``process_noise_q`` is the variance added per step, ``measurement_noise_r``
    the variance of one reading (both in g^2).
    """

    estimate: float
    variance: float
    process_noise_q: float
    measurement_noise_r: float

    @classmethod
    def from_config(cls, cfg: Config = DEFAULT_CONFIG, estimate: float = 0.0) -> "KalmanState":
        return cls(estimate, cfg.kalman_p0, cfg.kalman_q, cfg.kalman_r)


def kalman_step(state: KalmanState, z: float) -> KalmanState:
    p = state.variance + state.process_noise_q
    r = state.measurement_noise_r
    if math.isinf(r):
        return KalmanState(state.estimate, p, state.process_noise_q, r)
    k = p / (p + r)
    return KalmanState(state.estimate + k * (z - state.estimate), (1.0 - k) * p, state.process_noise_q, r)


def steady_state_gain(q: float, r: float) -> float:
    p_pred = 0.5 * (q + math.sqrt(q * q + 4.0 * q * r))
    return p_pred / (p_pred + r)


def ramp_lag(slope: float, q: float, r: float) -> float:
    """Steady-state amount by which the filter trails a ramp rising ``slope`` per step."""
    k = steady_state_gain(q, r)
    return slope * (1.0 - k) / k


def kalman_filter(z, cfg: Config = DEFAULT_CONFIG, initial: float = 0.0) -> np.ndarray:
    state = KalmanState.from_config(cfg, initial)
    out = np.empty(len(z))
    for i, zi in enumerate(np.asarray(z, dtype=float)):
        state = kalman_step(state, zi)
        out[i] = state.estimate
    return out


def dispensed_mass_readout(t, force_n, cfg: Config = DEFAULT_CONFIG) -> tuple[np.ndarray, float]:
    """Convert wrist force to dispensed grams against the pre-roll tare."""
    grams = liquid_sim.force_to_grams(force_n)
    pre = np.asarray(t) < 0
    tare = float(grams[pre].mean()) if pre.any() else float(grams[0])
    return tare - grams, tare


@dataclass(frozen=True)
class WfRun:
    profile: SpeedProfile
    time_s: np.ndarray
    estimate_g: np.ndarray
    flow_estimate_ml_s: np.ndarray


def wf_policy(
    t,
    force_n,
    density_g_per_ml: float,
    rho_target: float,
    window: tuple[float, float] | None = None,
    cfg: Config = DEFAULT_CONFIG,
) -> WfRun:
    """Closed-loop speed from the filtered weight-loss signal.

    The flow estimate at time t is the change of the filtered dispensed mass
    over the preceding ``cfg.wf_window_s``, divided by density.
    """
    t = np.asarray(t, dtype=float)
    z, _ = dispensed_mass_readout(t, force_n, cfg)
    est = kalman_filter(z, cfg)
    lag = int(round(cfg.wf_window_s * cfg.ft_rate_hz))
    flow = np.zeros_like(est)
    flow[lag:] = (est[lag:] - est[:-lag]) / (cfg.wf_window_s * density_g_per_ml)
    if window is None:
        window = (cfg.window_start_s, cfg.window_end_s)
    sel = (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    v, clamped = drawing_speed(np.maximum(flow[sel], 0.0), rho_target, cfg)
    profile = SpeedProfile(t[sel], np.asarray(v), np.asarray(clamped), float(rho_target))
    return WfRun(profile, t, est, flow)
