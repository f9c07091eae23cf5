"""Deterministic synthetic stand-in for the bottle, wrist sensors and scale.

Everything here is a pure function of its inputs and an integer seed. The
squeeze model is pneumatic: closing the gripper shrinks the bottle, the
trapped air is compressed isothermally and the overpressure drives liquid
through the nozzle at a rate that falls with viscosity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import curves
from .config import DEFAULT_CONFIG, Config
from .errors import DomainError

G = 9.80665

TWO_STAGE = "two-stage"
CONSTANT_RATE = "constant-rate"


@dataclass(frozen=True)
class LiquidSpec:
    viscosity_cp: float
    density_g_per_ml: float
    name: str = "liquid"

    def __post_init__(self):
        if not 1.0 <= self.viscosity_cp <= 70000.0:
            raise DomainError(f"viscosity {self.viscosity_cp} cP outside [1, 70000]")
        if not 0.8 <= self.density_g_per_ml <= 1.5:
            raise DomainError(f"density {self.density_g_per_ml} g/ml outside [0.8, 1.5]")


@dataclass(frozen=True)
class BottleState:
    fill_ml: float
    capacity_ml: float = DEFAULT_CONFIG.capacity_ml
    bottle_mass_g: float = DEFAULT_CONFIG.bottle_mass_g

    def __post_init__(self):
        if not 0 <= self.fill_ml <= self.capacity_ml:
            raise DomainError(f"fill {self.fill_ml} ml outside [0, {self.capacity_ml}]")

    @property
    def headspace_ml(self) -> float:
        return self.capacity_ml - self.fill_ml

    @property
    def fill_fraction(self) -> float:
        return self.fill_ml / self.capacity_ml

    def total_mass_g(self, liquid: LiquidSpec) -> float:
        return self.bottle_mass_g + self.fill_ml * liquid.density_g_per_ml


@dataclass(frozen=True)
class SqueezeProfile:
    """Bottle-volume reduction over time for the fixed gripper motion."""

    mode: str = TWO_STAGE
    duration_s: float = 17.0
    dv_max_ml: float = 5.5
    rapid_fraction: float = 0.7
    rapid_duration_s: float = 2.0

    def __post_init__(self):
        if self.mode not in (TWO_STAGE, CONSTANT_RATE):
            raise DomainError(f"unknown squeeze mode {self.mode!r}")

    @classmethod
    def from_config(cls, cfg: Config = DEFAULT_CONFIG, mode: str = TWO_STAGE) -> "SqueezeProfile":
        return cls(mode, cfg.squeeze_duration_s, cfg.squeeze_dv_max_ml, cfg.rapid_fraction, cfg.rapid_duration_s)

    def compression(self, t: float) -> float:
        if t <= 0:
            return 0.0
        if t >= self.duration_s:
            return self.dv_max_ml
        if self.mode == CONSTANT_RATE:
            return self.dv_max_ml * t / self.duration_s
        first = self.rapid_fraction * self.dv_max_ml
        if t < self.rapid_duration_s:
            return first * t / self.rapid_duration_s
        frac = (t - self.rapid_duration_s) / (self.duration_s - self.rapid_duration_s)
        return first + (self.dv_max_ml - first) * frac


@dataclass(frozen=True)
class HapticTrace:
    rotation_torque: np.ndarray
    oscillation_torque: np.ndarray
    sample_rate_hz: float = 1000.0


@dataclass(frozen=True)
class DispenseLog:
    dense_time_s: np.ndarray
    dense_dispensed_ml: np.ndarray
    dense_flow_ml_s: np.ndarray
    scale_time_s: np.ndarray
    scale_weight_g: np.ndarray


def _check_seed(seed: int) -> None:
    if int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")


def slosh_frequency_hz(bottle: BottleState, cfg: Config = DEFAULT_CONFIG) -> float:
    return cfg.slosh_freq_base_hz + cfg.slosh_freq_span_hz * (1.0 - bottle.fill_fraction)


def slosh_decay_s(viscosity_cp: float, cfg: Config = DEFAULT_CONFIG) -> float:
    return cfg.slosh_decay_numerator_s / (0.5 + math.log10(viscosity_cp))


def gravity_torque_nm(liquid: LiquidSpec, bottle: BottleState, cfg: Config = DEFAULT_CONFIG) -> float:
    """Torque about the wrist axis with the bottle tipped horizontal."""
    m_bottle = bottle.bottle_mass_g / 1000.0
    m_liquid = bottle.fill_ml * liquid.density_g_per_ml / 1000.0
    lever = cfg.liquid_lever_base_m + cfg.liquid_lever_fill_m * bottle.fill_fraction
    return G * (m_bottle * cfg.bottle_lever_m + m_liquid * lever)


def simulate_exploration(
    liquid: LiquidSpec,
    bottle: BottleState,
    seed: int,
    cfg: Config = DEFAULT_CONFIG,
    noise: bool = True,
) -> HapticTrace:
    """Wrist torque during a 90 degree tilt in 1 s and the following pause."""
    _check_seed(seed)
    if bottle.fill_ml <= 0:
        raise DomainError("nothing to slosh: the bottle is empty")
    fs = cfg.torque_rate_hz
    n_rot = int(round(cfg.rotation_duration_s * fs))
    n_osc = int(round(cfg.pause_duration_s * fs))
    tau_max = gravity_torque_nm(liquid, bottle, cfg)

    t_rot = np.arange(n_rot) / fs
    theta = (np.pi / 2) * t_rot / cfg.rotation_duration_s
    rotation = tau_max * np.sin(theta)

    t_osc = np.arange(n_osc) / fs
    m_liquid = bottle.fill_ml * liquid.density_g_per_ml / 1000.0
    amp = cfg.slosh_gain * m_liquid * G * cfg.slosh_lever_m
    f_s = slosh_frequency_hz(bottle, cfg)
    tau_d = slosh_decay_s(liquid.viscosity_cp, cfg)
    oscillation = tau_max + amp * np.exp(-t_osc / tau_d) * np.sin(2 * np.pi * f_s * t_osc)

    if noise:
        rng = np.random.default_rng(seed)
        rotation = rotation + rng.normal(0.0, cfg.torque_noise_nm, n_rot)
        oscillation = oscillation + rng.normal(0.0, cfg.torque_noise_nm, n_osc)
    return HapticTrace(rotation, oscillation, fs)


def _flow_coefficient(liquid: LiquidSpec, cfg: Config, nozzle_coefficient: float | None) -> float:
    c = cfg.nozzle_coefficient if nozzle_coefficient is None else nozzle_coefficient
    mu = max(liquid.viscosity_cp, cfg.viscosity_floor_cp)
    return c / mu**cfg.viscosity_exponent


def simulate_dispense(
    liquid: LiquidSpec,
    bottle: BottleState,
    profile: SqueezeProfile,
    seed: int,
    cfg: Config = DEFAULT_CONFIG,
    noise: bool = True,
    nozzle_coefficient: float | None = None,
) -> DispenseLog:
    """Integrate the squeeze with fixed-step RK4 and sample a 5 Hz scale."""
    _check_seed(seed)
    if bottle.fill_ml < cfg.min_fill_ml:
        raise DomainError(f"air ingestion regime: fill {bottle.fill_ml} ml below {cfg.min_fill_ml} ml")
    p0 = cfg.ambient_pressure_kpa
    h0 = bottle.headspace_ml
    k = _flow_coefficient(liquid, cfg, nozzle_coefficient)
    comp = profile.compression

    def flow(t: float, x: float) -> float:
        v_air = h0 + x - comp(t)
        if v_air <= 0:
            raise DomainError(f"bottle overcompressed at t={t:.2f} s")
        dp = p0 * h0 / v_air - p0
        return k * dp if dp > 0 else 0.0

    dt = cfg.sim_dt_s
    n = int(round(profile.duration_s / dt))
    x = 0.0
    xs = [0.0]
    qs = [flow(0.0, 0.0)]
    for i in range(n):
        t = i * dt
        k1 = flow(t, x)
        k2 = flow(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = flow(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = flow(t + dt, x + dt * k3)
        x += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        xs.append(x)
        qs.append(flow(t + dt, x))
    dense_t = np.arange(n + 1) * dt
    dense_x = np.array(xs)
    dense_q = np.array(qs)

    stride = int(round(1.0 / (cfg.scale_rate_hz * dt)))
    scale_t = dense_t[::stride].copy()
    scale_w = dense_x[::stride] * liquid.density_g_per_ml
    if noise and cfg.scale_noise_g > 0:
        rng = np.random.default_rng(seed)
        scale_w = scale_w + rng.normal(0.0, cfg.scale_noise_g, len(scale_w))
    return DispenseLog(dense_t, dense_x, dense_q, scale_t, scale_w)


def true_flow_rate_curve(
    liquid: LiquidSpec,
    bottle: BottleState,
    profile: SqueezeProfile,
    cfg: Config = DEFAULT_CONFIG,
    log: DispenseLog | None = None,
) -> curves.Curve:
    """Dense simulator flow sampled once per second, anchored at (0, 0)."""
    if log is None:
        log = simulate_dispense(liquid, bottle, profile, 0, cfg, noise=False)
    knots_t = np.array(cfg.flow_knot_times)
    idx = np.rint(knots_t / cfg.sim_dt_s).astype(int)
    q = np.maximum(log.dense_flow_ml_s[idx], 0.0)
    return curves.fit_spline(np.concatenate([[0.0], knots_t]), np.concatenate([[0.0], q]), curves.FLOW)


def stacking_beta(viscosity_cp: float, cfg: Config = DEFAULT_CONFIG) -> float:
    return cfg.stacking_beta0 + cfg.stacking_beta_slope * math.log10(viscosity_cp)


def thickness_knots_mm(cfg: Config = DEFAULT_CONFIG) -> np.ndarray:
    return np.linspace(cfg.thickness_min_mm, cfg.thickness_max_mm, cfg.n_thickness_knots)


def has_stacking(liquid: LiquidSpec, cfg: Config = DEFAULT_CONFIG) -> bool:
    return liquid.viscosity_cp >= cfg.min_stacking_viscosity_cp


def true_stacking_curve(liquid: LiquidSpec, cfg: Config = DEFAULT_CONFIG) -> curves.Curve:
    """Volume-per-length ``beta * w**2`` (w in cm) on the ten thickness knots."""
    if not has_stacking(liquid, cfg):
        raise DomainError(
            f"no stable stacking below {cfg.min_stacking_viscosity_cp} cP (got {liquid.viscosity_cp})"
        )
    w_mm = thickness_knots_mm(cfg)
    rho = stacking_beta(liquid.viscosity_cp, cfg) * (w_mm / 10.0) ** 2
    return curves.fit_spline(w_mm, rho, curves.STACKING)


def simulate_weight_sensor(
    log: DispenseLog,
    liquid: LiquidSpec,
    bottle: BottleState,
    arm_moving,
    seed: int,
    cfg: Config = DEFAULT_CONFIG,
    noise: bool = True,
    vibration: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Gravity-direction wrist force at 100 Hz, in newtons.

    The series starts with a static pre-roll of ``cfg.ft_preroll_s`` before
    squeezing begins (negative times). ``arm_moving`` is either a boolean
    array aligned with the returned time axis or a callable ``t -> bool``.
    """
    _check_seed(seed)
    dt = 1.0 / cfg.ft_rate_hz
    n_pre = int(round(cfg.ft_preroll_s / dt))
    n_main = int(round(log.dense_time_s[-1] / dt))
    t = (np.arange(-n_pre, n_main + 1)) * dt
    dispensed = np.interp(np.clip(t, 0.0, None), log.dense_time_s, log.dense_dispensed_ml)
    mass_g = bottle.total_mass_g(liquid) - dispensed * liquid.density_g_per_ml
    if callable(arm_moving):
        moving = np.array([bool(arm_moving(ti)) for ti in t])
    else:
        moving = np.asarray(arm_moving, dtype=bool)
        if moving.shape != t.shape:
            raise DomainError(f"arm_moving must have {len(t)} samples")
    g_per_n = G / 1000.0
    force = mass_g * g_per_n
    rng = np.random.default_rng(seed)
    if noise:
        force = force + rng.normal(0.0, cfg.ft_noise_g, len(t)) * g_per_n
    if vibration:
        phase = rng.uniform(0.0, 2 * np.pi)
        vib = cfg.vibration_amp_g * np.sin(2 * np.pi * cfg.vibration_hz * t + phase)
        force = force + np.where(moving, vib, 0.0) * g_per_n
    return t, force


def force_to_grams(force_n) -> np.ndarray:
    return np.asarray(force_n) * 1000.0 / G


def calibrate_nozzle(cfg: Config = DEFAULT_CONFIG, iterations: int = 80) -> float:
    """Bisect the nozzle coefficient so the calibration liquid peaks at the target flow."""
    liquid = LiquidSpec(cfg.calibration_viscosity_cp, 1.0, "calibration")
    bottle = BottleState(cfg.calibration_fill_ml, cfg.capacity_ml, cfg.bottle_mass_g)
    profile = SqueezeProfile.from_config(cfg)
    lo, hi = 1e-3, 1e4
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        peak = simulate_dispense(liquid, bottle, profile, 0, cfg, noise=False, nozzle_coefficient=mid).dense_flow_ml_s.max()
        if peak < cfg.calibration_peak_ml_s:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
