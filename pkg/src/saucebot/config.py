"""Flat configuration holding every tunable constant of the system.

A config file is a flat JSON object whose keys are the field names below.
Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

CONFIG_VERSION = 1


@dataclass(frozen=True)
class Config:
    # bottle and squeeze motion
    capacity_ml: float = 560.0
    bottle_mass_g: float = 120.0
    squeeze_duration_s: float = 17.0
    squeeze_dv_max_ml: float = 5.5
    rapid_fraction: float = 0.7
    rapid_duration_s: float = 2.0

    # pneumatic nozzle model
    ambient_pressure_kpa: float = 101.325
    viscosity_exponent: float = 0.6
    viscosity_floor_cp: float = 20.0
    # bisection result of calibrate_nozzle(); see liquid_sim
    nozzle_coefficient: float = 121.12343038712
    calibration_viscosity_cp: float = 1000.0
    calibration_fill_ml: float = 300.0
    calibration_peak_ml_s: float = 1.5
    sim_dt_s: float = 0.01
    min_fill_ml: float = 50.0

    # lab scale
    scale_rate_hz: float = 5.0
    scale_noise_g: float = 0.002

    # exploration / wrist torque
    torque_rate_hz: float = 1000.0
    rotation_duration_s: float = 1.0
    pause_duration_s: float = 10.0
    torque_noise_nm: float = 0.002
    bottle_lever_m: float = 0.10
    liquid_lever_base_m: float = 0.12
    liquid_lever_fill_m: float = 0.08
    slosh_gain: float = 0.1
    slosh_lever_m: float = 0.10
    slosh_freq_base_hz: float = 0.6
    slosh_freq_span_hz: float = 1.6
    slosh_decay_numerator_s: float = 2.5

    # feature layout
    rotation_step_s: float = 0.1
    spectrum_min_hz: float = 0.1
    spectrum_max_hz: float = 2.2

    # stacking model
    stacking_beta0: float = 0.03
    stacking_beta_slope: float = 0.022
    min_stacking_viscosity_cp: float = 30.0
    thickness_min_mm: float = 5.0
    thickness_max_mm: float = 20.0
    n_thickness_knots: int = 10

    # wrist F/T sensor and weight feedback
    ft_rate_hz: float = 100.0
    ft_noise_g: float = 10.0
    vibration_amp_g: float = 15.0
    vibration_hz: float = 25.0
    ft_preroll_s: float = 1.0
    kalman_q: float = 0.25
    kalman_r: float = 100.0
    kalman_p0: float = 100.0
    wf_window_s: float = 0.4

    # speed planning and strokes
    v_min_cm_s: float = 0.2
    v_max_cm_s: float = 15.0
    profile_dt_s: float = 0.05
    window_start_s: float = 6.0
    window_end_s: float = 17.0
    path_length_cm: float = 10.0
    cell_ds_cm: float = 0.05
    edge_exclusion_cm: float = 0.25

    # MLP training
    hidden_dims: tuple[int, ...] = (128, 32)
    epochs: int = 500
    batch_size: int = 32
    lr0: float = 0.005
    lr_decay: float = 0.9
    lr_step_epochs: int = 15
    val_fraction: float = 0.15

    # experiment grid
    n_train_liquids: int = 20
    max_viscosity_cp: float = 70000.0
    train_densities: tuple[float, ...] = (0.9, 1.0, 1.1, 1.25, 1.4)
    test_slots: tuple[int, ...] = (8, 10, 12, 14, 16)
    test_densities: tuple[float, ...] = (1.05, 1.2, 0.95, 1.15, 1.3)
    n_fill_levels: int = 21
    fill_min_ml: float = 130.0
    fill_max_ml: float = 500.0
    bench_fills_ml: tuple[float, ...] = (200.0, 300.0, 400.0)
    bench_targets_mm: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    draw_fill_ml: float = 400.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (tuple, list)):
                if len(value) == 0 or any(v <= 0 for v in value):
                    raise ConfigError(f"{f.name} must be a non-empty list of positive values")
            elif value <= 0:
                raise ConfigError(f"{f.name} must be positive, got {value!r}")
        if not 0 < self.lr_decay < 1:
            raise ConfigError("lr_decay must lie in (0, 1)")
        if not 0 < self.rapid_fraction < 1:
            raise ConfigError("rapid_fraction must lie in (0, 1)")
        if self.val_fraction >= 1:
            raise ConfigError("val_fraction must be below 1")
        if self.fill_max_ml > self.capacity_ml:
            raise ConfigError("fill_max_ml exceeds capacity_ml")
        if self.v_min_cm_s >= self.v_max_cm_s:
            raise ConfigError("v_min_cm_s must be below v_max_cm_s")
        if not 0 <= self.window_start_s < self.window_end_s <= self.squeeze_duration_s:
            raise ConfigError("drawing window must lie inside the squeeze")

    @property
    def flow_knot_times(self):
        return tuple(float(t) for t in range(1, int(round(self.squeeze_duration_s)) + 1))

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        data = dict(data)
        version = data.pop("format_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config format_version {version!r}")
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for name, value in data.items():
            default = getattr(DEFAULT_CONFIG, name)
            if isinstance(default, tuple):
                if not isinstance(value, list):
                    raise ConfigError(f"{name} must be a list")
                value = tuple(type(default[0])(v) for v in value)
            elif isinstance(default, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be numeric")
            else:
                value = type(default)(value)
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def dump(self, path: str | Path) -> None:
        payload = {"format_version": CONFIG_VERSION, **self.to_dict()}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


DEFAULT_CONFIG = Config()
