"""Turn an exploration trace and a weight reading into the liquid feature.

Feature layout (33 values)::

    [0:10]   wrist torque at t = 0.1, 0.2, ..., 1.0 s of the rotation
    [10:32]  oscillation spectrum magnitude at 0.1, 0.2, ..., 2.2 Hz
    [32]     total weight of bottle and contents, grams
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import DomainError
from .liquid_sim import HapticTrace

N_ROTATION = 10
N_SPECTRUM = 22
FEATURE_DIM = N_ROTATION + N_SPECTRUM + 1


@dataclass(frozen=True)
class LiquidFeature:
    rotation_samples: np.ndarray
    spectrum_bins: np.ndarray
    total_weight_g: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rotation_samples, self.spectrum_bins, [self.total_weight_g]])

    @classmethod
    def from_array(cls, values) -> "LiquidFeature":
        v = np.asarray(values, dtype=float)
        if v.shape != (FEATURE_DIM,):
            raise DomainError(f"feature must have {FEATURE_DIM} entries, got {v.shape}")
        return cls(v[:N_ROTATION].copy(), v[N_ROTATION:-1].copy(), float(v[-1]))


def downsample_rotation(trace: HapticTrace, cfg: Config = DEFAULT_CONFIG) -> np.ndarray:
    torque = np.asarray(trace.rotation_torque, dtype=float)
    fs = trace.sample_rate_hz
    times = cfg.rotation_step_s * np.arange(1, N_ROTATION + 1)
    idx = np.clip(np.rint(times * fs).astype(int), 0, len(torque) - 1)
    return torque[idx]


def oscillation_spectrum(trace: HapticTrace, cfg: Config = DEFAULT_CONFIG) -> np.ndarray:
    """Single-sided DFT magnitude of the mean-removed pause signal.

    Scaled by 2/N so an on-bin sinusoid of amplitude ``a`` reads ``a``.
    """
    x = np.asarray(trace.oscillation_torque, dtype=float)
    expected = int(round(cfg.pause_duration_s * trace.sample_rate_hz))
    if x.ndim != 1 or len(x) != expected:
        raise DomainError(f"oscillation segment must have {expected} samples, got {x.shape}")
    spec = np.abs(np.fft.rfft(x - x.mean())) * 2.0 / len(x)
    df = trace.sample_rate_hz / len(x)
    lo = int(round(cfg.spectrum_min_hz / df))
    hi = int(round(cfg.spectrum_max_hz / df))
    bins = spec[lo : hi + 1]
    if len(bins) != N_SPECTRUM:
        raise DomainError(f"spectrum band yields {len(bins)} bins, expected {N_SPECTRUM}")
    return bins


def extract_feature(trace: HapticTrace, total_weight_g: float, cfg: Config = DEFAULT_CONFIG) -> LiquidFeature:
    if not total_weight_g > 0:
        raise DomainError("total weight must be positive")
    feature = LiquidFeature(downsample_rotation(trace, cfg), oscillation_spectrum(trace, cfg), float(total_weight_g))
    if not np.all(np.isfinite(feature.as_array())):
        raise DomainError("feature contains non-finite values")
    return feature
