"""Execute a speed schedule against simulator truth and score the stroke."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curves
from .config import DEFAULT_CONFIG, Config
from .errors import DomainError


@dataclass(frozen=True)
class Deposit:
    cell_edges_cm: np.ndarray
    rho_ml_per_cm: np.ndarray
    traversed_cm: float
    t_stop_s: float
    deposited_ml: float
    dispensed_ml: float  # volume leaving the nozzle while it travelled

    @property
    def cell_centers_cm(self) -> np.ndarray:
        return 0.5 * (self.cell_edges_cm[:-1] + self.cell_edges_cm[1:])


def deposit(
    times_s,
    speeds_cm_s,
    dense_time_s,
    dense_dispensed_ml,
    path_length_cm: float,
    cell_ds_cm: float = DEFAULT_CONFIG.cell_ds_cm,
) -> Deposit:
    """Bin the liquid leaving the nozzle into arclength cells.

    The nozzle starts at arclength 0 at ``times_s[0]`` and follows the
    piecewise-linear speed schedule until it reaches ``path_length_cm`` or the
    schedule ends. The volume released during each simulator step is spread
    uniformly over the arclength covered in that step.
    """
    if not path_length_cm > 0:
        raise DomainError("path length must be positive")
    tp = np.asarray(times_s, dtype=float)
    vp = np.asarray(speeds_cm_s, dtype=float)
    td = np.asarray(dense_time_s, dtype=float)
    xd = np.asarray(dense_dispensed_ml, dtype=float)
    if np.any(vp <= 0):
        raise DomainError("speeds must be positive")
    t0, t1 = tp[0], tp[-1]
    eps = 1e-9
    if t0 < td[0] - eps or t1 > td[-1] + eps:
        raise DomainError("speed schedule extends beyond the dispensing log")

    inner = td[(td > t0 + eps) & (td < t1 - eps)]
    t = np.unique(np.concatenate([[t0], inner, tp[(tp > t0) & (tp < t1)], [t1]]))
    v = np.interp(t, tp, vp)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    x = np.interp(t, td, xd) - np.interp(t0, td, xd)

    if s[-1] > path_length_cm:
        traversed = float(path_length_cm)
        x_end = float(np.interp(traversed, s, x))
        t_stop = float(np.interp(traversed, s, t))
    else:
        traversed = float(s[-1])
        x_end = float(x[-1])
        t_stop = float(t1)

    n_cells = max(1, math.ceil(traversed / cell_ds_cm - 1e-9))
    edges = np.minimum(np.arange(n_cells + 1) * cell_ds_cm, traversed)
    cum = np.interp(edges, s, x)
    cum[-1] = x_end
    vol = np.diff(cum)
    widths = np.diff(edges)
    rho = np.maximum(vol / widths, 0.0)
    return Deposit(edges, rho, traversed, t_stop, float(np.sum(rho * widths)), x_end)


def thickness_profile(rho, stacking_truth: curves.Curve) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell stream thickness (mm) read off the inverted stacking curve."""
    w, clamped = curves.invert_monotone(stacking_truth, np.asarray(rho, dtype=float))
    return np.asarray(w, dtype=float), np.asarray(clamped, dtype=bool)


@dataclass(frozen=True)
class StrokeMetrics:
    mean_abs_error_mm: float
    std_dev_mm: float
    pct_error: float
    pct_variance: float

    def as_dict(self) -> dict:
        return {
            "mean_abs_error_mm": self.mean_abs_error_mm,
            "std_dev_mm": self.std_dev_mm,
            "pct_error": self.pct_error,
            "pct_variance": self.pct_variance,
        }


def stroke_metrics(thickness_mm, target_mm: float) -> StrokeMetrics:
    w = np.asarray(thickness_mm, dtype=float)
    if len(w) < 10:
        raise DomainError(f"need at least 10 cells to score a stroke, got {len(w)}")
    mae = float(np.mean(np.abs(w - target_mm)))
    std = float(np.std(w))
    return StrokeMetrics(mae, std, 100.0 * mae / target_mm, 100.0 * std / target_mm)


def metric_mask(centers_cm: np.ndarray, traversed_cm: float, edge_cm: float) -> np.ndarray:
    return (centers_cm > edge_cm) & (centers_cm < traversed_cm - edge_cm)


@dataclass(frozen=True)
class StrokeResult:
    s_cm: np.ndarray
    rho_ml_per_cm: np.ndarray
    thickness_mm: np.ndarray
    clamped: np.ndarray
    scored: np.ndarray
    target_thickness_mm: float
    metrics: StrokeMetrics
    deposit: Deposit

    @property
    def volume_error(self) -> float:
        d = self.deposit
        return abs(d.deposited_ml - d.dispensed_ml) / max(abs(d.dispensed_ml), 1e-12)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s_cm", "rho_ml_per_cm", "thickness_mm", "clamped", "scored"])
            for row in zip(self.s_cm, self.rho_ml_per_cm, self.thickness_mm, self.clamped, self.scored):
                w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3]), int(row[4])])

    def summary(self) -> dict:
        return {
            "target_thickness_mm": self.target_thickness_mm,
            "traversed_cm": self.deposit.traversed_cm,
            "deposited_ml": self.deposit.deposited_ml,
            "clamped_cells": int(self.clamped.sum()),
            **self.metrics.as_dict(),
        }


def evaluate_stroke(
    times_s,
    speeds_cm_s,
    dense_time_s,
    dense_dispensed_ml,
    stacking_truth: curves.Curve,
    target_mm: float,
    cfg: Config = DEFAULT_CONFIG,
    path_length_cm: float | None = None,
) -> StrokeResult:
    length = cfg.path_length_cm if path_length_cm is None else path_length_cm
    dep = deposit(times_s, speeds_cm_s, dense_time_s, dense_dispensed_ml, length, cfg.cell_ds_cm)
    w, clamped = thickness_profile(dep.rho_ml_per_cm, stacking_truth)
    centers = dep.cell_centers_cm
    scored = metric_mask(centers, dep.traversed_cm, cfg.edge_exclusion_cm)
    metrics = stroke_metrics(w[scored], target_mm)
    return StrokeResult(centers, dep.rho_ml_per_cm, w, clamped, scored, float(target_mm), metrics, dep)
