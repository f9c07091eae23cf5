"""Fit the four predictors from a dataset and score them on held-out liquids."""

from __future__ import annotations

import math

import numpy as np

from . import curves, neuralnet
from .config import DEFAULT_CONFIG, Config
from .dataset import Row
from .errors import DomainError
from .pipeline import flow_curve_from_knots, stacking_curve_from_knots

KINDS = ("flow", "stacking", "pp-flow", "pp-stacking")


def pp_inputs(viscosity_cp: float, fill_ml: float) -> np.ndarray:
    return np.array([math.log10(viscosity_cp), fill_ml])


def design_matrix(rows: list[Row], which: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if which not in KINDS:
        raise DomainError(f"unknown model kind {which!r}; expected one of {', '.join(KINDS)}")
    target = "stacking" if which.endswith("stacking") else "flow"
    if target == "stacking":
        rows = [r for r in rows if r.stacking_knots is not None]
        if not rows:
            raise DomainError("dataset has no stacking labels (all liquids are too watery)")
    if which.startswith("pp-"):
        x = np.array([pp_inputs(r.viscosity_cp, r.fill_ml) for r in rows])
    else:
        x = np.array([r.feature for r in rows])
    y = np.array([r.stacking_knots if target == "stacking" else r.flow_knots for r in rows])
    groups = np.array([r.liquid for r in rows])
    return x, y, groups


def knots_to_curve(values, which: str, cfg: Config = DEFAULT_CONFIG) -> curves.Curve:
    if which.endswith("stacking"):
        return stacking_curve_from_knots(values, cfg)[0]
    return flow_curve_from_knots(values, cfg)[0]


def heldout_error(model: neuralnet.MlpModel, x: np.ndarray, y: np.ndarray, which: str,
                  cfg: Config = DEFAULT_CONFIG) -> float:
    """Mean 5-point curve error between predictions and labels."""
    if len(x) == 0:
        return float("nan")
    pred = neuralnet.forward(model, x)
    errs = [curves.curve_error(knots_to_curve(p, which, cfg), knots_to_curve(t, which, cfg)) for p, t in zip(pred, y)]
    return float(np.mean(errs))


def fit(rows: list[Row], which: str, cfg: Config = DEFAULT_CONFIG, seed: int = 42) -> tuple[neuralnet.TrainResult, float]:
    x, y, groups = design_matrix(rows, which)
    result = neuralnet.train(x, y, cfg, seed, groups)
    err = heldout_error(result.model, x[result.val_index], y[result.val_index], which, cfg)
    result.model.meta.update({
        "kind": which,
        "inputs": "pp" if which.startswith("pp-") else "haptic",
        "seed": seed,
        "val_liquids": sorted(set(groups[result.val_index].tolist())),
        "val_curve_error": err,
    })
    return result, err
