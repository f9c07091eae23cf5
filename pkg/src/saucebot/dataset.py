"""Training-data generation and the JSON-lines dataset format.

The first line of a dataset file is a header object::

    {"format_version": 1, "kind": "saucebot-dataset", "seed": 42, "rows": 420,
     "config": {...}}

Each following line is one grid row::

    {"liquid": "train-03", "viscosity_cp": ..., "density_g_per_ml": ...,
     "fill_ml": ..., "seed": ..., "feature": [33 floats],
     "flow_knots": [17 floats], "stacking_knots": [10 floats] | null}

Viscosity and density are simulator truth. They are kept for the
privileged baseline and for evaluation; the main model never sees them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import curves, haptics, liquid_sim
from .config import DEFAULT_CONFIG, Config
from .errors import FormatError
from .grid import ExperimentGrid, bottle, build_grid

DATASET_FORMAT_VERSION = 1
DATASET_KIND = "saucebot-dataset"


@dataclass(frozen=True)
class Row:
    liquid: str
    viscosity_cp: float
    density_g_per_ml: float
    fill_ml: float
    seed: int
    feature: np.ndarray
    flow_knots: np.ndarray
    stacking_knots: np.ndarray | None

    def spec(self) -> liquid_sim.LiquidSpec:
        return liquid_sim.LiquidSpec(self.viscosity_cp, self.density_g_per_ml, self.liquid)

    def to_json(self) -> dict:
        return {
            "liquid": self.liquid,
            "viscosity_cp": self.viscosity_cp,
            "density_g_per_ml": self.density_g_per_ml,
            "fill_ml": self.fill_ml,
            "seed": self.seed,
            "feature": self.feature.tolist(),
            "flow_knots": self.flow_knots.tolist(),
            "stacking_knots": None if self.stacking_knots is None else self.stacking_knots.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Row":
        stack = d["stacking_knots"]
        return cls(
            str(d["liquid"]), float(d["viscosity_cp"]), float(d["density_g_per_ml"]), float(d["fill_ml"]),
            int(d["seed"]), np.array(d["feature"], dtype=float), np.array(d["flow_knots"], dtype=float),
            None if stack is None else np.array(stack, dtype=float),
        )


def row_seed(seed: int, index: int) -> int:
    return int(seed) * 100_000 + index


def observe(liquid: liquid_sim.LiquidSpec, fill_ml: float, seed: int, cfg: Config = DEFAULT_CONFIG) -> haptics.LiquidFeature:
    """Run the exploration action and build the feature vector."""
    b = bottle(fill_ml, cfg)
    trace = liquid_sim.simulate_exploration(liquid, b, seed, cfg)
    return haptics.extract_feature(trace, b.total_mass_g(liquid), cfg)


def make_row(liquid: liquid_sim.LiquidSpec, fill_ml: float, seed: int, cfg: Config = DEFAULT_CONFIG) -> Row:
    b = bottle(fill_ml, cfg)
    feature = observe(liquid, fill_ml, seed, cfg)
    profile = liquid_sim.SqueezeProfile.from_config(cfg)
    log = liquid_sim.simulate_dispense(liquid, b, profile, seed, cfg)
    flow = curves.flow_from_weights(log.scale_time_s, log.scale_weight_g, liquid.density_g_per_ml, cfg.flow_knot_times)
    stacking = None
    if liquid_sim.has_stacking(liquid, cfg):
        stacking = np.array(liquid_sim.true_stacking_curve(liquid, cfg).knot_y)
    return Row(liquid.name, liquid.viscosity_cp, liquid.density_g_per_ml, fill_ml, seed,
               feature.as_array(), np.array(flow.knot_y[1:]), stacking)


def generate(cfg: Config = DEFAULT_CONFIG, seed: int = 42, grid: ExperimentGrid | None = None) -> list[Row]:
    grid = grid or build_grid(cfg)
    return [make_row(liq, fill, row_seed(seed, i), cfg) for i, (liq, fill) in enumerate(grid.train_rows())]


def write_jsonl(rows: list[Row], path: str | Path, cfg: Config = DEFAULT_CONFIG, seed: int = 42) -> None:
    header = {"format_version": DATASET_FORMAT_VERSION, "kind": DATASET_KIND, "seed": seed,
              "rows": len(rows), "config": cfg.to_dict()}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for row in rows:
            fh.write(json.dumps(row.to_json()) + "\n")


def read_jsonl(path: str | Path) -> tuple[dict, list[Row]]:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
        if header.get("kind") != DATASET_KIND or header.get("format_version") != DATASET_FORMAT_VERSION:
            raise FormatError(f"{path}: not a version-{DATASET_FORMAT_VERSION} dataset")
        rows = [Row.from_json(json.loads(ln)) for ln in lines[1:]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"{path}: malformed dataset ({exc})") from exc
    if len(rows) != header.get("rows"):
        raise FormatError(f"{path}: header promises {header.get('rows')} rows, found {len(rows)}")
    for r in rows:
        if r.feature.shape != (haptics.FEATURE_DIM,):
            raise FormatError(f"{path}: feature of length {len(r.feature)} in row {r.liquid}")
    return header, rows
