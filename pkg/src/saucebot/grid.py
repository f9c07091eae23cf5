"""The synthetic liquid catalogue and fill levels used for data and benchmarks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .liquid_sim import BottleState, LiquidSpec


@dataclass(frozen=True)
class ExperimentGrid:
    train_liquids: tuple[LiquidSpec, ...]
    test_liquids: tuple[LiquidSpec, ...]
    fills_ml: tuple[float, ...]

    def train_rows(self):
        for liquid in self.train_liquids:
            for fill in self.fills_ml:
                yield liquid, fill

    def test_rows(self):
        for liquid in self.test_liquids:
            for fill in self.fills_ml:
                yield liquid, fill

    def liquid(self, name: str) -> LiquidSpec:
        for liq in self.train_liquids + self.test_liquids:
            if liq.name == name:
                return liq
        raise KeyError(name)


def _log_viscosity(slot: float, cfg: Config) -> float:
    step = math.log10(cfg.max_viscosity_cp) / (cfg.n_train_liquids - 1)
    return 10.0 ** (slot * step)


def build_grid(cfg: Config = DEFAULT_CONFIG) -> ExperimentGrid:
    """Training viscosities are log-spaced over [1, max]; test liquids sit halfway
    between training neighbours, so evaluation is interpolation."""
    dens = cfg.train_densities
    train = tuple(
        LiquidSpec(min(_log_viscosity(k, cfg), cfg.max_viscosity_cp), dens[k % len(dens)], f"train-{k:02d}")
        for k in range(cfg.n_train_liquids)
    )
    test = tuple(
        LiquidSpec(_log_viscosity(slot + 0.5, cfg), d, f"test-{i}")
        for i, (slot, d) in enumerate(zip(cfg.test_slots, cfg.test_densities))
    )
    fills = tuple(float(f) for f in np.linspace(cfg.fill_min_ml, cfg.fill_max_ml, cfg.n_fill_levels))
    return ExperimentGrid(train, test, fills)


def bottle(fill_ml: float, cfg: Config = DEFAULT_CONFIG) -> BottleState:
    return BottleState(fill_ml, cfg.capacity_ml, cfg.bottle_mass_g)
