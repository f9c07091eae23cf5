"""Drawings made of polylines: loading, squeeze-cycle scheduling, SVG output.

Drawing files are JSON::

    {"polylines": [{"liquid": "test-2", "thickness_mm": 12, "points": [[0, 0], [10, 0]]}]}

Coordinates are centimetres. Each stroke, or each piece of a stroke that
does not fit into one squeeze, is drawn with a fresh squeeze of a full
bottle.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import liquid_sim, stroke_eval
from .config import DEFAULT_CONFIG, Config
from .errors import DomainError, FormatError
from .grid import bottle as make_bottle
from .pipeline import Prediction, SpeedProfile, plan_speed_profile

log = logging.getLogger(__name__)

PALETTE = ("#8c2d04", "#1b7837", "#762a83", "#b2182b", "#2166ac", "#e08214")


@dataclass(frozen=True)
class Polyline:
    liquid: str
    thickness_mm: float
    points: np.ndarray  # (n, 2) in cm

    @property
    def cumulative_cm(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.points, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length_cm(self) -> float:
        return float(self.cumulative_cm[-1])

    def point_at(self, s) -> np.ndarray:
        cum = self.cumulative_cm
        s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
        return np.stack([np.interp(s, cum, self.points[:, 0]), np.interp(s, cum, self.points[:, 1])], axis=-1)


@dataclass(frozen=True)
class Drawing:
    polylines: tuple[Polyline, ...]

    @property
    def liquids(self) -> list[str]:
        return sorted({p.liquid for p in self.polylines})


def parse_drawing(data, cfg: Config = DEFAULT_CONFIG) -> Drawing:
    if not isinstance(data, dict) or not isinstance(data.get("polylines"), list):
        raise FormatError("drawing must be an object with a 'polylines' list")
    if not data["polylines"]:
        raise DomainError("empty drawing: no polylines")
    out = []
    for i, item in enumerate(data["polylines"]):
        try:
            liquid = str(item["liquid"])
            thickness = float(item["thickness_mm"])
            pts = np.array(item["points"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"polyline {i}: {exc}") from exc
        if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise FormatError(f"polyline {i}: points must be a list of [x, y] pairs")
        if not cfg.thickness_min_mm <= thickness <= cfg.thickness_max_mm:
            raise DomainError(
                f"polyline {i}: thickness {thickness} mm outside [{cfg.thickness_min_mm}, {cfg.thickness_max_mm}]"
            )
        keep = np.concatenate([[True], np.any(np.diff(pts, axis=0) != 0, axis=1)])
        if not keep.all():
            log.warning("polyline %d: collapsed %d duplicate point(s)", i, int((~keep).sum()))
            pts = pts[keep]
        if len(pts) < 2:
            raise DomainError(f"polyline {i}: needs at least 2 distinct points")
        out.append(Polyline(liquid, thickness, pts))
    return Drawing(tuple(out))


def load_drawing(path: str | Path, cfg: Config = DEFAULT_CONFIG) -> Drawing:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed drawing JSON ({exc})") from exc
    return parse_drawing(data, cfg)


@dataclass(frozen=True)
class Stroke:
    polyline_index: int
    liquid: str
    thickness_mm: float
    s_start_cm: float
    s_end_cm: float
    squeeze_start_s: float
    profile: SpeedProfile
    waypoint_t_s: np.ndarray  # absolute time
    waypoints_cm: np.ndarray
    waypoint_speed_cm_s: np.ndarray

    @property
    def length_cm(self) -> float:
        return self.s_end_cm - self.s_start_cm

    @property
    def window_s(self) -> tuple[float, float]:
        return float(self.profile.times_s[0]), float(self.profile.times_s[-1])


@dataclass(frozen=True)
class Trajectory:
    drawing: Drawing
    strokes: tuple[Stroke, ...]


def _arclength(profile: SpeedProfile) -> np.ndarray:
    v = profile.speeds_cm_s
    return np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(profile.times_s))])


def plan_trajectory(drawing: Drawing, predictions: dict[str, Prediction], cfg: Config = DEFAULT_CONFIG) -> Trajectory:
    strokes = []
    clock = 0.0
    cycle = cfg.squeeze_duration_s
    for i, poly in enumerate(drawing.polylines):
        if poly.liquid not in predictions:
            raise DomainError(f"no curves for liquid {poly.liquid!r}")
        pred = predictions[poly.liquid]
        profile = plan_speed_profile(pred.flow, pred.stacking, thickness_mm=poly.thickness_mm, cfg=cfg)
        if np.all(profile.clamped & (profile.speeds_cm_s <= cfg.v_min_cm_s)):
            raise DomainError(f"insufficient flow for target thickness on polyline {i} ({poly.liquid})")
        s_plan = _arclength(profile)
        budget = s_plan[-1]
        done = 0.0
        while done < poly.length_cm - 1e-9:
            piece = min(budget, poly.length_cm - done)
            t_rel = profile.times_s
            keep = s_plan <= piece + 1e-12
            ts = t_rel[keep]
            ss = s_plan[keep]
            if ss[-1] < piece - 1e-12:
                t_end = float(np.interp(piece, s_plan, t_rel))
                ts = np.append(ts, t_end)
                ss = np.append(ss, piece)
            pts = poly.point_at(done + ss)
            speeds = np.interp(ts, profile.times_s, profile.speeds_cm_s)
            strokes.append(Stroke(i, poly.liquid, poly.thickness_mm, done, done + piece, clock, profile,
                                  clock + ts, pts, speeds))
            clock += cycle
            done += piece
    return Trajectory(drawing, tuple(strokes))


@dataclass(frozen=True)
class RenderedStroke:
    stroke: Stroke
    result: stroke_eval.StrokeResult
    runs: list[tuple[int, int]]  # [start, end) cell indices of constant rendered width


def cell_runs(widths_mm: np.ndarray, resolution_mm: float = 0.1) -> list[tuple[int, int]]:
    """Group consecutive cells whose widths agree at the given resolution."""
    q = np.rint(np.asarray(widths_mm) / resolution_mm).astype(int)
    runs = []
    start = 0
    for i in range(1, len(q) + 1):
        if i == len(q) or q[i] != q[start]:
            runs.append((start, i))
            start = i
    return runs


def execute(trajectory: Trajectory, truth: dict[str, liquid_sim.LiquidSpec], seed: int = 0,
            cfg: Config = DEFAULT_CONFIG) -> list[RenderedStroke]:
    out = []
    profile = liquid_sim.SqueezeProfile.from_config(cfg)
    for k, st in enumerate(trajectory.strokes):
        liquid = truth[st.liquid]
        dlog = liquid_sim.simulate_dispense(liquid, make_bottle(cfg.draw_fill_ml, cfg), profile, seed + k, cfg)
        stacking = liquid_sim.true_stacking_curve(liquid, cfg)
        dep = stroke_eval.deposit(st.profile.times_s, st.profile.speeds_cm_s, dlog.dense_time_s,
                                  dlog.dense_dispensed_ml, st.length_cm, cfg.cell_ds_cm)
        w, clamped = stroke_eval.thickness_profile(dep.rho_ml_per_cm, stacking)
        centers = dep.cell_centers_cm
        scored = stroke_eval.metric_mask(centers, dep.traversed_cm, cfg.edge_exclusion_cm)
        if scored.sum() >= 10:
            metrics = stroke_eval.stroke_metrics(w[scored], st.thickness_mm)
        else:
            metrics = stroke_eval.StrokeMetrics(float("nan"), float("nan"), float("nan"), float("nan"))
        result = stroke_eval.StrokeResult(centers, dep.rho_ml_per_cm, w, clamped, scored, st.thickness_mm, metrics, dep)
        out.append(RenderedStroke(st, result, cell_runs(w)))
    return out


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def render_svg(drawing: Drawing, rendered: list[RenderedStroke], margin_cm: float = 1.0) -> str:
    if drawing.polylines:
        pts = np.concatenate([p.points for p in drawing.polylines])
        lo, hi = pts.min(axis=0) - margin_cm, pts.max(axis=0) + margin_cm
    else:
        lo, hi = np.zeros(2), np.full(2, 2 * margin_cm)
    size = hi - lo
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(size[0])}cm" height="{_fmt(size[1])}cm" '
        f'viewBox="{_fmt(lo[0])} {_fmt(lo[1])} {_fmt(size[0])} {_fmt(size[1])}">',
    ]
    liquids = sorted({r.stroke.liquid for r in rendered})
    for n, liquid in enumerate(liquids):
        color = PALETTE[n % len(PALETTE)]
        lines.append(f'  <g id="liquid-{escape(liquid)}" stroke="{color}" fill="none" stroke-linecap="butt">')
        for r in rendered:
            if r.stroke.liquid != liquid:
                continue
            poly = drawing.polylines[r.stroke.polyline_index]
            edges = r.result.deposit.cell_edges_cm
            for a, b in r.runs:
                s0 = r.stroke.s_start_cm + edges[a]
                s1 = r.stroke.s_start_cm + edges[b]
                # keep polyline corners inside the run
                cum = poly.cumulative_cm
                xy = poly.point_at(np.concatenate([[s0], cum[(cum > s0) & (cum < s1)], [s1]]))
                width_cm = float(np.mean(r.result.thickness_mm[a:b])) / 10.0
                d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in xy)
                lines.append(f'    <path d="{d}" stroke-width="{_fmt(width_cm)}"/>')
        lines.append("  </g>")
    lines.append('  <g id="target" stroke="#000000" fill="none" stroke-width="0.02" stroke-dasharray="0.1 0.1">')
    for poly in drawing.polylines:
        d = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in poly.points)
        lines.append(f'    <path d="{d}"/>')
    lines.append("  </g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_result(trajectory: Trajectory, truth: dict[str, liquid_sim.LiquidSpec], seed: int = 0,
                  cfg: Config = DEFAULT_CONFIG) -> tuple[str, list[RenderedStroke]]:
    rendered = execute(trajectory, truth, seed, cfg)
    return render_svg(trajectory.drawing, rendered), rendered


def empty_svg() -> str:
    return render_svg(Drawing(()), [])
