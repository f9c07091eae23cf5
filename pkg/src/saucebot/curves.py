"""Knot-parameterized monotone cubic curves.

Flow-rate curves map time (s) to flow (ml/s) and carry an anchor knot at
(0, 0) followed by one knot per second of the squeeze. Stacking curves map
stream thickness (mm) to volume-per-length (ml/cm) on ten evenly spaced
thickness values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

FLOW = "flow-rate"
STACKING = "stacking"

_UNITS = {FLOW: ("time_s", "flow_ml_per_s"), STACKING: ("thickness_mm", "volume_per_length_ml_per_cm")}


def _fritsch_carlson_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    m = np.empty(n)
    if n == 2:
        m[:] = delta[0]
        return m
    m[0] = delta[0]
    m[-1] = delta[-1]
    m[1:-1] = 0.5 * (delta[:-1] + delta[1:])
    # local extrema and flat stretches get zero slope
    turn = delta[:-1] * delta[1:] <= 0
    m[1:-1][turn] = 0.0
    for k in range(n - 1):
        if delta[k] == 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        if m[k] * delta[k] < 0:
            m[k] = 0.0
        if m[k + 1] * delta[k] < 0:
            m[k + 1] = 0.0
        # slope ratios kept inside the circle of radius 3, without dividing by delta
        r = np.hypot(m[k], m[k + 1])
        if r > 3.0 * abs(delta[k]):
            tau = 3.0 * abs(delta[k]) / r
            m[k] *= tau
            m[k + 1] *= tau
    return m


@dataclass(frozen=True, eq=False)
class Curve:
    """Immutable monotonicity-preserving cubic Hermite interpolant."""

    knot_x: np.ndarray
    knot_y: np.ndarray
    kind: str
    slopes: np.ndarray

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knot_x[0]), float(self.knot_x[-1])

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate at ``x``; points outside the domain are clamped to it and flagged."""
        xq = np.asarray(x, dtype=float)
        lo, hi = self.domain
        clamped = (xq < lo) | (xq > hi)
        xc = np.clip(xq, lo, hi)
        k = np.clip(np.searchsorted(self.knot_x, xc, side="right") - 1, 0, len(self.knot_x) - 2)
        x0 = self.knot_x[k]
        h = self.knot_x[k + 1] - x0
        t = (xc - x0) / h
        t2, t3 = t * t, t * t * t
        y0, y1 = self.knot_y[k], self.knot_y[k + 1]
        y = (
            y0
            + (3 * t2 - 2 * t3) * (y1 - y0)
            + (t3 - 2 * t2 + t) * h * self.slopes[k]
            + (t3 - t2) * h * self.slopes[k + 1]
        )
        # exact at knots
        at_knot = t == 0.0
        y = np.where(at_knot, self.knot_y[k], y)
        y = np.where(t == 1.0, self.knot_y[k + 1], y)
        return y, clamped

    def __call__(self, x):
        y, _ = self.evaluate(x)
        return y if np.ndim(x) else float(y)

    def invert(self, y, tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
        return invert_monotone(self, y, tol=tol)

    def to_csv(self, path: str | Path, n: int = 200) -> None:
        """Write a dense two-column sampling with a header naming the units."""
        lo, hi = self.domain
        xs = np.linspace(lo, hi, n)
        ys = self(xs)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_UNITS.get(self.kind, ("x", "y")))
            for a, b in zip(xs, ys):
                w.writerow([repr(float(a)), repr(float(b))])


def fit_spline(knot_x, knot_y, kind: str) -> Curve:
    x = np.array(knot_x, dtype=float)
    y = np.array(knot_y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DomainError("knot_x and knot_y must be 1-D arrays of equal length")
    if len(x) < 2:
        raise DomainError("a curve needs at least two knots")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("knots must be finite (NaN or inf found)")
    if np.any(np.diff(x) <= 0):
        raise DomainError("knot_x must be strictly increasing")
    x.setflags(write=False)
    y.setflags(write=False)
    m = _fritsch_carlson_slopes(x, y)
    m.setflags(write=False)
    return Curve(x, y, kind, m)


def invert_monotone(curve: Curve, y, tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``curve(x) = y`` by bisection.

    Returns ``(x, clamped)``. Targets outside the curve's range map to the
    nearest domain endpoint with ``clamped`` set.
    """
    d = np.diff(curve.knot_y)
    if np.all(d > 0):
        sign = 1.0
    elif np.all(d < 0):
        sign = -1.0
    else:
        raise DomainError("curve is not invertible: knot values are not strictly monotone")
    yq = np.atleast_1d(np.asarray(y, dtype=float))
    lo, hi = curve.domain
    ylo, yhi = curve.knot_y[0], curve.knot_y[-1]
    below = sign * (yq - ylo) < 0
    above = sign * (yq - yhi) > 0
    a = np.full(yq.shape, lo)
    b = np.full(yq.shape, hi)
    n_iter = int(np.ceil(np.log2((hi - lo) / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        go_right = sign * (curve(mid) - yq) < 0
        a = np.where(go_right, mid, a)
        b = np.where(go_right, b, mid)
    x = 0.5 * (a + b)
    x = np.where(below, lo, np.where(above, hi, x))
    clamped = below | above
    if np.ndim(y) == 0:
        return float(x[0]), bool(clamped[0])
    return x, clamped


def curve_error(pred: Curve, truth: Curve, n_points: int = 5) -> float:
    """Mean absolute difference at evenly spaced points of the common domain."""
    if pred.kind != truth.kind:
        raise DomainError(f"curve kinds differ: {pred.kind} vs {truth.kind}")
    lo = max(pred.domain[0], truth.domain[0])
    hi = min(pred.domain[1], truth.domain[1])
    if lo > hi:
        raise DomainError("curves have disjoint domains")
    xs = np.linspace(lo, hi, n_points)
    return float(np.mean(np.abs(pred(xs) - truth(xs))))


def flow_from_weights(
    time_s,
    weight_g,
    density_g_per_ml: float,
    knot_times=tuple(float(t) for t in range(1, 18)),
    window: int = 5,
) -> Curve:
    """Reconstruct a flow-rate curve from a cumulative dispensed-weight log."""
    t = np.asarray(time_s, dtype=float)
    w = np.asarray(weight_g, dtype=float)
    if t.shape != w.shape or t.ndim != 1:
        raise DomainError("time and weight series must be 1-D and equally long")
    if len(t) < 3:
        raise DomainError("need at least 3 weight samples")
    if density_g_per_ml <= 0:
        raise DomainError("density must be positive")
    rate = np.gradient(w, t) / density_g_per_ml
    # centred moving average; windows shrink at the ends
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(rate)])
    idx = np.arange(len(rate))
    lo = np.clip(idx - half, 0, len(rate))
    hi = np.clip(idx + half + 1, 0, len(rate))
    smooth = (csum[hi] - csum[lo]) / (hi - lo)
    knots = np.interp(np.asarray(knot_times, dtype=float), t, smooth)
    return fit_spline(np.concatenate([[0.0], knot_times]), np.concatenate([[0.0], knots]), FLOW)
