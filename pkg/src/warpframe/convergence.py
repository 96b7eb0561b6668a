"""Grid-refinement studies of per-node residual fields.

Residuals from different resolutions are compared on one physical box (the
interior of the coarsest grid), so the region over which the maximum is taken
does not move with the resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import chart
from .chart import ChartGrid

EXACT_FLOOR = 1e-12


def common_box(grids, margin: int = chart.MARGIN) -> list:
    coarse = max(grids, key=lambda g: max(g.spacing))
    return [(lo + margin * h, hi - margin * h) for lo, hi, h in zip(coarse.mins, coarse.maxs, coarse.spacing)]


def box_mask(grid: ChartGrid, box) -> np.ndarray:
    mask = np.ones(grid.shape, bool)
    for x, (lo, hi) in zip(grid.coords(), box):
        mask &= (x >= lo - 1e-12) & (x <= hi + 1e-12)
    return mask


def box_max(field, grid: ChartGrid, box) -> float:
    f = np.abs(np.asarray(field, dtype=float))
    if f.ndim > grid.dim:
        f = f.max(axis=tuple(range(grid.dim, f.ndim)))
    return float(f[box_mask(grid, box)].max())


@dataclass
class ConvergenceRow:
    name: str
    spacing: list  # largest spacing per resolution
    residuals: list
    pairwise: list  # order between consecutive resolutions
    fitted: float | None  # least-squares slope of log r against log h
    exact: bool  # every residual below EXACT_FLOOR

    def in_band(self, lo: float = 1.8, hi: float = 2.2) -> bool:
        return self.exact or (self.fitted is not None and lo <= self.fitted <= hi)

    def summary(self) -> dict:
        return {
            "spacing": self.spacing,
            "residuals": self.residuals,
            "pairwise_orders": self.pairwise,
            "fitted_order": self.fitted,
            "exact": self.exact,
        }


def orders(spacing, residuals, floor: float = EXACT_FLOOR) -> tuple:
    h = np.asarray(spacing, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if np.all(r <= floor):
        return [None] * (len(r) - 1), None, True
    safe = np.maximum(r, np.finfo(float).tiny)
    pair = [float(np.log(safe[i] / safe[i + 1]) / np.log(h[i] / h[i + 1])) for i in range(len(r) - 1)]
    fitted = float(np.polyfit(np.log(h), np.log(safe), 1)[0]) if len(r) > 1 else None
    return pair, fitted, False


def study(grids, fields_of: Callable[[ChartGrid], dict], margin: int = chart.MARGIN) -> list:
    """Evaluate ``fields_of(grid)`` (name -> per-node field) on each grid and tabulate orders."""
    grids = list(grids)
    box = common_box(grids, margin)
    values: dict = {}
    for g in grids:
        for name, f in fields_of(g).items():
            values.setdefault(name, []).append(box_max(f, g, box))
    hs = [float(max(g.spacing)) for g in grids]
    rows = []
    for name, rs in values.items():
        pair, fitted, exact = orders(hs, rs)
        rows.append(ConvergenceRow(name, hs, rs, pair, fitted, exact))
    return rows


def coarse_counts(counts) -> tuple:
    return tuple(max(5, (c + 1) // 2) for c in counts)


@dataclass
class Verdict:
    name: str
    passed: bool
    residual: float
    coarse_residual: float
    order: float | None
    reason: str

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "box_residual": self.residual,
            "coarse_box_residual": self.coarse_residual,
            "observed_order": self.order,
            "reason": self.reason,
        }


def judge(row: ConvergenceRow, tau_exact: float, tau_cap: float, order_min: float) -> Verdict:
    """Pass at roundoff level, or when the residual shrinks like a discretization error."""
    fine, coarse = row.residuals[-1], row.residuals[-2]
    order = row.pairwise[-1]
    if fine <= tau_exact:
        return Verdict(row.name, True, fine, coarse, order, "below the exact-check floor")
    if fine > tau_cap:
        return Verdict(row.name, False, fine, coarse, order, "residual above the cap")
    if order is None or order < order_min:
        return Verdict(row.name, False, fine, coarse, order,
                       "residual does not decrease under refinement at the expected rate")
    return Verdict(row.name, True, fine, coarse, order, "discretization-limited, converging")
