"""Least-squares power-law fit, matching the experiment's own formula."""

from __future__ import annotations

import numpy as np


def loglog_slope(xs, ys) -> tuple[float, float]:
    """Slope and intercept of log(y) against log(x) (natural logs)."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)
