"""Tracy-Widom (beta = 1) distribution from an embedded table.

The CDF is tabulated on x in [-10, 6] with step 0.01 (see
tools/gen_tw1_table.py for how the table is produced) and evaluated with
monotone cubic (PCHIP) interpolation, which is plenty for critical values at
conventional test levels.
"""

from __future__ import annotations

import importlib.resources
import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator

GRID_LO = -10.0
GRID_HI = 6.0
GRID_STEP = 0.01

_cache: dict = {}


def _load_table() -> np.ndarray:
    ref = importlib.resources.files("sepcore").joinpath("data/tw1_cdf.npy")
    with importlib.resources.as_file(ref) as path:
        return np.load(path)


def _grid() -> np.ndarray:
    return GRID_LO + GRID_STEP * np.arange(round((GRID_HI - GRID_LO) / GRID_STEP) + 1)


def _interpolators():
    if "fwd" not in _cache:
        table = _load_table()
        grid = _grid()
        if table.shape != grid.shape:
            raise ValueError("embedded TW1 table has unexpected size")
        fwd = PchipInterpolator(grid, table, extrapolate=False)
        # strictly increasing knots only; the deep left tail is flat at
        # double precision
        keep = np.concatenate([[True], np.diff(table) > 0])
        inv = PchipInterpolator(table[keep], grid[keep], extrapolate=False)
        _cache["fwd"] = fwd
        _cache["inv"] = inv
        _cache["range"] = (float(table[keep][0]), float(table[keep][-1]))
    return _cache["fwd"], _cache["inv"], _cache["range"]


def tw1_cdf(x) -> np.ndarray | float:
    """CDF of the order-1 Tracy-Widom law; saturates to 0/1 outside the table."""
    fwd, _, _ = _interpolators()
    x = np.asarray(x, dtype=float)
    out = np.where(x <= GRID_LO, 0.0, np.where(x >= GRID_HI, 1.0, fwd(np.clip(x, GRID_LO, GRID_HI))))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def tw1_quantile(q: float) -> float:
    """Quantile of the order-1 Tracy-Widom law.

    Quantile levels outside the tabulated CDF range saturate to the grid
    endpoints with a warning.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q}")
    _, inv, (lo, hi) = _interpolators()
    if q <= lo:
        warnings.warn(f"quantile level {q} below table range; saturating to x = {GRID_LO}")
        return GRID_LO
    if q >= hi:
        warnings.warn(f"quantile level {q} above table range; saturating to x = {GRID_HI}")
        return GRID_HI
    return float(inv(q))
