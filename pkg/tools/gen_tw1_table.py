"""Regenerate the embedded Tracy-Widom (beta = 1) CDF table.

Solves the Hastings-McLeod solution of Painleve II, q'' = x q + 2 q^3, as a
boundary value problem (Airy decay on the right, sqrt(-x/2) growth on the
left -- plain backward shooting loses the solution), then assembles

    F1(s) = exp( -1/2 * [ int_s^inf q(x) dx + int_s^inf (x - s) q(x)^2 dx ] )

by cumulative quadrature.  Writes F1 on the grid x in [-10, 6], step 0.01,
to src/sepcore/data/tw1_cdf.npy.

Run from the repository root:  python tools/gen_tw1_table.py
"""

import pathlib

import numpy as np
from scipy import special
from scipy.integrate import cumulative_simpson, quad, solve_bvp

X_LO, X_HI = -10.0, 8.0
GRID_LO, GRID_HI, GRID_STEP = -10.0, 6.0, 0.01


def hm_left_asymptote(x):
    return np.sqrt(-x / 2.0) * (1.0 + 1.0 / (8 * x**3) - 73.0 / (128 * x**6))


def solve_painleve2():
    def rhs(x, y):
        return np.vstack([y[1], x * y[0] + 2.0 * y[0] ** 3])

    def bc(ya, yb):
        return np.array([ya[0] - hm_left_asymptote(X_LO), yb[0] - special.airy(X_HI)[0]])

    x0 = np.linspace(X_LO, X_HI, 2001)
    guess = np.where(x0 < 0, np.sqrt(np.maximum(-x0, 1e-3) / 2.0), special.airy(np.minimum(x0, X_HI))[0])
    sol = solve_bvp(rhs, bc, x0, np.vstack([guess, np.zeros_like(x0)]), tol=1e-11, max_nodes=400000)
    if sol.status != 0:
        raise RuntimeError(f"BVP solver failed: {sol.message}")
    return sol


def build_cdf():
    sol = solve_painleve2()
    xf = np.linspace(X_LO, X_HI, 36001)
    q = sol.sol(xf)[0]

    def airy(t):
        return special.airy(t)[0]

    i_tail = quad(airy, X_HI, 60.0)[0]
    p_tail = quad(lambda t: airy(t) ** 2, X_HI, 60.0)[0]
    q_tail = quad(lambda t: t * airy(t) ** 2, X_HI, 60.0)[0]

    def cum_from_right(f):
        c = cumulative_simpson(f, x=xf, initial=0.0)
        return c[-1] - c

    integral_q = cum_from_right(q) + i_tail
    integral_q2 = cum_from_right(q**2) + p_tail
    integral_xq2 = cum_from_right(xf * q**2) + q_tail
    f1 = np.exp(-0.5 * (integral_q + integral_xq2 - xf * integral_q2))

    grid = GRID_LO + GRID_STEP * np.arange(round((GRID_HI - GRID_LO) / GRID_STEP) + 1)
    table = np.interp(grid, xf, f1)
    # fine grid contains every table point exactly (36001 = 2000 per unit)
    assert np.allclose(grid, xf[np.searchsorted(xf, grid - 1e-12)], atol=1e-9)
    return np.clip(table, 0.0, 1.0)


def main():
    table = build_cdf()
    mean = np.trapezoid(np.gradient(table, GRID_STEP) * np.arange(GRID_LO, GRID_HI + GRID_STEP / 2, GRID_STEP), dx=GRID_STEP)
    print(f"table points: {table.size}, mean ~ {mean:.6f} (reference -1.206534)")
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "sepcore" / "data" / "tw1_cdf.npy"
    out.parent.mkdir(parents=True, exist_ok=True)
    np.save(out, table)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
