"""One-dimensional searches over flow time: coarse grid plus golden section."""

import math

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a, b, tol):
    """Minimise ``f`` on [a, b] assuming a single local minimum there.

    Returns ``(x, f(x))`` with the bracket shrunk below ``tol``; the better
    endpoint is returned if it beats the interior estimate.
    """
    a, b = min(a, b), max(a, b)
    fa, fb = f(a), f(b)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    for xe, fe in ((a, fa), (b, fb)):
        if fe < fx:
            x, fx = xe, fe
    return x, fx


def grid_refine(scan, objective, start, horizon, grid, rel_tol=1e-10):
    """Grid scan on [start, start + horizon] followed by golden refinement.

    ``scan(t0, dt, count)`` returns ``(index, value)`` of the best grid
    point; ``objective(t)`` evaluates the same function pointwise. Ties
    in the scan resolve to the lowest index.
    """
    grid = max(int(grid), 2)
    dt = horizon / (grid - 1)
    i, v = scan(start, dt, grid)
    lo = start + max(i - 1, 0) * dt
    hi = start + min(i + 1, grid - 1) * dt
    t, val = golden_section(objective, lo, hi, max(rel_tol * horizon, 1e-15))
    if v < val:
        return start + i * dt, v
    return t, val
