"""Piecewise-linear curves with jump discontinuities, on breakpoint arrays.

A curve is a pair of arrays ``(x, v)`` with ``x`` nondecreasing.  Repeated
abscissae encode jumps: the first occurrence carries the left limit, the
last one the right limit.  Between distinct abscissae the curve is affine.
This representation makes CDFs (linear ramps plus jumps at atoms) and
quantile functions (linear ramps plus flats, with jumps at zero-mass gaps)
exact, so all the L2 integrals below are closed-form rather than sampled.
"""

import numpy as np


def eval_pw(xq, x, v, side):
    """Evaluate a breakpoint curve at ``xq``.

    ``side='right'`` returns the limit from the right at jump points
    (CDF convention), ``side='left'`` the limit from the left (quantile
    convention).  Outside ``[x[0], x[-1]]`` the end values are returned.
    """
    xq = np.asarray(xq, dtype=float)
    scalar = xq.ndim == 0
    xq = np.atleast_1d(xq)
    out = np.empty_like(xq)
    if side == "right":
        idx = np.searchsorted(x, xq, side="right") - 1
        below = idx < 0
        idx = np.clip(idx, 0, len(x) - 1)
        top = idx >= len(x) - 1
        mid = ~(below | top)
        out[below] = v[0]
        out[top] = v[-1]
        i = idx[mid]
        w = (xq[mid] - x[i]) / (x[i + 1] - x[i])
        out[mid] = v[i] + w * (v[i + 1] - v[i])
    elif side == "left":
        idx = np.searchsorted(x, xq, side="left")
        above = idx >= len(x)
        idx = np.clip(idx, 0, len(x) - 1)
        exact = ~above & (x[idx] == xq)
        bottom = ~above & ~exact & (idx == 0)
        mid = ~(above | exact | bottom)
        out[above] = v[-1]
        out[exact] = v[idx[exact]]
        out[bottom] = v[0]
        i = idx[mid]
        w = (xq[mid] - x[i - 1]) / (x[i] - x[i - 1])
        out[mid] = v[i - 1] + w * (v[i] - v[i - 1])
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return out[0] if scalar else out


def segment_endpoints(x, v, grid):
    """Right/left limits of a curve on the segments of a refining grid.

    ``grid`` must be strictly increasing and cover ``[x[0], x[-1]]``.
    Returns ``(v_right_of_left_node, v_left_of_right_node)``, i.e. the two
    endpoint values of the affine restriction to each segment.
    """
    lo = eval_pw(grid[:-1], x, v, side="right")
    hi = eval_pw(grid[1:], x, v, side="left")
    return lo, hi


def merged_grid(*xs):
    """Strictly increasing union of several breakpoint abscissa arrays."""
    return np.unique(np.concatenate(xs))


def integral_sq_diff(xa, va, xb, vb, lo=None, hi=None):
    """Exact integral of ``(A - B)**2`` over ``[lo, hi]``.

    Both curves are affine between merged breakpoints, so the integrand is
    quadratic per segment and the closed form
    ``dz * (e0**2 + e0*e1 + e1**2) / 3`` is exact.
    """
    grid = merged_grid(xa, xb)
    if lo is not None or hi is not None:
        lo = grid[0] if lo is None else lo
        hi = grid[-1] if hi is None else hi
        grid = np.unique(np.clip(np.concatenate([grid, [lo, hi]]), lo, hi))
    dz = np.diff(grid)
    a0, a1 = segment_endpoints(xa, va, grid)
    b0, b1 = segment_endpoints(xb, vb, grid)
    e0 = a0 - b0
    e1 = a1 - b1
    return float(np.sum(dz * (e0 * e0 + e0 * e1 + e1 * e1) / 3.0))


def integral(x, v, lo, hi):
    """Exact integral of the curve over ``[lo, hi]`` (jumps carry no mass)."""
    grid = np.unique(np.clip(np.concatenate([x, [lo, hi]]), lo, hi))
    dz = np.diff(grid)
    v0, v1 = segment_endpoints(x, v, grid)
    return float(np.sum(dz * (v0 + v1) / 2.0))


def combine(curves, fn):
    """Pointwise combination of breakpoint curves into a new curve.

    ``fn`` maps the tuple of per-curve values to a scalar and must be affine
    in its arguments (e.g. a convex combination) for the result to be exact.
    Jump structure of all inputs is preserved.
    """
    grid = merged_grid(*(x for x, _ in curves))
    lefts = [eval_pw(grid, x, v, side="left") for x, v in curves]
    rights = [eval_pw(grid, x, v, side="right") for x, v in curves]
    vl = fn(*lefts)
    vr = fn(*rights)
    xs = [grid[0]]
    vs = [vr[0]]
    for k in range(1, len(grid) - 1):
        xs.append(grid[k])
        vs.append(vl[k])
        if vr[k] != vl[k]:
            xs.append(grid[k])
            vs.append(vr[k])
    xs.append(grid[-1])
    vs.append(vl[-1])
    return np.asarray(xs), np.asarray(vs)


def align(curves):
    """Common breakpoint representation for several curves.

    Returns ``(x_nodes, V)`` where ``V[i]`` holds curve i's values on the
    shared nodes; a node is duplicated wherever any curve jumps, so every
    curve is affine between consecutive nodes and one-sided limits are
    preserved exactly.
    """
    grid = merged_grid(*(x for x, _ in curves))
    lefts = np.vstack([eval_pw(grid, x, v, side="left") for x, v in curves])
    rights = np.vstack([eval_pw(grid, x, v, side="right") for x, v in curves])
    xs = [grid[0]]
    cols = [rights[:, 0]]
    for k in range(1, len(grid) - 1):
        xs.append(grid[k])
        cols.append(lefts[:, k])
        if np.any(rights[:, k] != lefts[:, k]):
            xs.append(grid[k])
            cols.append(rights[:, k])
    xs.append(grid[-1])
    cols.append(lefts[:, -1])
    return np.asarray(xs), np.column_stack(cols)


def dedupe(x, v):
    """Drop consecutive identical ``(x, v)`` pairs."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(x) == 0:
        return x, v
    keep = np.ones(len(x), dtype=bool)
    keep[1:] = (np.diff(x) != 0) | (np.diff(v) != 0)
    return x[keep], v[keep]
