"""Level-set partitions of [0, 1] and averaging against them.

The level sets of a monotone initial quantile split the percentile axis
into finitely many intervals (one per atom) plus a continuum of singletons
(where the quantile increases strictly).  Averaging another quantile with
respect to this partition is the L2 projection onto partition-piecewise-
constant functions; the squared residual of that projection, integrated
over the horizon, is the floor below which no admissible control can push
the tracking cost.
"""

from dataclasses import dataclass

import numpy as np

from . import _pwlin
from .measures import QuantileFunction, density_from_quantile, quantile_of


@dataclass(frozen=True)
class LevelSetPartition:
    """Interval cells ``(z_lo, z_hi]`` with strictly increasing levels.

    The complement of the cells is the singleton continuum; it is kept
    implicit (represented by whatever z-samples a caller chooses) since its
    index set is generally uncountable.
    """

    cells: np.ndarray   # (k, 2) interval bounds in z
    levels: np.ndarray  # (k,) value of the generating quantile on each cell

    def __post_init__(self):
        cells = np.asarray(self.cells, float).reshape(-1, 2)
        levels = np.asarray(self.levels, float)
        if len(cells) != len(levels):
            raise ValueError("one level per cell required")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("cell levels must be strictly increasing")
        if np.any(cells[:, 1] <= cells[:, 0]):
            raise ValueError("cells must have positive length")
        if len(cells) > 1 and np.any(cells[1:, 0] < cells[:-1, 1]):
            raise ValueError("cells must be disjoint and ordered")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "levels", levels)

    @property
    def masses(self):
        return self.cells[:, 1] - self.cells[:, 0]

    @property
    def n_cells(self):
        return len(self.levels)

    def singleton_spans(self):
        """Maximal z-intervals occupied by singleton level sets."""
        spans = []
        prev = 0.0
        for z0, z1 in self.cells:
            if z0 > prev:
                spans.append((prev, z0))
            prev = z1
        if prev < 1.0:
            spans.append((prev, 1.0))
        return np.asarray(spans).reshape(-1, 2)

    def to_rows(self):
        """Rows ``(z_lo, z_hi, level, mass)`` for export."""
        return [(c[0], c[1], l, c[1] - c[0])
                for c, l in zip(self.cells, self.levels)]


def build_partition(q0):
    """Level-set partition generated by an initial quantile.

    Interval cells are exactly the flats of ``q0``; everything else is the
    singleton continuum.
    """
    flats = q0.flat_intervals
    return LevelSetPartition(flats[:, :2], flats[:, 2])


def average_wrt_partition(qd, p):
    """L2 projection of a quantile onto partition-piecewise-constant maps.

    On each interval cell the value is the exact mean of ``qd`` over the
    cell; on the singleton continuum ``qd`` is returned unchanged.  The
    result is again a monotone quantile function.
    """
    z_pieces = [np.array([0.0])]
    v_pieces = [np.array([qd(0.0, side="right")])]
    prev = 0.0
    for (z0, z1), m in zip(p.cells, _cell_means(qd, p)):
        if z0 > prev:
            zs, vs = _restrict(qd, prev, z0)
            z_pieces.append(zs)
            v_pieces.append(vs)
        z_pieces.append(np.array([z0, z1]))
        v_pieces.append(np.array([m, m]))
        prev = z1
    if prev < 1.0:
        zs, vs = _restrict(qd, prev, 1.0)
        z_pieces.append(zs)
        v_pieces.append(vs)
    z_pieces.append(np.array([1.0]))
    v_pieces.append(np.array([qd(1.0, side="left")]))
    z, v = _pwlin.dedupe(np.concatenate(z_pieces), np.concatenate(v_pieces))
    return QuantileFunction(z, v, domain=qd.domain)


def _cell_means(qd, p):
    return np.array([
        _pwlin.integral(qd.z, qd.values, z0, z1) / (z1 - z0) for z0, z1 in p.cells
    ])


def _restrict(qd, lo, hi):
    """Breakpoints of ``qd`` restricted to ``(lo, hi)``, with limit endpoints."""
    inside = (qd.z > lo) & (qd.z < hi)
    zs = np.concatenate([[lo], qd.z[inside], [hi]])
    vs = np.concatenate([[qd(lo, side="right")], qd.values[inside],
                         [qd(hi, side="left")]])
    return zs, vs


def averaged_density(d, p):
    """Density whose quantile is the partition average of ``quantile_of(d)``.

    Each interval cell contributes an atom whose mass is the cell length;
    where the partition is singletons the density is unchanged.
    """
    return density_from_quantile(average_wrt_partition(quantile_of(d), p))


def limit_constant_K(t_grid, qd_slices, p):
    """Tracking-cost floor: time integral of the squared averaging residual.

    ``qd_slices`` holds the demand quantile at each time in ``t_grid``.
    The z-integral per slice is exact; the time integral uses the trapezoid
    rule on the given grid.  Zero exactly when every slice is already
    partition-piecewise-constant.
    """
    t_grid = np.asarray(t_grid, float)
    residues = np.empty(len(t_grid))
    for j, qd in enumerate(qd_slices):
        qbar = average_wrt_partition(qd, p)
        residues[j] = _pwlin.integral_sq_diff(qbar.z, qbar.values, qd.z, qd.values)
    if len(t_grid) == 1:
        return float(residues[0])
    return float(np.trapezoid(residues, t_grid))
