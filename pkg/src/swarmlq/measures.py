"""Normalized 1D densities and their CDF / quantile / Wasserstein algebra.

A :class:`Density` is a mixture of weighted point masses (atoms) and a
piecewise-constant nonnegative histogram, with total mass one.  With this
representation the CDF is piecewise linear with jumps at atoms, the
quantile function is piecewise linear with flats at atoms, and every
integral needed for the 2-Wasserstein distance is exact (closed-form on
merged breakpoints, no sampled quadrature).
"""

import numpy as np

from . import _pwlin

MASS_TOL = 1e-12
ATOM_MERGE_REL = 1e-12   # positions closer than this fraction of the domain merge


class Density:
    """Normalized nonnegative distribution on a closed interval.

    Parameters
    ----------
    domain : (float, float)
        Closed interval ``[x_lo, x_hi]`` containing all mass.
    atoms : sequence of (position, mass), optional
        Point masses.  Coincident positions (within ``ATOM_MERGE_REL`` of the
        domain length) are merged by summing masses.
    edges : array, optional
        Cell edges of the piecewise-constant part, strictly increasing.
    values : array, optional
        Density value per cell (mass per unit length), nonnegative.
    normalize : bool
        If true, rescale all masses so the total is exactly one.  Otherwise
        the total must already be one within ``MASS_TOL``.
    """

    def __init__(self, domain, atoms=None, edges=None, values=None, normalize=False):
        lo, hi = float(domain[0]), float(domain[1])
        if not hi > lo:
            raise ValueError(f"empty domain [{lo}, {hi}]")
        self.domain = (lo, hi)

        if atoms is not None and len(atoms):
            arr = np.asarray(atoms, dtype=float).reshape(-1, 2)
            ax, am = arr[:, 0], arr[:, 1]
        else:
            ax = np.empty(0)
            am = np.empty(0)
        if np.any(am < 0):
            raise ValueError("atom masses must be nonnegative")
        ax, am = ax[am > 0], am[am > 0]
        order = np.argsort(ax, kind="stable")
        ax, am = ax[order], am[order]
        ax, am = _merge_atoms(ax, am, tol=ATOM_MERGE_REL * (hi - lo))

        if edges is not None and len(edges):
            edges = np.asarray(edges, dtype=float)
            values = np.asarray(values, dtype=float)
            if edges.ndim != 1 or len(edges) != len(values) + 1:
                raise ValueError("edges must have one more entry than values")
            if np.any(np.diff(edges) <= 0):
                raise ValueError("edges must be strictly increasing")
            if np.any(values < 0):
                raise ValueError("cell values must be nonnegative")
        else:
            edges = np.empty(0)
            values = np.empty(0)

        eps = ATOM_MERGE_REL * (hi - lo)
        if len(ax) and (ax[0] < lo - eps or ax[-1] > hi + eps):
            raise ValueError("atom outside domain")
        if len(edges) and (edges[0] < lo - eps or edges[-1] > hi + eps):
            raise ValueError("grid outside domain")

        total = float(np.sum(am) + np.sum(values * np.diff(edges)))
        if normalize:
            if total <= 0:
                raise ValueError("cannot normalize a zero density")
            am = am / total
            values = values / total
        elif abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

        for a in (ax, am, edges, values):
            a.setflags(write=False)
        self.atom_x = ax
        self.atom_m = am
        self.edges = edges
        self.values = values

    @property
    def mass(self):
        return float(np.sum(self.atom_m) + np.sum(self.values * np.diff(self.edges)))

    @property
    def support(self):
        """Hull ``(min, max)`` of the points carrying mass."""
        pts = []
        if len(self.atom_x):
            pts += [self.atom_x[0], self.atom_x[-1]]
        pos = np.flatnonzero(self.values > 0)
        if len(pos):
            pts += [self.edges[pos[0]], self.edges[pos[-1] + 1]]
        if not pts:
            raise ValueError("density has no support")
        return (min(pts), max(pts))

    @classmethod
    def from_atoms(cls, positions, masses, domain=None, normalize=False):
        positions = np.asarray(positions, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if domain is None:
            lo, hi = positions.min(), positions.max()
            pad = max(hi - lo, 1.0)
            domain = (lo - 0.05 * pad, hi + 0.05 * pad)
        return cls(domain, atoms=np.column_stack([positions, masses]), normalize=normalize)

    @classmethod
    def from_histogram(cls, edges, values, domain=None, normalize=True):
        edges = np.asarray(edges, dtype=float)
        if domain is None:
            domain = (edges[0], edges[-1])
        return cls(domain, edges=edges, values=values, normalize=normalize)

    @classmethod
    def from_pdf(cls, fn, domain, nx=400):
        """Discretize a pdf by per-cell Simpson averages, then normalize."""
        edges = np.linspace(domain[0], domain[1], nx + 1)
        a, b = edges[:-1], edges[1:]
        vals = (fn(a) + 4.0 * fn(0.5 * (a + b)) + fn(b)) / 6.0
        vals = np.maximum(np.asarray(vals, dtype=float), 0.0)
        return cls(domain, edges=edges, values=vals, normalize=True)

    @classmethod
    def uniform(cls, domain):
        lo, hi = domain
        return cls(domain, edges=np.array([lo, hi]), values=np.array([1.0 / (hi - lo)]))

    def to_record(self):
        """Plain-dict form used by the CLI config / artifact files."""
        return {
            "domain": [self.domain[0], self.domain[1]],
            "atoms": [[float(x), float(m)] for x, m in zip(self.atom_x, self.atom_m)],
            "grid": {"edges": self.edges.tolist(), "values": self.values.tolist()},
        }

    @classmethod
    def from_record(cls, rec, normalize=False):
        grid = rec.get("grid") or {}
        return cls(
            tuple(rec["domain"]),
            atoms=rec.get("atoms") or None,
            edges=np.asarray(grid.get("edges") or [], dtype=float),
            values=np.asarray(grid.get("values") or [], dtype=float),
            normalize=normalize,
        )

    def __repr__(self):
        return (f"Density(domain={self.domain}, atoms={len(self.atom_x)}, "
                f"cells={len(self.values)})")


def _merge_atoms(ax, am, tol):
    if len(ax) < 2:
        return ax.copy(), am.copy()
    keep_x = [ax[0]]
    keep_m = [am[0]]
    for x, m in zip(ax[1:], am[1:]):
        if x - keep_x[-1] <= tol:
            keep_m[-1] += m
        else:
            keep_x.append(x)
            keep_m.append(m)
    return np.asarray(keep_x), np.asarray(keep_m)


class CDFFunction:
    """Right-continuous CDF as a breakpoint curve ``x -> F(x)`` on a domain."""

    def __init__(self, x, F, domain):
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        if np.any(np.diff(x) < 0) or np.any(np.diff(F) < -1e-12):
            raise ValueError("CDF breakpoints must be nondecreasing")
        F = np.maximum.accumulate(F)
        self.x = x
        self.F = F
        self.domain = (float(domain[0]), float(domain[1]))

    def __call__(self, x, side="right"):
        return _pwlin.eval_pw(x, self.x, self.F, side=side)

    def jump_at(self, x):
        """Mass of the jump at ``x`` (zero where F is continuous)."""
        return float(self(x, side="right") - self(x, side="left"))


class QuantileFunction:
    """Monotone map ``[0, 1] -> domain``, left-continuous at jump points.

    Flats (maximal z-intervals of constant value) correspond to atoms of the
    underlying density; jumps correspond to zero-mass gaps.  The value at
    ``z = 0`` is the limit from the right, so ``Q(0)`` is the left end of the
    support rather than the domain edge.
    """

    def __init__(self, z, values, domain=None):
        z = np.asarray(z, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(z) != len(values) or len(z) < 1:
            raise ValueError("breakpoint arrays must be nonempty and equal length")
        if np.any(np.diff(z) < 0):
            raise ValueError("quantile breakpoints must have nondecreasing z")
        scale = max(abs(values[0]), abs(values[-1]), 1.0)
        if np.any(np.diff(values) < -1e-9 * scale):
            raise ValueError("quantile values must be nondecreasing")
        values = np.maximum.accumulate(values)
        if abs(z[0]) > 1e-9 or abs(z[-1] - 1.0) > 1e-9:
            raise ValueError("quantile must span z in [0, 1]")
        z = z.copy()
        z[0], z[-1] = 0.0, 1.0
        z, values = _pwlin.dedupe(z, values)
        self.z = z
        self.values = values
        if domain is None:
            domain = (values[0], values[-1])
        self.domain = (float(domain[0]), float(domain[1]))

    def __call__(self, z, side="left"):
        return _pwlin.eval_pw(z, self.z, self.values, side=side)

    @property
    def flat_intervals(self):
        """Array of rows ``(z_lo, z_hi, value)``, one per atom."""
        out = []
        k = 0
        z, v = self.z, self.values
        while k < len(z) - 1:
            j = k
            while j + 1 < len(z) and v[j + 1] == v[k]:
                j += 1
            if j > k and z[j] > z[k]:
                out.append((z[k], z[j], v[k]))
            k = max(j, k + 1)
        return np.asarray(out).reshape(-1, 3)

    def mean(self):
        return _pwlin.integral(self.z, self.values, 0.0, 1.0)


def cdf_of(d):
    """CDF of a density: linear ramps over cells, jumps at atoms."""
    lo, hi = d.domain
    xs = [lo]
    Fs = [0.0]
    c = 0.0
    for kind, a, b, w in _support_items(d):
        if kind == "cell":
            if a > xs[-1]:
                xs.append(a)
                Fs.append(c)
            c += w * (b - a)
            xs.append(b)
            Fs.append(c)
        else:  # atom at a with mass w
            if a > xs[-1]:
                xs.append(a)
                Fs.append(c)
            xs.append(a)
            c += w
            Fs.append(c)
    if hi > xs[-1]:
        xs.append(hi)
        Fs.append(c)
    F = np.asarray(Fs) / c  # c == 1 within MASS_TOL; division pins F(hi) = 1 exactly
    x, F = _pwlin.dedupe(np.asarray(xs), F)
    return CDFFunction(x, F, d.domain)


def quantile_of(d):
    """Quantile function (generalized CDF inverse) of a density.

    Atoms become flats whose z-length equals the atom mass; zero-mass gaps
    interior to the support become jumps.
    """
    zs = []
    Qs = []
    c = 0.0
    for kind, a, b, w in _support_items(d):
        if kind == "cell":
            if w <= 0.0:
                continue
            if not zs or Qs[-1] != a:
                zs.append(c)
                Qs.append(a)
            c += w * (b - a)
            zs.append(c)
            Qs.append(b)
        else:
            if not zs or Qs[-1] != a:
                zs.append(c)
                Qs.append(a)
            c += w
            zs.append(c)
            Qs.append(a)
    if not zs:
        raise ValueError("density has no support")
    z = np.asarray(zs) / c
    return QuantileFunction(z, np.asarray(Qs), domain=d.domain)


def _support_items(d):
    """Cells (split at interior atoms) and atoms, ordered along the axis.

    Sort key places an atom at x before any cell starting at x so the CDF
    jumps before it resumes ramping.
    """
    items = []
    for i in range(len(d.values)):
        a, b, v = d.edges[i], d.edges[i + 1], d.values[i]
        inside = d.atom_x[(d.atom_x > a) & (d.atom_x < b)]
        cuts = np.concatenate([[a], inside, [b]])
        for j in range(len(cuts) - 1):
            if cuts[j + 1] > cuts[j]:
                items.append((cuts[j], 1, "cell", cuts[j], cuts[j + 1], v))
    for x, m in zip(d.atom_x, d.atom_m):
        items.append((x, 0, "atom", x, x, m))
    items.sort(key=lambda t: (t[0], t[1]))
    return [(kind, a, b, w) for _, _, kind, a, b, w in items]


def cdf_from_quantile(q):
    """Recover the CDF via ``F(x) = sup { z : Q(z) <= x }``.

    For breakpoint curves this is a coordinate swap: flats of Q become jumps
    of F and jumps of Q become flats of F.
    """
    x = q.values
    F = q.z
    lo, hi = q.domain
    if lo < x[0]:
        x = np.concatenate([[lo], x])
        F = np.concatenate([[0.0], F])
    if hi > x[-1]:
        x = np.concatenate([x, [hi]])
        F = np.concatenate([F, [1.0]])
    return CDFFunction(x, F, q.domain)


def density_from_quantile(q, domain=None):
    """Pushforward of the uniform density on [0, 1] through ``q``.

    Flats map to atoms with mass equal to the flat length; increasing affine
    stretches map to cells with value ``dz / dx``; jumps map to zero-mass
    gaps.  Exact for piecewise-linear quantiles.
    """
    z, v = q.z, q.values
    dv = np.diff(v)
    scale = max(abs(v[0]), abs(v[-1]), 1.0)
    if np.any(dv < -1e-9 * scale):
        raise ValueError("quantile is non-monotone beyond tolerance")
    atoms = [(row[2], row[1] - row[0]) for row in q.flat_intervals]
    cell_lo, cell_hi, cell_v = [], [], []
    for k in range(len(z) - 1):
        dz = z[k + 1] - z[k]
        dx = v[k + 1] - v[k]
        if dz > 0 and dx > 0:
            cell_lo.append(v[k])
            cell_hi.append(v[k + 1])
            cell_v.append(dz / dx)
    edges, values = _cells_to_grid(cell_lo, cell_hi, cell_v)
    if domain is None:
        lo, hi = q.domain
        if not hi > lo:  # quantile constant: pad so the atom has a real interval
            pad = max(1.0, abs(lo)) * 0.5
            lo, hi = lo - pad, hi + pad
        domain = (lo, hi)
    return Density(
        domain,
        atoms=atoms or None,
        edges=edges,
        values=values,
    )


def _cells_to_grid(cell_lo, cell_hi, cell_v):
    """Pack ordered, non-overlapping cells into one grid, zero-filling gaps."""
    if not cell_lo:
        return np.empty(0), np.empty(0)
    edges = [cell_lo[0]]
    values = []
    for a, b, v in zip(cell_lo, cell_hi, cell_v):
        if a > edges[-1]:
            edges.append(a)
            values.append(0.0)
        if b > edges[-1]:
            edges.append(b)
            values.append(v)
    return np.asarray(edges), np.asarray(values)


def pushforward(d, f, nz=2048):
    """Push a density through a monotone nondecreasing map of the line.

    The image density has quantile ``f o Q_d``, so the map is applied to a
    refined set of quantile breakpoints and the result reconstructed.  Atoms
    land exactly at their mapped positions; curved stretches of ``f`` are
    piecewise-linearized with ``nz`` extra samples.
    """
    q = quantile_of(d)
    z, x = _refine_increasing(q, nz)
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        raise ValueError("map must be vectorized over positions")
    dy = np.diff(y)
    scale = max(float(np.max(y) - np.min(y)), 1.0)
    if np.any(dy < -1e-9 * scale):
        raise ValueError("pushforward requires a monotone nondecreasing map")
    lo = min(d.domain[0], float(y[0]))
    hi = max(d.domain[1], float(y[-1]))
    return density_from_quantile(QuantileFunction(z, y), domain=(lo, hi))


def _refine_increasing(q, nz):
    """Breakpoints of ``q`` with extra samples inside increasing stretches.

    Flats and duplicated jump nodes are preserved verbatim so the refined
    arrays still encode atoms and zero-mass gaps exactly.
    """
    zs = [q.z[0]]
    xs = [q.values[0]]
    for k in range(len(q.z) - 1):
        z0, z1 = q.z[k], q.z[k + 1]
        v0, v1 = q.values[k], q.values[k + 1]
        if z1 > z0 and v1 > v0:
            n = int(np.ceil((z1 - z0) * nz))
            for j in range(1, n):
                w = j / n
                zs.append(z0 + w * (z1 - z0))
                xs.append(v0 + w * (v1 - v0))
        zs.append(z1)
        xs.append(v1)
    return np.asarray(zs), np.asarray(xs)


def wasserstein2(a, b):
    """2-Wasserstein distance, computed as the L2 distance of quantiles.

    Exact for the atom-plus-histogram representation: the squared quantile
    difference is integrated in closed form on merged breakpoints.
    """
    return l2_quantile_distance(quantile_of(a), quantile_of(b))


def l2_quantile_distance(qa, qb):
    """L2([0,1]) distance between two quantile functions (exact)."""
    return float(np.sqrt(max(_pwlin.integral_sq_diff(qa.z, qa.values, qb.z, qb.values), 0.0)))


def densities_l1_distance(a, b):
    """L1 distance between the continuous parts plus atom mismatch mass.

    Atoms are compared exactly by position: unmatched atom mass counts in
    full.  Used by marginal checks.
    """
    grid = _pwlin.merged_grid(
        a.edges if len(a.edges) else np.empty(0),
        b.edges if len(b.edges) else np.empty(0),
    )
    tot = 0.0
    if len(grid) >= 2:
        va = _cell_values_on(a, grid)
        vb = _cell_values_on(b, grid)
        tot += float(np.sum(np.abs(va - vb) * np.diff(grid)))
    pos = np.unique(np.concatenate([a.atom_x, b.atom_x]))
    ma = np.zeros(len(pos))
    mb = np.zeros(len(pos))
    ma[np.searchsorted(pos, a.atom_x)] = a.atom_m
    mb[np.searchsorted(pos, b.atom_x)] = b.atom_m
    tot += float(np.sum(np.abs(ma - mb)))
    return tot


def _cell_values_on(d, grid):
    """Piecewise-constant values of the continuous part on a refining grid."""
    mid = 0.5 * (grid[:-1] + grid[1:])
    out = np.zeros(len(mid))
    if len(d.edges):
        idx = np.searchsorted(d.edges, mid, side="right") - 1
        ok = (idx >= 0) & (idx < len(d.values))
        out[ok] = d.values[idx[ok]]
    return out
