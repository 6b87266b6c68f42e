"""Full-problem solvers: general finite-horizon, static, and periodic demand.

The solution pipeline is the same in every regime: build the level-set
partition of the initial resource quantile, average the demand quantile
against it, solve one scalar tracking problem per partition element, and
reassemble the percentile trajectories into a spatial velocity field.  The
static regime collapses to an error-feedback law whose trajectory traverses
the Wasserstein geodesic toward the nearest reachable density; the periodic
regime works in the frequency domain, where the map from reference to
steady state is a zero-phase second-order low-pass filter with cutoff
``1/alpha``.
"""

from dataclasses import dataclass

import numpy as np

from . import _pwlin, lq
from .errors import ConfigError, NumericalError
from .measures import (Density, QuantileFunction, density_from_quantile,
                       quantile_of)
from .partition import (LevelSetPartition, average_wrt_partition,
                        build_partition, limit_constant_K)
from .transport import (DensityPath, GridQuantileVelocity,
                        QuantileReassembledVelocity, VelocityField)

MOTION_IDENTITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# demand signals

class DemandSignal:
    """Time-indexed demand density with cached quantile slices."""

    def __init__(self):
        self._cache = {}

    def density_at(self, t):
        raise NotImplementedError

    def quantile_at(self, t):
        key = float(t)
        if key not in self._cache:
            self._cache[key] = quantile_of(self.density_at(t))
        return self._cache[key]


class StaticDemand(DemandSignal):
    def __init__(self, density):
        super().__init__()
        self.density = density

    def density_at(self, t):
        return self.density

    def quantile_at(self, t):
        return super().quantile_at(0.0)


class PeriodicDemand(DemandSignal):
    """Demand given by a rule over one period, repeated for all time."""

    def __init__(self, period, rule):
        super().__init__()
        if period <= 0:
            raise ConfigError("period must be positive")
        self.period = float(period)
        self.rule = rule

    def density_at(self, t):
        return self.rule(float(t) % self.period)

    def quantile_at(self, t):
        return super().quantile_at(float(t) % self.period)


class SampledDemand(DemandSignal):
    """Densities at sample times, interpolated along Wasserstein geodesics.

    Between samples the quantile is the convex combination of the two
    bracketing quantiles (displacement interpolation), which keeps every
    intermediate slice a valid density.
    """

    def __init__(self, times, densities):
        super().__init__()
        self.times = np.asarray(times, float)
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("sample times must be strictly increasing")
        if len(densities) != len(self.times):
            raise ConfigError("one density per sample time required")
        self.densities = list(densities)
        self._slices = [quantile_of(d) for d in densities]

    def density_at(self, t):
        return density_from_quantile(self.quantile_at(t))

    def quantile_at(self, t):
        t = float(np.clip(t, self.times[0], self.times[-1]))
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        j = min(max(j, 0), len(self.times) - 2)
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        if w == 0.0:
            return self._slices[j]
        if w == 1.0:
            return self._slices[j + 1]
        qa, qb = self._slices[j], self._slices[j + 1]
        z, v = _pwlin.combine([(qa.z, qa.values), (qb.z, qb.values)],
                              lambda a, b: (1.0 - w) * a + w * b)
        return QuantileFunction(z, v)


def gaussian_mixture_demand(means, sigmas, base_weights, sin_amplitudes,
                            period, domain, nx=400):
    """Periodic demand from Gaussian bumps with sinusoidally modulated weights.

    Component ``i`` has weight ``base_weights[i] + sin_amplitudes[i] *
    sin(2 pi t / period)``; each slice is renormalized on the domain grid.
    """
    means = np.asarray(means, float)
    sigmas = np.asarray(sigmas, float)
    base = np.asarray(base_weights, float)
    amps = np.asarray(sin_amplitudes, float)

    def rule(t):
        w = base + amps * np.sin(2.0 * np.pi * t / period)
        if np.any(w < 0):
            raise ConfigError("mixture weights must stay nonnegative")

        def pdf(x):
            x = np.asarray(x, float)[..., None]
            g = np.exp(-0.5 * ((x - means) / sigmas) ** 2) / (sigmas * np.sqrt(2 * np.pi))
            return np.sum(w * g, axis=-1)

        return Density.from_pdf(pdf, domain, nx=nx)

    return PeriodicDemand(period, rule)


# ---------------------------------------------------------------------------
# scenario and solution containers

@dataclass
class Scenario:
    """One problem instance plus its discretization choices."""

    resource: Density
    demand: DemandSignal
    alpha: float
    horizon: float | None = None
    nt: int = 1000
    nx: int = 400
    n_harmonics: int = 64
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.horizon is not None and self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.nt < 2:
            raise ConfigError("nt must be at least 2")


@dataclass
class CostBreakdown:
    assignment: float          # integral of squared slice distances
    motion: float              # integral of the squared-velocity mass integral
    total: float               # assignment + alpha**2 * motion
    limit: float | None = None # partition floor below which no control can go
    t: np.ndarray | None = None
    assignment_t: np.ndarray | None = None
    motion_x_t: np.ndarray | None = None
    motion_z_t: np.ndarray | None = None


@dataclass
class ScalarFamily:
    """Per-partition-element tracking solutions, for export and inspection."""

    t: np.ndarray
    labels: list           # 'cell k' or 'z=0.123'
    weights: np.ndarray    # percentile mass carried by each problem
    r: np.ndarray          # (B, nt+1)
    u: np.ndarray
    y: np.ndarray
    d: np.ndarray
    p: np.ndarray          # shared Riccati samples
    cost: np.ndarray


@dataclass
class OptimalControlSolution:
    t: np.ndarray
    trajectory: DensityPath
    velocity: VelocityField
    quantile_velocity: GridQuantileVelocity
    breakdown: CostBreakdown
    cost: float                       # decomposed cost: sum of cell costs + floor
    partition: LevelSetPartition
    family: ScalarFamily
    closed_form_cost: float | None = None
    period: float | None = None
    frequency_table: list | None = None
    warmup: DensityPath | None = None


# ---------------------------------------------------------------------------
# problem structure shared by the general and periodic paths

@dataclass
class _Problems:
    z_nodes: np.ndarray     # reassembly nodes, nondecreasing with duplicates
    node_problem: np.ndarray  # problem index per node
    kinds: list             # per problem: ("cell", z0, z1, level) or ("point", z, side)
    r0: np.ndarray          # per problem initial state
    weights: np.ndarray     # percentile mass per problem (trapezoid for points)
    labels: list


def _demand_jump_knots(slices, cap=256):
    """Percentiles where any demand slice's quantile jumps (zero-mass gaps)."""
    knots = set()
    for qd in slices:
        dup = qd.z[1:][qd.z[1:] == qd.z[:-1]]
        knots.update(float(z) for z in dup if 0.0 < z < 1.0)
        if len(knots) > cap:
            break
    return np.asarray(sorted(knots))


def _problem_structure(q0, refine=0, knots=None):
    """Scalar problems generated by the level sets of ``q0``.

    One problem per flat (atom) and one per singleton node.  Where a flat
    directly adjoins a strictly increasing stretch, a duplicate singleton
    node is inserted at the shared percentile so the one-sided limit of the
    continuum is tracked separately from the atom (the reassembled quantile
    may open a zero-mass gap there).  ``knots`` are percentiles where the
    demand jumps; each lands as a duplicated node pair so both one-sided
    limits get their own problem and the reassembled trajectory may split
    there too.
    """
    z_all = q0.z
    v_all = q0.values
    if refine or (knots is not None and len(knots)):
        extra = []
        for k in range(len(z_all) - 1):
            dz = z_all[k + 1] - z_all[k]
            if dz > 0 and v_all[k + 1] > v_all[k]:
                n = int(np.ceil(dz * refine)) if refine else 1
                if n > 1:
                    extra.append(np.linspace(z_all[k], z_all[k + 1], n + 1)[1:-1])
                if knots is not None:
                    inside = knots[(knots > z_all[k]) & (knots < z_all[k + 1])]
                    extra.append(np.repeat(inside, 2))  # one-sided pair
        if extra:
            z_all = np.sort(np.concatenate([z_all] + extra), kind="stable")
            v_all = _pwlin.eval_pw(z_all, q0.z, q0.values, side="left")
            # re-pin right limits at duplicated nodes
            dup = np.zeros(len(z_all), bool)
            dup[1:] = z_all[1:] == z_all[:-1]
            v_all[dup] = _pwlin.eval_pw(z_all[dup], q0.z, q0.values, side="right")

    flats = q0.flat_intervals
    nodes = []   # (z, problem_key)
    kinds = []
    labels = []
    r0 = []
    key_of = {}

    def cell_key(c):
        k = ("cell", c)
        if k not in key_of:
            z0, z1, level = flats[c]
            key_of[k] = len(kinds)
            kinds.append(("cell", z0, z1, level))
            labels.append(f"cell{c}")
            r0.append(level)
        return key_of[k]

    def point_key(z, side, value):
        k = ("point", z, side)
        if k not in key_of:
            key_of[k] = len(kinds)
            kinds.append(("point", z, side))
            labels.append(f"z={z:.6g}{'+' if side == 'right' else '-'}")
            r0.append(value)
        return key_of[k]

    fi = 0
    i = 0
    n = len(z_all)
    while i < n:
        z, v = z_all[i], v_all[i]
        in_flat = fi < len(flats) and flats[fi][0] <= z <= flats[fi][1] and v == flats[fi][2]
        if in_flat:
            z0, z1, _ = flats[fi]
            if z == z0:
                # left boundary adjoining an increasing stretch gets a
                # singleton limit node before the flat takes over
                if i > 0 and z_all[i - 1] < z0 and v_all[i - 1] < v:
                    nodes.append((z, point_key(z, "left", v)))
                nodes.append((z, cell_key(fi)))
            elif z == z1:
                nodes.append((z, cell_key(fi)))
                if i + 1 < n and z_all[i + 1] > z1 and v_all[i + 1] > v:
                    nodes.append((z, point_key(z, "right", v)))
                fi += 1
            i += 1
            continue
        side = "right" if (i > 0 and z_all[i - 1] == z) else "left"
        nodes.append((z, point_key(z, side, v)))
        i += 1

    z_nodes = np.array([z for z, _ in nodes])
    node_problem = np.array([k for _, k in nodes], dtype=int)

    weights = np.zeros(len(kinds))
    for c in range(len(flats)):
        k = key_of.get(("cell", c))
        if k is not None:
            weights[k] = flats[c][1] - flats[c][0]
    # trapezoid weights over maximal runs of singleton nodes
    run = []
    for j, (z, k) in enumerate(nodes):
        if kinds[node_problem[j]][0] == "point":
            run.append(j)
        else:
            _accumulate_run(run, nodes, node_problem, weights)
            run = []
    _accumulate_run(run, nodes, node_problem, weights)
    return _Problems(z_nodes, node_problem, kinds, np.asarray(r0), weights, labels)


def _accumulate_run(run, nodes, node_problem, weights):
    if len(run) < 2:
        return
    zs = np.array([nodes[j][0] for j in run])
    w = np.zeros(len(run))
    dz = np.diff(zs)
    w[:-1] += dz / 2.0
    w[1:] += dz / 2.0
    for j, wt in zip(run, w):
        weights[node_problem[j]] += wt


def _demand_matrix(problems, slices):
    """Per-problem demand samples, one column per time slice.

    Cell problems take the exact mean of the slice quantile over the cell;
    point problems take the one-sided slice value at their percentile.
    """
    out = np.empty((len(problems.kinds), len(slices)))
    pts_left = [(k, kind[1]) for k, kind in enumerate(problems.kinds)
                if kind[0] == "point" and kind[2] == "left"]
    pts_right = [(k, kind[1]) for k, kind in enumerate(problems.kinds)
                 if kind[0] == "point" and kind[2] == "right"]
    zl = np.array([z for _, z in pts_left])
    zr = np.array([z for _, z in pts_right])
    il = np.array([k for k, _ in pts_left], dtype=int)
    ir = np.array([k for k, _ in pts_right], dtype=int)
    for j, qd in enumerate(slices):
        for k, kind in enumerate(problems.kinds):
            if kind[0] == "cell":
                _, z0, z1, _ = kind
                out[k, j] = _pwlin.integral(qd.z, qd.values, z0, z1) / (z1 - z0)
        if len(il):
            out[il, j] = qd(zl, side="left")
        if len(ir):
            out[ir, j] = qd(zr, side="right")
    return out


def _check_order(problems, r):
    """Scalar trajectories reassemble monotonically; atom levels stay strict."""
    order = np.argsort(problems.r0, kind="stable")
    rs = r[order]
    if np.any(np.diff(rs, axis=0) < -1e-12):
        raise NumericalError("regimes", "scalar trajectories crossed during reassembly")
    cells = [k for k, kind in enumerate(problems.kinds) if kind[0] == "cell"]
    if len(cells) > 1:
        rc = r[cells]
        if np.any(np.diff(rc, axis=0) <= 0):
            raise NumericalError("regimes", "atom trajectories merged or crossed")


def _assemble(problems, t_grid, r, u):
    Q = r[problems.node_problem].T.copy()
    U = u[problems.node_problem].T.copy()
    Q = np.maximum.accumulate(Q, axis=1)  # deterministic guard, no-op when ordered
    return QuantileReassembledVelocity(t_grid, problems.z_nodes, Q, U)


def _densities_from_rows(vel, domain, save_every=1):
    ts, dens = [], []
    n = len(vel.t_nodes)
    for j in range(0, n, save_every):
        row = vel.Q[j]
        lo = min(domain[0], row[0])
        hi = max(domain[1], row[-1])
        dens.append(density_from_quantile(
            QuantileFunction(vel.z_nodes, row, domain=(lo, hi))))
        ts.append(vel.t_nodes[j])
    if ts[-1] != vel.t_nodes[-1]:
        row = vel.Q[-1]
        dens.append(density_from_quantile(QuantileFunction(
            vel.z_nodes, row, domain=(min(domain[0], row[0]), max(domain[1], row[-1])))))
        ts.append(vel.t_nodes[-1])
    return DensityPath(np.asarray(ts), dens)


# ---------------------------------------------------------------------------
# solvers

def solve_general(scenario, refine=128, save_every=1):
    """Optimal control for an arbitrary demand signal over a finite horizon.

    Builds the partition from the initial resource quantile, averages the
    demand against it, solves the scalar family, and maps the reassembled
    percentile solution back to a spatial velocity field.  The reported
    ``cost`` is the decomposed sum (weighted scalar costs plus the floor);
    the quadrature breakdown of the simulated trajectory is attached for
    cross-checking.
    """
    if scenario.horizon is None:
        raise ConfigError("solve_general needs a finite horizon")
    T, nt, alpha = scenario.horizon, scenario.nt, scenario.alpha
    t_grid = np.linspace(0.0, T, nt + 1)
    q0 = quantile_of(scenario.resource)
    part = build_partition(q0)
    slices = [scenario.demand.quantile_at(t) for t in t_grid]
    has_continuum = len(part.singleton_spans()) > 0
    problems = _problem_structure(
        q0, refine=refine if has_continuum else 0,
        knots=_demand_jump_knots(slices) if has_continuum else None)
    d = _demand_matrix(problems, slices)

    params = lq.LQParams(alpha, T, nt)
    fam = lq.solve_family(params, problems.r0, d)
    _check_order(problems, fam.r)
    K = limit_constant_K(t_grid, slices, part)
    cost = float(np.sum(problems.weights * fam.cost) + K)

    vel = _assemble(problems, t_grid, fam.r, fam.u)
    qvel = GridQuantileVelocity(problems.z_nodes, t_grid, vel.U)
    path = _densities_from_rows(vel, scenario.resource.domain, save_every)
    breakdown = evaluate_cost(path, vel, scenario.demand, alpha, limit=K)

    family = ScalarFamily(t_grid, problems.labels, problems.weights,
                          fam.r, fam.u, fam.y, fam.d, fam.p, fam.cost)
    return OptimalControlSolution(t_grid, path, vel, qvel, breakdown, cost,
                                  part, family)


class StaticOptimalVelocity(QuantileReassembledVelocity):
    """Error-feedback field of the static regime, exact at any time.

    The percentile trajectory is the convex combination
    ``phi_r(t) * Q0 + (1 - phi_r(t)) * Qbar`` and the percentile velocity is
    ``-(p(t)/alpha^2) (Q - Qbar)``, so no time grid enters the evaluation.
    """

    def __init__(self, params, z_nodes, q0_vals, qbar_vals, t_nodes):
        self.params = params
        self.q0_vals = np.asarray(q0_vals, float)
        self.qbar_vals = np.asarray(qbar_vals, float)
        Q = np.vstack([self._row(t)[0] for t in t_nodes])
        U = np.vstack([self._row(t)[1] for t in t_nodes])
        super().__init__(t_nodes, z_nodes, Q, U)

    def _row(self, t):
        phi = lq.transition_r(self.params, t, 0.0)
        row = phi * self.q0_vals + (1.0 - phi) * self.qbar_vals
        p = lq.riccati(self.params)(t)
        u = -(p / self.params.alpha ** 2) * (row - self.qbar_vals)
        return row, u

    def slice_arrays(self, t):
        return self._row(float(t))


def solve_static(scenario, save_every=1):
    """Closed-form solution for a constant-in-time demand.

    The trajectory traverses the Wasserstein geodesic from the initial
    resource to the partition-averaged demand at rate ``1 - phi_r(t, 0)``;
    the optimal cost in closed form is
    ``W2^2(R0, Dbar) * alpha * tanh(T/alpha) + T * W2^2(D, Dbar)``.
    """
    if not isinstance(scenario.demand, StaticDemand):
        raise ConfigError("solve_static requires a static demand")
    if scenario.horizon is None:
        raise ConfigError("solve_static needs a finite horizon")
    T, nt, alpha = scenario.horizon, scenario.nt, scenario.alpha
    t_grid = np.linspace(0.0, T, nt + 1)
    q0 = quantile_of(scenario.resource)
    part = build_partition(q0)
    qd = scenario.demand.quantile_at(0.0)
    qbar = average_wrt_partition(qd, part)

    z_nodes, V = _pwlin.align([(q0.z, q0.values), (qbar.z, qbar.values)])
    params = lq.LQParams(alpha, T, nt)
    vel = StaticOptimalVelocity(params, z_nodes, V[0], V[1], t_grid)
    qvel = GridQuantileVelocity(z_nodes, t_grid, vel.U)

    w2_reach = float(np.sqrt(max(_pwlin.integral_sq_diff(
        q0.z, q0.values, qbar.z, qbar.values), 0.0)))
    K = T * _pwlin.integral_sq_diff(qbar.z, qbar.values, qd.z, qd.values)
    closed = w2_reach ** 2 * alpha * np.tanh(T / alpha) + K

    path = _densities_from_rows(vel, scenario.resource.domain, save_every)
    breakdown = evaluate_cost(path, vel, scenario.demand, alpha, limit=K)

    r_cells, u_cells, y_cells, d_cells, w_cells, labels = [], [], [], [], [], []
    phi = lq.transition_r(params, t_grid, 0.0)
    p_t = lq.riccati(params)(t_grid)
    for c, (z0, z1, level) in enumerate(q0.flat_intervals):
        dbar = _pwlin.integral(qd.z, qd.values, z0, z1) / (z1 - z0)
        r_c = phi * level + (1.0 - phi) * dbar
        u_c = -(p_t / alpha ** 2) * (r_c - dbar)
        r_cells.append(r_c)
        u_cells.append(u_c)
        y_cells.append(-p_t * dbar)
        d_cells.append(np.full_like(t_grid, dbar))
        w_cells.append(z1 - z0)
        labels.append(f"cell{c}")
    fam = ScalarFamily(
        t_grid, labels, np.asarray(w_cells),
        np.vstack(r_cells) if r_cells else np.empty((0, nt + 1)),
        np.vstack(u_cells) if u_cells else np.empty((0, nt + 1)),
        np.vstack(y_cells) if y_cells else np.empty((0, nt + 1)),
        np.vstack(d_cells) if d_cells else np.empty((0, nt + 1)),
        p_t,
        np.asarray([lq.static_cost(params, r[0], dd[0])
                    for r, dd in zip(r_cells, d_cells)]),
    )
    return OptimalControlSolution(t_grid, path, vel, qvel, breakdown,
                                  float(closed), part, fam,
                                  closed_form_cost=float(closed))


class PeriodicVelocity(QuantileReassembledVelocity):
    """Steady-state field over one period, extended periodically in time."""

    def slice_arrays(self, t):
        period = self.t_nodes[-1]
        return super().slice_arrays(float(t) % period)


def solve_periodic(scenario, n_harmonics=None, refine=128):
    """Infinite-horizon steady state for a periodic demand.

    Per-problem demand samples over one period are filtered harmonic by
    harmonic with the zero-phase gain ``1 / (alpha^2 w^2 + 1)`` (truncated at
    ``n_harmonics``; the neglected tail of the returned trajectory decays
    like ``w**-2``).  The reported cost is the infinite-horizon average,
    including the full untruncated tracking residual and the averaging
    floor.  A warm-up simulation of length ``3 * alpha`` from the initial
    resource is attached; steady-state behavior does not depend on it.
    """
    demand = scenario.demand
    if not isinstance(demand, PeriodicDemand):
        raise ConfigError("solve_periodic requires a periodic demand")
    period = demand.period
    nt = scenario.nt
    alpha = scenario.alpha
    if n_harmonics is None:
        n_harmonics = scenario.n_harmonics
    if n_harmonics < 1:
        raise ConfigError("n_harmonics must be at least 1")

    t_samp = np.arange(nt) * (period / nt)
    q0 = quantile_of(scenario.resource)
    part = build_partition(q0)
    slices = [demand.quantile_at(t) for t in t_samp]
    has_continuum = len(part.singleton_spans()) > 0
    problems = _problem_structure(
        q0, refine=refine if has_continuum else 0,
        knots=_demand_jump_knots(slices) if has_continuum else None)
    d = _demand_matrix(problems, slices)

    coef = np.fft.rfft(d, axis=-1) / nt
    k = np.arange(coef.shape[-1])
    omega = 2.0 * np.pi * k / period
    gain = 1.0 / (alpha ** 2 * omega ** 2 + 1.0)
    keep = k <= n_harmonics
    r_hat = np.where(keep, coef * gain, 0.0)
    u_hat = 1j * omega * r_hat
    r = np.fft.irfft(r_hat, n=nt) * nt
    u = np.fft.irfft(u_hat, n=nt) * nt

    # average per-problem cost: filtered weight below the cutoff, full
    # tracking residual above it (the truncated trajectory does not move)
    mult = np.full(len(k), 2.0)
    mult[0] = 1.0
    if nt % 2 == 0:
        mult[-1] = 1.0
    w_sq = (alpha * omega) ** 2 / (alpha ** 2 * omega ** 2 + 1.0)
    per_k = np.where(keep, w_sq, 1.0) * mult * np.abs(coef) ** 2
    J = np.sum(per_k, axis=-1)

    t_closed = np.concatenate([t_samp, [period]])
    slices_closed = slices + [slices[0]]
    K_avg = limit_constant_K(t_closed, slices_closed, part) / period
    cost = float(np.sum(problems.weights * J) + K_avg)

    r_closed = np.column_stack([r, r[:, 0]])
    u_closed = np.column_stack([u, u[:, 0]])
    d_closed = np.column_stack([d, d[:, 0]])
    _check_order(problems, r_closed)
    vel = PeriodicVelocity(t_closed, problems.z_nodes,
                           r_closed[problems.node_problem].T,
                           u_closed[problems.node_problem].T)
    qvel = GridQuantileVelocity(problems.z_nodes, t_closed,
                                u_closed[problems.node_problem].T)
    path = _densities_from_rows(vel, scenario.resource.domain)
    breakdown = evaluate_cost(path, vel, demand, alpha, limit=K_avg * period,
                              average=True)

    y = -alpha ** 2 * u_closed - alpha * r_closed
    family = ScalarFamily(t_closed, problems.labels, problems.weights,
                          r_closed, u_closed, y, d_closed,
                          np.full(nt + 1, alpha), J)
    table = _frequency_table(problems, coef, r_hat, omega, n_harmonics)
    warm = _warmup_path(scenario, problems, vel, y)
    return OptimalControlSolution(t_closed, path, vel, qvel, breakdown, cost,
                                  part, family, period=period,
                                  frequency_table=table, warmup=warm)


def _frequency_table(problems, coef, r_hat, omega, n_harmonics):
    rows = []
    kmax = min(n_harmonics, coef.shape[-1] - 1)
    for i, label in enumerate(problems.labels):
        for kk in range(kmax + 1):
            d_abs = abs(coef[i, kk])
            r_abs = abs(r_hat[i, kk])
            rows.append((label, kk, omega[kk], d_abs, r_abs,
                         r_abs / d_abs if d_abs > 0 else np.nan))
    return rows


def _warmup_path(scenario, problems, vel, y_nodes_closed, n_steps=200):
    """Closed-loop relaxation from the initial resource toward steady state.

    Integrates ``rdot = -(alpha r + y_ss(t)) / alpha^2`` with the periodic
    steady-state feedforward over ``[0, 3 alpha]``.
    """
    alpha = scenario.alpha
    period = vel.t_nodes[-1]
    T_w = 3.0 * alpha
    tw = np.linspace(0.0, T_w, n_steps + 1)
    y_of = lambda t: _pwlin_eval_periodic(vel.t_nodes, y_nodes_closed, t)
    r = problems.r0[problems.node_problem].astype(float).copy()
    dt = T_w / n_steps
    rows = [r.copy()]
    ynode = y_nodes_closed[problems.node_problem]
    for k in range(n_steps):
        t0 = tw[k]
        def f(rr, t):
            yv = _interp_rows(vel.t_nodes, ynode, t % period)
            return -(alpha * rr + yv) / alpha ** 2
        k1 = f(r, t0)
        k2 = f(r + 0.5 * dt * k1, t0 + 0.5 * dt)
        k3 = f(r + 0.5 * dt * k2, t0 + 0.5 * dt)
        k4 = f(r + dt * k3, t0 + dt)
        r = r + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rows.append(np.maximum.accumulate(r.copy()))
    dens = []
    for row in rows:
        lo = min(scenario.resource.domain[0], row[0])
        hi = max(scenario.resource.domain[1], row[-1])
        dens.append(density_from_quantile(
            QuantileFunction(vel.z_nodes, row, domain=(lo, hi))))
    return DensityPath(tw, dens)


def _interp_rows(t_nodes, rows_by_node, t):
    t = float(t)
    if t <= t_nodes[0]:
        return rows_by_node[:, 0]
    if t >= t_nodes[-1]:
        return rows_by_node[:, -1]
    j = int(np.searchsorted(t_nodes, t, side="right")) - 1
    w = (t - t_nodes[j]) / (t_nodes[j + 1] - t_nodes[j])
    return (1 - w) * rows_by_node[:, j] + w * rows_by_node[:, j + 1]


def _pwlin_eval_periodic(t_nodes, rows, t):
    return _interp_rows(t_nodes, rows, float(t) % t_nodes[-1])


# ---------------------------------------------------------------------------
# cost evaluation

def evaluate_cost(trajectory, velocity, demand, alpha, limit=None, average=False):
    """Realized cost of a trajectory/velocity pair against a demand signal.

    The assignment term integrates squared slice distances; the motion term
    is computed twice, once in space (``int V^2 R dx``) and once in
    percentile coordinates (``int U^2 dz`` with ``U = V o Q``), and the two
    must agree to ``MOTION_IDENTITY_TOL`` per slice.  With ``average=True``
    the integrals are divided by the spanned time.
    """
    t = np.asarray(trajectory.t, float)
    n = len(t)
    a_t = np.empty(n)
    mx_t = np.empty(n)
    mz_t = np.empty(n)
    for j in range(n):
        r_j = trajectory.densities[j]
        qd = demand.quantile_at(t[j])
        qr = quantile_of(r_j)
        a_t[j] = _pwlin.integral_sq_diff(qr.z, qr.values, qd.z, qd.values)
        mx_t[j] = _motion_x(r_j, velocity, t[j])
        mz_t[j] = _motion_z(qr, velocity, t[j])
        scale = max(1.0, abs(mx_t[j]))
        if abs(mx_t[j] - mz_t[j]) > MOTION_IDENTITY_TOL * scale:
            raise NumericalError(
                "regimes",
                f"motion-cost identity violated at t={t[j]:g}: "
                f"x-integral {mx_t[j]!r} vs z-integral {mz_t[j]!r}",
                tolerance=MOTION_IDENTITY_TOL)
    assignment = float(np.trapezoid(a_t, t))
    motion = float(np.trapezoid(mz_t, t))
    if average:
        span = t[-1] - t[0]
        assignment /= span
        motion /= span
    total = assignment + alpha ** 2 * motion
    return CostBreakdown(assignment, motion, total, limit,
                         t=t, assignment_t=a_t, motion_x_t=mx_t, motion_z_t=mz_t)


_GAUSS_OFFSET = 0.5 / np.sqrt(3.0)


def _motion_x(r, velocity, t, min_sub=4):
    """Spatial quadrature of ``V(x, t)^2`` against the density.

    Cells are split at the velocity's own spatial knots when it exposes
    them, making the integrand piecewise quadratic; two-point Gauss nodes
    (interior, so one-sided limits at knots never matter) integrate each
    piece exactly.
    """
    total = 0.0
    if len(r.atom_x):
        total += float(np.sum(r.atom_m * np.asarray(velocity(r.atom_x, t)) ** 2))
    if len(r.edges):
        knots = None
        if hasattr(velocity, "slice_arrays"):
            knots = np.unique(velocity.slice_arrays(t)[0])
        for i in range(len(r.values)):
            rho = r.values[i]
            if rho <= 0:
                continue
            a, b = r.edges[i], r.edges[i + 1]
            if knots is not None:
                inner = knots[(knots > a) & (knots < b)]
                pts = np.concatenate([[a], inner, [b]])
            else:
                pts = np.linspace(a, b, min_sub + 1)
            w = pts[1:] - pts[:-1]
            mid = 0.5 * (pts[:-1] + pts[1:])
            g1 = np.asarray(velocity(mid - _GAUSS_OFFSET * w, t)) ** 2
            g2 = np.asarray(velocity(mid + _GAUSS_OFFSET * w, t)) ** 2
            total += rho * float(np.sum(0.5 * w * (g1 + g2)))
    return total


def _motion_z(qr, velocity, t):
    """Percentile quadrature of ``V(Q(z, t), t)^2`` over [0, 1].

    Fields that carry their percentile samples are integrated from the
    ``U`` row directly (exact for piecewise-affine ``U``, including the
    one-sided limits at jumps); generic fields are composed with the slice
    quantile and integrated with interior Gauss nodes.
    """
    if hasattr(velocity, "slice_arrays") and hasattr(velocity, "z_nodes"):
        _, u_row = velocity.slice_arrays(t)
        zero = np.array([0.0, 1.0])
        return _pwlin.integral_sq_diff(velocity.z_nodes, u_row,
                                       zero, np.zeros(2))
    z = qr.z
    x_nodes = qr.values
    dz = np.diff(z)
    mid_z = 0.5 * (z[:-1] + z[1:])
    g1 = np.asarray(velocity(_pwlin.eval_pw(mid_z - _GAUSS_OFFSET * dz, z, x_nodes,
                                            side="left"), t)) ** 2
    g2 = np.asarray(velocity(_pwlin.eval_pw(mid_z + _GAUSS_OFFSET * dz, z, x_nodes,
                                            side="left"), t)) ** 2
    return float(np.sum(0.5 * dz * (g1 + g2)))
