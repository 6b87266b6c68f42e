"""Independent brute-force verifiers for distances and optimal control.

Everything here is deliberately redundant with the main modules: separate
quadrature, separate recursions, separate solvers.  These functions are used
only by tests and the ``verify`` command to cross-check the analytic paths,
so they favor transparency over speed and refuse instances beyond desk
scale.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

MAX_ATOMS = 8
MAX_STEPS = 2000

# gradient-descent hyperparameters, fixed for reproducibility
GD_RESTARTS = 10
GD_ITERS = 5000
GD_RATE = 0.9
GD_GRAD_TOL = 1e-10


def _as_atoms(a):
    if hasattr(a, "atom_x"):
        if len(a.values) and np.any(a.values > 0):
            raise ValueError("oracle handles atom-only densities")
        return np.asarray(a.atom_x, float), np.asarray(a.atom_m, float)
    pos, mass = a
    return np.asarray(pos, float), np.asarray(mass, float)


def lp_wasserstein(a, b, method="auto"):
    """Exact squared 2-Wasserstein distance between two atom sets.

    ``method='lp'`` solves the transportation linear program directly;
    ``method='enumerate'`` takes the minimum over northwest-corner plans for
    every ordering of the first support (which contains the sorted-order
    optimum).  The default runs both and insists they agree to 1e-9.
    """
    ax, am = _as_atoms(a)
    bx, bm = _as_atoms(b)
    if len(ax) > MAX_ATOMS or len(bx) > MAX_ATOMS:
        raise ValueError(f"instance too large for the oracle (> {MAX_ATOMS} atoms)")
    if abs(am.sum() - bm.sum()) > 1e-9:
        raise ValueError("atom sets must carry equal total mass")
    if method == "lp":
        return _lp_value(ax, am, bx, bm)
    if method == "enumerate":
        return _enumerate_value(ax, am, bx, bm)
    v1 = _lp_value(ax, am, bx, bm)
    v2 = _enumerate_value(ax, am, bx, bm)
    if abs(v1 - v2) > 1e-9:
        raise AssertionError(f"oracle self-check failed: lp={v1!r} enumerate={v2!r}")
    return v1


def _lp_value(ax, am, bx, bm):
    n, m = len(ax), len(bx)
    cost = ((ax[:, None] - bx[None, :]) ** 2).ravel()
    A_eq = np.zeros((n + m - 1, n * m))
    rhs = np.zeros(n + m - 1)
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
        rhs[i] = am[i]
    for j in range(m - 1):  # last column constraint is redundant
        A_eq[n + j, j::m] = 1.0
        rhs[n + j] = bm[j]
    res = linprog(cost, A_eq=A_eq, b_eq=rhs, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transportation LP failed: {res.message}")
    return float(res.fun)


def _northwest_cost(ax, am, bx, bm):
    i = j = 0
    ra, rb = am[0], bm[0]
    total = 0.0
    while True:
        take = min(ra, rb)
        total += take * (ax[i] - bx[j]) ** 2
        ra -= take
        rb -= take
        if ra <= 1e-15:
            i += 1
            if i == len(ax):
                break
            ra = am[i]
        if rb <= 1e-15:
            j += 1
            if j == len(bx):
                break
            rb = bm[j]
    return total

def _enumerate_value(ax, am, bx, bm):
    order_b = np.argsort(bx, kind="stable")
    bx, bm = bx[order_b], bm[order_b]
    best = np.inf
    for perm in itertools.permutations(range(len(ax))):
        idx = np.asarray(perm)
        best = min(best, _northwest_cost(ax[idx], am[idx], bx, bm))
    return float(best)


def discrete_lq(alpha, T, nt, r0, d):
    """Exact discrete-time LQ tracking optimum on a uniform grid.

    Dynamics ``r[k+1] = r[k] + dt*u[k]`` with rectangle-rule stage cost
    ``dt*((r[k]-d[k])**2 + alpha**2*u[k]**2)``.  Solved by the standard
    backward recursion on the quadratic value function; first-order
    consistent with the continuous problem as ``dt -> 0``.
    """
    if nt > MAX_STEPS:
        raise ValueError(f"nt > {MAX_STEPS} exceeds desk scale")
    dt = T / nt
    d = np.asarray(d, float)
    a2 = alpha * alpha
    P = np.zeros(nt + 1)
    q = np.zeros(nt + 1)
    c = np.zeros(nt + 1)
    for k in range(nt - 1, -1, -1):
        S = a2 + dt * P[k + 1]
        P[k] = dt + a2 * P[k + 1] / S
        q[k] = dt * d[k] + a2 * q[k + 1] / S
        c[k] = dt * d[k] ** 2 - dt * q[k + 1] ** 2 / S + c[k + 1]
    r = np.zeros(nt + 1)
    u = np.zeros(nt)
    r[0] = r0
    for k in range(nt):
        S = a2 + dt * P[k + 1]
        u[k] = (q[k + 1] - P[k + 1] * r[k]) / S
        r[k + 1] = r[k] + dt * u[k]
    cost = float(np.sum(dt * ((r[:-1] - d[:nt]) ** 2 + a2 * u ** 2)))
    value = float(P[0] * r0 * r0 - 2.0 * q[0] * r0 + c[0])
    if abs(cost - value) > 1e-8 * max(1.0, abs(value)):
        raise AssertionError("discrete LQ rollout disagrees with its value function")
    return r, u, cost


@dataclass
class DiscreteInstance:
    """Desk-scale instance for the direct optimal-control search.

    Demand is a moving family of atoms: ``demand_positions`` has one row per
    time step (each row sorted), with fixed ``demand_masses``.
    """

    positions: np.ndarray        # (n,) initial resource atom positions
    masses: np.ndarray           # (n,) positive, summing to 1
    demand_positions: np.ndarray # (nt+1, m)
    demand_masses: np.ndarray    # (m,)
    alpha: float
    T: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, float)
        self.masses = np.asarray(self.masses, float)
        self.demand_positions = np.asarray(self.demand_positions, float)
        self.demand_masses = np.asarray(self.demand_masses, float)
        if len(self.positions) > MAX_ATOMS or self.demand_positions.shape[1] > MAX_ATOMS:
            raise ValueError("too many atoms for the oracle")
        if self.demand_positions.shape[0] - 1 > MAX_STEPS:
            raise ValueError("too many time steps for the oracle")
        if np.any(np.diff(self.demand_positions, axis=1) < 0):
            raise ValueError("demand rows must be sorted")

    @property
    def nt(self):
        return self.demand_positions.shape[0] - 1


def _atom_w2sq_and_targets(p, masses, dq_pos, dq_mass):
    """Squared distance to the demand and per-atom matched demand means.

    ``p``: (..., n) resource positions (last axis = atoms).  Returns
    ``(w2sq, dbar)`` where ``dbar[..., i]`` is the demand-quantile mean over
    atom i's percentile slab; the gradient of w2sq in ``p[..., i]`` is
    ``2 * masses[i] * (p[..., i] - dbar[..., i])``.
    """
    order = np.argsort(p, axis=-1, kind="stable")
    ps = np.take_along_axis(p, order, axis=-1)
    m_sorted = masses[order]
    hi = np.cumsum(m_sorted, axis=-1)
    lo = hi - m_sorted
    W = np.concatenate([np.zeros(dq_mass.shape[:-1] + (1,)), np.cumsum(dq_mass, axis=-1)], axis=-1)
    # overlap of resource slab [lo_i, hi_i] with demand slab [W_l, W_{l+1}]
    ov = np.maximum(
        0.0,
        np.minimum(hi[..., :, None], W[..., None, 1:])
        - np.maximum(lo[..., :, None], W[..., None, :-1]),
    )
    dbar_sorted = np.einsum("...il,...l->...i", ov, dq_pos) / m_sorted
    w2sq = np.einsum("...il,...il->...", ov, (ps[..., :, None] - dq_pos[..., None, :]) ** 2)
    dbar = np.empty_like(dbar_sorted)
    np.put_along_axis(dbar, order, dbar_sorted, axis=-1)
    return w2sq, dbar


def trajectory_cost(inst, traj):
    """Continuous-style cost of an atom trajectory, trapezoid in time.

    The gradient search minimizes a rectangle-rule sum whose value drifts
    O(dt) from the continuous objective; this evaluator scores any returned
    (or analytic) trajectory consistently so one-sided comparisons against
    the optimum only carry O(dt^2) quadrature fuzz.
    """
    traj = np.asarray(traj, float)
    nt = inst.nt
    dt = inst.T / nt
    dq_pos = np.broadcast_to(inst.demand_positions,
                             (nt + 1, inst.demand_positions.shape[1]))
    dq_mass = np.broadcast_to(inst.demand_masses, dq_pos.shape)
    w2sq, _ = _atom_w2sq_and_targets(traj, inst.masses, dq_pos, dq_mass)
    v = np.diff(traj, axis=0) / dt
    v_nodes = np.empty_like(traj)
    v_nodes[0] = v[0]
    v_nodes[-1] = v[-1]
    v_nodes[1:-1] = 0.5 * (v[:-1] + v[1:])
    motion = np.sum(inst.masses * v_nodes ** 2, axis=-1)
    t = np.arange(nt + 1) * dt
    return float(np.trapezoid(w2sq + inst.alpha ** 2 * motion, t))


def direct_optimal_control(inst, restarts=GD_RESTARTS, iters=GD_ITERS, seed=0):
    """Upper-bound search over per-atom velocity sequences.

    Preconditioned gradient descent from a zero initialization plus
    ``restarts - 1`` random ones.  Controls must be admissible for the
    transport model, where co-located mass shares one velocity, so atom
    trajectories may not cross; an escalating quadratic hinge penalty on
    order inversions enforces this, and the returned best trajectory is
    strictly ordered (its cost is then a true upper bound on the optimum).
    """
    nt = inst.nt
    n = len(inst.positions)
    dt = inst.T / nt
    a2 = inst.alpha ** 2
    m = inst.masses
    dq_pos = np.broadcast_to(inst.demand_positions, (nt + 1, inst.demand_positions.shape[1]))
    dq_mass = np.broadcast_to(inst.demand_masses, dq_pos.shape)

    rng = np.random.default_rng(seed)
    scale = np.ptp(dq_pos) + np.ptp(inst.positions) + 1.0
    v0 = np.zeros((restarts, nt, n))
    v0[1:] = rng.normal(0.0, 0.2 * scale / inst.T, size=(restarts - 1, nt, n))

    def rollout(vv):
        steps = np.cumsum(vv * dt, axis=-2)
        return np.concatenate(
            [np.broadcast_to(inst.positions, vv.shape[:-2] + (1, n)),
             inst.positions + steps], axis=-2)

    def cost_of(p, vv):
        w2sq, _ = _atom_w2sq_and_targets(p[..., :nt, :], m, dq_pos[:nt], dq_mass[:nt])
        motion = np.sum(m * vv ** 2, axis=-1)
        return dt * np.sum(w2sq + a2 * motion, axis=-1)

    def descend(kappa):
        v = v0.copy()
        step = 2.0 * GD_RATE / (dt * (m * (2.0 * a2 + inst.T ** 2)
                                      + 4.0 * kappa * inst.T ** 2))
        converged = False
        for _ in range(iters):
            p = rollout(v)
            _, dbar = _atom_w2sq_and_targets(p, m, dq_pos, dq_mass)
            g_pos = 2.0 * m * (p - dbar)       # d(w2sq)/d(position), per step
            if kappa > 0.0 and n > 1:
                inv = np.maximum(0.0, p[..., :-1] - p[..., 1:])  # order inversions
                g_pos[..., :-1] += 2.0 * kappa * inv
                g_pos[..., 1:] -= 2.0 * kappa * inv
            g_pos[..., 0, :] = 0.0             # initial position is fixed
            g_pos[..., nt, :] = 0.0            # final slice not in rectangle sum
            tail = np.flip(np.cumsum(np.flip(g_pos, axis=-2), axis=-2),
                           axis=-2)[..., 1:, :]
            grad = 2.0 * dt * a2 * m * v + dt * dt * tail
            if np.max(np.abs(grad)) < GD_GRAD_TOL * scale:
                converged = True
                break
            v = v - step * grad
        return v, converged

    kappa = 0.0
    for _ in range(5):
        v, converged = descend(kappa)
        p = rollout(v)
        ordered = (n == 1) or np.all(np.diff(p, axis=-1) > 0, axis=(-2, -1))
        if np.any(ordered):
            costs = np.where(ordered, cost_of(p, v), np.inf)
            best = int(np.argmin(costs))
            return p[best], float(costs[best]), bool(converged)
        kappa = max(10.0 * kappa, float(np.mean(m)))
    costs = cost_of(p, v)
    best = int(np.argmin(costs))
    return p[best], float(costs[best]), False
