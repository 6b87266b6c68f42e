"""Shared scenario builders for the test suite."""

import numpy as np

from swarmlq import Density
from swarmlq.regimes import SampledDemand, Scenario, StaticDemand


def random_density(rng, domain=(0.0, 10.0), kind="mixed", max_atoms=5, max_cells=8):
    """Random normalized density; ``kind`` in {'atoms', 'continuous', 'mixed'}."""
    lo, hi = domain
    atoms = None
    edges = np.empty(0)
    values = np.empty(0)
    if kind in ("atoms", "mixed"):
        n = int(rng.integers(1, max_atoms + 1))
        pos = np.sort(rng.uniform(lo, hi, n))
        mass = rng.uniform(0.2, 1.0, n)
        atoms = np.column_stack([pos, mass])
    if kind in ("continuous", "mixed"):
        n = int(rng.integers(2, max_cells + 1))
        a, b = np.sort(rng.uniform(lo, hi, 2))
        if b - a < 0.1 * (hi - lo):
            a, b = lo, hi
        edges = np.linspace(a, b, n + 1)
        values = rng.uniform(0.0, 1.0, n)
        if kind == "continuous" and values.max() <= 0:
            values[0] = 1.0
    return Density(domain, atoms=atoms, edges=edges, values=values, normalize=True)


def eleven_atom_resource(domain=(0.0, 10.0)):
    """Eleven unequal-weight atoms evenly spaced between 0 and 2."""
    w = np.array([4.0, 7, 2, 9, 5, 8, 3, 10, 6, 1, 5])
    return Density(domain, atoms=np.column_stack([np.linspace(0, 2, 11), w / w.sum()]))


def bimodal_demand(domain=(0.0, 10.0), nx=400):
    def pdf(x):
        g1 = np.exp(-0.5 * ((x - 4.0) / 0.8) ** 2) / (0.8 * np.sqrt(2 * np.pi))
        g2 = np.exp(-0.5 * ((x - 7.5) / 1.1) ** 2) / (1.1 * np.sqrt(2 * np.pi))
        return 0.55 * g1 + 0.45 * g2
    return Density.from_pdf(pdf, domain, nx=nx)


def reference_static_scenario(nt=1000, alpha=2.0, T=10.0):
    return Scenario(eleven_atom_resource(), StaticDemand(bimodal_demand()),
                    alpha=alpha, horizon=T, nt=nt)


def moving_atoms_demand(centers, masses, amplitudes, omegas, phases, domain):
    """Smooth demand whose atoms oscillate without changing order."""
    centers = np.asarray(centers, float)
    amplitudes = np.asarray(amplitudes, float)
    omegas = np.asarray(omegas, float)
    phases = np.asarray(phases, float)
    masses = np.asarray(masses, float)

    def density_at(t):
        pos = centers + amplitudes * np.sin(omegas * t + phases)
        return Density(domain, atoms=np.column_stack([pos, masses]))

    return density_at


def random_scenario(rng, nt=200, n_res=3, n_dem=3, alpha=None, T=None):
    """Random atom resource tracking smoothly moving atom demand."""
    domain = (-4.0, 14.0)
    alpha = float(rng.uniform(0.6, 2.5)) if alpha is None else alpha
    T = float(rng.uniform(3.0, 8.0)) if T is None else T
    rx = np.sort(rng.uniform(0.0, 10.0, n_res))
    while np.min(np.diff(rx)) < 0.2:
        rx = np.sort(rng.uniform(0.0, 10.0, n_res))
    rm = rng.uniform(0.2, 1.0, n_res)
    rm /= rm.sum()
    resource = Density(domain, atoms=np.column_stack([rx, rm]))

    centers = np.sort(rng.uniform(1.0, 9.0, n_dem))
    gap = np.min(np.diff(centers)) if n_dem > 1 else 2.0
    amps = rng.uniform(0.1, max(0.11, 0.4 * gap), n_dem)
    omegas = rng.uniform(0.5, 2.0, n_dem)
    phases = rng.uniform(0, 2 * np.pi, n_dem)
    dm = rng.uniform(0.2, 1.0, n_dem)
    dm /= dm.sum()
    rule = moving_atoms_demand(centers, dm, amps, omegas, phases, domain)
    times = np.linspace(0.0, T, nt + 1)
    demand = SampledDemand(times, [rule(t) for t in times])
    return Scenario(resource, demand, alpha=alpha, horizon=T, nt=nt)
