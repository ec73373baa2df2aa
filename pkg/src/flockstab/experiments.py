"""Reproduction pipelines: stationary-state refinement with eigenvalue
normalization, and the perturbed-flock polarization sweep.

Reported amplitudes follow the eigenvalue table's mean-interaction convention:
the tabulated D equals N times the dynamical amplitude at which the Jacobian
spectrum has smallest eigenvalue -1. Dynamical quantities (right-hand sides,
integration) always use the plain amplitude stored in PotentialSpec.D.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (InteractionEvaluator, ModelParams, ParticleState,
                       flock_state, integrate_aggregation, integrate_swarm)
from .errors import (DivergenceError, DomainError, NonConvergenceError)
from .jacobians import FlockFamilyMember, StationaryConfig, assemble_G
from .linalg import Spectrum, symmetric_eigen
from .potentials import PotentialSpec


@dataclass
class SweepRecord:
    """Outcome of one perturbed-flock simulation."""

    seed: int
    a: float
    pert_l2_per_particle: float
    pol_initial: float
    pol_min: float
    diverged: bool


@dataclass
class SweepStats:
    """Binned statistics of pol_min against pol_initial."""

    bin_edges: np.ndarray
    counts: np.ndarray
    mean_pol_min: np.ndarray
    q05: np.ndarray
    q95: np.ndarray


@dataclass
class Table1Row:
    """One row of the eigenvalue table: normalized mu4, |mu3| and reported D."""

    family: str
    params: str
    N: int
    mu4: float
    abs_mu3: float
    D_report: float


def polarization(state: ParticleState) -> float:
    """Norm of the mean unit-velocity vector; 1 for aligned flocks, 0 for mills."""
    v2 = state.velocities_xy()
    speeds = np.sqrt(np.einsum("ij,ij->i", v2, v2))
    if speeds.min() <= 0.0:
        raise DomainError("polarization undefined for zero-velocity particles")
    mean_unit = (v2 / speeds[:, None]).mean(axis=0)
    return float(np.linalg.norm(mean_unit))


def mean_speed(state: ParticleState) -> float:
    v2 = state.velocities_xy()
    return float(np.sqrt(np.einsum("ij,ij->i", v2, v2)).mean())


def sample_perturbation(a: float, N: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise uniform perturbation on [-a/2, a/2] for x and v."""
    if a < 0:
        raise DomainError("perturbation strength must be non-negative")
    dx = rng.uniform(-0.5 * a, 0.5 * a, size=2 * N)
    dv = rng.uniform(-0.5 * a, 0.5 * a, size=2 * N)
    return dx, dv


def initial_positions_disc(N: int, rng, radius: float = 2.0) -> np.ndarray:
    """Positions i.i.d. uniform on a disc, as a flat 2N vector."""
    u = rng.uniform(size=N)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=N)
    r = radius * np.sqrt(u)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()


def find_stationary_state(spec: PotentialSpec, N: int, T: float, dt: float,
                          seed: int, radius: float = 2.0) -> StationaryConfig:
    """Relax random initial data under the aggregation flow at spec's amplitude."""
    rng = np.random.default_rng(seed)
    x0 = initial_positions_disc(N, rng, radius)
    xhat = integrate_aggregation(spec, x0, dt, T)
    residual = float(np.abs(InteractionEvaluator(spec, N)(xhat.reshape(N, 2))).max())
    return StationaryConfig(xhat, residual, spec)


def _params_label(spec: PotentialSpec) -> str:
    parts = []
    for name in ("C", "ell", "k", "p"):
        value = getattr(spec, name)
        if value is not None:
            parts.append(f"{name}={value:g}")
    return ";".join(parts)


def table1_pipeline(spec: PotentialSpec, N: int, refine_D: float = 500.0,
                    refine_T: float = 500.0, dt: float = 1e-3, seed: int = 0,
                    normalize: bool = True, h1_tol: float = 1e-8,
                    kernel_tol: float = 1e-6,
                    ) -> tuple[Table1Row, StationaryConfig, Spectrum]:
    """Refine a stationary state, compute the G spectrum, and normalize.

    In normalize mode the reported D is N / |smallest eigenvalue of G at D=1|,
    so the normalized spectrum has minimum -1; in fixed mode the given spec.D
    is reported unchanged and the spectrum is evaluated at amplitude spec.D/N.
    Raises NonConvergenceError if the stationarity residual at the normalized
    amplitude exceeds h1_tol.
    """
    refined = find_stationary_state(spec.with_D(refine_D), N, refine_T, dt, seed)
    unit_config = refined.with_scaling(1.0)
    G1 = assemble_G(unit_config)
    base = symmetric_eigen(G1, kernel_tol=kernel_tol)
    lam_min = float(base.eigenvalues[-1].real)
    if not lam_min < 0:
        raise NonConvergenceError("Jacobian spectrum has no negative eigenvalues")
    D_report = N / abs(lam_min) if normalize else spec.D
    D_spec = D_report / N
    config = refined.with_scaling(D_spec)
    if config.residual > h1_tol:
        raise NonConvergenceError(
            f"stationarity residual {config.residual:.3e} exceeds {h1_tol:.3e}")
    spectrum = Spectrum(base.eigenvalues * D_spec, base.eigenvectors, kernel_tol)
    values = spectrum.eigenvalues.real
    row = Table1Row(spec.family.value, _params_label(spec), N,
                    float(values[3]), float(abs(values[2])), D_report)
    return row, config, spectrum


def run_perturbed_flock(member: FlockFamilyMember, params: ModelParams,
                        pert: tuple[np.ndarray, np.ndarray], T: float, dt: float,
                        a: float = float("nan"), seed: int = -1,
                        return_final: bool = False):
    """Integrate a perturbed flock and record its polarization history.

    Divergence (non-finite state or a velocity reaching zero mid-run) marks the
    record instead of raising; the polarization minimum covers the steps
    completed before the failure.
    """
    dx, dv = pert
    config = member.config
    N = config.N
    base = flock_state(config.xhat, member.m0, N)
    state = ParticleState(N, base.x + np.asarray(dx, dtype=float).ravel(),
                          base.v + np.asarray(dv, dtype=float).ravel())
    pol0 = polarization(state)
    dx2 = np.asarray(dx, dtype=float).reshape(N, 2)
    dv2 = np.asarray(dv, dtype=float).reshape(N, 2)
    pert_norm = float(np.sqrt(np.einsum("ij,ij->i", dx2, dx2)
                              + np.einsum("ij,ij->i", dv2, dv2)).mean())
    running = {"min": pol0}

    def observe(i, t, s):
        p = polarization(s)
        if p < running["min"]:
            running["min"] = p

    diverged = False
    final = None
    try:
        final = integrate_swarm(config.spec, params, state, dt, T, observer=observe)
    except (DivergenceError, DomainError):
        diverged = True
    record = SweepRecord(seed, a, pert_norm, pol0, running["min"], diverged)
    if return_final:
        return record, final
    return record


def _sweep_one(member: FlockFamilyMember, params: ModelParams, a_max: float,
               T: float, dt: float, seed: int) -> SweepRecord:
    rng = np.random.default_rng(seed)
    a = a_max * (1.0 - rng.uniform())
    pert = sample_perturbation(a, member.config.N, rng)
    return run_perturbed_flock(member, params, pert, T, dt, a=a, seed=seed)


def _sweep_worker(args) -> SweepRecord:
    return _sweep_one(*args)


def monte_carlo_sweep(member: FlockFamilyMember, params: ModelParams,
                      n_sims: int, a_max: float, T: float, dt: float,
                      base_seed: int, n_workers: int = 1) -> list[SweepRecord]:
    """Seeded ensemble of perturbed-flock runs; run k uses seed base_seed + k.

    Records are deterministic per seed and independent of n_workers; parallel
    execution only distributes whole runs across processes.
    """
    if n_sims < 1:
        raise DomainError("n_sims must be at least 1")
    if not a_max > 0:
        raise DomainError("a_max must be positive")
    tasks = [(member, params, a_max, T, dt, base_seed + k) for k in range(n_sims)]
    if n_workers <= 1:
        return [_sweep_worker(t) for t in tasks]
    chunk = max(1, n_sims // (8 * n_workers))
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_sweep_worker, tasks, chunksize=chunk))


def nearest_rank_quantile(sorted_values: np.ndarray, p: float) -> float:
    """Nearest-rank empirical quantile on an ascending-sorted array."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p * n))
    return float(sorted_values[min(rank, n) - 1])


def sweep_statistics(records: list[SweepRecord], n_bins: int) -> SweepStats:
    """Equal-width bins over pol_initial with per-bin mean and 5%/95% quantiles
    of pol_min; empty bins carry count 0 and NaN statistics."""
    if not records:
        raise DomainError("sweep_statistics needs at least one record")
    if n_bins < 1:
        raise DomainError("n_bins must be at least 1")
    p0 = np.array([r.pol_initial for r in records])
    pm = np.array([r.pol_min for r in records])
    lo, hi = float(p0.min()), float(p0.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    width = hi - lo
    if width > 0:
        idx = np.minimum(((p0 - lo) / width * n_bins).astype(int), n_bins - 1)
    else:
        idx = np.zeros(len(records), dtype=int)
    counts = np.zeros(n_bins, dtype=int)
    means = np.full(n_bins, np.nan)
    q05 = np.full(n_bins, np.nan)
    q95 = np.full(n_bins, np.nan)
    for b in range(n_bins):
        sel = np.sort(pm[idx == b])
        counts[b] = sel.size
        if sel.size:
            means[b] = sel.mean()
            q05[b] = nearest_rank_quantile(sel, 0.05)
            q95[b] = nearest_rank_quantile(sel, 0.95)
    return SweepStats(edges, counts, means, q05, q95)


def write_records_csv(path, records: list[SweepRecord]) -> None:
    with open(path, "w") as fh:
        fh.write("seed,a,pert_l2_per_particle,pol_initial,pol_min,diverged\n")
        for r in records:
            fh.write(f"{int(r.seed)},{float(r.a)!r},{float(r.pert_l2_per_particle)!r},"
                     f"{float(r.pol_initial)!r},{float(r.pol_min)!r},{bool(r.diverged)}\n")


def write_stats_csv(path, stats: SweepStats) -> None:
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count,mean,q05,q95\n")
        for b in range(len(stats.counts)):
            fh.write(f"{float(stats.bin_edges[b])!r},{float(stats.bin_edges[b + 1])!r},"
                     f"{int(stats.counts[b])},{float(stats.mean_pol_min[b])!r},"
                     f"{float(stats.q05[b])!r},{float(stats.q95[b])!r}\n")


def write_table_csv(path, rows: list[Table1Row]) -> None:
    with open(path, "w") as fh:
        fh.write("potential,params,N,mu4,abs_mu3,D\n")
        for row in rows:
            fh.write(f"{row.family},{row.params},{row.N},{float(row.mu4)!r},"
                     f"{float(row.abs_mu3)!r},{float(row.D_report)!r}\n")
