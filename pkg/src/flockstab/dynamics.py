"""Right-hand sides and fixed-step RK4 integration for the particle models.

State layout is interleaved: particle i occupies entries (2i, 2i+1) of the flat
position/velocity vectors. Internally most math runs on (N, 2) views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentParticlesError, DivergenceError, DomainError
from .potentials import Family, PotentialSpec, force_over_r, potential_value


@dataclass
class ModelParams:
    """Self-propulsion and friction coefficients of the second-order model."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("alpha and beta must be positive")

    @property
    def speed(self) -> float:
        """Equilibrium speed sqrt(alpha/beta)."""
        return float(np.sqrt(self.alpha / self.beta))


@dataclass
class ParticleState:
    """Positions and velocities of N planar particles (flat, interleaved)."""

    N: int
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(2 * self.N)
        self.v = np.asarray(self.v, dtype=float).reshape(2 * self.N)

    def positions_xy(self) -> np.ndarray:
        return self.x.reshape(self.N, 2)

    def velocities_xy(self) -> np.ndarray:
        return self.v.reshape(self.N, 2)

    def copy(self) -> "ParticleState":
        return ParticleState(self.N, self.x.copy(), self.v.copy())


@dataclass
class MeanVelState:
    """Mean-velocity-frame coordinates: deviations (xt, vt) plus mean velocity m."""

    xt: np.ndarray
    vt: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.xt = np.asarray(self.xt, dtype=float).ravel()
        self.vt = np.asarray(self.vt, dtype=float).ravel()
        self.m = np.asarray(self.m, dtype=float).reshape(2)

    @property
    def N(self) -> int:
        return self.xt.size // 2

    def consistency_residual(self) -> float:
        """Norm of the mean of the velocity deviations (zero for consistent states)."""
        vt2 = self.vt.reshape(-1, 2)
        return float(np.linalg.norm(vt2.mean(axis=0)))


class InteractionEvaluator:
    """Pair-interaction force sums with reusable scratch buffers.

    One instance serves one trajectory; instances are cheap and independent, so
    concurrent trajectories each create their own. Calls return fresh arrays.
    """

    def __init__(self, spec: PotentialSpec, N: int):
        self.spec = spec
        self.N = N
        self._g = np.empty((N, N))
        self._r = np.empty((N, N))
        self._f = np.empty((N, N))
        self._t = np.empty((N, N))
        self._s = np.empty(N)
        self._is_morse = spec.family is Family.MORSE
        if not self._is_morse and N > 1:
            self._iu, self._ju = np.triu_indices(N, k=1)

    def __call__(self, x2: np.ndarray) -> np.ndarray:
        """-sum_j grad W(x_i - x_j) for positions x2 of shape (N, 2)."""
        N = self.N
        if N == 1:
            return np.zeros((1, 2))
        g, r = self._g, self._r
        np.matmul(x2, x2.T, out=g)
        sq = g.diagonal()
        np.multiply(g, -2.0, out=r)
        r += sq[:, None]
        r += sq[None, :]
        np.fill_diagonal(r, np.inf)
        if r.min() < 1e-13 * max(1.0, sq.max()):
            raise CoincidentParticlesError("coincident particles in interaction sum")
        np.sqrt(r, out=r)
        f = self._pair_factor(r)
        np.fill_diagonal(f, 0.0)
        np.sum(f, axis=1, out=self._s)
        out = f @ x2
        out -= x2 * self._s[:, None]
        return out

    def _pair_factor(self, r: np.ndarray) -> np.ndarray:
        # D * U'(r)/r; Morse is inlined since it dominates the sweep workloads,
        # other families run on the condensed pair list (halves the hard work).
        f, t = self._f, self._t
        if self._is_morse:
            spec = self.spec
            np.multiply(r, -1.0, out=f)
            np.exp(f, out=f)
            np.multiply(r, -1.0 / spec.ell, out=t)
            np.exp(t, out=t)
            t *= spec.C / spec.ell
            f -= t
            f /= r
            f *= spec.D
            return f
        pair_vals = force_over_r(self.spec, r[self._iu, self._ju])
        f.fill(0.0)
        f[self._iu, self._ju] = pair_vals
        f[self._ju, self._iu] = pair_vals
        return f


def aggregation_rhs(spec: PotentialSpec, x) -> np.ndarray:
    """First-order aggregation velocity field on a flat 2N position vector."""
    x = np.asarray(x, dtype=float).ravel()
    N = x.size // 2
    return InteractionEvaluator(spec, N)(x.reshape(N, 2)).ravel()


def swarm_rhs(spec: PotentialSpec, params: ModelParams,
              state: ParticleState) -> tuple[np.ndarray, np.ndarray]:
    """Second-order swarm model: returns (dx, dv) as flat 2N vectors."""
    x2 = state.positions_xy()
    v2 = state.velocities_xy()
    forces = InteractionEvaluator(spec, state.N)(x2)
    dv = _propulsion(params, v2) + forces
    return state.v.copy(), dv.ravel()


def _propulsion(params: ModelParams, v2: np.ndarray) -> np.ndarray:
    speed2 = np.einsum("ij,ij->i", v2, v2)
    return (params.alpha - params.beta * speed2)[:, None] * v2


def meanvel_rhs(spec: PotentialSpec, params: ModelParams,
                q: MeanVelState) -> MeanVelState:
    """Mean-velocity-frame system; the returned derivative is again consistent.

    The formulas are evaluated for arbitrary (xt, vt, m); consistency of the
    input is preserved rather than required, which also makes finite-difference
    probing of the Jacobian well defined.
    """
    N = q.N
    xt2 = q.xt.reshape(N, 2)
    vt2 = q.vt.reshape(N, 2)
    forces = InteractionEvaluator(spec, N)(xt2)
    full_v = vt2 + q.m[None, :]
    prop = _propulsion(params, full_v)
    dm = prop.mean(axis=0)
    dvt = prop - dm[None, :] + forces
    return MeanVelState(q.vt.copy(), dvt.ravel(), dm)


def to_meanvel(state: ParticleState) -> MeanVelState:
    """Mean-velocity change of variables (position part is the identity)."""
    v2 = state.velocities_xy()
    m = v2.mean(axis=0)
    return MeanVelState(state.x.copy(), (v2 - m[None, :]).ravel(), m)


def from_meanvel(q: MeanVelState) -> ParticleState:
    """Inverse of to_meanvel."""
    vt2 = q.vt.reshape(-1, 2)
    return ParticleState(q.N, q.xt.copy(), (vt2 + q.m[None, :]).ravel())


def flock_state(xhat, m0, N: int | None = None) -> ParticleState:
    """Particle state with positions xhat and every velocity equal to m0."""
    xhat = np.asarray(xhat, dtype=float).ravel()
    if N is None:
        N = xhat.size // 2
    return ParticleState(N, xhat, np.tile(np.asarray(m0, dtype=float), N))


def rk4_integrate(rhs, y0, dt: float, T: float, observer=None):
    """Classical fixed-step RK4.

    rhs maps a state array to its derivative (same shape). The horizon is
    realized as n = round(T/dt) steps. observer, if given, is called as
    observer(step_index, t, y) after every accepted step. Non-finite states
    raise DivergenceError with the offending step index.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if T < 0:
        raise DomainError("T must be non-negative")
    y = np.array(y0, dtype=float)
    n_steps = int(round(T / dt))
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + half * k1)
        k3 = rhs(y + half * k2)
        k4 = rhs(y + dt * k3)
        y += sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.isfinite(y).all():
            raise DivergenceError(i)
        if observer is not None:
            observer(i, i * dt, y)
    return y


def integrate_swarm(spec: PotentialSpec, params: ModelParams, state: ParticleState,
                    dt: float, T: float, observer=None) -> ParticleState:
    """Integrate the swarm model; observer receives (step, t, ParticleState-view)."""
    N = state.N
    forces = InteractionEvaluator(spec, N)

    def rhs(y):
        dx = y[1]
        dv = _propulsion(params, y[1]) + forces(y[0])
        return np.stack([dx, dv])

    y0 = np.stack([state.positions_xy(), state.velocities_xy()])

    if observer is None:
        wrapped = None
    else:
        def wrapped(i, t, y):
            observer(i, t, ParticleState(N, y[0].ravel(), y[1].ravel()))

    y = rk4_integrate(rhs, y0, dt, T, observer=wrapped)
    return ParticleState(N, y[0].ravel(), y[1].ravel())


def integrate_aggregation(spec: PotentialSpec, x, dt: float, T: float,
                          observer=None) -> np.ndarray:
    """Integrate the aggregation flow from a flat 2N position vector."""
    x = np.asarray(x, dtype=float).ravel()
    N = x.size // 2
    forces = InteractionEvaluator(spec, N)
    y = rk4_integrate(lambda y: forces(y), x.reshape(N, 2), dt, T, observer=observer)
    return y.ravel()


def interaction_energy(spec: PotentialSpec, x) -> float:
    """Total pair energy sum_{i<j} W(x_i - x_j)."""
    x2 = np.asarray(x, dtype=float).reshape(-1, 2)
    n = x2.shape[0]
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, k=1)
    d = x2[iu] - x2[ju]
    r = np.hypot(d[:, 0], d[:, 1])
    if r.min() <= 0.0:
        raise CoincidentParticlesError("coincident particles in energy sum")
    return float(np.sum(potential_value(spec, r)))


def write_trajectory_csv(path, times, positions, velocities) -> None:
    """Write trajectory snapshots as CSV rows (t, particle, x, y, vx, vy)."""
    positions = np.asarray(positions)
    velocities = np.asarray(velocities)
    with open(path, "w") as fh:
        fh.write("t,particle,x,y,vx,vy\n")
        for t, xr, vr in zip(times, positions, velocities):
            x2 = xr.reshape(-1, 2)
            v2 = vr.reshape(-1, 2)
            for i in range(x2.shape[0]):
                fh.write(f"{float(t)!r},{i},{float(x2[i, 0])!r},{float(x2[i, 1])!r},"
                         f"{float(v2[i, 0])!r},{float(v2[i, 1])!r}\n")
