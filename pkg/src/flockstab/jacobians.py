"""Analytic linearizations: the aggregation Jacobian G, the mean-velocity-frame
Jacobian F, the consistent-subspace basis B with its projection, and the
reduced matrix F_B^B.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams
from .errors import CoincidentParticlesError, ConfigError, DomainError
from .linalg import kron
from .potentials import PotentialSpec, radial_derivatives

SPEED_TOL = 1e-12


@dataclass
class StationaryConfig:
    """A (numerically) stationary spatial configuration of the aggregation flow."""

    xhat: np.ndarray
    residual: float
    spec: PotentialSpec

    def __post_init__(self):
        self.xhat = np.asarray(self.xhat, dtype=float).ravel()

    @property
    def N(self) -> int:
        return self.xhat.size // 2

    def with_scaling(self, D: float, residual: float | None = None) -> "StationaryConfig":
        """Same configuration under a rescaled amplitude; residual scales linearly."""
        if residual is None:
            residual = self.residual * D / self.spec.D
        return StationaryConfig(self.xhat.copy(), residual, self.spec.with_D(D))

    def to_dict(self) -> dict:
        positions = [float(v) for v in self.xhat]
        return {
            "N": self.N,
            "potential": self.spec.to_dict(),
            "residual": float(self.residual),
            "positions": positions,
            "checksum": _positions_checksum(positions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StationaryConfig":
        try:
            positions = [float(v) for v in data["positions"]]
            spec = PotentialSpec.from_dict(data["potential"])
            residual = float(data["residual"])
            n = int(data["N"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed stationary-state record: {exc}") from exc
        if len(positions) != 2 * n:
            raise ConfigError("positions length does not match N")
        stored = data.get("checksum")
        if stored is not None and stored != _positions_checksum(positions):
            raise ConfigError("stationary-state checksum mismatch")
        return cls(np.array(positions), residual, spec)


def _positions_checksum(positions) -> str:
    payload = ",".join(repr(float(v)) for v in positions).encode()
    return hashlib.sha256(payload).hexdigest()


def save_stationary(path, config: StationaryConfig, extra: dict | None = None) -> None:
    record = config.to_dict()
    if extra:
        record.update(extra)
    with open(path, "w") as fh:
        json.dump(record, fh, indent=1)
        fh.write("\n")


def load_stationary(path) -> StationaryConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse stationary-state file: {exc}") from exc
    return StationaryConfig.from_dict(data)


@dataclass
class FlockFamilyMember:
    """A stationary configuration paired with a flock velocity m0."""

    config: StationaryConfig
    m0: np.ndarray

    def __post_init__(self):
        self.m0 = np.asarray(self.m0, dtype=float).reshape(2)


def flock_member(config: StationaryConfig, params: ModelParams,
                 angle: float = 0.3) -> FlockFamilyMember:
    """Family member with m0 = speed * (cos angle, sin angle)."""
    s = params.speed
    return FlockFamilyMember(config, np.array([s * np.cos(angle), s * np.sin(angle)]))


def _check_speed(member: FlockFamilyMember, params: ModelParams) -> None:
    s = params.speed
    if abs(np.linalg.norm(member.m0) - s) > SPEED_TOL * max(1.0, s):
        raise DomainError("flock speed |m0| != sqrt(alpha/beta)")


def pair_hessian_blocks(spec: PotentialSpec, x2: np.ndarray):
    """Hessian blocks of W for all particle pairs i<j of an (N, 2) configuration."""
    n = x2.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    d = x2[iu] - x2[ju]
    r = np.hypot(d[:, 0], d[:, 1])
    if r.size and r.min() == 0.0:
        raise CoincidentParticlesError("coincident particles in Hessian assembly")
    up, upp = radial_derivatives(spec, r)
    e = d / r[:, None]
    ee = e[:, :, None] * e[:, None, :]
    eye2 = np.eye(2)
    blocks = upp[:, None, None] * ee + (up / r)[:, None, None] * (eye2[None] - ee)
    return iu, ju, blocks


def assemble_G(config: StationaryConfig) -> np.ndarray:
    """2N x 2N Jacobian of the aggregation flow at the configuration.

    Off-diagonal blocks are Hess W(x_i - x_j); diagonal blocks are the negative
    row-block sums, so per-coordinate column sums vanish.
    """
    n = config.N
    x2 = config.xhat.reshape(n, 2)
    G4 = np.zeros((n, 2, n, 2))
    if n > 1:
        iu, ju, blocks = pair_hessian_blocks(config.spec, x2)
        G4[iu, :, ju, :] = blocks
        G4[ju, :, iu, :] = blocks
    idx = np.arange(n)
    G4[idx, :, idx, :] = -G4.sum(axis=2)
    return G4.reshape(2 * n, 2 * n)


def kernel_vectors_w(xhat) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Translation vectors w1, w2 and the per-particle rotation vector w3."""
    xhat = np.asarray(xhat, dtype=float).ravel()
    n = xhat.size // 2
    w1 = np.tile([1.0, 0.0], n)
    w2 = np.tile([0.0, 1.0], n)
    x2 = xhat.reshape(n, 2)
    w3 = np.column_stack([-x2[:, 1], x2[:, 0]]).ravel()
    return w1, w2, w3


def _velocity_coupling(params: ModelParams, m0: np.ndarray) -> np.ndarray:
    """The 2x2 block 2 beta (m0 m0^T)."""
    return 2.0 * params.beta * np.outer(m0, m0)


def assemble_F(member: FlockFamilyMember, params: ModelParams) -> np.ndarray:
    """(4N+2)x(4N+2) Jacobian of the mean-velocity-frame system at the flock."""
    _check_speed(member, params)
    n = member.config.N
    G = assemble_G(member.config)
    P2 = _velocity_coupling(params, member.m0)
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    F = np.zeros((4 * n + 2, 4 * n + 2))
    F[: 2 * n, 2 * n:4 * n] = np.eye(2 * n)
    F[2 * n:4 * n, : 2 * n] = G
    F[2 * n:4 * n, 2 * n:4 * n] = -kron(centering, P2)
    F[4 * n:, 2 * n:4 * n] = -kron(np.full((1, n), 1.0 / n), P2)
    F[4 * n:, 4 * n:] = -P2
    return F


def basis_B(N: int) -> np.ndarray:
    """Columns are the 4N basis vectors of the mean-velocity-consistent subspace.

    Order: position unit vectors, then velocity deviations of particles
    1..N-1 (with the compensating -1 in particle N's slot), then the two
    mean-velocity directions.
    """
    if N < 2:
        raise DomainError("basis_B requires N >= 2")
    B = np.zeros((4 * N + 2, 4 * N))
    B[: 2 * N, : 2 * N] = np.eye(2 * N)
    for k in range(1, N):
        col = 2 * N + 2 * k - 2
        B[2 * N + 2 * k - 2, col] = 1.0
        B[4 * N - 2, col] = -1.0
        B[2 * N + 2 * k - 1, col + 1] = 1.0
        B[4 * N - 1, col + 1] = -1.0
    B[4 * N, 4 * N - 2] = 1.0
    B[4 * N + 1, 4 * N - 1] = 1.0
    return B


def project_P(dx, dv) -> np.ndarray:
    """Coordinates of a perturbation (dx, dv) with respect to basis_B.

    Layout: (dx, velocity deviations of particles 1..N-1, mean velocity).
    Particle N's deviation is implied by the zero-sum of deviations.
    """
    dx = np.asarray(dx, dtype=float).ravel()
    dv2 = np.asarray(dv, dtype=float).reshape(-1, 2)
    mean = dv2.mean(axis=0)
    dev = dv2 - mean[None, :]
    return np.concatenate([dx, dev[:-1].ravel(), mean])


def assemble_FBB(member: FlockFamilyMember, params: ModelParams) -> np.ndarray:
    """4N x 4N restriction of F to the consistent subspace in basis B."""
    _check_speed(member, params)
    n = member.config.N
    if n < 2:
        raise DomainError("assemble_FBB requires N >= 2")
    G = assemble_G(member.config)
    P2 = _velocity_coupling(params, member.m0)
    m = 4 * n
    FBB = np.zeros((m, m))
    top_right = np.vstack([np.eye(2 * n - 2),
                           -kron(np.ones((1, n - 1)), np.eye(2))])
    FBB[: 2 * n, 2 * n:m - 2] = top_right
    FBB[2 * n:m - 2, : 2 * n] = G[: 2 * n - 2, :]
    FBB[2 * n:m - 2, 2 * n:m - 2] = -kron(np.eye(n - 1), P2)
    FBB[m - 2:, m - 2:] = -P2
    return FBB


def h_block(FBB: np.ndarray) -> np.ndarray:
    """Leading (4N-2)x(4N-2) block of F_B^B (the part coupling x and v)."""
    m = FBB.shape[0]
    return FBB[: m - 2, : m - 2]


def kernel_vectors_z(xhat, m0):
    """The four zero-eigenvalue directions z1..z4 of F_B^B."""
    xhat = np.asarray(xhat, dtype=float).ravel()
    n = xhat.size // 2
    w1, w2, w3 = kernel_vectors_w(xhat)
    pad = np.zeros(2 * n - 2 + 2)
    z1 = np.concatenate([w1, pad])
    z2 = np.concatenate([w2, pad])
    z3 = np.concatenate([w3, pad])
    m0 = np.asarray(m0, dtype=float).reshape(2)
    z4 = np.concatenate([np.zeros(4 * n - 2), [-m0[1], m0[0]]])
    return z1, z2, z3, z4


def rotate_positions(xhat, phi: float) -> np.ndarray:
    """Apply the same planar rotation to every particle position."""
    xhat = np.asarray(xhat, dtype=float).ravel()
    R = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    return (xhat.reshape(-1, 2) @ R.T).ravel()
