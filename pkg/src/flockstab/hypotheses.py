"""Numerical verification of the stability hypotheses H1-H5 and of the two
kernel lemmas for the reduced Jacobian F_B^B."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams, aggregation_rhs
from .errors import DiagnosticError
from .jacobians import (FlockFamilyMember, StationaryConfig, assemble_FBB,
                        assemble_G, flock_member, kernel_vectors_w,
                        kernel_vectors_z)
from .linalg import (_EPS, Spectrum, general_eigenvalues, kernel_basis,
                     numerical_rank, symmetric_eigen)

SPAN_RESIDUAL_TOL = 1e-5


@dataclass
class H1Result:
    passed: bool
    residual: float


@dataclass
class H23Result:
    passed: bool
    kernel_dim: int
    span_residual: float
    mu4: float
    abs_mu3: float
    spectrum: Spectrum


@dataclass
class H4Result:
    passed: bool
    line_deviation: float


@dataclass
class H5Result:
    passed: bool
    min_overlap: float
    worst_eigenvalue: complex | None


@dataclass
class Lemma4Result:
    passed: bool
    kernel_dim: int
    max_nonzero_re: float
    z_residual: float
    has_minus_two_alpha: bool


@dataclass
class HypothesisReport:
    """All hypothesis diagnostics for one flock member, with the tolerances used."""

    h1_residual: float
    h2_kernel_dim: int
    h2_span_check: float
    h3_mu4: float
    h4_line_deviation: float
    h5_min_overlap: float
    lemma3_no_genvec: bool
    lemma4_kernel_dim: int
    lemma4_max_nonzero_re: float
    tolerances: dict
    passes: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> dict:
        out = {
            "h1_residual": self.h1_residual,
            "h2_kernel_dim": self.h2_kernel_dim,
            "h2_span_check": self.h2_span_check,
            "h3_mu4": self.h3_mu4,
            "h4_line_deviation": self.h4_line_deviation,
            "h5_min_overlap": self.h5_min_overlap,
            "lemma3_no_genvec": self.lemma3_no_genvec,
            "lemma4_kernel_dim": self.lemma4_kernel_dim,
            "lemma4_max_nonzero_re": self.lemma4_max_nonzero_re,
            "tolerances": dict(self.tolerances),
            "passes": dict(self.passes),
            "all_pass": self.all_pass,
        }
        return out


def check_H1(config: StationaryConfig, tol: float = 1e-8) -> H1Result:
    """Stationarity: sup-norm of the aggregation field at the configuration."""
    residual = float(np.abs(aggregation_rhs(config.spec, config.xhat)).max())
    return H1Result(residual < tol, residual)


def _project_off_basis(vectors: np.ndarray, basis: np.ndarray) -> float:
    """Largest relative residual of projecting the given columns onto the basis."""
    worst = 0.0
    for j in range(vectors.shape[1]):
        w = vectors[:, j]
        w = w / np.linalg.norm(w)
        res = w - basis @ (basis.conj().T @ w)
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


def check_H2_H3(G: np.ndarray, xhat, kernel_tol: float = 1e-6) -> H23Result:
    """Kernel of G is exactly the translation/rotation span and mu4 < 0.

    kernel_tol is an absolute eigenvalue threshold; callers are expected to
    hand in G at the normalized amplitude (smallest eigenvalue -1).
    """
    spectrum = symmetric_eigen(G, kernel_tol=kernel_tol)
    values = spectrum.eigenvalues.real
    kernel_dim = spectrum.kernel_dim
    abs_mu3 = float(abs(values[2])) if values.size > 2 else float("nan")
    mu4 = float(values[3]) if values.size > 3 else float("nan")
    kernel = spectrum.kernel_vectors().real
    if kernel.shape[1] > 0:
        w1, w2, w3 = kernel_vectors_w(xhat)
        span_residual = _project_off_basis(np.column_stack([w1, w2, w3]), kernel)
    else:
        span_residual = 1.0
    passed = (kernel_dim == 3 and span_residual < SPAN_RESIDUAL_TOL
              and np.isfinite(mu4) and mu4 < -kernel_tol)
    return H23Result(passed, kernel_dim, span_residual, mu4, abs_mu3, spectrum)


def check_H4(xhat, tol: float = 1e-8) -> H4Result:
    """Non-collinearity: second singular value of the centered position matrix."""
    x2 = np.asarray(xhat, dtype=float).reshape(-1, 2)
    x2 = x2 - x2.mean(axis=0)
    a, b, c = x2[:, 0] @ x2[:, 0], x2[:, 0] @ x2[:, 1], x2[:, 1] @ x2[:, 1]
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(max(0.0, (0.5 * (a - c)) ** 2 + b * b))
    smaller = max(0.0, half_tr - disc)
    deviation = float(np.sqrt(smaller))
    return H4Result(deviation > tol, deviation)


def check_H5(spectrum: Spectrum, m0, tol: float = 1e-8) -> H5Result:
    """Every non-kernel eigenvector has some particle pair not orthogonal to m0."""
    if spectrum.eigenvectors is None:
        raise DiagnosticError("check_H5 needs eigenvectors (use the symmetric solver)")
    m0 = np.asarray(m0, dtype=float).reshape(2)
    values = spectrum.eigenvalues
    min_overlap = np.inf
    worst = None
    for j in range(values.size):
        if abs(values[j]) < spectrum.kernel_tol:
            continue
        pairs = spectrum.eigenvectors[:, j].real.reshape(-1, 2)
        overlap = float(np.abs(pairs @ m0).max())
        if overlap < min_overlap:
            min_overlap = overlap
            worst = complex(values[j])
    if not np.isfinite(min_overlap):
        min_overlap = 0.0
    return H5Result(min_overlap > tol, float(min_overlap), worst)


def verify_lemma3(FBB: np.ndarray, kernel_tol: float = 1e-6) -> bool:
    """No generalized eigenvector for the zero eigenvalue of F_B^B.

    Runs two independent tests (algebraic vs geometric multiplicity, and
    rank(F) vs rank(F^2)); a disagreement raises DiagnosticError since it
    indicates a tolerance artifact rather than an answer.
    """
    FBB = np.asarray(FBB, dtype=float)
    algebraic = int(np.sum(np.abs(general_eigenvalues(FBB).eigenvalues) < kernel_tol))
    geometric = kernel_basis(FBB, kernel_tol).shape[1]
    by_multiplicity = algebraic == geometric
    # rank thresholds hold the same absolute eigenvalue scale on both sides:
    # |lam| < kernel_tol for F corresponds to |lam|^2 < kernel_tol^2 for F^2
    F2 = FBB @ FBB
    norm1 = max(float(np.linalg.norm(FBB)), _EPS)
    norm2 = max(float(np.linalg.norm(F2)), _EPS)
    by_rank = (numerical_rank(FBB, kernel_tol / norm1)
               == numerical_rank(F2, kernel_tol**2 / norm2))
    if by_multiplicity != by_rank:
        raise DiagnosticError(
            f"generalized-eigenvector tests disagree: multiplicities "
            f"{algebraic}/{geometric}, rank check {by_rank}")
    return by_multiplicity


def verify_lemma4(FBB: np.ndarray, member: FlockFamilyMember, params: ModelParams,
                  kernel_tol: float = 1e-6, re_tol: float = 1e-8,
                  z_tol: float = SPAN_RESIDUAL_TOL) -> Lemma4Result:
    """Zero eigenspace of F_B^B is exactly span(z1..z4); the rest decays.

    Checks: exactly 4 eigenvalues within kernel_tol of zero, the numerical
    kernel contains z1..z4, every other eigenvalue has real part below
    -re_tol, and -2*alpha appears in the spectrum within 1e-6.
    """
    FBB = np.asarray(FBB, dtype=float)
    spectrum = general_eigenvalues(FBB, kernel_tol=kernel_tol)
    values = spectrum.eigenvalues
    kernel_dim = spectrum.kernel_dim
    nonzero = values[np.abs(values) >= kernel_tol]
    max_re = float(nonzero.real.max()) if nonzero.size else float("nan")
    basis = kernel_basis(FBB, kernel_tol)
    zs = kernel_vectors_z(member.config.xhat, member.m0)
    z_res = _project_off_basis(np.column_stack(zs), basis) if basis.shape[1] else 1.0
    minus_two_alpha = bool(np.min(np.abs(values - (-2.0 * params.alpha))) < 1e-6)
    passed = (kernel_dim == 4 and z_res < z_tol and nonzero.size > 0
              and max_re < -re_tol and minus_two_alpha)
    return Lemma4Result(passed, kernel_dim, max_re, z_res, minus_two_alpha)


def evaluate_hypotheses(config: StationaryConfig, params: ModelParams,
                        angle: float = 0.3, h1_tol: float = 1e-8,
                        kernel_tol: float = 1e-6, h4_tol: float = 1e-8,
                        h5_tol: float = 1e-8, re_tol: float = 1e-8) -> HypothesisReport:
    """Run every check for one stationary configuration and flock orientation."""
    member = flock_member(config, params, angle)
    h1 = check_H1(config, h1_tol)
    G = assemble_G(config)
    h23 = check_H2_H3(G, config.xhat, kernel_tol)
    h4 = check_H4(config.xhat, h4_tol)
    h5 = check_H5(h23.spectrum, member.m0, h5_tol)
    FBB = assemble_FBB(member, params)
    lemma3 = verify_lemma3(FBB, kernel_tol)
    lemma4 = verify_lemma4(FBB, member, params, kernel_tol, re_tol)
    tolerances = {"h1_tol": h1_tol, "kernel_tol": kernel_tol, "h4_tol": h4_tol,
                  "h5_tol": h5_tol, "re_tol": re_tol,
                  "span_tol": SPAN_RESIDUAL_TOL}
    report = HypothesisReport(
        h1_residual=h1.residual,
        h2_kernel_dim=h23.kernel_dim,
        h2_span_check=h23.span_residual,
        h3_mu4=h23.mu4,
        h4_line_deviation=h4.line_deviation,
        h5_min_overlap=h5.min_overlap,
        lemma3_no_genvec=lemma3,
        lemma4_kernel_dim=lemma4.kernel_dim,
        lemma4_max_nonzero_re=lemma4.max_nonzero_re,
        tolerances=tolerances,
        passes={
            "H1": h1.passed,
            "H2_H3": h23.passed,
            "H4": h4.passed,
            "H5": h5.passed,
            "lemma3": lemma3,
            "lemma4": lemma4.passed,
        },
    )
    return report
