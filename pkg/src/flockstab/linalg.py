"""Dense linear algebra: Jacobi eigensolver, Francis QR eigenvalues,
rank/kernel via column-pivoted elimination, and Kronecker products.

Matrices are plain float64 numpy arrays. Sizes here stay in the low hundreds,
so O(n^3) with modest constants is fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SolverConvergenceError

_EPS = np.finfo(float).eps


def sort_eigenvalues(values: np.ndarray, vectors: np.ndarray | None = None):
    """Descending real part, ties broken by descending imaginary part."""
    order = np.lexsort((-values.imag, -values.real))
    if vectors is None:
        return values[order], None
    return values[order], vectors[:, order]


@dataclass
class Spectrum:
    """Eigenvalues (sorted) with kernel bookkeeping; eigenvectors only when the
    symmetric solver produced them (columns aligned with eigenvalues)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    kernel_tol: float
    kernel_dim: int = field(init=False)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues)
        self.kernel_dim = int(np.sum(np.abs(self.eigenvalues) < self.kernel_tol))

    def scaled(self, factor: float) -> "Spectrum":
        """Spectrum of factor*A: eigenvalues scale, eigenvectors are unchanged."""
        return Spectrum(self.eigenvalues * factor, self.eigenvectors,
                        self.kernel_tol * abs(factor))

    def kernel_vectors(self) -> np.ndarray:
        if self.eigenvectors is None:
            raise DomainError("spectrum has no eigenvectors")
        mask = np.abs(self.eigenvalues) < self.kernel_tol
        return self.eigenvectors[:, mask]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "kernel_dim": self.kernel_dim,
            "kernel_tol": self.kernel_tol,
        }


def symmetric_eigen(A: np.ndarray, kernel_tol: float = 1e-6,
                    max_sweeps: int = 100) -> Spectrum:
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below 1e-12 ||A||_F.
    Eigenvectors come out orthonormal with || A V - V diag || <= 1e-10 ||A||.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError("symmetric_eigen requires a square matrix")
    scale = np.linalg.norm(A)
    if scale > 0 and np.abs(A - A.T).max() > 1e-12 * max(1.0, np.abs(A).max()):
        raise DomainError("matrix is not symmetric within 1e-12")
    M = A.copy()
    V = np.eye(n)
    if n == 1:
        return Spectrum(M.diagonal().astype(complex), V, kernel_tol)
    target = 1e-12 * max(scale, _EPS)
    offdiag = np.empty_like(M)
    for _ in range(max_sweeps):
        # direct off-diagonal Frobenius norm; the ||M||^2 - ||diag||^2 shortcut
        # cannot resolve below sqrt(eps)*||M|| due to cancellation
        np.copyto(offdiag, M)
        np.fill_diagonal(offdiag, 0.0)
        off = np.linalg.norm(offdiag)
        if off < target:
            break
        skip = off / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = M[p, q]
                if abs(apq) <= 1e-3 * skip:
                    continue
                tau = (M[q, q] - M[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 \
                    else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = M[p, p], M[q, q]
                # two-sided rotation J^T M J with J = [[c, s], [-s, c]] in (p, q)
                rp = M[p, :].copy()
                rq = M[q, :].copy()
                M[p, :] = c * rp - s * rq
                M[q, :] = s * rp + c * rq
                cp = M[:, p].copy()
                cq = M[:, q].copy()
                M[:, p] = c * cp - s * cq
                M[:, q] = s * cp + c * cq
                M[p, p] = app - t * apq
                M[q, q] = aqq + t * apq
                M[p, q] = 0.0
                M[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise SolverConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    values, vectors = sort_eigenvalues(M.diagonal().astype(complex), V)
    return Spectrum(values, vectors, kernel_tol)


def general_eigenvalues(A: np.ndarray, kernel_tol: float = 1e-6) -> Spectrum:
    """Eigenvalues of a general square matrix: Householder reduction to
    Hessenberg form followed by Francis double-shift QR iteration."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError("general_eigenvalues requires a square matrix")
    if n == 0:
        return Spectrum(np.array([], dtype=complex), None, kernel_tol)
    H = _hessenberg(A.copy())
    values = _francis_qr(H)
    values, _ = sort_eigenvalues(values)
    return Spectrum(values, None, kernel_tol)


def _house(x: np.ndarray):
    """Householder vector v and coefficient beta with (I - beta v v^T) x = -sigma e1."""
    normx = np.linalg.norm(x)
    if normx == 0.0:
        return x.copy(), 0.0
    v = x.copy()
    v[0] += np.copysign(normx, x[0]) if x[0] != 0 else normx
    vnorm2 = v @ v
    if vnorm2 == 0.0:
        return v, 0.0
    return v, 2.0 / vnorm2


def _hessenberg(H: np.ndarray) -> np.ndarray:
    n = H.shape[0]
    for k in range(n - 2):
        v, beta = _house(H[k + 1:, k])
        if beta == 0.0:
            continue
        H[k + 1:, k:] -= beta * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= beta * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _eig2x2(a, b, c, d):
    tr = a + d
    det = a * d - b * c
    disc = 0.25 * tr * tr - det
    if disc >= 0.0:
        root = np.sqrt(disc)
        l1 = 0.5 * tr + (root if tr >= 0 else -root)
        l2 = det / l1 if l1 != 0.0 else 0.5 * tr - (root if tr >= 0 else -root)
        return complex(l1), complex(l2)
    root = np.sqrt(-disc)
    return complex(0.5 * tr, root), complex(0.5 * tr, -root)


def _francis_qr(H: np.ndarray, max_iter_per_eig: int = 30) -> np.ndarray:
    n = H.shape[0]
    values = np.empty(n, dtype=complex)
    got = 0
    hi = n - 1
    its = 0
    norm = max(np.abs(H).max(), _EPS)
    # subdiagonals below eps*||H|| are a backward-stable perturbation away
    # from zero; without this floor, noise-level kernel clusters never split
    floor = _EPS * np.linalg.norm(H)
    while hi >= 0:
        # deflate: find the start of the trailing unreduced block
        lo = hi
        while lo > 0:
            sub = abs(H[lo, lo - 1])
            if sub <= _EPS * (abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])) + floor:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            values[got] = H[hi, hi]
            got += 1
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            l1, l2 = _eig2x2(H[lo, lo], H[lo, hi], H[hi, lo], H[hi, hi])
            values[got] = l1
            values[got + 1] = l2
            got += 2
            hi -= 2
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise SolverConvergenceError(
                f"Francis QR stalled on a block of size {hi - lo + 1}")
        if its % 10 == 0:
            # exceptional shift to break symmetric cycles
            shift = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
            s = 2.0 * shift
            t = shift * shift
        else:
            s = H[hi - 1, hi - 1] + H[hi, hi]
            t = H[hi - 1, hi - 1] * H[hi, hi] - H[hi - 1, hi] * H[hi, hi - 1]
        _francis_step(H, lo, hi, s, t)
        if np.abs(H[lo:hi + 1, lo:hi + 1]).max() > 1e12 * norm:
            raise SolverConvergenceError("Francis QR overflowed")
    return values


def _francis_step(H: np.ndarray, lo: int, hi: int, s: float, t: float) -> None:
    x = H[lo, lo] * H[lo, lo] + H[lo, lo + 1] * H[lo + 1, lo] - s * H[lo, lo] + t
    y = H[lo + 1, lo] * (H[lo, lo] + H[lo + 1, lo + 1] - s)
    z = H[lo + 1, lo] * H[lo + 2, lo + 1]
    for k in range(lo, hi - 1):
        v, beta = _house(np.array([x, y, z]))
        if beta != 0.0:
            r0 = max(lo, k - 1)
            block = H[k:k + 3, r0:hi + 1]
            block -= beta * np.outer(v, v @ block)
            r1 = min(k + 4, hi + 1)
            block = H[lo:r1, k:k + 3]
            block -= beta * np.outer(block @ v, v)
        x = H[k + 1, k]
        y = H[k + 2, k]
        z = H[k + 3, k] if k < hi - 2 else 0.0
    v, beta = _house(np.array([x, y]))
    if beta != 0.0:
        block = H[hi - 1:hi + 1, hi - 2:hi + 1]
        block -= beta * np.outer(v, v @ block)
        block = H[lo:hi + 1, hi - 1:hi + 1]
        block -= beta * np.outer(block @ v, v)


def _qr_column_pivot(A: np.ndarray, tol: float):
    """Householder elimination with column pivoting; returns (R, piv, rank)."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    R = A.copy()
    piv = np.arange(n)
    thresh = tol * max(np.linalg.norm(A), _EPS)
    rank = min(m, n)
    for j in range(min(m, n)):
        norms = np.linalg.norm(R[j:, j:], axis=0)
        pick = int(np.argmax(norms)) + j
        if norms[pick - j] <= thresh:
            rank = j
            break
        if pick != j:
            R[:, [j, pick]] = R[:, [pick, j]]
            piv[[j, pick]] = piv[[pick, j]]
        v, beta = _house(R[j:, j])
        if beta != 0.0:
            R[j:, j:] -= beta * np.outer(v, v @ R[j:, j:])
        R[j + 1:, j] = 0.0
    return R, piv, rank


def numerical_rank(A: np.ndarray, tol: float) -> int:
    """Rank with pivot threshold tol * ||A||."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    _, _, rank = _qr_column_pivot(np.atleast_2d(A), tol)
    return rank


def kernel_basis(A: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the numerical null space of A (columns)."""
    if not tol > 0:
        raise DomainError("tol must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    R, piv, rank = _qr_column_pivot(A, tol)
    dim = n - rank
    if dim == 0:
        return np.zeros((n, 0))
    if rank == 0:
        return np.eye(n)
    top = np.linalg.solve(R[:rank, :rank], -R[:rank, rank:n])
    Z = np.zeros((n, dim))
    Z[piv, :] = np.vstack([top, np.eye(dim)])
    # orthonormalize (twice-iterated modified Gram-Schmidt)
    Q = np.zeros_like(Z)
    for j in range(dim):
        w = Z[:, j]
        for _ in range(2):
            for i in range(j):
                w = w - (Q[:, i] @ w) * Q[:, i]
        norm = np.linalg.norm(w)
        Q[:, j] = w / norm if norm > 0 else w
    return Q


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product (a_ij * B) as a dense block matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    ra, ca = A.shape
    rb, cb = B.shape
    out = A[:, None, :, None] * B[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def write_dense_matrix(path, A: np.ndarray) -> None:
    """Plain-text dense export: 'rows cols' header then row-major values."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_dense_matrix(path) -> np.ndarray:
    with open(path) as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise DomainError(f"matrix file shape {data.shape} != header {(rows, cols)}")
    return data


def eigenvector_inverse_iteration(A: np.ndarray, mu: complex,
                                  n_iter: int = 5, seed: int = 0) -> np.ndarray:
    """Unit eigenvector for an (approximately known) eigenvalue mu of A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    z /= np.linalg.norm(z)
    shift = mu + 1e-10 * (1.0 + abs(mu))
    M = A.astype(complex) - shift * np.eye(n)
    for _ in range(n_iter):
        try:
            z = np.linalg.solve(M, z)
        except np.linalg.LinAlgError:
            M = M + (1e-8 * (1.0 + abs(mu))) * np.eye(n)
            z = np.linalg.solve(M, z)
        z /= np.linalg.norm(z)
    return z
