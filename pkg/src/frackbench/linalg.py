"""Sparse SPD systems: assembly buffer, solvers and matrix diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sps
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

MATRIX, FRACTURE, INTERSECTION = 0, 1, 2
ENTITY_NAMES = {MATRIX: "matrix", FRACTURE: "fracture", INTERSECTION: "intersection"}


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Symmetric sparse system ``A x = b`` plus the unknown -> entity map.

    ``entity_kind[i]`` is MATRIX, FRACTURE or INTERSECTION and
    ``entity_index[i]`` the index of the cell within its kind.
    """

    A: sps.csr_matrix
    b: np.ndarray
    entity_kind: np.ndarray
    entity_index: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def nnz(self) -> int:
        return self.A.nnz

    def dofs_of(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.entity_kind == kind)


class TripletBuffer:
    """Collects symmetric two-point couplings and diagonal terms in COO form.

    Each coupling ``(i, j, T)`` contributes the symmetric pattern
    ``[[T, -T], [-T, T]]``, so the finalized matrix is bit-symmetric.
    """

    def __init__(self, n: int):
        self.n = n
        self._rows, self._cols, self._vals = [], [], []
        self.rhs = np.zeros(n)

    def add_couplings(self, i, j, T) -> None:
        i = np.asarray(i, dtype=np.int64).ravel()
        j = np.asarray(j, dtype=np.int64).ravel()
        T = np.broadcast_to(np.asarray(T, dtype=float), i.shape).ravel()
        if np.any(T <= 0) or not np.all(np.isfinite(T)):
            bad = int(np.flatnonzero(~(T > 0) | ~np.isfinite(T))[0])
            raise LinearSolveError(f"non-positive transmissibility {T[bad]} between unknowns {i[bad]} and {j[bad]}")
        if np.any(i == j):
            raise LinearSolveError("self coupling")
        self._rows += [i, j, i, j]
        self._cols += [i, j, j, i]
        self._vals += [T, T, -T, -T]

    def add_diagonal(self, i, value) -> None:
        i = np.asarray(i, dtype=np.int64).ravel()
        self._rows.append(i)
        self._cols.append(i)
        self._vals.append(np.broadcast_to(np.asarray(value, dtype=float), i.shape).ravel())

    def add_rhs(self, i, value) -> None:
        np.add.at(self.rhs, np.asarray(i, dtype=np.int64).ravel(), value)

    def merge(self, other: "TripletBuffer") -> None:
        self._rows += other._rows
        self._cols += other._cols
        self._vals += other._vals
        self.rhs += other.rhs

    def matrix(self) -> sps.csr_matrix:
        if self._rows:
            r, c, v = (np.concatenate(x) for x in (self._rows, self._cols, self._vals))
        else:
            r = c = np.empty(0, dtype=np.int64)
            v = np.empty(0)
        A = sps.coo_matrix((v, (r, c)), shape=(self.n, self.n)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        return A


def _check_square(sys: SparseSystem):
    if sys.A.shape != (len(sys.b), len(sys.b)):
        raise LinearSolveError("matrix and right-hand side sizes differ")


def relative_residual(A, x, b) -> float:
    """``||A x - b|| / ||b||``, evaluated in the precision of ``x``."""
    if np.asarray(x).dtype == np.longdouble:
        A = A.astype(np.longdouble)
        b = np.asarray(b, dtype=np.longdouble)
    nb = float(np.linalg.norm(b))
    r = float(np.linalg.norm(A @ x - b))
    return r / nb if nb > 0 else r


def refine_extended(A, b, fac: "Factorization", x0=None, tol: float = 1e-13, maxiter: int = 10,
                    residual: Optional[Callable] = None):
    """Iterative refinement with residuals and iterate kept in extended precision.

    With transmissibilities spanning many decades the residual of a double
    precision iterate stalls near ``eps * ||A|| ||x|| / ||b||``. Accumulating
    the iterate in long double removes that floor while the double precision
    factorization supplies the corrections. ``residual(x)`` may supply
    ``b - A x`` in another (e.g. flux-by-flux) form; by default it is
    evaluated from ``A``.
    """
    Al = A.astype(np.longdouble)
    bl = np.asarray(b, dtype=np.longdouble)
    x = np.asarray(fac.solve(b) if x0 is None else x0, dtype=np.longdouble)
    nb = float(np.linalg.norm(bl)) or 1.0
    if residual is None:
        residual = lambda v: bl - Al @ v
    best, best_norm = x, np.inf
    for _ in range(maxiter):
        r = residual(x)
        rn = float(np.linalg.norm(r))
        if rn < best_norm:
            best, best_norm = x, rn
        if rn <= tol * nb:
            break
        x = x + fac.solve(np.asarray(r, dtype=float))
    return best


class Factorization:
    """Sparse LU with symmetric ordering and diagonal pivoting (an LDL^T in disguise).

    With a symmetric permutation the diagonal of U holds the pivots of the
    LDL^T factorization, so the matrix is positive definite iff they are all
    positive.
    """

    def __init__(self, A, check_spd: bool = True):
        A = sps.csc_matrix(A)
        try:
            self.lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise LinearSolveError(f"factorization failed: {exc}") from None
        if check_spd:
            d = self.lu.U.diagonal()
            if np.array_equal(self.lu.perm_r, self.lu.perm_c):
                bad = np.flatnonzero(~(d > 0))
                if bad.size:
                    k = int(bad[0])
                    row = int(np.flatnonzero(self.lu.perm_c == k)[0])
                    raise LinearSolveError(f"matrix is not positive definite: pivot {k} (unknown {row}) = {d[k]:.3e}")

    def solve(self, b):
        return self.lu.solve(np.asarray(b, dtype=float))


def pcg(A, b, M: Optional[Callable] = None, tol: float = 1e-12, maxiter: Optional[int] = None, x0=None):
    """Preconditioned conjugate gradients; returns (x, iterations).

    Stops on ``||r|| <= tol * ||b||``. A non-positive curvature ``p.A p`` is
    reported as LinearSolveError naming the iteration.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    nb = np.linalg.norm(b)
    if nb == 0:
        return x, 0
    z = M(r) if M else r
    rz = float(r @ z)
    if rz <= 0:
        raise LinearSolveError("preconditioner is not positive definite")
    p = z.copy()
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise LinearSolveError(f"matrix not positive definite along search direction {k}: p^T A p = {pAp:.3e}")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        if np.linalg.norm(r) <= tol * nb:
            return x, k
        z = M(r) if M else r
        rz_new = float(r @ z)
        if rz_new <= 0:
            raise LinearSolveError(f"preconditioner breakdown at iteration {k}")
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveError(f"conjugate gradients did not converge in {maxiter} iterations")


def jacobi_preconditioner(A) -> Callable:
    d = A.diagonal()
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise LinearSolveError(f"non-positive diagonal entry at unknown {int(bad[0])}: {d[bad[0]]:.3e}")
    inv = 1.0 / d
    return lambda r: inv * r


def ilu_preconditioner(A) -> Callable:
    ilu = spla.spilu(sps.csc_matrix(A), drop_tol=1e-6, fill_factor=20)
    return ilu.solve


def solve(sys: SparseSystem, method: str = "direct", precond: str = "ilu", tol: float = 1e-10) -> np.ndarray:
    """Solve an SPD system to relative residual ``tol``.

    ``method="direct"`` factorizes (see Factorization) and refines
    iteratively; if the residual target is still missed it falls back to
    preconditioned CG.
    """
    _check_square(sys)
    A, b = sys.A, sys.b
    if sys.n == 0:
        return np.empty(0)
    if method == "direct":
        try:
            fac = Factorization(A)
            x = fac.solve(b)
            for _ in range(3):
                if relative_residual(A, x, b) <= tol:
                    return x
                x = x + fac.solve(b - A @ x)
            if relative_residual(A, x, b) <= tol:
                return x
            log.warning("direct solve residual %.2e above %.0e; trying CG", relative_residual(A, x, b), tol)
            x0 = x
        except LinearSolveError as exc:
            if "positive definite" in str(exc):
                raise
            log.warning("direct solve failed (%s); trying CG", exc)
            x0 = None
        method = "cg"
    else:
        x0 = None
    if method != "cg":
        raise ValueError(f"unknown solve method {method!r}")
    M = ilu_preconditioner(A) if precond == "ilu" else jacobi_preconditioner(A) if precond == "jacobi" else None
    x, _ = pcg(A, b, M=M, tol=min(tol, 1e-12), x0=x0)
    res = relative_residual(A, x, b)
    if res > tol:
        raise LinearSolveError(f"residual {res:.2e} above tolerance {tol:.0e}")
    return x


@dataclass(frozen=True)
class MatrixStats:
    n: int
    nnz: int
    nnz_density: float
    cond2_estimate: float
    lambda_max: float
    lambda_min: float
    converged: bool
    iterations: int

    @property
    def status(self) -> str:
        return "converged" if self.converged else "lower_bound"


def _rayleigh_power(apply, x, rtol, maxiter):
    x = x / np.linalg.norm(x)
    lam = None
    for k in range(1, maxiter + 1):
        y = apply(x)
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, True, k
        x = y / ny
        if lam is not None and abs(new - lam) <= rtol * abs(new):
            return new, True, k
        lam = new
    return lam, False, maxiter


def matrix_stats(sys: SparseSystem, rtol: float = 1e-4, maxiter: int = 5000, seed: int = 0,
                 factorization: Optional[Factorization] = None) -> MatrixStats:
    """Density ``nnz/n^2`` and an estimate of the spectral condition number.

    The largest eigenvalue comes from power iteration on A, the smallest from
    inverse power iteration with the sparse factorization; both stop when the
    Rayleigh quotient changes by less than ``rtol`` relative. Rayleigh
    quotients bound the extreme eigenvalues from inside the spectrum, so a
    non-converged estimate is a lower bound on the condition number.
    """
    A = sys.A
    n = sys.n
    density = sys.nnz / float(n * n)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(n)
    lmax, c1, k1 = _rayleigh_power(lambda v: A @ v, x0, rtol, maxiter)
    fac = factorization or Factorization(A)
    mu, c2, k2 = _rayleigh_power(fac.solve, x0, rtol, maxiter)
    lmin = 1.0 / mu
    return MatrixStats(n, sys.nnz, density, lmax / lmin, lmax, lmin, c1 and c2, k1 + k2)


def export_matrix_market(sys: SparseSystem, path) -> None:
    scipy.io.mmwrite(str(path), sps.coo_matrix(sys.A), comment="", precision=17, symmetry="symmetric")
