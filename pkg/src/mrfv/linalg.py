"""Sparse linear algebra: SpMV plus the solver stack used by the harness.

The iterative solvers are plain numpy implementations (conjugate gradient and
BiCGSTAB with optional Jacobi preconditioning).  Convergence is always
confirmed against the recomputed true residual, so a ``converged`` report
really means ``||b - A x|| <= max(rel_tol * ||b||, abs_tol)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolverError
from .sparse import SparseMatrix

_BREAKDOWN = 1e-300


def spmv(matrix: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """CSR matrix-vector product."""
    matrix.require_finalized()
    x = np.asarray(x, dtype=float)
    if x.shape != (matrix.n,):
        raise ValueError(f"vector length {x.shape} does not match n={matrix.n}")
    out = np.zeros(matrix.n)
    if matrix.nnz == 0:
        return out
    contrib = matrix.values * x[matrix.col_idx]
    lengths = np.diff(matrix.row_ptr)
    nonempty = lengths > 0
    out[nonempty] = np.add.reduceat(contrib, matrix.row_ptr[:-1][nonempty])
    return out


@dataclass(frozen=True)
class SolverConfig:
    """How to solve: method plus stopping rule.

    The stopping rule is ``||r|| <= max(rel_tol * ||b||, abs_tol)``; the study
    convention sets both tolerances to the same value (see :meth:`with_tol`).
    """

    method: str = "bicgstab"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_iter: int = 20000
    preconditioner: str = "jacobi"
    direct_cap: int = 8192

    def __post_init__(self) -> None:
        if self.method not in ("bicgstab", "cg", "direct"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.preconditioner not in ("jacobi", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.rel_tol == 0 and self.abs_tol == 0:
            raise ValueError("at least one tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    @classmethod
    def with_tol(cls, tol: float, method: str = "bicgstab", **kw) -> "SolverConfig":
        return cls(method=method, rel_tol=tol, abs_tol=tol, **kw)


@dataclass
class SolveReport:
    method: str
    converged: bool
    iterations: int
    residual: float
    target: float
    breakdown: bool = False
    wall_time: float = 0.0


def dense_direct(matrix: SparseMatrix, rhs: np.ndarray, cap: int = 8192) -> np.ndarray:
    """LU-with-partial-pivoting oracle solve (dense; refuses large systems)."""
    matrix.require_finalized()
    if matrix.n > cap:
        raise SolverError(f"dense_direct refused: n={matrix.n} exceeds cap={cap}")
    try:
        return np.linalg.solve(matrix.to_dense(), np.asarray(rhs, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"dense solve failed: {exc}") from exc


def _jacobi_inverse(diag: np.ndarray) -> np.ndarray:
    if np.any(diag == 0.0):
        raise SolverError("Jacobi preconditioner hit a zero diagonal entry")
    return 1.0 / diag


def _cg(matrix: SparseMatrix, b: np.ndarray, x: np.ndarray, target: float,
        max_iter: int, m_inv: np.ndarray | None):
    """Preconditioned conjugate gradient on an SPD system."""
    apply_a = lambda v: spmv(matrix, v)
    r = b - apply_a(x)
    iters = 0
    while True:
        res = float(np.linalg.norm(r))
        if res <= target or iters >= max_iter:
            return x, iters, res, res <= target, False
        z = r * m_inv if m_inv is not None else r
        rz = float(r @ z)
        p = z.copy()
        while iters < max_iter:
            ap = apply_a(p)
            pap = float(p @ ap)
            if pap <= 0.0:
                return x, iters, float(np.linalg.norm(r)), False, True
            alpha = rz / pap
            x = x + alpha * p
            r = r - alpha * ap
            iters += 1
            if float(np.linalg.norm(r)) <= target:
                break
            z = r * m_inv if m_inv is not None else r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        # verify against the true residual before declaring victory
        r = b - apply_a(x)


def _bicgstab(matrix: SparseMatrix, b: np.ndarray, x: np.ndarray, target: float,
              max_iter: int, m_inv: np.ndarray | None):
    """Preconditioned BiCGSTAB (van der Vorst), true-residual confirmed."""
    apply_a = lambda v: spmv(matrix, v)
    precond = (lambda v: v * m_inv) if m_inv is not None else (lambda v: v)
    r = b - apply_a(x)
    iters = 0
    while True:
        res = float(np.linalg.norm(r))
        if res <= target or iters >= max_iter:
            return x, iters, res, res <= target, False
        r0 = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(b)
        p = np.zeros_like(b)
        while iters < max_iter:
            rho_new = float(r0 @ r)
            if abs(rho_new) < _BREAKDOWN:
                return x, iters, float(np.linalg.norm(b - apply_a(x))), False, True
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            ph = precond(p)
            v = apply_a(ph)
            r0v = float(r0 @ v)
            if abs(r0v) < _BREAKDOWN:
                return x, iters, float(np.linalg.norm(b - apply_a(x))), False, True
            alpha = rho_new / r0v
            s = r - alpha * v
            if float(np.linalg.norm(s)) <= target:
                x = x + alpha * ph
                iters += 1
                r = s
                break
            sh = precond(s)
            t = apply_a(sh)
            tt = float(t @ t)
            if tt < _BREAKDOWN:
                return x, iters, float(np.linalg.norm(b - apply_a(x))), False, True
            omega = float(t @ s) / tt
            x = x + alpha * ph + omega * sh
            r = s - omega * t
            rho = rho_new
            iters += 1
            if abs(omega) < _BREAKDOWN:
                return x, iters, float(np.linalg.norm(b - apply_a(x))), False, True
            if float(np.linalg.norm(r)) <= target:
                break
        # verify against the true residual before declaring victory
        r = b - apply_a(x)


def solve(matrix: SparseMatrix, rhs: np.ndarray, config: SolverConfig,
          x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Solve ``A x = rhs`` per the configured method.

    Returns the solution and a report; iterative breakdowns are reported, not
    raised.  ``cg`` insists on a symmetric matrix (checked through the stored
    pattern) and handles negative definite systems by an exact sign flip.
    """
    matrix.require_finalized()
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (matrix.n,):
        raise ValueError(f"rhs length {rhs.shape} does not match n={matrix.n}")
    start = time.perf_counter()

    if config.method == "direct":
        x = dense_direct(matrix, rhs, config.direct_cap)
        res = float(np.linalg.norm(rhs - spmv(matrix, x)))
        target = max(config.rel_tol * float(np.linalg.norm(rhs)), config.abs_tol)
        report = SolveReport("direct", True, 0, res, target,
                             wall_time=time.perf_counter() - start)
        return x, report

    x = np.zeros(matrix.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    target = max(config.rel_tol * float(np.linalg.norm(rhs)), config.abs_tol)
    diag = matrix.diagonal()

    if config.method == "cg":
        if matrix.stats().symmetry_fraction < 1.0:
            raise SolverError("cg requires a symmetric matrix")
        flip = float(np.sum(diag)) < 0.0
        mat_b = -rhs if flip else rhs
        work = matrix if not flip else _negated(matrix)
        m_inv = _jacobi_inverse(work.diagonal()) if config.preconditioner == "jacobi" else None
        xs, iters, res, ok, bad = _cg(work, mat_b, x, target, config.max_iter, m_inv)
        # the sign flip maps the system, not the solution
        report = SolveReport("cg", ok, iters, res, target, breakdown=bad,
                             wall_time=time.perf_counter() - start)
        return xs, report

    m_inv = _jacobi_inverse(diag) if config.preconditioner == "jacobi" else None
    xs, iters, res, ok, bad = _bicgstab(matrix, rhs, x, target, config.max_iter, m_inv)
    report = SolveReport("bicgstab", ok, iters, res, target, breakdown=bad,
                         wall_time=time.perf_counter() - start)
    return xs, report


def _negated(matrix: SparseMatrix) -> SparseMatrix:
    out = SparseMatrix(matrix.n)
    out.row_ptr = matrix.row_ptr
    out.col_idx = matrix.col_idx
    out.values = -matrix.values
    return out
