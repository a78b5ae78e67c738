"""Level-n solves (Newton, or Picard iteration of the boundary fixed-point map),
the regularization ladder n -> infinity, and the sub-solution barrier.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_jacobian, assemble_residual, mass_balance
from .mesh import DiscreteField
from .problem import ProblemSpec, RegularizedProblem, regularize, subsolution_problem

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when an iteration fails; carries the partial report."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "newton"
    tol_fp: float = 1e-10
    tol_res: float = 1e-12
    max_iter: int = 200
    damping: float = 1.0
    linear_tol: float = 1e-12
    schedule: tuple[float, ...] | None = None
    n_max: float = 2.0**14
    tol_ladder: float = 1e-10
    max_inner: int = 50

    def __post_init__(self):
        if self.mode not in ("newton", "picard"):
            raise ValueError("mode must be 'newton' or 'picard'")
        for name in ("tol_fp", "tol_res", "linear_tol", "tol_ladder"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.schedule is not None and (
            len(self.schedule) == 0 or any(n < 1 for n in self.schedule)
        ):
            raise ValueError("schedule levels must be >= 1")

    def levels(self) -> tuple[float, ...]:
        if self.schedule is not None:
            return tuple(self.schedule)
        k = int(math.floor(math.log2(self.n_max)))
        out = [2.0**j for j in range(k + 1)]
        if out[-1] < self.n_max:
            out.append(float(self.n_max))
        return tuple(out)


@dataclass
class SolveReport:
    level: float
    mode: str
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    boundary_change_history: list[float] = field(default_factory=list)
    min_node_history: list[float] = field(default_factory=list)
    values: np.ndarray | None = None
    min_node: float = float("nan")
    min_boundary: float = float("nan")
    mass_defect: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    damping: float = 1.0

    def rows(self):
        """One row per iteration: (level, iter, residual, boundary-change, min-node)."""
        def at(seq, i):
            return seq[i] if i < len(seq) else float("nan")

        n = max(len(self.residual_history), len(self.boundary_change_history))
        for i in range(n):
            yield (self.level, i, at(self.residual_history, i), at(self.boundary_change_history, i),
                   at(self.min_node_history, i))


def linear_solve(A, b, tol: float = 1e-12) -> np.ndarray:
    """Jacobi-preconditioned CG for SPD-looking systems, BiCGSTAB otherwise,
    falling back to sparse LU if the Krylov method misses ``tol * |b|``."""
    A = sp.csr_matrix(A)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b)
    d = A.diagonal()
    symmetric = abs(A - A.T).max() <= 1e-12 * abs(A).max()
    x = None
    if np.all(d > 0):
        M = sp.diags(1.0 / d)
        solver = spla.cg if symmetric else spla.bicgstab
        x, info = solver(A, b, rtol=tol, atol=0.0, M=M, maxiter=10 * A.shape[0])
        if info != 0 or np.linalg.norm(A @ x - b) > 10 * tol * bnorm:
            x = None
    if x is None:
        x = spla.spsolve(A.tocsc(), b)
    return np.asarray(x)


def _newton(residual, jacobian, u0, tol, max_iter, linear_tol):
    """Newton with backtracking on the max-norm of the residual.

    Returns (u, history, converged, min-node history). Accepted residuals
    are strictly decreasing.
    """
    u = np.array(u0, dtype=float)
    R = residual(u)
    hist = [float(np.abs(R).max())]
    mins = [float(u.min())]
    for _ in range(max_iter):
        if hist[-1] <= tol:
            return u, hist, True, mins
        du = linear_solve(jacobian(u), -R, linear_tol)
        step = 1.0
        while step >= 2.0**-30:
            trial = u + step * du
            Rt = residual(trial)
            rn = float(np.abs(Rt).max())
            if np.isfinite(rn) and rn <= (1.0 - 1e-4 * step) * hist[-1]:
                break
            step *= 0.5
        else:
            return u, hist, hist[-1] <= tol, mins
        u, R = trial, Rt
        hist.append(rn)
        mins.append(float(u.min()))
    return u, hist, hist[-1] <= tol, mins


def _finish(report: SolveReport, rp: RegularizedProblem, u: np.ndarray, t0: float) -> None:
    report.values = u
    report.min_node = float(u.min())
    report.min_boundary = float(u[rp.mesh.boundary_vertices].min())
    report.mass_defect = mass_balance(rp, u)["defect"]
    report.wall_time = time.perf_counter() - t0


def schauder_map(rp: RegularizedProblem, v, config: SolverConfig | None = None, w0=None) -> DiscreteField:
    """Solve the level-n problem with the boundary source frozen at trace v.

    ``v`` holds values at ``mesh.boundary_vertices``. Absorption stays
    implicit; in the linear case the inner Newton loop is one SPD solve.
    """
    config = config or SolverConfig()
    mesh = rp.mesh
    frozen = np.zeros(mesh.n_vertices)
    frozen[mesh.boundary_vertices] = np.asarray(v, dtype=float)
    start = np.zeros(mesh.n_vertices) if w0 is None else np.asarray(getattr(w0, "values", w0), float)
    w, hist, ok, _ = _newton(
        lambda x: assemble_residual(rp, x, frozen_source=frozen).residual,
        lambda x: assemble_jacobian(rp, x, freeze_source=True),
        start,
        config.tol_res,
        config.max_inner,
        config.linear_tol,
    )
    if not ok:
        rep = SolveReport(level=rp.n, mode="schauder", iterations=len(hist) - 1, residual_history=hist)
        raise SolverError(f"inner solve of the fixed-point map failed at level {rp.n:g}", rep)
    return DiscreteField(mesh, w)


def _boundary_l2(rp: RegularizedProblem, diff_b: np.ndarray) -> float:
    m = rp.mesh.boundary_mass[rp.mesh.boundary_vertices]
    return float(np.sqrt((m * diff_b**2).sum()))


def default_initial_guess(rp: RegularizedProblem) -> np.ndarray:
    """Constant c with c * int(lambda_n) = int(f_n) + int(g_n), floored at 1e-3.

    Avoids starting at u = 0, where the p < 2 tangent and sublinear sigma
    degenerate. Zero data start (and stay) at zero.
    """
    lam = float(rp.lam_bar.sum())
    c = (float(rp.load.sum()) + float(rp.g_bar.sum())) / lam if lam > 0 else 1.0
    if c <= 0:
        return np.zeros(rp.mesh.n_vertices)
    return np.full(rp.mesh.n_vertices, max(c, 1e-3))


def solve_level(rp: RegularizedProblem, config: SolverConfig, initial=None):
    """Solve one regularized problem; returns (field, report).

    Without ``initial`` the iteration starts from ``default_initial_guess``.

    Raises SolverError (with the partial report) on non-convergence. For the
    Picard mode this is a reportable outcome: existence of a fixed point
    does not imply convergence of the iteration.
    """
    t0 = time.perf_counter()
    mesh = rp.mesh
    u0 = default_initial_guess(rp) if initial is None else np.asarray(getattr(initial, "values", initial), float)
    report = SolveReport(level=rp.n, mode=config.mode, damping=config.damping)

    if config.mode == "newton":
        u, hist, ok, mins = _newton(
            lambda x: assemble_residual(rp, x).residual,
            lambda x: assemble_jacobian(rp, x),
            u0,
            config.tol_res,
            config.max_iter,
            config.linear_tol,
        )
        report.residual_history = hist
        report.min_node_history = mins
        report.iterations = len(hist) - 1
        report.converged = ok
        _finish(report, rp, u, t0)
        if not ok:
            raise SolverError(f"Newton did not converge at level {rp.n:g} (|R|={hist[-1]:.3e})", report)
        return DiscreteField(mesh, u), report

    bv = mesh.boundary_vertices
    v = u0[bv].copy()
    w = u0
    damping = config.damping
    rising = 0
    for it in range(config.max_iter):
        w = schauder_map(rp, v, config, w0=w).values
        change = _boundary_l2(rp, w[bv] - v)
        hist = report.boundary_change_history
        if hist and change > hist[-1]:
            rising += 1
            if rising >= 2:
                damping *= 0.5
                rising = 0
                log.debug("level %g: damping halved to %g", rp.n, damping)
        else:
            rising = 0
        hist.append(change)
        report.residual_history.append(float(np.abs(assemble_residual(rp, w).residual).max()))
        report.min_node_history.append(float(w.min()))
        report.iterations = it + 1
        if change <= config.tol_fp:
            report.converged = True
            break
        v = (1.0 - damping) * v + damping * w[bv]
    report.damping = damping
    _finish(report, rp, w, t0)
    if not report.converged:
        raise SolverError(f"Picard iteration did not converge at level {rp.n:g}", report)
    return DiscreteField(mesh, w), report


def solve_ladder(spec: ProblemSpec, config: SolverConfig, initial=None):
    """Solve levels along the schedule, warm-starting each from the previous.

    Stops once the nodal max change between consecutive levels is at most
    ``tol_ladder``. Returns (last field, list of reports).
    """
    u = initial
    reports: list[SolveReport] = []
    prev = None
    for n in config.levels():
        rp = regularize(spec, n)
        try:
            fld, rep = solve_level(rp, config, u)
        except SolverError as exc:
            if exc.report is not None:
                reports.append(exc.report)
            exc.reports = reports
            raise
        reports.append(rep)
        u = fld
        if prev is not None and np.abs(fld.values - prev).max() <= config.tol_ladder:
            break
        prev = fld.values
    return u, reports


def solve_barrier(spec: ProblemSpec, config: SolverConfig | None = None):
    """Solve the linear sub-solution problem; returns (v, c_bar = min_boundary v).

    Raises InapplicableError when lambda is unbounded.
    """
    config = config or SolverConfig()
    sub = subsolution_problem(spec)
    L = float(sub.lam["value"])
    # level far above every datum: truncation inactive
    rp = regularize(sub, max(1e12, L))
    fld, _ = solve_level(rp, SolverConfig(mode="newton", tol_res=config.tol_res, max_iter=config.max_iter), None)
    return fld, float(fld.values[spec.mesh.boundary_vertices].min())
