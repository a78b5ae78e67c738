"""P1 residuals and Jacobians of the level-n weak form

    R_i(u) = int a(x, grad u_h).grad phi_i + lumped_i(lambda_n sigma_n(u))
             - int f_n phi_i - lumped_i(h_n(u) g_n).

The boundary nonlinear terms are mass-lumped: sigma_n and h_n are evaluated
at the vertices and multiplied by the boundary integrals of lambda_n phi_i and
g_n phi_i. A ``boundary="quadrature"`` variant evaluates the nonlinearities
on the P1 trace at the edge Gauss points instead; it is used for residuals of
given fields (e.g. interpolated exact solutions), not by the solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh2D
from .problem import RegularizedProblem

EPS_REG = 1e-10


@dataclass
class AssembledResidual:
    residual: np.ndarray
    jacobian: sp.csr_matrix | None = None

    @property
    def norm(self) -> float:
        return float(np.abs(self.residual).max())


def _as_values(u, mesh: Mesh2D) -> np.ndarray:
    vals = getattr(u, "values", u)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (mesh.n_vertices,):
        raise ValueError(f"field has shape {vals.shape}, mesh has {mesh.n_vertices} vertices")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite nodal value")
    return vals


def element_gradients(mesh: Mesh2D, u: np.ndarray) -> np.ndarray:
    """Constant gradient of the P1 interpolant on every triangle, shape (T, 2)."""
    return np.einsum("tk,tkd->td", u[mesh.triangles], mesh.basis_gradients)


def _scatter(mesh: Mesh2D, local: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


def interior_flux(rp: RegularizedProblem, u: np.ndarray) -> np.ndarray:
    mesh = rp.mesh
    a = rp.flux.flux(element_gradients(mesh, u), rp.omega)
    local = mesh.areas[:, None] * np.einsum("td,tkd->tk", a, mesh.basis_gradients)
    return _scatter(mesh, local)


def interior_tangent(rp: RegularizedProblem, u: np.ndarray) -> sp.csr_matrix:
    mesh = rp.mesh
    D = rp.flux.tangent(element_gradients(mesh, u), rp.omega, EPS_REG)
    G = mesh.basis_gradients
    local = mesh.areas[:, None, None] * np.einsum("tid,tde,tje->tij", G, D, G)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_matrix(mesh: Mesh2D) -> sp.csr_matrix:
    """P1 Laplacian stiffness matrix."""
    G = mesh.basis_gradients
    local = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _boundary_quadrature_terms(rp: RegularizedProblem, u: np.ndarray, frozen=None):
    mesh = rp.mesh
    spec = rp.spec
    bp, bw, bt = mesh.boundary_quadrature(spec.boundary_order)
    e = mesh.boundary_edges
    uq = u[e[:, 0], None] * (1.0 - bt)[None, :] + u[e[:, 1], None] * bt[None, :]
    sq = uq if frozen is None else frozen[e[:, 0], None] * (1.0 - bt) + frozen[e[:, 1], None] * bt
    integrand = rp.lam_q * rp.absorption(uq) - rp.g_q * rp.source(sq)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, e[:, 0], (integrand * bw * (1.0 - bt)).sum(1))
    np.add.at(out, e[:, 1], (integrand * bw * bt).sum(1))
    return out


def assemble_residual(
    rp: RegularizedProblem,
    u,
    boundary: str = "lumped",
    frozen_source=None,
    with_jacobian: bool = False,
) -> AssembledResidual:
    """Residual of the level-n problem at nodal values ``u``.

    ``frozen_source`` (nodal values) replaces u inside the boundary source,
    which gives the residual of one fixed-point (Schauder) subproblem.
    """
    mesh = rp.mesh
    u = _as_values(u, mesh)
    frozen = None if frozen_source is None else _as_values(frozen_source, mesh)
    R = interior_flux(rp, u) - rp.load
    if boundary == "lumped":
        src_arg = u if frozen is None else frozen
        R += rp.lam_bar * rp.absorption(u) - rp.g_bar * rp.source(src_arg)
    elif boundary == "quadrature":
        R += _boundary_quadrature_terms(rp, u, frozen)
    else:
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    J = assemble_jacobian(rp, u, freeze_source=frozen is not None) if with_jacobian else None
    return AssembledResidual(R, J)


def assemble_jacobian(rp: RegularizedProblem, u, freeze_source: bool = False) -> sp.csr_matrix:
    """dR/du for the lumped residual. Boundary part is diagonal."""
    mesh = rp.mesh
    u = _as_values(u, mesh)
    diag = rp.lam_bar * rp.absorption_derivative(u)
    if not freeze_source:
        diag = diag - rp.g_bar * rp.source_derivative(u)
    return (interior_tangent(rp, u) + sp.diags(diag)).tocsr()


def boundary_integral(func, mesh: Mesh2D, order: int = 4) -> float:
    """Integral over the polygonal boundary of func(points, normals)."""
    bp, bw, _ = mesh.boundary_quadrature(order)
    normals = np.broadcast_to(mesh.normals[:, None, :], bp.shape)
    return float((np.asarray(func(bp, normals)) * bw).sum())


def scaled_residual_norm(residual, mesh: Mesh2D) -> float:
    """max_i |R_i| / (int phi_i + boundary int phi_i).

    Residual rows scale with the support measure of phi_i; dividing by it
    gives a resolution-independent pointwise consistency measure.
    """
    R = np.asarray(getattr(residual, "residual", residual))
    return float(np.max(np.abs(R) / (mesh.interior_mass + mesh.boundary_mass)))


def mass_balance(rp: RegularizedProblem, u) -> dict[str, float]:
    """Terms of the weak form tested with phi = 1 (the flux term drops out)."""
    u = _as_values(u, rp.mesh)
    absorption = float((rp.lam_bar * rp.absorption(u)).sum())
    source = float((rp.g_bar * rp.source(u)).sum())
    load = float(rp.load.sum())
    return {
        "absorption": absorption,
        "load": load,
        "source": source,
        "defect": absorption - load - source,
    }


def write_coo(matrix, path) -> None:
    """Dump a sparse matrix as 'i j value' lines."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    lines = [f"{i} {j} {format(float(v), '.17g')}" for i, j, v in zip(m.row[order], m.col[order], m.data[order])]
    Path(path).write_text("\n".join(lines) + "\n")


def finite_difference_check(rp: RegularizedProblem, u, columns, eps: float = 1e-6, boundary: str = "lumped") -> np.ndarray:
    """Per-column discrepancy between the assembled Jacobian and central
    differences of the residual, relative to max(1, |column|_inf)."""
    u = _as_values(u, rp.mesh)
    J = assemble_jacobian(rp, u).tocsc()
    out = []
    for j in np.atleast_1d(columns):
        e = np.zeros_like(u)
        e[j] = eps
        fd = (assemble_residual(rp, u + e, boundary).residual - assemble_residual(rp, u - e, boundary).residual) / (2 * eps)
        col = J[:, j].toarray().ravel()
        out.append(np.abs(fd - col).max() / max(1.0, np.abs(col).max()))
    return np.array(out)


def fd_safe_nodes(rp: RegularizedProblem, u, eps: float = 1e-6, margin: float = 1e3) -> np.ndarray:
    """Mask of nodes where a central difference of step eps stays in a smooth region.

    Excluded: for p != 2, nodes touching a triangle with |grad u| below
    margin * eps * |grad phi|; boundary nodes whose absorption or source
    derivative jumps within margin * eps (truncation kinks, u = 0).
    """
    mesh = rp.mesh
    u = _as_values(u, mesh)
    safe = np.ones(mesh.n_vertices, dtype=bool)
    if rp.flux.p != 2.0:
        g = np.linalg.norm(element_gradients(mesh, u), axis=1)
        gphi = np.linalg.norm(mesh.basis_gradients, axis=2)
        near = g[:, None] < margin * eps * gphi
        safe[mesh.triangles[near]] = False
    bv = mesh.boundary_vertices
    d = margin * eps
    for deriv in (rp.absorption_derivative, rp.source_derivative):
        lo, mid, hi = deriv(u[bv] - d), deriv(u[bv]), deriv(u[bv] + d)
        scale = np.abs(mid) + 1e-300
        jump = np.maximum(np.abs(hi - mid), np.abs(mid - lo)) > 0.5 * scale
        safe[bv[jump]] = False
    return safe
