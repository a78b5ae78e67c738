"""Problem data: scalar fields, flux families, problem specs and their level-n
regularizations, manufactured solutions and the exact disk example.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .functions import HSpec, SigmaSpec, truncate
from .mesh import Mesh2D

# evaluations closer than this to a declared singular point are clamped
SINGULAR_OFFSET = 1e-12

FIELD_FAMILIES = {
    "constant": ("value",),
    "affine": ("c0", "cx", "cy"),
    "angular-power": ("scale", "alpha"),
    "point-singular": ("scale", "beta", "x0", "y0"),
    "disk-example-g": ("alpha",),
}
_FIELD_DEFAULTS = {"scale": 1.0, "c0": 0.0, "cx": 0.0, "cy": 0.0, "x0": 0.0, "y0": 0.0, "alpha": 0.0}


class InapplicableError(RuntimeError):
    """A check or construction whose hypotheses the instance does not meet."""


@dataclass(frozen=True)
class FieldSpec:
    """Closed family of scalar data fields, evaluable at points of the plane.

    Boundary-only families use the polar angle theta in (-pi, pi].
    """

    family: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.family not in FIELD_FAMILIES:
            raise ValueError(f"unknown field family {self.family!r}")
        allowed = FIELD_FAMILIES[self.family]
        given = dict(self.params)
        for key in given:
            if key not in allowed:
                raise ValueError(f"field family {self.family!r} has no parameter {key!r}")
        full = {k: float(given.get(k, _FIELD_DEFAULTS.get(k, float("nan")))) for k in allowed}
        missing = [k for k, v in full.items() if math.isnan(v)]
        if missing:
            raise ValueError(f"field family {self.family!r} missing {missing}")
        object.__setattr__(self, "params", tuple(sorted(full.items())))

    @classmethod
    def make(cls, family: str, **params) -> "FieldSpec":
        return cls(family, tuple(params.items()))

    def __getitem__(self, key: str) -> float:
        return dict(self.params)[key]

    @property
    def singular(self) -> bool:
        """Unbounded near some point of the domain."""
        if self.family == "angular-power":
            return self["alpha"] > 0
        if self.family == "point-singular":
            return self["beta"] > 0
        if self.family == "disk-example-g":
            return self["alpha"] > 0
        return False

    def evaluate(self, pts, normals=None):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        fam = self.family
        if fam == "constant":
            return np.full(x.shape, self["value"])
        if fam == "affine":
            return self["c0"] + self["cx"] * x + self["cy"] * y
        if fam == "angular-power":
            th = np.maximum(np.abs(np.arctan2(y, x)), SINGULAR_OFFSET)
            return self["scale"] * th ** (-self["alpha"])
        if fam == "point-singular":
            r = np.hypot(x - self["x0"], y - self["y0"])
            return self["scale"] * np.maximum(r, SINGULAR_OFFSET) ** (-self["beta"])
        if fam == "disk-example-g":
            th = np.arctan2(y, x)
            return np.sin(th) ** 2 * (1.0 + np.maximum(np.abs(th), SINGULAR_OFFSET) ** (-self["alpha"]))
        raise AssertionError(fam)

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.family == "constant":
            return np.zeros(pts.shape)
        if self.family == "affine":
            out = np.empty(pts.shape)
            out[..., 0] = self["cx"]
            out[..., 1] = self["cy"]
            return out
        raise ValueError(f"no analytic gradient for family {self.family!r}")


@dataclass(frozen=True)
class TruncatedField:
    inner: object
    level: float

    @property
    def singular(self) -> bool:
        return False

    def evaluate(self, pts, normals=None):
        return truncate(self.inner.evaluate(pts, normals), self.level)


# ---------------------------------------------------------------- exact solutions

EXACT_FAMILIES = {
    "constant": ("c0",),
    "affine": ("c0", "cx", "cy"),
    "quadratic": ("c0", "cx", "cy", "qxx", "qyy", "qxy"),
    "trig": ("c0", "amp", "kx", "ky"),
}


@dataclass(frozen=True)
class ExactSolution:
    """Smooth analytic field with closed-form gradient and Hessian.

    ``trig``: c0 + amp * cos(kx x) * cos(ky y).
    """

    family: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.family not in EXACT_FAMILIES:
            raise ValueError(f"unknown exact-solution family {self.family!r}")
        given = dict(self.params)
        bad = set(given) - set(EXACT_FAMILIES[self.family])
        if bad:
            raise ValueError(f"unknown parameters {sorted(bad)}")
        full = {k: float(given.get(k, 0.0)) for k in EXACT_FAMILIES[self.family]}
        object.__setattr__(self, "params", tuple(sorted(full.items())))

    @classmethod
    def make(cls, family: str, **params) -> "ExactSolution":
        return cls(family, tuple(params.items()))

    def __getitem__(self, key):
        return dict(self.params)[key]

    def _q(self):
        d = dict(self.params)
        return [d.get(k, 0.0) for k in ("c0", "cx", "cy", "qxx", "qyy", "qxy")]

    def value(self, x, y):
        if self.family == "trig":
            return self["c0"] + self["amp"] * np.cos(self["kx"] * x) * np.cos(self["ky"] * y)
        c0, cx, cy, qxx, qyy, qxy = self._q()
        return c0 + cx * x + cy * y + qxx * x * x + qyy * y * y + qxy * x * y

    def gradient(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.family == "trig":
            a, kx, ky = self["amp"], self["kx"], self["ky"]
            gx = -a * kx * np.sin(kx * x) * np.cos(ky * y)
            gy = -a * ky * np.cos(kx * x) * np.sin(ky * y)
        else:
            c0, cx, cy, qxx, qyy, qxy = self._q()
            gx = cx + 2 * qxx * x + qxy * y
            gy = cy + 2 * qyy * y + qxy * x
        return np.stack([gx, gy], axis=-1)

    def hessian(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        H = np.zeros(x.shape + (2, 2))
        if self.family == "trig":
            a, kx, ky = self["amp"], self["kx"], self["ky"]
            H[..., 0, 0] = -a * kx * kx * np.cos(kx * x) * np.cos(ky * y)
            H[..., 1, 1] = -a * ky * ky * np.cos(kx * x) * np.cos(ky * y)
            H[..., 0, 1] = H[..., 1, 0] = a * kx * ky * np.sin(kx * x) * np.sin(ky * y)
        else:
            _, _, _, qxx, qyy, qxy = self._q()
            H[..., 0, 0] = 2 * qxx
            H[..., 1, 1] = 2 * qyy
            H[..., 0, 1] = H[..., 1, 0] = qxy
        return H


# ---------------------------------------------------------------- flux


@dataclass(frozen=True)
class FluxSpec:
    """a(x, xi) = w(x) |xi|^(p-2) xi, with w == 1 for the plain p-Laplacian.

    ``weight`` must be a constant or affine FieldSpec (its gradient enters
    manufactured loads); ``weight_bounds`` are its min/max on the domain.
    """

    family: str = "p-laplacian"
    p: float = 2.0
    weight: FieldSpec | None = None
    weight_bounds: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.family not in ("p-laplacian", "weighted-p-laplacian"):
            raise ValueError(f"unknown flux family {self.family!r}")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.family == "weighted-p-laplacian":
            if self.weight is None or self.weight.family not in ("constant", "affine"):
                raise ValueError("weighted flux needs a constant or affine weight")
            lo, hi = self.weight_bounds
            if not 0 < lo <= hi:
                raise ValueError("weight bounds must satisfy 0 < min <= max")

    @property
    def coercivity(self) -> float:
        return min(1.0, self.weight_bounds[0]) if self.family != "p-laplacian" else 1.0

    @property
    def growth(self) -> float:
        return max(1.0, self.weight_bounds[1]) if self.family != "p-laplacian" else 1.0

    @property
    def is_laplacian(self) -> bool:
        return self.family == "p-laplacian" and self.p == 2.0

    def weight_at(self, pts):
        pts = np.asarray(pts, float)
        if self.family == "p-laplacian":
            return np.ones(pts.shape[:-1])
        return self.weight.evaluate(pts)

    def flux(self, grad, w=1.0):
        grad = np.asarray(grad, float)
        n2 = (grad**2).sum(axis=-1)
        if self.p == 2.0:
            coef = np.ones_like(n2)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = np.where(n2 > 0, n2 ** ((self.p - 2.0) / 2.0), 0.0)
        return (np.asarray(w) * coef)[..., None] * grad

    def tangent(self, grad, w=1.0, eps_reg: float = 1e-10):
        """d a / d xi, exact where |xi|^2 >= eps_reg; |xi|^2 is floored at
        eps_reg below that, so p < 2 stays finite at xi = 0."""
        grad = np.asarray(grad, float)
        n2 = np.maximum((grad**2).sum(axis=-1), eps_reg)
        p = self.p
        eye = np.broadcast_to(np.eye(2), grad.shape[:-1] + (2, 2))
        outer = grad[..., :, None] * grad[..., None, :]
        T = n2[..., None, None] ** ((p - 2.0) / 2.0) * (eye + (p - 2.0) * outer / n2[..., None, None])
        return np.asarray(w)[..., None, None] * T

    def divergence(self, exact: ExactSolution, pts):
        """div a(x, grad u) for an analytic u."""
        pts = np.asarray(pts, float)
        x, y = pts[..., 0], pts[..., 1]
        g = exact.gradient(x, y)
        H = exact.hessian(x, y)
        p = self.p
        n2 = (g**2).sum(-1)
        lap = H[..., 0, 0] + H[..., 1, 1]
        gHg = np.einsum("...i,...ij,...j->...", g, H, g)
        if p == 2.0:
            core = lap
            pw = np.ones_like(n2)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                pw = np.where(n2 > 0, n2 ** ((p - 2.0) / 2.0), 0.0)
                core = pw * lap + (p - 2.0) * np.where(n2 > 0, n2 ** ((p - 4.0) / 2.0), 0.0) * gHg
        w = self.weight_at(pts)
        out = w * core
        if self.family == "weighted-p-laplacian":
            out = out + (self.weight.gradient(pts) * g).sum(-1) * pw
        return out


@dataclass(frozen=True)
class ManufacturedLoad:
    exact: ExactSolution
    flux: FluxSpec

    singular = False

    def evaluate(self, pts, normals=None):
        return -self.flux.divergence(self.exact, pts)


@dataclass(frozen=True)
class ManufacturedBoundarySource:
    """g = (a(grad u).nu + lambda sigma(u)) / h(u), evaluated with the edge normal."""

    exact: ExactSolution
    flux: FluxSpec
    lam: FieldSpec
    sigma: SigmaSpec
    h: HSpec

    singular = False

    def evaluate(self, pts, normals=None):
        if normals is None:
            raise ValueError("manufactured boundary source needs outward normals")
        pts = np.asarray(pts, float)
        x, y = pts[..., 0], pts[..., 1]
        u = self.exact.value(x, y)
        a = self.flux.flux(self.exact.gradient(x, y), self.flux.weight_at(pts))
        an = (a * np.broadcast_to(normals, a.shape)).sum(-1)
        return (an + self.lam.evaluate(pts) * self.sigma.value(u)) / self.h.value(u)


# ---------------------------------------------------------------- problem specs


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of  -div a(x, grad u) = f,  a.nu + lambda sigma(u) = h(u) g.

    ``mode="model"`` regularizes with g_n / (|u| + 1/n)^eta and leaves sigma,
    lambda untruncated; ``mode="general"`` truncates every datum and
    nonlinearity at level n. ``sign_changing`` instances are for residual
    evaluation only: the source becomes sign(u) h(|u|).
    """

    mesh: Mesh2D
    flux: FluxSpec
    f: object
    lam: object
    g: object
    sigma: SigmaSpec
    h: HSpec
    N: int = 2
    mode: str = "general"
    sign_changing: bool = False
    exact: ExactSolution | None = None
    boundary_order: int = 4
    name: str = ""

    def __post_init__(self):
        if self.mode not in ("general", "model"):
            raise ValueError("mode must be 'general' or 'model'")
        if self.mode == "model":
            if not self.sigma.is_identity:
                raise ValueError("model mode requires sigma(s) = s")
            if self.h.family != "power-singular":
                raise ValueError("model mode requires a power-singular h")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        issues = self.data_issues()
        if issues:
            raise ValueError("; ".join(issues))

    @property
    def eta(self) -> float:
        return self.h.eta

    def quadrature(self):
        """Interior and boundary quadrature points of this instance's mesh."""
        ip, iw, ib = self.mesh.interior_quadrature()
        bp, bw, bt = self.mesh.boundary_quadrature(self.boundary_order)
        return ip, iw, ib, bp, bw, bt

    def boundary_normals(self):
        return np.broadcast_to(
            self.mesh.normals[:, None, :], (self.mesh.n_boundary_edges, self.boundary_order, 2)
        )

    def data_issues(self) -> list[str]:
        ip, _, _, bp, bw, _ = self.quadrature()
        nb = self.boundary_normals()
        out = []
        fv = self.f.evaluate(ip)
        lv = self.lam.evaluate(bp, nb)
        gv = self.g.evaluate(bp, nb)
        if np.any(fv < -1e-12):
            out.append(f"f negative at quadrature points (min {fv.min():.3e})")
        if np.any(lv < 0):
            out.append("lambda negative at quadrature points")
        if np.any(gv < -1e-12):
            out.append(f"g negative at quadrature points (min {gv.min():.3e})")
        if not (lv * bw).sum() > 0:
            out.append("lambda vanishes identically on the boundary")
        return out


@dataclass(frozen=True, eq=False)
class RegularizedProblem:
    """Level-n problem with all quadrature-point data precomputed.

    ``load``: integral of f_n phi_i. ``lam_bar`` / ``g_bar``: boundary
    integrals of lambda_n phi_i and g_n phi_i (the lumped weights of the
    boundary nonlinear terms).
    """

    spec: ProblemSpec
    n: float
    f_q: np.ndarray
    lam_q: np.ndarray
    g_q: np.ndarray
    load: np.ndarray
    lam_bar: np.ndarray
    g_bar: np.ndarray
    omega: np.ndarray

    @property
    def mesh(self) -> Mesh2D:
        return self.spec.mesh

    @property
    def flux(self) -> FluxSpec:
        return self.spec.flux

    # boundary nonlinearities; vertex values in, vertex values out
    def absorption(self, u):
        if self.spec.mode == "model":
            return np.asarray(u, float).copy()
        return self.spec.sigma.truncated(np.asarray(u, float), self.n)

    def absorption_derivative(self, u):
        if self.spec.mode == "model":
            return np.ones_like(np.asarray(u, float))
        return self.spec.sigma.truncated_derivative(np.asarray(u, float), self.n)

    def source(self, u):
        u = np.asarray(u, float)
        a = np.abs(u)
        if self.spec.mode == "model":
            val = self.spec.h.c1 * (a + 1.0 / self.n) ** (-self.spec.eta)
        else:
            val = self.spec.h.truncated(a, self.n)
        return np.sign(u) * val if self.spec.sign_changing else val

    def source_derivative(self, u):
        u = np.asarray(u, float)
        a = np.abs(u)
        s = np.where(u >= 0, 1.0, -1.0)
        if self.spec.mode == "model":
            eta = self.spec.eta
            d = -eta * self.spec.h.c1 * (a + 1.0 / self.n) ** (-eta - 1.0)
        else:
            d = self.spec.h.truncated_derivative(a, self.n)
        # d/du h(|u|) = sign(u) h'(|u|);  d/du sign(u) h(|u|) = h'(|u|)
        return d if self.spec.sign_changing else s * d

    def data_scale(self) -> float:
        """Total mass of interior load plus boundary datum, floor 1."""
        return max(1.0, float(self.load.sum() + self.g_bar.sum()))


def lumped_boundary_weights(mesh: Mesh2D, vals_q, wts, t):
    """Boundary integral of vals * phi_i for every vertex i."""
    start = (vals_q * wts * (1.0 - t)[None, :]).sum(1)
    end = (vals_q * wts * t[None, :]).sum(1)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.boundary_edges[:, 0], start)
    np.add.at(out, mesh.boundary_edges[:, 1], end)
    return out


def regularize(spec: ProblemSpec, n: float) -> RegularizedProblem:
    """Truncate the data at level n (lambda only in general mode)."""
    if not n >= 1:
        raise ValueError("level n must be >= 1")
    mesh = spec.mesh
    ip, iw, ib, bp, bw, bt = spec.quadrature()
    nb = spec.boundary_normals()
    f_q = truncate(spec.f.evaluate(ip), n)
    g_q = truncate(spec.g.evaluate(bp, nb), n)
    lam_raw = spec.lam.evaluate(bp, nb)
    lam_q = lam_raw if spec.mode == "model" else truncate(lam_raw, n)

    load = np.zeros(mesh.n_vertices)
    contrib = np.einsum("tq,tq,qk->tk", f_q, iw, ib)
    np.add.at(load, mesh.triangles.ravel(), contrib.ravel())
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    return RegularizedProblem(
        spec=spec,
        n=float(n),
        f_q=f_q,
        lam_q=lam_q,
        g_q=g_q,
        load=load,
        lam_bar=lumped_boundary_weights(mesh, lam_q, bw, bt),
        g_bar=lumped_boundary_weights(mesh, g_q, bw, bt),
        omega=spec.flux.weight_at(centroids),
    )


# ---------------------------------------------------------------- builders


def manufacture(
    exact: ExactSolution,
    lam: FieldSpec,
    h: HSpec,
    flux: FluxSpec,
    mesh: Mesh2D,
    sigma: SigmaSpec | None = None,
    N: int = 2,
    boundary_order: int = 4,
) -> ProblemSpec:
    """General-mode instance whose exact solution is ``exact``.

    f := -div a(grad u), g := (a(grad u).nu + lambda sigma(u)) / h(u).
    Rejects instances where u <= 0 on the boundary or g < -1e-12 anywhere.
    """
    sigma = sigma or SigmaSpec()
    bp, _, _ = mesh.boundary_quadrature(boundary_order)
    ub = exact.value(bp[..., 0], bp[..., 1])
    if np.any(ub <= 0) or np.any(exact.value(*mesh.vertices[mesh.boundary_vertices].T) <= 0):
        raise ValueError("manufactured solution must be positive on the boundary")
    g = ManufacturedBoundarySource(exact, flux, lam, sigma, h)
    normals = np.broadcast_to(mesh.normals[:, None, :], bp.shape)
    gv = g.evaluate(bp, normals)
    if np.any(gv < -1e-12):
        raise ValueError(f"manufactured g is negative (min {gv.min():.3e}); sign condition violated")
    return ProblemSpec(
        mesh=mesh,
        flux=flux,
        f=ManufacturedLoad(exact, flux),
        lam=lam,
        g=g,
        sigma=sigma,
        h=h,
        N=N,
        exact=exact,
        boundary_order=boundary_order,
        name=f"manufactured-{exact.family}",
    )


def exact_disk_example(alpha: float, mesh: Mesh2D, boundary_order: int = 4):
    """Harmonic u = r sin(theta) = y on the unit disk with
    lambda = |theta|^-alpha, g = sin^2(theta) (1 + |theta|^-alpha), eta = 1.

    Returns (spec, interpolated exact field). The spec is sign-changing and
    meant for residual evaluation only.
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1) for lambda to be integrable")
    if mesh.kind != "disk":
        raise ValueError("exact disk example needs a disk mesh")
    th = np.arctan2(*mesh.vertices[mesh.boundary_vertices].T[::-1])
    if np.any(np.abs(th) < SINGULAR_OFFSET):
        raise ValueError("disk mesh has a boundary vertex at theta = 0")
    spec = ProblemSpec(
        mesh=mesh,
        flux=FluxSpec(),
        f=FieldSpec.make("constant", value=0.0),
        lam=FieldSpec.make("angular-power", scale=1.0, alpha=alpha),
        g=FieldSpec.make("disk-example-g", alpha=alpha),
        sigma=SigmaSpec(),
        h=HSpec("power-singular", eta=1.0),
        N=2,
        sign_changing=True,
        exact=ExactSolution.make("affine", cy=1.0),
        boundary_order=boundary_order,
        name=f"exact-disk-alpha{alpha:g}",
    )
    return spec, mesh.interpolate(lambda x, y: y)


def lambda_sup(spec: ProblemSpec) -> float:
    """Max of lambda over boundary quadrature points (surrogate for the L-inf norm)."""
    if getattr(spec.lam, "singular", False):
        raise InapplicableError("lambda is unbounded; the sub-solution barrier does not apply")
    bp, _, _ = spec.mesh.boundary_quadrature(spec.boundary_order)
    return float(np.max(spec.lam.evaluate(bp, spec.boundary_normals())))


def subsolution_problem(spec: ProblemSpec) -> ProblemSpec:
    """Linear barrier problem: -Lap v = T_1(f), dv/dnu + sup(lambda) v = 0."""
    L = lambda_sup(spec)
    return ProblemSpec(
        mesh=spec.mesh,
        flux=FluxSpec(),
        f=TruncatedField(spec.f, 1.0),
        lam=FieldSpec.make("constant", value=L),
        g=FieldSpec.make("constant", value=0.0),
        sigma=SigmaSpec(),
        h=HSpec("bounded", eta=0.0, c1=1.0),
        N=spec.N,
        mode="general",
        boundary_order=spec.boundary_order,
        name=f"{spec.name}-barrier",
    )


def singular_demo(
    mesh: Mesh2D,
    mode: str = "model",
    p: float = 2.0,
    eta: float = 1.0,
    alpha: float = 0.0,
    f: FieldSpec | None = None,
    g_scale: float = 0.25,
    g_beta: float = 0.5,
    boundary_order: int = 8,
) -> ProblemSpec:
    """Instance with g in L^1 only: g = g_scale |x - (-1,0)|^-g_beta, blowing up
    at the boundary point theta = pi of the unit disk.

    Defaults: f = |x|^-1 (interior L^1 singularity at the origin), lambda =
    |theta|^-alpha, sigma(s) = s^(p-1), h(s) = s^-eta.
    """
    if f is None:
        f = FieldSpec.make("point-singular", scale=0.25, beta=1.0, x0=0.0, y0=0.0)
    lam = (
        FieldSpec.make("constant", value=1.0)
        if alpha == 0
        else FieldSpec.make("angular-power", scale=1.0, alpha=alpha)
    )
    return ProblemSpec(
        mesh=mesh,
        flux=FluxSpec(p=p),
        f=f,
        lam=lam,
        g=FieldSpec.make("point-singular", scale=g_scale, beta=g_beta, x0=-1.0, y0=0.0),
        sigma=SigmaSpec(q=p - 1.0),
        h=HSpec("power-singular", eta=eta),
        N=2,
        mode=mode,
        boundary_order=boundary_order,
        name=f"singular-demo-{mode}",
    )


def with_mesh(spec: ProblemSpec, mesh: Mesh2D) -> ProblemSpec:
    """Same data on another mesh (manufactured sources are mesh-independent)."""
    return replace(spec, mesh=mesh)
