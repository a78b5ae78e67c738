"""Checks of the a-priori estimates and of the entropy formulation on computed
fields.

Superlevel sets are taken at the vertices with lumped measures. Truncated
gradients use the exact area of {|w| < k} inside each triangle, which is
available in closed form because w is affine there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import element_gradients, mass_balance
from .functions import marcinkiewicz_exponents, truncate
from .mesh import Mesh2D
from .problem import InapplicableError, ProblemSpec, RegularizedProblem, lumped_boundary_weights, regularize

# nodal values at or below this count as zero for the degenerate-set flag
UZERO_TOL = 1e-14


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    tol: float
    mesh: str = ""
    level: float = float("nan")
    detail: str = ""


@dataclass
class EstimateReport:
    """Named checks plus an aggregate status.

    status is one of "pass", "fail", "refused" (hypotheses absent) or
    "inapplicable" (quantity undefined on this instance).
    """

    name: str
    status: str = "pass"
    checks: list[Check] = field(default_factory=list)
    grid: tuple[float, ...] = ()
    message: str = ""
    data: dict = field(default_factory=dict)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        if not check.passed and self.status == "pass":
            self.status = "fail"
        return check

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def rows(self):
        for c in self.checks:
            yield (self.name, c.name, c.value, c.bound, int(c.passed), c.tol, c.mesh, c.level, c.detail)

    def summary(self) -> str:
        head = f"[{self.status.upper()}] {self.name}"
        if self.message:
            head += f": {self.message}"
        failed = [c for c in self.checks if not c.passed]
        lines = [head, f"  {len(self.checks) - len(failed)}/{len(self.checks)} checks passed"]
        for c in failed[:5]:
            lines.append(f"  failed {c.name}: value {c.value:.6e} bound {c.bound:.6e} tol {c.tol:.1e}")
        return "\n".join(lines)


@dataclass(frozen=True)
class QuasiNormSample:
    r: float
    thresholds: np.ndarray
    samples: np.ndarray
    sup: float

    def __post_init__(self):
        t = np.asarray(self.thresholds)
        if t.size and (np.any(t <= 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("thresholds must be positive and increasing")


def mesh_label(mesh: Mesh2D) -> str:
    return f"{mesh.kind}:V{mesh.n_vertices}"


def _values(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


# ------------------------------------------------------------ level-set areas


def _below_fraction(w: np.ndarray, c: float) -> np.ndarray:
    """Fraction of each triangle where the affine function with vertex values
    w (T,3) lies below c."""
    s = np.sort(w, axis=1)
    w0, w1, w2 = s[:, 0], s[:, 1], s[:, 2]
    out = np.zeros(len(w))
    out[c >= w2] = 1.0
    lo = (c > w0) & (c <= w1)
    out[lo] = (c - w0[lo]) ** 2 / ((w1[lo] - w0[lo]) * (w2[lo] - w0[lo]))
    hi = (c > w1) & (c < w2)
    out[hi] = 1.0 - (w2[hi] - c) ** 2 / ((w2[hi] - w0[hi]) * (w2[hi] - w1[hi]))
    return out


def band_fraction(mesh: Mesh2D, w, k: float) -> np.ndarray:
    """Exact fraction of each triangle where |w_h| < k."""
    wt = _values(w)[mesh.triangles]
    return _below_fraction(wt, k) - _below_fraction(wt, -k)


# ------------------------------------------------------------ entropy residual


class EntropyInapplicable(InapplicableError):
    """h(u) g is not integrable: u vanishes where g does not."""


def degenerate_nodes(u, spec: ProblemSpec) -> np.ndarray:
    """Boundary vertices with u <= UZERO_TOL where g carries mass (singular h only)."""
    if not spec.h.singular:
        return np.zeros(0, dtype=int)
    mesh = spec.mesh
    bp, bw, bt = mesh.boundary_quadrature(spec.boundary_order)
    gbar = lumped_boundary_weights(mesh, spec.g.evaluate(bp, spec.boundary_normals()), bw, bt)
    vals = _values(u)
    bv = mesh.boundary_vertices
    bad = (np.abs(vals[bv]) <= UZERO_TOL) & (gbar[bv] > 0)
    return bv[bad]


def entropy_residual(u, v, k: float, spec: ProblemSpec) -> float:
    """|LHS - RHS| of the entropy identity with test T_k(u - v).

    Uses the untruncated data and nonlinearities. Interior integrals use the
    7-point rule (the gradient term uses exact band areas); boundary integrals
    use Gauss points of order ``spec.boundary_order`` on the P1 trace.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    mesh = spec.mesh
    uv = _values(u)
    vv = _values(v)
    w = uv - vv
    bad = degenerate_nodes(uv, spec)
    if bad.size:
        raise EntropyInapplicable(f"u vanishes at {bad.size} boundary vertices where g > 0")

    # interior: a(grad u) . grad T_k(w)
    gu = element_gradients(mesh, uv)
    gw = element_gradients(mesh, w)
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    a = spec.flux.flux(gu, spec.flux.weight_at(centroids))
    frac = band_fraction(mesh, w, k)
    interior = float(((a * gw).sum(1) * mesh.areas * frac).sum())

    ip, iw, ib, bp, bw, bt = spec.quadrature()
    wq = w[mesh.triangles] @ ib.T
    load = float((spec.f.evaluate(ip) * truncate(wq, k) * iw).sum())

    e = mesh.boundary_edges
    ub = uv[e[:, 0], None] * (1.0 - bt) + uv[e[:, 1], None] * bt
    wb = w[e[:, 0], None] * (1.0 - bt) + w[e[:, 1], None] * bt
    nb = spec.boundary_normals()
    lam = spec.lam.evaluate(bp, nb)
    g = spec.g.evaluate(bp, nb)
    absorption = lam * spec.sigma.value(ub)
    if spec.h.singular:
        pos = np.abs(ub) > 0
        if np.any(~pos & (g > 0)):
            raise EntropyInapplicable("u vanishes at a boundary quadrature point where g > 0")
        hval = np.zeros_like(ub)
        hval[pos] = spec.h.value(np.abs(ub[pos]))
    else:
        hval = spec.h.value(np.abs(ub))
    if spec.sign_changing:
        hval = np.sign(ub) * hval
    tb = truncate(wb, k)
    boundary = float(((absorption - hval * g) * tb * bw).sum())
    return abs(interior + boundary - load)


def default_test_family(u, ks=(0.5, 1.0, 2.0)):
    """Pairs (label, v, k) with v in {0, T_1(u), x}."""
    mesh = u.mesh
    vals = _values(u)
    tests = {
        "zero": np.zeros(mesh.n_vertices),
        "T1(u)": truncate(vals, 1.0),
        "x": mesh.vertices[:, 0].copy(),
    }
    return [(f"v={name},k={k:g}", v, k) for name, v in tests.items() for k in ks]


def entropy_report(u, spec: ProblemSpec, family=None, tol: float = 1e-6, level: float = float("nan")) -> EstimateReport:
    rep = EstimateReport("entropy-residual")
    family = family if family is not None else default_test_family(u)
    try:
        for label, v, k in family:
            r = entropy_residual(u, v, k, spec)
            rep.add(Check(label, r, 0.0, r <= tol, tol, mesh_label(spec.mesh), level))
    except EntropyInapplicable as exc:
        rep.status = "inapplicable"
        rep.message = str(exc)
    rep.data["max"] = max((c.value for c in rep.checks), default=float("nan"))
    return rep


# ------------------------------------------------------------ truncation energy


def default_k_grid(num: int = 40) -> np.ndarray:
    return np.logspace(-3, 3, num)


def truncation_energy(u, k: float, p: float) -> float:
    """||T_k(u_h)||^p in W^{1,p}: 7-point rule for the value, exact band
    area for the gradient."""
    mesh = u.mesh
    vals = _values(u)
    _, iw, ib = mesh.interior_quadrature()
    uq = vals[mesh.triangles] @ ib.T
    val = float((np.abs(truncate(uq, k)) ** p * iw).sum())
    g = np.linalg.norm(element_gradients(mesh, vals), axis=1)
    grad = float((g**p * mesh.areas * band_fraction(mesh, vals, k)).sum())
    return val + grad


def truncation_energy_check(u, spec: ProblemSpec, k_grid=None, level: float = float("nan")) -> EstimateReport:
    """E(k) = ||T_k u||^p per k and the fitted constant C = max_k E(k)/k.

    Stability of C across levels and meshes is judged by
    ``compare_constants``.
    """
    ks = np.asarray(default_k_grid() if k_grid is None else k_grid, dtype=float)
    if np.any(ks <= 0) or np.any(np.diff(ks) <= 0):
        raise ValueError("k grid must be positive and increasing")
    p = spec.flux.p
    E = np.array([truncation_energy(u, k, p) for k in ks])
    ratio = E / ks
    C = float(ratio.max())
    rep = EstimateReport("truncation-energy", grid=tuple(ks))
    for k, r in zip(ks, ratio):
        rep.add(Check(f"k={k:.6g}", float(r), C, bool(np.isfinite(r)), 0.0, mesh_label(spec.mesh), level))
    rep.data.update(constant=C, energies=E, p=p)
    return rep


def compare_constants(values, labels=None, factor: float = 2.0, name: str = "stability") -> EstimateReport:
    """Uniformity test: every value within ``factor`` of the first."""
    vals = np.asarray(values, dtype=float)
    labels = labels or [str(i) for i in range(len(vals))]
    rep = EstimateReport(name)
    ref = vals[0]
    for lab, v in zip(labels, vals):
        ratio = max(v / ref, ref / v) if ref > 0 and v > 0 else (1.0 if v == ref else math.inf)
        rep.add(Check(lab, float(v), float(ref), ratio <= factor, factor, detail=f"ratio={ratio:.6g}"))
    rep.data["spread"] = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    return rep


# ------------------------------------------------------------ absorption


def default_t_grid(u, num: int = 10) -> np.ndarray:
    vals = _values(u)
    top = float(vals.max())
    if top <= 0:
        return np.logspace(-3, 0, num)
    pos = vals[vals > 0]
    lo = max(float(pos.min()) / 2.0, 1e-3 * top)
    return np.geomspace(lo, top, num)


def absorption_estimate_check(u, rp: RegularizedProblem, t_grid=None, rel_tol: float = 1e-8) -> EstimateReport:
    """Boundary absorption on {u > t} against load plus boundary source there.

    Uses the level-n data and lumped measures, i.e. the same quantities the
    discrete weak form is built from.
    """
    vals = _values(u)
    ts = np.asarray(default_t_grid(vals) if t_grid is None else t_grid, dtype=float)
    if np.any(ts <= 0):
        raise ValueError("t grid must be positive")
    absorb = rp.lam_bar * rp.absorption(vals)
    source = rp.g_bar * rp.source(vals)
    rep = EstimateReport("absorption-estimate", grid=tuple(ts))
    for t in ts:
        S = vals > t
        lhs = float(absorb[S].sum())
        rhs = float(rp.load[S].sum() + source[S].sum())
        tol = rel_tol * max(abs(lhs), abs(rhs)) + 1e-300
        rep.add(Check(f"t={t:.6g}", lhs, rhs, lhs <= rhs + tol, rel_tol, mesh_label(rp.mesh), rp.n))
    return rep


# ------------------------------------------------------------ Marcinkiewicz


def marcinkiewicz_quasinorm(values, measures, r: float, num: int = 40, thresholds=None) -> QuasiNormSample:
    """sup_t t * mu({|f| > t})^(1/r) over a log grid of thresholds.

    Each threshold uses mu({|f| >= t}), the left limit in t, so the sup is
    attained at data values instead of only being approached. The default grid spans [min positive |f|, max |f|]. It is built on |f|
    normalised by its maximum, so scaling f by s > 0 scales the grid and the
    result by s.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    a = np.abs(np.asarray(values, dtype=float))
    mu = np.asarray(measures, dtype=float)
    if a.shape != mu.shape:
        raise ValueError("values and measures must be aligned")
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return QuasiNormSample(r, np.zeros(0), np.zeros(0), 0.0)
    if thresholds is None:
        rel = a / top
        lo = float(rel[rel > 0].min())
        tau = np.geomspace(lo, 1.0, num) if lo < 1.0 else np.array([1.0])
        meas = np.array([mu[rel >= x].sum() for x in tau])
        ts = top * tau
    else:
        ts = np.asarray(thresholds, dtype=float)
        meas = np.array([mu[a >= x].sum() for x in ts])
    samples = ts * meas ** (1.0 / r)
    return QuasiNormSample(r, ts, samples, float(samples.max()))


def field_quasinorms(u, p: float, N: int = 2, num: int = 40) -> dict[str, QuasiNormSample]:
    """Quasi-norms of u (interior, boundary) and |grad u| at the exponents
    the a-priori estimates predict."""
    mesh = u.mesh
    vals = _values(u)
    r_int, r_bd, r_grad = marcinkiewicz_exponents(N, p)
    bv = mesh.boundary_vertices
    grad = np.linalg.norm(element_gradients(mesh, vals), axis=1)
    return {
        "interior": marcinkiewicz_quasinorm(vals, mesh.interior_mass, r_int, num),
        "boundary": marcinkiewicz_quasinorm(vals[bv], mesh.boundary_mass[bv], r_bd, num),
        "gradient": marcinkiewicz_quasinorm(grad, mesh.areas, r_grad, num),
    }


# ------------------------------------------------------------ uniqueness


def uniqueness_crosscheck(spec: ProblemSpec, config=None, scale_factor: float = 10.0) -> EstimateReport:
    """Solve from a low start (the default constant guess divided by
    scale_factor) and from u0 = scale_factor * data scale; compare nodewise.
    u0 = 0 is avoided because sigma(s) = s^(p-1) has an infinite slope there
    for p < 2.

    Refused unless sigma is flagged increasing and h nonincreasing. The hot
    solve skips ladder levels whose truncation is active at the start value.
    """
    from .solver import SolverConfig, SolverError, default_initial_guess, solve_ladder

    config = config or SolverConfig()
    rep = EstimateReport("uniqueness")
    if not (spec.sigma.monotone and spec.h.monotone):
        rep.status = "refused"
        rep.message = "sigma must be flagged increasing and h nonincreasing"
        return rep
    levels = config.levels()
    big = scale_factor * regularize(spec, levels[0]).data_scale()
    mesh = spec.mesh
    tol = max(1e-8, 1e3 * config.tol_res)
    # a constant start on the flat part of a truncated absorption solves the
    # level problem spuriously; begin the hot ladder where the truncation is
    # inactive at the start value
    start = np.array([big])
    hot_levels = [n for n in levels if regularize(spec, n).absorption_derivative(start)[0] > 0]
    hot_cfg = replace(config, schedule=tuple(hot_levels or levels[-1:]))
    try:
        low = default_initial_guess(regularize(spec, levels[0])) / scale_factor
        cold, _ = solve_ladder(spec, config, low)
        hot, _ = solve_ladder(spec, hot_cfg, np.full(mesh.n_vertices, big))
    except SolverError as exc:
        rep.status = "fail"
        rep.message = f"solve failed: {exc}"
        return rep
    diff = float(np.abs(cold.values - hot.values).max())
    rep.add(Check("max-nodal-difference", diff, tol, diff <= tol, tol, mesh_label(mesh), config.levels()[-1],
                  detail=f"start={big:.6g}"))
    rep.data.update(cold=cold, hot=hot)
    return rep


# ------------------------------------------------------------ boundary L1


def boundary_l1_balance(u, rp: RegularizedProblem, rel_tol: float = 1e-8) -> EstimateReport:
    """Boundary absorption, boundary source, interior load and their defect."""
    mb = mass_balance(rp, _values(u))
    scale = abs(mb["absorption"]) + abs(mb["load"]) + abs(mb["source"])
    tol = rel_tol * scale + 1e-14
    rep = EstimateReport("boundary-l1")
    lab = mesh_label(rp.mesh)
    for key in ("absorption", "source", "load"):
        rep.add(Check(key, mb[key], math.inf, bool(np.isfinite(mb[key])), 0.0, lab, rp.n))
    rep.add(Check("defect", abs(mb["defect"]), tol, abs(mb["defect"]) <= tol, rel_tol, lab, rp.n))
    rep.data.update(mb)
    return rep


def track_boundary_l1(reports, factor: float = 2.0) -> EstimateReport:
    """Both boundary integrals stay within ``factor`` of the first level's."""
    rep = EstimateReport("boundary-l1-tracking")
    for key in ("absorption", "source"):
        sub = compare_constants(
            [r.data[key] for r in reports],
            [f"{key}@n={r.checks[0].level:g}" for r in reports],
            factor,
        )
        for c in sub.checks:
            rep.add(c)
    return rep
