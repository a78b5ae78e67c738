"""Command-line runs: config parsing, the solve / verify / estimates / sweep
subcommands and their writers.

Config grammar: one ``section.key = value`` per line, ``#`` starts a comment.
Lists are comma separated. Every artifact starts with a provenance header.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .assembly import assemble_residual, fd_safe_nodes, finite_difference_check, scaled_residual_norm
from .functions import HSpec, SigmaSpec
from .mesh import DiscreteField, generate_unit_disk, generate_unit_square, write_field_csv, write_mesh, write_vtk
from .problem import (
    EXACT_FAMILIES,
    FIELD_FAMILIES,
    ExactSolution,
    FieldSpec,
    FluxSpec,
    InapplicableError,
    ProblemSpec,
    exact_disk_example,
    manufacture,
    regularize,
    singular_demo,
)
from .solver import SolverConfig, SolverError, solve_barrier, solve_ladder

log = logging.getLogger("robinl1")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3

INSTANCES = ("constant", "manufactured", "exact-disk", "singular-demo", "custom")
SWEEP_KEYS = {"eta": "h.eta", "alpha": "disk.alpha", "p": "flux.p", "n_max": "solver.n_max"}


def fmt(x) -> str:
    """17 significant digits for floats, plain str otherwise."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# ------------------------------------------------------------------ schema


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | floats
    default: object = None
    choices: tuple = ()
    required: bool = False
    check: object = None  # callable(value) -> error message or None


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _at_least(k):
    return lambda v: None if v >= k else f"must be >= {k}"


def _build_schema() -> dict[str, Key]:
    s: dict[str, Key] = {
        "domain.kind": Key("str", choices=("square", "disk"), required=True),
        "domain.m": Key("int", required=True, check=_at_least(2)),
        "problem.instance": Key("str", choices=INSTANCES, required=True),
        "problem.mode": Key("str", "general", ("general", "model")),
        "problem.N": Key("int", 2, check=_at_least(2)),
        "problem.boundary_order": Key("int", 4, check=lambda v: None if 1 <= v <= 8 else "must lie in 1..8"),
        "flux.p": Key("float", 2.0, check=lambda v: None if v > 1 else "must be > 1"),
        "h.family": Key("str", "power-singular", ("power-singular", "bounded", "rational")),
        "h.eta": Key("float", 1.0, check=lambda v: None if v >= 0 else "eta must be >= 0"),
        "h.c1": Key("float", 1.0, check=_positive),
        "h.s1": Key("float", 1.0, check=_positive),
        "h.s2": Key("float", 1.0, check=_positive),
        "h.monotone": Key("bool", True),
        "sigma.q": Key("float", 1.0, check=_nonneg),
        "sigma.scale": Key("float", 1.0, check=_positive),
        "sigma.monotone": Key("bool", True),
        "disk.alpha": Key("float", 0.0, check=lambda v: None if 0 <= v < 1 else "alpha must lie in [0,1)"),
        "demo.g_scale": Key("float", 0.25, check=_nonneg),
        "demo.g_beta": Key("float", 0.5, check=lambda v: None if 0 <= v < 1 else "must lie in [0,1)"),
        "exact.family": Key("str", "affine", tuple(EXACT_FAMILIES)),
        "solver.mode": Key("str", "newton", ("newton", "picard")),
        "solver.tol_fp": Key("float", 1e-10, check=_positive),
        "solver.tol_res": Key("float", 1e-12, check=_positive),
        "solver.max_iter": Key("int", 200, check=_at_least(1)),
        "solver.damping": Key("float", 1.0, check=lambda v: None if 0 < v <= 1 else "must lie in (0,1]"),
        "solver.linear_tol": Key("float", 1e-12, check=_positive),
        "solver.n_max": Key("float", 2.0**14, check=_at_least(1)),
        "solver.tol_ladder": Key("float", 1e-10, check=_positive),
        "solver.max_inner": Key("int", 50, check=_at_least(1)),
        "solver.schedule": Key("floats", None, check=lambda v: None if all(x >= 1 for x in v) else "levels must be >= 1"),
        "verify.meshes": Key("int", 3, check=_at_least(2)),
        "diagnostics.k_min": Key("float", 1e-3, check=_positive),
        "diagnostics.k_max": Key("float", 1e3, check=_positive),
        "diagnostics.k_num": Key("int", 40, check=_at_least(2)),
        "diagnostics.t_num": Key("int", 10, check=_at_least(1)),
        "diagnostics.q_num": Key("int", 40, check=_at_least(2)),
        "diagnostics.n0": Key("float", 16.0, check=_at_least(1)),
        "diagnostics.factor": Key("float", 2.0, check=_at_least(1)),
        "diagnostics.entropy_tol": Key("float", math.inf, check=_positive),
        "diagnostics.fd_nodes": Key("int", 20, check=_at_least(1)),
        "diagnostics.fd_eps": Key("float", 1e-6, check=_positive),
        "diagnostics.uniqueness": Key("bool", True),
        "sweep.param": Key("str", None, tuple(SWEEP_KEYS)),
        "sweep.values": Key("floats", None),
        "run.seed": Key("int", 0, check=_nonneg),
    }
    for name in ("f", "lam", "g"):
        s[f"{name}.family"] = Key("str", "constant", tuple(FIELD_FAMILIES))
        for par in sorted({p for ps in FIELD_FAMILIES.values() for p in ps}):
            s[f"{name}.{par}"] = Key("float", None)
    for par in sorted({p for ps in EXACT_FAMILIES.values() for p in ps}):
        s[f"exact.{par}"] = Key("float", None)
    return s


SCHEMA = _build_schema()
REQUIRED = tuple(k for k, v in SCHEMA.items() if v.required)


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class RunConfig:
    """Explicitly set keys (sorted); defaults come from SCHEMA on lookup."""

    values: tuple[tuple[str, object], ...]
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def get(self, key: str):
        d = dict(self.values)
        return d[key] if key in d else SCHEMA[key].default

    __getitem__ = get

    def is_set(self, key: str) -> bool:
        return key in dict(self.values)

    def serialize(self) -> str:
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.values)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]

    def with_value(self, key: str, value) -> "RunConfig":
        d = dict(self.values)
        d[key] = value
        return parse_config("".join(f"{k} = {_render(v)}\n" for k, v in sorted(d.items())))

    def solver_config(self) -> SolverConfig:
        sched = self.get("solver.schedule")
        return SolverConfig(
            mode=self["solver.mode"],
            tol_fp=self["solver.tol_fp"],
            tol_res=self["solver.tol_res"],
            max_iter=self["solver.max_iter"],
            damping=self["solver.damping"],
            linear_tol=self["solver.linear_tol"],
            schedule=tuple(sched) if sched else None,
            n_max=self["solver.n_max"],
            tol_ladder=self["solver.tol_ladder"],
            max_inner=self["solver.max_inner"],
        )


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "floats":
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if not items:
            raise ValueError("expected a comma-separated list of numbers")
        return tuple(float(x) for x in items)
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem found."""
    errors: list[str] = []
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    seen: set[str] = set()
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {no}: expected 'section.key = value'")
            continue
        key, raw = (x.strip() for x in body.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"line {no}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {no}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        seen.add(key)
        lines.setdefault(key, no)
        spec = SCHEMA[key]
        try:
            val = _convert(spec.kind, raw)
        except ValueError:
            errors.append(f"line {no}: {key} expects {spec.kind}, got {raw!r}")
            continue
        if spec.choices and val not in spec.choices:
            errors.append(f"line {no}: {key} must be one of {', '.join(spec.choices)}")
            continue
        msg = spec.check(val) if spec.check else None
        if msg:
            errors.append(f"line {no}: {key} {msg}")
            continue
        values[key] = val

    for key in REQUIRED:
        if key not in seen:
            errors.append(f"missing required key {key}")
    cfg = RunConfig(tuple(sorted(values.items())), lines)
    errors += _cross_checks(cfg, lines)
    if errors:
        raise ConfigError(sorted(errors, key=_line_of))
    return cfg


def _line_of(msg: str) -> int:
    if msg.startswith("line "):
        return int(msg[5:].split(":", 1)[0])
    return 0


def _cross_checks(cfg: RunConfig, lines: dict) -> list[str]:
    out = []

    def at(key):
        return f"line {lines[key]}: " if key in lines else ""

    # p = N is the borderline case of the model problem; only the
    # Marcinkiewicz checks are skipped there
    if cfg["flux.p"] > cfg["problem.N"]:
        out.append(f"{at('flux.p')}p must lie in (1,N) (p={cfg['flux.p']:g}, N={cfg['problem.N']})")
    kind, inst = cfg.get("domain.kind"), cfg.get("problem.instance")
    if kind == "disk" and cfg.get("domain.m") is not None and cfg["domain.m"] < 4:
        out.append(f"{at('domain.m')}disk meshes need domain.m >= 4")
    if inst in ("exact-disk", "singular-demo") and kind == "square":
        out.append(f"{at('problem.instance')}{inst} needs domain.kind = disk")
    if cfg["problem.mode"] == "model" and inst == "custom":
        if cfg["sigma.q"] != 1.0 or cfg["sigma.scale"] != 1.0 or cfg["h.family"] != "power-singular":
            out.append(f"{at('problem.mode')}model mode needs sigma(s) = s and power-singular h")
    if cfg["diagnostics.k_min"] >= cfg["diagnostics.k_max"]:
        out.append(f"{at('diagnostics.k_max')}diagnostics.k_max must exceed diagnostics.k_min")
    if cfg.is_set("sweep.param") != cfg.is_set("sweep.values"):
        out.append("sweep.param and sweep.values must be set together")
    return out


# ------------------------------------------------------------------ builders


def build_mesh(cfg: RunConfig, m: int | None = None):
    m = cfg["domain.m"] if m is None else m
    return generate_unit_square(m) if cfg["domain.kind"] == "square" else generate_unit_disk(m)


def _field(cfg: RunConfig, name: str) -> FieldSpec:
    fam = cfg[f"{name}.family"]
    params = {p: cfg[f"{name}.{p}"] for p in FIELD_FAMILIES[fam] if cfg.is_set(f"{name}.{p}")}
    if fam == "constant" and "value" not in params:
        params["value"] = 0.0 if name == "f" else 1.0
    return FieldSpec.make(fam, **params)


def _hspec(cfg: RunConfig) -> HSpec:
    return HSpec(cfg["h.family"], cfg["h.eta"], cfg["h.c1"], cfg["h.s1"], cfg["h.s2"], cfg["h.monotone"])


def build_spec(cfg: RunConfig, mesh):
    """Returns (spec, exact field or None)."""
    inst = cfg["problem.instance"]
    order = cfg["problem.boundary_order"]
    flux = FluxSpec(p=cfg["flux.p"])
    if inst == "constant":
        spec = ProblemSpec(
            mesh=mesh,
            flux=flux,
            f=FieldSpec.make("constant", value=0.0),
            lam=FieldSpec.make("constant", value=1.0),
            g=FieldSpec.make("constant", value=1.0),
            sigma=SigmaSpec(),
            h=HSpec("power-singular", eta=cfg["h.eta"]),
            N=cfg["problem.N"],
            exact=ExactSolution.make("constant", c0=1.0),
            boundary_order=order,
            name="constant",
        )
        return spec, mesh.interpolate(lambda x, y: np.ones_like(x))
    if inst == "manufactured":
        fam = cfg["exact.family"]
        params = {p: cfg[f"exact.{p}"] for p in EXACT_FAMILIES[fam] if cfg.is_set(f"exact.{p}")}
        if not params and fam == "affine":
            params = {"c0": 2.0, "cx": 1.0}
        exact = ExactSolution.make(fam, **params)
        sigma = SigmaSpec(q=cfg["sigma.q"], scale=cfg["sigma.scale"], monotone=cfg["sigma.monotone"])
        spec = manufacture(exact, _field(cfg, "lam"), _hspec(cfg), flux, mesh, sigma, cfg["problem.N"], order)
        return spec, mesh.interpolate(exact.value)
    if inst == "exact-disk":
        return exact_disk_example(cfg["disk.alpha"], mesh, order)
    if inst == "singular-demo":
        spec = singular_demo(
            mesh,
            mode=cfg["problem.mode"],
            p=cfg["flux.p"],
            eta=cfg["h.eta"],
            alpha=cfg["disk.alpha"],
            g_scale=cfg["demo.g_scale"],
            g_beta=cfg["demo.g_beta"],
        )
        return spec, None
    spec = ProblemSpec(
        mesh=mesh,
        flux=flux,
        f=_field(cfg, "f"),
        lam=_field(cfg, "lam"),
        g=_field(cfg, "g"),
        sigma=SigmaSpec(q=cfg["sigma.q"], scale=cfg["sigma.scale"], monotone=cfg["sigma.monotone"]),
        h=_hspec(cfg),
        N=cfg["problem.N"],
        mode=cfg["problem.mode"],
        boundary_order=order,
        name="custom",
    )
    return spec, None


# ------------------------------------------------------------------ writers


def provenance(cfg: RunConfig, command: str, mesh=None, seed: int | None = None) -> list[str]:
    head = [f"robinl1 {command} config_hash={cfg.digest()}"]
    if mesh is not None:
        head.append(f"mesh kind={mesh.kind} m={cfg['domain.m']} vertices={mesh.n_vertices} triangles={mesh.n_triangles}")
    head.append(
        f"tolerances tol_res={fmt(cfg['solver.tol_res'])} tol_fp={fmt(cfg['solver.tol_fp'])} "
        f"tol_ladder={fmt(cfg['solver.tol_ladder'])} linear_tol={fmt(cfg['solver.linear_tol'])}"
    )
    if seed is not None:
        head.append(f"seed={seed}")
    return head


def write_table(path, header: list[str], columns: list[str], rows) -> None:
    buf = io.StringIO()
    for h in header:
        buf.write(f"# {h}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    Path(path).write_text(buf.getvalue())


def write_text(path, header: list[str], body: str) -> None:
    Path(path).write_text("".join(f"# {h}\n" for h in header) + body.rstrip("\n") + "\n")


ITER_COLUMNS = ["level", "iter", "residual", "boundary_change", "min_node"]
LEVEL_COLUMNS = [
    "level", "iterations", "converged", "residual", "min_node", "min_boundary",
    "mass_defect", "min_increment", "wall_time",
]


def _level_rows(reports):
    prev = None
    for r in reports:
        inc = float("nan") if prev is None or r.values is None else float((r.values - prev).min())
        res = r.residual_history[-1] if r.residual_history else float("nan")
        yield (float(r.level), r.iterations, int(r.converged), float(res), r.min_node, r.min_boundary,
               r.mass_defect, inc, r.wall_time)
        prev = r.values


def write_ladder(out: Path, header, reports, fld=None) -> None:
    write_table(out / "iterations.csv", header, ITER_COLUMNS, (row for r in reports for row in r.rows()))
    write_table(out / "levels.csv", header, LEVEL_COLUMNS, _level_rows(reports))
    if fld is not None:
        write_field_csv(fld, out / "field.csv", header)
        write_vtk(fld, out / "field.vtk", title=" | ".join(header)[:250])
        write_mesh(fld.mesh, out / "mesh.txt", header)


# ------------------------------------------------------------------ commands


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def run_solve(cfg: RunConfig, out: Path, seed: int = 0, quiet: bool = False) -> int:
    mesh = build_mesh(cfg)
    spec, _ = build_spec(cfg, mesh)
    if spec.sign_changing:
        raise InapplicableError("this instance is residual-only; use the verify subcommand")
    header = provenance(cfg, "solve", mesh, seed)
    out.mkdir(parents=True, exist_ok=True)
    try:
        fld, reports = solve_ladder(spec, cfg.solver_config())
    except SolverError as exc:
        write_ladder(out, header, getattr(exc, "reports", []))
        write_text(out / "summary.txt", header, f"status: solver failure\n{exc}")
        _say(quiet, f"solver failure: {exc}")
        return EXIT_SOLVER
    lines = [
        "status: converged",
        f"levels: {len(reports)} (last n={fmt(reports[-1].level)})",
        f"newton/picard iterations: {sum(r.iterations for r in reports)}",
        f"min node: {fmt(float(fld.values.min()))}",
        f"max node: {fmt(float(fld.values.max()))}",
        f"mass defect: {fmt(reports[-1].mass_defect)}",
    ]
    try:
        _, cbar = solve_barrier(spec, cfg.solver_config())
        worst = min(r.min_boundary for r in reports)
        lines.append(f"barrier c_bar: {fmt(cbar)} (min boundary over levels {fmt(worst)})")
    except InapplicableError as exc:
        lines.append(f"barrier: inapplicable ({exc})")
    write_ladder(out, header, reports, fld)
    write_text(out / "summary.txt", header, "\n".join(lines))
    _say(quiet, "\n".join(lines))
    return EXIT_OK


def _rates(hs, errs):
    out = [float("nan")]
    for i in range(1, len(errs)):
        if errs[i] > 0 and errs[i - 1] > 0:
            out.append(math.log(errs[i - 1] / errs[i]) / math.log(hs[i - 1] / hs[i]))
        else:
            out.append(float("nan"))
    return out


def convergence_study(cfg: RunConfig, meshes: list[int] | None = None):
    """Rows (m, h, vertices, error-or-residual) on m, 2m, 4m, ...

    Instances with an exact solution report the nodal max error of the ladder
    solution; the exact disk example reports the scaled residual of the
    interpolated exact field.
    """
    inst = cfg["problem.instance"]
    if inst not in ("constant", "manufactured", "exact-disk"):
        raise InapplicableError(f"verify needs an instance with a known solution, not {inst!r}")
    ms = meshes or [cfg["domain.m"] * 2**j for j in range(cfg["verify.meshes"])]
    rows = []
    for m in ms:
        mesh = build_mesh(cfg, m)
        spec, exact = build_spec(cfg, mesh)
        if inst == "exact-disk":
            R = assemble_residual(regularize(spec, 1e12), exact, boundary="quadrature")
            val = scaled_residual_norm(R, mesh)
        else:
            fld, _ = solve_ladder(spec, cfg.solver_config())
            val = float(np.abs(fld.values - exact.values).max())
        rows.append((m, mesh.max_edge_length, mesh.n_vertices, val))
    rates = _rates([r[1] for r in rows], [r[3] for r in rows])
    return [r + (q,) for r, q in zip(rows, rates)]


def run_verify(cfg: RunConfig, out: Path, seed: int = 0, quiet: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    header = provenance(cfg, "verify", None, seed)
    metric = "scaled_residual" if cfg["problem.instance"] == "exact-disk" else "nodal_max_error"
    try:
        rows = convergence_study(cfg)
    except SolverError as exc:
        write_text(out / "summary.txt", header, f"status: solver failure\n{exc}")
        _say(quiet, f"solver failure: {exc}")
        return EXIT_SOLVER
    write_table(out / "rates.csv", header, ["m", "h", "vertices", metric, "rate"], rows)
    lines = [f"{metric} by mesh:"] + [f"  m={r[0]:<4d} h={r[1]:.4e} {r[3]:.6e} rate={r[4]:.3f}" for r in rows]
    write_text(out / "summary.txt", header, "\n".join(lines))
    _say(quiet, "\n".join(lines))
    return EXIT_OK


def estimates_suite(cfg: RunConfig, seed: int = 0):
    """Solve the ladder and run every diagnostic. Returns (reports, ladder reports)."""
    mesh = build_mesh(cfg)
    spec, _ = build_spec(cfg, mesh)
    scfg = cfg.solver_config()
    fld, ladder = solve_ladder(spec, scfg)
    n0 = cfg["diagnostics.n0"]
    factor = cfg["diagnostics.factor"]
    ks = np.geomspace(cfg["diagnostics.k_min"], cfg["diagnostics.k_max"], cfg["diagnostics.k_num"])
    reps: list[dg.EstimateReport] = []

    per_level = dg.EstimateReport("ladder-invariants")
    l1, consts, qn = [], [], []
    try:
        _, cbar = solve_barrier(spec, scfg)
    except InapplicableError:
        cbar = None
    prev = None
    lab = dg.mesh_label(mesh)
    for r in ladder:
        rp = regularize(spec, r.level)
        u = r.values
        per_level.add(dg.Check(f"nonnegative@n={r.level:g}", float(u.min()), -1e-8, u.min() >= -1e-8, 1e-8, lab, r.level))
        if prev is not None:
            inc = float((u - prev).min())
            per_level.add(dg.Check(f"monotone@n={r.level:g}", inc, -1e-8, inc >= -1e-8, 1e-8, lab, r.level))
        if cbar is not None:
            per_level.add(dg.Check(f"barrier@n={r.level:g}", r.min_boundary, cbar - 1e-8,
                                   r.min_boundary >= cbar - 1e-8, 1e-8, lab, r.level))
        prev = u
        b = dg.boundary_l1_balance(u, rp)
        a = dg.absorption_estimate_check(u, rp, dg.default_t_grid(u, cfg["diagnostics.t_num"]))
        for rep in (b, a):
            rep.name += f"@n={r.level:g}"
            reps.append(rep)
        if r.level >= n0:
            l1.append(b)
            uf = DiscreteField(mesh, u)
            consts.append((r.level, dg.truncation_energy_check(uf, spec, ks, r.level).data["constant"]))
            if spec.flux.p < spec.N:
                q = dg.field_quasinorms(uf, spec.flux.p, spec.N, cfg["diagnostics.q_num"])
                qn.append((r.level, q["interior"].sup))
    reps.insert(0, per_level)
    if l1:
        reps.append(dg.track_boundary_l1(l1, factor))
    if consts:
        reps.append(dg.compare_constants([c for _, c in consts], [f"C@n={n:g}" for n, _ in consts], factor,
                                         "truncation-energy-stability"))
    if qn:
        reps.append(dg.compare_constants([c for _, c in qn], [f"M@n={n:g}" for n, _ in qn], factor,
                                         "quasinorm-stability"))
    reps.append(dg.entropy_report(fld, spec, tol=cfg["diagnostics.entropy_tol"], level=ladder[-1].level))

    rng = np.random.default_rng(seed)
    rp = regularize(spec, ladder[-1].level)
    eps = cfg["diagnostics.fd_eps"]
    pool = np.flatnonzero(fd_safe_nodes(rp, fld.values, eps))
    cols = rng.choice(pool, min(cfg["diagnostics.fd_nodes"], pool.size), replace=False)
    disc = finite_difference_check(rp, fld.values, np.sort(cols), eps)
    fd = dg.EstimateReport("jacobian-fd")
    fd.data["excluded"] = int(mesh.n_vertices - pool.size)
    fd.message = f"{mesh.n_vertices - pool.size} nodes near non-smooth points excluded"
    for j, d in zip(np.sort(cols), disc):
        fd.add(dg.Check(f"node={j}", float(d), 1e-5, d <= 1e-5, 1e-5, lab, rp.n))
    reps.append(fd)
    if cfg["diagnostics.uniqueness"]:
        reps.append(dg.uniqueness_crosscheck(spec, scfg))
    return reps, ladder


REPORT_COLUMNS = ["report", "check", "value", "bound", "passed", "tol", "mesh", "level", "detail"]


def run_estimates(cfg: RunConfig, out: Path, seed: int = 0, quiet: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(cfg)
    header = provenance(cfg, "estimates", mesh, seed)
    try:
        reps, ladder = estimates_suite(cfg, seed)
    except SolverError as exc:
        write_ladder(out, header, getattr(exc, "reports", []))
        write_text(out / "summary.txt", header, f"status: solver failure\n{exc}")
        _say(quiet, f"solver failure: {exc}")
        return EXIT_SOLVER
    write_ladder(out, header, ladder)
    write_table(out / "estimates.csv", header, REPORT_COLUMNS, (row for r in reps for row in r.rows()))
    failed = [r for r in reps if r.status == "fail"]
    summary = "\n".join(r.summary() for r in reps)
    summary += f"\n\noverall: {'FAIL' if failed else 'PASS'} ({len(failed)} failing reports)"
    write_text(out / "summary.txt", header, summary)
    _say(quiet, summary)
    return EXIT_FAIL if failed else EXIT_OK


SWEEP_COLUMNS = ["param", "value", "status", "levels", "iterations", "final_level", "min_node", "max_node", "mass_defect"]


def run_sweep(cfg: RunConfig, out: Path, seed: int = 0, quiet: bool = False) -> int:
    if not cfg.is_set("sweep.param"):
        raise InapplicableError("sweep needs sweep.param and sweep.values")
    param = cfg["sweep.param"]
    key = SWEEP_KEYS[param]
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    status = EXIT_OK
    for val in cfg["sweep.values"]:
        sub_cfg = cfg.with_value(key, float(val))
        sub = out / f"{param}={fmt(float(val))}"
        sub.mkdir(exist_ok=True)
        mesh = build_mesh(sub_cfg)
        spec, _ = build_spec(sub_cfg, mesh)
        header = provenance(sub_cfg, "sweep", mesh, seed)
        try:
            fld, reports = solve_ladder(spec, sub_cfg.solver_config())
            write_ladder(sub, header, reports, fld)
            rows.append((param, float(val), "converged", len(reports), sum(r.iterations for r in reports),
                         float(reports[-1].level), float(fld.values.min()), float(fld.values.max()),
                         reports[-1].mass_defect))
        except SolverError as exc:
            reports = getattr(exc, "reports", [])
            write_ladder(sub, header, reports)
            rows.append((param, float(val), "failed", len(reports), sum(r.iterations for r in reports),
                         float("nan"), float("nan"), float("nan"), float("nan")))
            status = EXIT_SOLVER
        _say(quiet, f"{param}={val:g}: {rows[-1][2]}")
    write_table(out / "sweep.csv", provenance(cfg, "sweep", build_mesh(cfg), seed), SWEEP_COLUMNS, rows)
    return status


COMMANDS = {"solve": run_solve, "verify": run_verify, "estimates": run_estimates, "sweep": run_sweep}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="robinl1", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="key = value config file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomised checks (overrides run.seed)")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg["run.seed"]
    if seed < 0 or seed >= 2**64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args.out, seed, args.quiet)
    except (InapplicableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
