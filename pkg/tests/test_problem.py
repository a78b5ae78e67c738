from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import affine_instance, constant_instance
from robinl1.functions import HSpec, SigmaSpec
from robinl1.mesh import generate_unit_disk, generate_unit_square
from robinl1.problem import (
    ExactSolution,
    FieldSpec,
    FluxSpec,
    InapplicableError,
    ProblemSpec,
    exact_disk_example,
    lambda_sup,
    manufacture,
    regularize,
    singular_demo,
    subsolution_problem,
)


def _spec(mesh, f=None, lam=None, g=None, **kw):
    return ProblemSpec(
        mesh=mesh,
        flux=FluxSpec(),
        f=f or FieldSpec.make("constant", value=0.0),
        lam=lam or FieldSpec.make("constant", value=1.0),
        g=g or FieldSpec.make("constant", value=0.0),
        sigma=SigmaSpec(),
        h=HSpec("power-singular", eta=1.0),
        **kw,
    )


@pytest.mark.parametrize("n, expected", [(2, 2.0), (5, 3.0)])
def test_regularize_truncates_f(square8, n, expected):
    rp = regularize(_spec(square8, f=FieldSpec.make("constant", value=3.0)), n)
    assert np.all(rp.f_q == expected)


def test_regularize_truncates_singular_lambda_in_general_mode(disk8):
    lam = FieldSpec.make("angular-power", scale=1.0, alpha=0.5)
    spec = _spec(disk8, lam=lam)
    rp = regularize(spec, 10)
    bp, _, _ = disk8.boundary_quadrature(spec.boundary_order)
    th = np.abs(np.arctan2(bp[..., 1], bp[..., 0]))
    assert np.allclose(rp.lam_q, np.minimum(th**-0.5, 10.0), rtol=1e-14)


def test_model_mode_keeps_lambda(disk8):
    spec = singular_demo(disk8, mode="model", alpha=0.5)
    assert regularize(spec, 1).lam_q.max() > 1.0


def test_model_mode_denominator_form(disk8):
    spec = singular_demo(disk8, mode="model", eta=2.0)
    rp = regularize(spec, 4)
    u = np.array([0.0, 0.5, 2.0])
    assert np.allclose(rp.source(u), (u + 0.25) ** -2.0, rtol=1e-15)
    assert np.allclose(rp.absorption(u), u)


def test_general_mode_truncated_nonlinearities(disk8):
    spec = singular_demo(disk8, mode="general", eta=1.0)
    rp = regularize(spec, 4)
    assert np.allclose(rp.source(np.array([0.0, 0.1, 2.0])), [4.0, 4.0, 0.5])


@given(st.floats(1, 100), st.floats(0, 50))
def test_regularize_monotone_in_n(n, dn):
    mesh = generate_unit_disk(4)
    spec = singular_demo(mesh, mode="general", alpha=0.5)
    a, b = regularize(spec, n), regularize(spec, n + dn)
    assert np.all(a.f_q <= b.f_q)
    assert np.all(a.g_q <= b.g_q)
    assert np.all(a.lam_q <= b.lam_q)
    assert max(a.f_q.max(), a.g_q.max(), a.lam_q.max()) <= n


def test_regularize_rejects_level_below_one(square8):
    with pytest.raises(ValueError):
        regularize(_spec(square8), 0.5)


@pytest.mark.parametrize("eta", [0.0, 1.0, 2.0])
def test_manufacture_constant(square8, eta):
    spec = manufacture(
        ExactSolution.make("constant", c0=1.0),
        FieldSpec.make("constant", value=1.0),
        HSpec("power-singular", eta=eta),
        FluxSpec(),
        square8,
    )
    ip, _, _, bp, _, _ = spec.quadrature()
    assert np.allclose(spec.f.evaluate(ip), 0.0, atol=1e-15)
    assert np.allclose(spec.g.evaluate(bp, spec.boundary_normals()), 1.0, atol=1e-15)


def test_manufacture_affine_face_values(square8):
    spec = affine_instance(square8)
    ip, _, _, bp, _, _ = spec.quadrature()
    assert np.allclose(spec.f.evaluate(ip), 0.0)
    g = spec.g.evaluate(bp, spec.boundary_normals())
    face = np.isclose(bp[..., 0], 0.0) & np.isclose(spec.boundary_normals()[..., 0], -1.0)
    assert face.any()
    assert np.allclose(g[face], 2.0, atol=1e-14)
    # face x = 1: u = 3, du/dnu = 1, g = (1 + 3) * 3
    face1 = np.isclose(spec.boundary_normals()[..., 0], 1.0)
    assert np.allclose(g[face1], 12.0, atol=1e-13)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_manufactured_load_matches_difference_divergence(p):
    mesh = generate_unit_square(4)
    exact = ExactSolution.make("trig", c0=3.0, amp=0.5, kx=1.3, ky=0.7)
    flux = FluxSpec(p=p)
    spec = manufacture(exact, FieldSpec.make("constant", value=4.0), HSpec("bounded", c1=1.0), flux, mesh)
    ip, _, _, _, _, _ = spec.quadrature()
    pts = ip.reshape(-1, 2)[:40]
    eps = 1e-5

    def a_at(q):
        return flux.flux(exact.gradient(q[:, 0], q[:, 1]))

    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    div = (a_at(pts + ex)[:, 0] - a_at(pts - ex)[:, 0] + a_at(pts + ey)[:, 1] - a_at(pts - ey)[:, 1]) / (2 * eps)
    assert np.allclose(spec.f.evaluate(pts), -div, atol=1e-7)


def test_manufacture_rejects_negative_g():
    mesh = generate_unit_square(4)
    with pytest.raises(ValueError, match="sign"):
        manufacture(
            ExactSolution.make("affine", c0=2.0, cx=1.0),
            FieldSpec.make("constant", value=0.0),
            HSpec("bounded"),
            FluxSpec(),
            mesh,
        )


def test_manufacture_rejects_nonpositive_boundary_values():
    with pytest.raises(ValueError):
        manufacture(
            ExactSolution.make("affine", c0=-1.0, cx=1.0),
            FieldSpec.make("constant", value=1.0),
            HSpec("bounded"),
            FluxSpec(),
            generate_unit_square(4),
        )


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_exact_disk_boundary_identity(alpha):
    mesh = generate_unit_disk(16)
    spec, u = exact_disk_example(alpha, mesh)
    th = np.linspace(-math.pi, math.pi, 2001)
    th = th[np.abs(th) > 1e-6]
    pts = np.column_stack([np.cos(th), np.sin(th)])
    # u = y on the circle: du/dnu = sin(theta), u = sin(theta)
    lhs = np.sin(th) + spec.lam.evaluate(pts) * np.sin(th)
    g = spec.g.evaluate(pts)
    sel = np.abs(np.sin(th)) > 1e-3
    assert np.allclose(lhs[sel], g[sel] / np.sin(th[sel]), rtol=1e-12)
    assert spec.sign_changing
    assert np.allclose(u.values, mesh.vertices[:, 1])
    if alpha == 0.0:
        assert np.all(spec.lam.evaluate(pts) == 1.0)


def test_exact_disk_identity_at_quarter_turn():
    alpha = 0.5
    g = FieldSpec.make("disk-example-g", alpha=alpha)
    pt = np.array([[0.0, 1.0]])
    lam = FieldSpec.make("angular-power", scale=1.0, alpha=alpha).evaluate(pt)
    assert 1.0 + lam[0] * 1.0 == pytest.approx(g.evaluate(pt)[0] / 1.0, rel=1e-14)
    assert 1.0 + lam[0] == pytest.approx(1.0 + (math.pi / 2) ** -alpha, rel=1e-14)


def test_exact_disk_rejects_bad_alpha(disk8):
    with pytest.raises(ValueError):
        exact_disk_example(1.0, disk8)
    with pytest.raises(ValueError):
        exact_disk_example(0.5, generate_unit_square(4))


def test_subsolution_examples(square8):
    spec = _spec(square8, f=FieldSpec.make("constant", value=3.0), g=FieldSpec.make("constant", value=7.0))
    sub = subsolution_problem(spec)
    ip, _, _, bp, _, _ = sub.quadrature()
    assert np.all(sub.f.evaluate(ip) == 1.0)
    assert np.all(sub.lam.evaluate(bp) == 1.0)
    assert np.all(sub.g.evaluate(bp) == 0.0)
    assert sub.sigma.is_identity and sub.h.eta == 0.0


def test_subsolution_inapplicable_for_unbounded_lambda(disk8):
    spec = singular_demo(disk8, alpha=0.5)
    with pytest.raises(InapplicableError):
        lambda_sup(spec)
    with pytest.raises(InapplicableError):
        subsolution_problem(spec)


def test_data_sign_and_null_lambda_rejected(square8):
    with pytest.raises(ValueError, match="f negative"):
        _spec(square8, f=FieldSpec.make("affine", c0=-1.0, cx=0.0, cy=0.0))
    with pytest.raises(ValueError, match="lambda vanishes"):
        _spec(square8, lam=FieldSpec.make("constant", value=0.0))
    assert constant_instance(square8).data_issues() == []


def test_model_mode_requires_model_nonlinearities(square8):
    with pytest.raises(ValueError):
        ProblemSpec(
            mesh=square8,
            flux=FluxSpec(),
            f=FieldSpec.make("constant", value=0.0),
            lam=FieldSpec.make("constant", value=1.0),
            g=FieldSpec.make("constant", value=1.0),
            sigma=SigmaSpec(q=2.0),
            h=HSpec("power-singular", eta=1.0),
            mode="model",
        )


@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.sampled_from([1.5, 2.0, 3.0]),
)
def test_flux_structure_conditions(a, b, p):
    flux = FluxSpec(p=p)
    xi, zeta = np.array(a), np.array(b)
    fa, fb = flux.flux(xi), flux.flux(zeta)
    n = np.linalg.norm(xi)
    assert fa @ xi >= flux.coercivity * n**p * (1 - 1e-12) - 1e-300
    assert np.linalg.norm(fa) <= flux.growth * n ** (p - 1) * (1 + 1e-12) + 1e-300
    if np.linalg.norm(xi - zeta) > 1e-6:
        assert (fa - fb) @ (xi - zeta) > 0


def test_weighted_flux_constants():
    w = FieldSpec.make("affine", c0=2.0, cx=1.0, cy=0.0)
    flux = FluxSpec("weighted-p-laplacian", p=2.0, weight=w, weight_bounds=(2.0, 3.0))
    assert flux.coercivity == 1.0 and flux.growth == 3.0
    with pytest.raises(ValueError):
        FluxSpec("weighted-p-laplacian", weight=None)


def test_field_spec_validation():
    with pytest.raises(ValueError):
        FieldSpec.make("constant", bogus=1.0)
    with pytest.raises(ValueError):
        FieldSpec.make("spiral")
    assert FieldSpec.make("point-singular", scale=1.0, beta=0.5).singular
    assert not FieldSpec.make("angular-power", alpha=0.0).singular
