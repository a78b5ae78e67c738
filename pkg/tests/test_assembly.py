from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import constant_instance
from robinl1.assembly import (
    assemble_jacobian,
    assemble_residual,
    boundary_integral,
    fd_safe_nodes,
    finite_difference_check,
    interior_tangent,
    mass_balance,
    scaled_residual_norm,
    stiffness_matrix,
    write_coo,
)
from robinl1.functions import HSpec, SigmaSpec
from robinl1.mesh import generate_unit_disk, generate_unit_square
from robinl1.problem import FieldSpec, FluxSpec, ProblemSpec, exact_disk_example, regularize, singular_demo


def zero_instance(mesh):
    return ProblemSpec(
        mesh=mesh,
        flux=FluxSpec(),
        f=FieldSpec.make("constant", value=0.0),
        lam=FieldSpec.make("constant", value=1.0),
        g=FieldSpec.make("constant", value=0.0),
        sigma=SigmaSpec(),
        h=HSpec("bounded", c1=1.0),
    )


@pytest.mark.parametrize("eta", [0.0, 1.0, 2.0])
def test_constant_solution_residual_vanishes(square8, eta):
    rp = regularize(constant_instance(square8, eta), 4)
    R = assemble_residual(rp, np.ones(square8.n_vertices))
    assert R.norm <= 1e-12


def test_zero_data_zero_residual(square8):
    rp = regularize(zero_instance(square8), 1)
    assert assemble_residual(rp, np.zeros(square8.n_vertices)).norm == 0.0


def test_rejects_nonfinite(square8):
    rp = regularize(zero_instance(square8), 1)
    u = np.zeros(square8.n_vertices)
    u[3] = np.inf
    with pytest.raises(ValueError):
        assemble_residual(rp, u)
    with pytest.raises(ValueError):
        assemble_residual(rp, np.zeros(4))


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_disk_example_residual_decays(alpha):
    vals = []
    for m in (8, 16, 32):
        mesh = generate_unit_disk(m)
        spec, u = exact_disk_example(alpha, mesh)
        R = assemble_residual(regularize(spec, 1e12), u, boundary="quadrature")
        vals.append(scaled_residual_norm(R, mesh))
    assert vals[0] > vals[1] > vals[2]
    assert vals[-1] < 1e-2


def test_linear_jacobian_is_spd(square8):
    rp = regularize(zero_instance(square8), 1)
    J = assemble_jacobian(rp, np.zeros(square8.n_vertices)).toarray()
    assert np.allclose(J, J.T, atol=1e-14)
    assert np.all(np.diag(J) > 0)
    assert np.linalg.eigvalsh(J).min() > 0


def test_interior_block_is_stiffness_for_constant_u(square8):
    rp = regularize(zero_instance(square8), 1)
    K = interior_tangent(rp, np.full(square8.n_vertices, 0.7))
    S = stiffness_matrix(square8)
    assert abs(K - S).max() <= 1e-12
    assert np.abs(np.asarray(S.sum(axis=1))).max() <= 1e-12


def test_frozen_source_jacobian_symmetric_for_p2(disk8):
    spec = singular_demo(disk8, mode="model")
    rp = regularize(spec, 8)
    u = np.linspace(0.3, 0.9, disk8.n_vertices)
    J = assemble_jacobian(rp, u, freeze_source=True)
    assert abs(J - J.T).max() <= 1e-13
    assert np.linalg.eigvalsh(J.toarray()).min() > 0


@pytest.mark.parametrize("p, mode", [(1.5, "general"), (2.0, "general"), (3.0, "general"), (2.0, "model")])
def test_jacobian_matches_finite_differences(p, mode, rng):
    mesh = generate_unit_disk(8)
    spec = singular_demo(mesh, mode=mode, p=p)
    rp = regularize(spec, 8)
    u = 0.5 + 0.3 * rng.random(mesh.n_vertices)
    cols = rng.choice(mesh.n_vertices, 20, replace=False)
    assert finite_difference_check(rp, u, cols, 1e-6).max() <= 1e-5


@given(st.integers(0, 2**32 - 1))
def test_jacobian_fd_property_random_states(seed):
    rng = np.random.default_rng(seed)
    spec = singular_demo(generate_unit_disk(4), mode="general", p=float(rng.choice([1.5, 2.0, 3.0])))
    rp = regularize(spec, 4)
    # u in [0.4, 1.4]: sigma_4 and h_4 are smooth there
    u = 0.4 + rng.random(spec.mesh.n_vertices)
    cols = rng.choice(spec.mesh.n_vertices, 5, replace=False)
    assert finite_difference_check(rp, u, cols).max() <= 1e-5


def test_mass_balance_is_residual_sum(disk8, rng):
    rp = regularize(singular_demo(disk8, mode="general"), 16)
    u = 0.5 + rng.random(disk8.n_vertices)
    mb = mass_balance(rp, u)
    R = assemble_residual(rp, u).residual
    assert mb["defect"] == pytest.approx(R.sum(), abs=1e-12)


def test_boundary_integral_examples():
    sq = generate_unit_square(8)
    assert boundary_integral(lambda p, n: np.ones(p.shape[:-1]), sq) == pytest.approx(4.0, abs=1e-12)
    vals = []
    for m in (8, 16, 32):
        d = generate_unit_disk(m)
        th = lambda p, n: np.arctan2(p[..., 1], p[..., 0])  # noqa: E731
        vals.append(abs(boundary_integral(lambda p, n: np.sin(th(p, n)) ** 2, d) - math.pi))
    assert vals[0] > vals[1] > vals[2] and vals[2] < 5e-3


def test_boundary_integral_singular_weight_converges():
    d = generate_unit_disk(32)
    f = FieldSpec.make("angular-power", scale=1.0, alpha=0.5)
    exact = 4 * math.sqrt(math.pi)
    errs = [abs(boundary_integral(lambda p, n: f.evaluate(p), d, order) - exact) for order in (2, 4, 8)]
    assert errs[0] > errs[2]
    assert errs[2] < 0.05 * exact


def test_quadrature_and_lumped_agree_on_constants(square8):
    rp = regularize(constant_instance(square8, 1.0), 4)
    u = np.ones(square8.n_vertices)
    a = assemble_residual(rp, u, boundary="lumped").residual
    b = assemble_residual(rp, u, boundary="quadrature").residual
    assert np.allclose(a, b, atol=1e-13)
    with pytest.raises(ValueError):
        assemble_residual(rp, u, boundary="exact")


def test_write_coo(tmp_path):
    write_coo(sp.csr_matrix(np.array([[2.0, 0.0], [1.0 / 3.0, 4.0]])), tmp_path / "a.txt")
    lines = (tmp_path / "a.txt").read_text().splitlines()
    assert lines[0] == "0 0 2"
    assert lines[1] == "1 0 0.33333333333333331"


def test_fd_safe_nodes_flags_flat_gradient(disk8):
    rp = regularize(singular_demo(disk8, mode="general", p=1.5), 8)
    assert not fd_safe_nodes(rp, np.ones(disk8.n_vertices)).any()
    rp2 = regularize(singular_demo(disk8, mode="general", p=2.0), 8)
    assert fd_safe_nodes(rp2, np.ones(disk8.n_vertices)).all()


def test_fd_safe_nodes_flags_truncation_kink(disk8):
    rp = regularize(singular_demo(disk8, mode="general", p=2.0, eta=1.0), 8)
    u = 0.5 + disk8.vertices[:, 0] ** 2
    j = disk8.boundary_vertices[0]
    u[j] = 1.0 / 8.0  # h(s) = 1/s reaches the level 8 here
    safe = fd_safe_nodes(rp, u)
    assert not safe[j]
    assert safe[disk8.boundary_vertices[1:]].all()


def test_fd_check_on_safe_nodes_of_ladder_field():
    mesh = generate_unit_disk(16)
    spec = singular_demo(mesh, mode="general", p=1.5)
    from robinl1.solver import SolverConfig, solve_ladder

    u, reps = solve_ladder(spec, SolverConfig(n_max=16))
    rp = regularize(spec, reps[-1].level)
    safe = np.flatnonzero(fd_safe_nodes(rp, u.values))
    assert safe.size > 0.8 * mesh.n_vertices
    assert finite_difference_check(rp, u.values, safe).max() <= 1e-5
