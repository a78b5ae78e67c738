from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from robinl1.functions import HSpec, SigmaSpec
from robinl1.mesh import generate_unit_disk, generate_unit_square
from robinl1.problem import ExactSolution, FieldSpec, FluxSpec, ProblemSpec, manufacture

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def constant_instance(mesh, eta=1.0, p=2.0):
    """f = 0, lambda = 1, g = 1, sigma(s) = s, h(s) = s^-eta; solution u = 1."""
    return ProblemSpec(
        mesh=mesh,
        flux=FluxSpec(p=p),
        f=FieldSpec.make("constant", value=0.0),
        lam=FieldSpec.make("constant", value=1.0),
        g=FieldSpec.make("constant", value=1.0),
        sigma=SigmaSpec(),
        h=HSpec("power-singular", eta=eta),
        exact=ExactSolution.make("constant", c0=1.0),
        name="constant",
    )


def affine_instance(mesh, eta=1.0):
    """u = 2 + x, lambda = 1, p = 2."""
    return manufacture(
        ExactSolution.make("affine", c0=2.0, cx=1.0),
        FieldSpec.make("constant", value=1.0),
        HSpec("power-singular", eta=eta),
        FluxSpec(),
        mesh,
    )


@pytest.fixture(scope="session")
def square8():
    return generate_unit_square(8)


@pytest.fixture(scope="session")
def disk8():
    return generate_unit_disk(8)


@pytest.fixture(scope="session")
def disk16():
    return generate_unit_disk(16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one 'criterion k: PASS/FAIL ...' line."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
