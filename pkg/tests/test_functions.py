from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robinl1.functions import (
    HSpec,
    SigmaSpec,
    g_integrability_exponent,
    marcinkiewicz_exponents,
    phi_t_eps,
    truncate,
    v_delta,
)

reals = st.floats(-1e6, 1e6, allow_nan=False)
levels = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("s, k, expected", [(7, 5, 5), (-7, 5, -5), (3, 5, 3)])
def test_truncate_examples(s, k, expected):
    assert truncate(s, k) == expected


def test_truncate_rejects_nonpositive_level():
    with pytest.raises(ValueError):
        truncate(1.0, 0.0)


@pytest.mark.parametrize("s, expected", [(0.5, 1.0), (1.5, 0.5), (3.0, 0.0)])
def test_v_delta_examples(s, expected):
    assert v_delta(s, 1.0) == expected


@pytest.mark.parametrize("s, expected", [(1.0, 0.0), (2.5, 0.5), (4.0, 1.0)])
def test_phi_examples(s, expected):
    assert phi_t_eps(s, 2.0, 1.0) == expected


def test_g_exponent_examples():
    assert g_integrability_exponent(3, 0.0) == pytest.approx(4 / 3, abs=1e-15)
    assert g_integrability_exponent(3, 1.0) == 1.0
    assert g_integrability_exponent(2, 7.0) == 1.0


@given(st.floats(0, 50))
def test_g_exponent_is_one_in_the_plane(eta):
    assert g_integrability_exponent(2, eta) == 1.0


@given(st.integers(2, 6), st.floats(0, 20))
def test_g_exponent_at_least_one(N, eta):
    assert g_integrability_exponent(N, eta) >= 1.0


def test_marcinkiewicz_examples():
    assert marcinkiewicz_exponents(3, 2.0) == pytest.approx((3.0, 2.0, 1.5), abs=1e-15)
    assert marcinkiewicz_exponents(2, 1.5) == pytest.approx((2.0, 1.0, 1.0), abs=1e-15)
    with pytest.raises(ValueError, match=r"p must lie in \(1,N\)"):
        marcinkiewicz_exponents(2, 2.0)


@given(reals, reals, levels)
def test_truncate_lipschitz_odd_bounded(a, b, k):
    ta, tb = truncate(a, k), truncate(b, k)
    assert abs(ta - tb) <= abs(a - b) + 1e-12
    assert truncate(-a, k) == -ta
    assert -k <= ta <= k
    if abs(a) <= k:
        assert ta == a


@given(reals, reals, levels)
def test_v_delta_lipschitz(a, b, delta):
    va, vb = v_delta(a, delta), v_delta(b, delta)
    assert 0.0 <= va <= 1.0
    assert abs(va - vb) <= abs(a - b) / delta * (1 + 1e-12) + 1e-12


@given(reals, reals, levels, levels)
def test_phi_lipschitz_monotone(a, b, t, eps):
    pa, pb = phi_t_eps(a, t, eps), phi_t_eps(b, t, eps)
    assert 0.0 <= pa <= 1.0
    assert abs(pa - pb) <= abs(a - b) / eps * (1 + 1e-12) + 1e-12
    if a <= b:
        assert pa <= pb


def test_vectorised_inputs_keep_shape():
    s = np.linspace(-3, 3, 7)
    assert truncate(s, 1.0).shape == (7,)
    assert isinstance(truncate(2.0, 1.0), float)


def test_truncated_nonlinearity_examples():
    assert SigmaSpec().truncated(5.0, 3.0) == 3.0
    h = HSpec("power-singular", eta=1.0)
    assert h.truncated(0.1, 4.0) == 4.0
    assert h.truncated(2.0, 4.0) == 0.5
    assert h.truncated(0.0, 4.0) == 4.0


def test_singular_h_rejects_negative_argument():
    with pytest.raises(ValueError):
        HSpec("power-singular", eta=1.0).value(-0.5)


@given(st.floats(1e-8, 1e8), st.floats(1, 1e4), st.floats(0.01, 4))
def test_h_n_bounded_and_exact_below_level(s, n, eta):
    h = HSpec("power-singular", eta=eta)
    hn = h.truncated(s, n)
    assert hn <= n
    if h.value(s) <= n:
        assert hn == h.value(s)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_power_sigma_growth(p):
    sig = SigmaSpec(q=p - 1.0)
    assert sig.growth_violations(p).size == 0
    assert sig.monotone_on_grid()
    assert sig.value(0.0) == 0.0


def test_growth_violation_detected():
    # sigma(s) = s fails sigma >= s^(1/2) on (0,1)
    bad = SigmaSpec().growth_violations(1.5)
    assert bad.size > 0 and bad.max() < 1.0


def test_tabulated_sigma_interpolates_and_extends():
    sig = SigmaSpec("tabulated", samples=((0.0, 0.0), (1.0, 2.0), (2.0, 3.0)))
    assert sig.value(0.5) == pytest.approx(1.0)
    assert sig.value(4.0) == pytest.approx(5.0)
    assert sig.value(-0.5) == pytest.approx(-1.0)
    assert sig.derivative(1.5) == pytest.approx(1.0)


def test_tabulated_nonmonotone_is_detected():
    sig = SigmaSpec("tabulated", monotone=False, samples=((0.0, 0.0), (1.0, 2.0), (2.0, 1.0)))
    assert not sig.monotone_on_grid()


def test_truncated_sigma_derivative_left_branch_at_kink():
    sig = SigmaSpec()
    assert sig.truncated_derivative(3.0, 3.0) == 1.0
    assert sig.truncated_derivative(3.5, 3.0) == 0.0


@pytest.mark.parametrize(
    "h",
    [HSpec("power-singular", eta=1.0), HSpec("bounded", c1=2.0), HSpec("rational", eta=2.0, c1=1.0, s2=0.5)],
)
def test_h_families_satisfy_growth_and_tail(h):
    v = h.growth_violations()
    assert v["near_zero"].size == 0
    assert v["tail"].size == 0
    assert h.nonincreasing_on_grid()


def test_h_derivative_matches_difference():
    h = HSpec("rational", eta=2.0, c1=1.5, s2=0.5)
    s, eps = 0.7, 1e-6
    fd = (h.value(s + eps) - h.value(s - eps)) / (2 * eps)
    assert h.derivative(s) == pytest.approx(fd, rel=1e-7)


def test_bad_specs_rejected():
    with pytest.raises(ValueError):
        HSpec("power-singular", eta=-1.0)
    with pytest.raises(ValueError):
        SigmaSpec(q=1.0, scale=0.0)
    with pytest.raises(ValueError):
        SigmaSpec("tabulated", samples=((0.5, 0.0), (1.0, 1.0)))
    with pytest.raises(ValueError):
        HSpec("exponential")


def test_identity_flag():
    assert SigmaSpec().is_identity
    assert not SigmaSpec(q=0.5).is_identity
    assert math.isinf(HSpec("power-singular", eta=1.0).value(0.0))
