"""Scalar toolkit: truncations, cut-off test functions, boundary nonlinearities
and the integrability / Marcinkiewicz exponent formulas.

Everything here is vectorised over numpy arrays and returns a Python float
when handed a scalar.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# derivative evaluations of power laws with exponent < 1 are floored here
_DERIV_FLOOR = 1e-12


def _out(x, scalar: bool):
    return float(x) if scalar else x


def truncate(s, k: float):
    """T_k(s) = max(-k, min(s, k))."""
    if not k > 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    scalar = np.isscalar(s)
    return _out(np.clip(np.asarray(s, dtype=float), -k, k), scalar)


def v_delta(s, delta: float):
    """1 below ``delta``, 0 above ``2*delta``, affine in between."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    scalar = np.isscalar(s)
    s = np.asarray(s, dtype=float)
    out = np.clip((2.0 * delta - s) / delta, 0.0, 1.0)
    return _out(out, scalar)


def phi_t_eps(s, t: float, eps: float):
    """0 below ``t``, 1 above ``t + eps``, affine in between."""
    if not (t > 0 and eps > 0):
        raise ValueError("t and eps must be positive")
    scalar = np.isscalar(s)
    s = np.asarray(s, dtype=float)
    out = np.clip((s - t) / eps, 0.0, 1.0)
    return _out(out, scalar)


def g_integrability_exponent(N: int, eta: float) -> float:
    """Lebesgue exponent r required of the boundary datum g.

    r = max(2(N-1) / (N + eta (N-2)), 1)
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    return max(2.0 * (N - 1) / (N + eta * (N - 2)), 1.0)


def marcinkiewicz_exponents(N: int, p: float) -> tuple[float, float, float]:
    """Weak-Lebesgue exponents of (u in the interior, u on the boundary, |grad u|).

    Raises ``ValueError`` unless 1 < p < N.
    """
    if not (1.0 < p < N):
        raise ValueError(f"p must lie in (1,N); got p={p}, N={N}")
    interior = N * (p - 1.0) / (N - p)
    boundary = (N - 1.0) * (p - 1.0) / (N - p)
    gradient = N * (p - 1.0) / (N - 1.0)
    return interior, boundary, gradient


def _log_grid(lo=1e-6, hi=1e6, num=1000):
    return np.logspace(np.log10(lo), np.log10(hi), num)


@dataclass(frozen=True)
class SigmaSpec:
    """Boundary absorption nonlinearity sigma.

    ``power``: sigma(s) = scale * s**q.
    ``tabulated``: piecewise-linear through ``samples`` (pairs (s, sigma)),
    extended beyond the last sample with the last slope. This is the
    custom-monotone escape hatch; ``monotone`` must be set by the caller.

    Negative arguments use the odd extension sign(s) sigma(|s|).
    """

    family: str = "power"
    q: float = 1.0
    scale: float = 1.0
    monotone: bool = True
    samples: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.family == "power":
            if self.q < 0 or self.scale <= 0:
                raise ValueError("power sigma needs q >= 0 and scale > 0")
        elif self.family == "tabulated":
            if len(self.samples) < 2:
                raise ValueError("tabulated sigma needs at least two samples")
            s = np.array([a for a, _ in self.samples])
            if s[0] != 0.0 or np.any(np.diff(s) <= 0):
                raise ValueError("tabulated abscissae must start at 0 and increase")
        else:
            raise ValueError(f"unknown sigma family {self.family!r}")

    @property
    def is_identity(self) -> bool:
        return self.family == "power" and self.q == 1.0 and self.scale == 1.0

    def _pos(self, s):
        if self.family == "power":
            if self.q == 0:
                return np.where(s > 0, self.scale, 0.0)
            return self.scale * s ** self.q
        xs = np.array([a for a, _ in self.samples])
        ys = np.array([b for _, b in self.samples])
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        return np.where(s <= xs[-1], np.interp(s, xs, ys), ys[-1] + slope * (s - xs[-1]))

    def _dpos(self, s):
        if self.family == "power":
            if self.q == 0:
                return np.zeros_like(s)
            return self.scale * self.q * np.maximum(s, _DERIV_FLOOR) ** (self.q - 1.0)
        xs = np.array([a for a, _ in self.samples])
        ys = np.array([b for _, b in self.samples])
        slopes = np.diff(ys) / np.diff(xs)
        # left derivative at breakpoints
        idx = np.clip(np.searchsorted(xs, s, side="left") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def value(self, s):
        scalar = np.isscalar(s)
        s = np.asarray(s, dtype=float)
        out = np.sign(s) * self._pos(np.abs(s))
        return _out(out, scalar)

    def derivative(self, s):
        scalar = np.isscalar(s)
        s = np.asarray(s, dtype=float)
        return _out(self._dpos(np.abs(s)), scalar)

    def truncated(self, s, n: float):
        """sigma_n = T_n(sigma(s))."""
        return truncate(self.value(s), n)

    def truncated_derivative(self, s, n: float):
        # left derivative at the kink: below-kink branch
        scalar = np.isscalar(s)
        val = np.abs(np.asarray(self.value(s), dtype=float))
        d = np.asarray(self.derivative(s), dtype=float)
        return _out(np.where(val <= n, d, 0.0), scalar)

    def growth_violations(self, p: float, lo=1e-6, hi=1e6, num=1000) -> np.ndarray:
        """Sample points of the log grid where sigma(s) < s**(p-1)."""
        s = _log_grid(lo, hi, num)
        sig = self._pos(s)
        bad = sig < s ** (p - 1.0) * (1.0 - 1e-12)
        return s[bad]

    def monotone_on_grid(self, lo=1e-6, hi=1e6, num=1000) -> bool:
        sig = self._pos(_log_grid(lo, hi, num))
        return bool(np.all(np.diff(sig) >= 0))


H_FAMILIES = ("power-singular", "bounded", "rational")


@dataclass(frozen=True)
class HSpec:
    """Boundary source nonlinearity h.

    ``power-singular``: h(s) = c1 * s**(-eta)
    ``bounded``:        h(s) = c1
    ``rational``:       h(s) = c1 / (s**eta + s2)

    ``monotone`` flags h as nonincreasing (hypothesis of the uniqueness check).
    """

    family: str = "power-singular"
    eta: float = 0.0
    c1: float = 1.0
    s1: float = 1.0
    s2: float = 1.0
    monotone: bool = True

    def __post_init__(self):
        if self.family not in H_FAMILIES:
            raise ValueError(f"unknown h family {self.family!r}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.c1 <= 0 or self.s1 <= 0:
            raise ValueError("c1 and s1 must be positive")
        if self.family == "rational" and self.s2 <= 0:
            raise ValueError("rational h needs s2 > 0")

    @property
    def singular(self) -> bool:
        """True when h(0) = +inf."""
        return self.family == "power-singular" and self.eta > 0

    def value(self, s):
        scalar = np.isscalar(s)
        s = np.asarray(s, dtype=float)
        if self.singular and np.any(s < 0):
            raise ValueError("singular h evaluated at a negative argument")
        if self.family == "bounded":
            out = np.full_like(s, self.c1)
        elif self.family == "rational":
            out = self.c1 / (np.abs(s) ** self.eta + self.s2)
        elif self.eta == 0:
            out = np.full_like(s, self.c1)
        else:
            with np.errstate(divide="ignore"):
                out = self.c1 * np.where(s > 0, np.abs(s), 0.0) ** (-self.eta)
        return _out(out, scalar)

    def derivative(self, s):
        scalar = np.isscalar(s)
        s = np.asarray(s, dtype=float)
        a = np.maximum(np.abs(s), _DERIV_FLOOR)
        if self.family == "bounded" or self.eta == 0:
            out = np.zeros_like(s)
        elif self.family == "rational":
            out = -self.c1 * self.eta * a ** (self.eta - 1.0) / (a ** self.eta + self.s2) ** 2
        else:
            out = -self.eta * self.c1 * a ** (-self.eta - 1.0)
        return _out(out, scalar)

    def truncated(self, s, n: float):
        """h_n = T_n(h(s)); h_n(0) = n when h(0) = inf."""
        scalar = np.isscalar(s)
        v = np.asarray(self.value(s), dtype=float)
        return _out(np.minimum(v, n), scalar)

    def truncated_derivative(self, s, n: float):
        scalar = np.isscalar(s)
        v = np.asarray(self.value(s), dtype=float)
        d = np.asarray(self.derivative(s), dtype=float)
        return _out(np.where(v < n, d, 0.0), scalar)

    def growth_violations(self, num=1000) -> dict[str, np.ndarray]:
        """Samples violating h <= c1/s**eta on (0, s1], or a non-finite tail."""
        s = np.logspace(-6, np.log10(self.s1), num)
        near = s[self.value(s) > self.c1 * s ** (-self.eta) * (1 + 1e-12)]
        tail_s = np.logspace(3, 8, 50)
        tail = tail_s[~np.isfinite(self.value(tail_s))]
        return {"near_zero": near, "tail": tail}

    def nonincreasing_on_grid(self, num=1000) -> bool:
        h = self.value(_log_grid(num=num))
        return bool(np.all(np.diff(h) <= 1e-15 * np.abs(h[:-1])))
