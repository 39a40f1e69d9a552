"""Horocycle flow on G and on X, and time changes generated by speed fields.

A time change psi of the horocycle flow theta is encoded by a positive speed
field f on X: psi_t(x) = theta_{beta(t, x)}(x) where beta solves

    d/du beta(u, x) = f(theta_{beta(u, x)}(x)),    beta(0, x) = 0.

``alpha`` is the inverse of ``beta`` in the time slot, so that
theta_t(x) = psi_{alpha(t, x)}(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import psl2
from .errors import ConfigError, DomainError
from .fuchsian import FuchsianGroup, QuotientPoint
from .psl2 import GroupElement, compose, horocycle_element


def flow_on_G(g: GroupElement, t: float) -> GroupElement:
    return compose(g, horocycle_element(t))


def horocycle_flow(x: QuotientPoint, t: float) -> QuotientPoint:
    return QuotientPoint(flow_on_G(x.rep, t), x.group)


def project(g: GroupElement, group: FuchsianGroup) -> QuotientPoint:
    return QuotientPoint(g, group)


# ---------------------------------------------------------------------------
# speed fields


class SpeedField:
    """Positive continuous function on X with known bounds f_min <= f <= f_max.

    The built-in fields only depend on the base point g.i and are invariant
    under the group, so they are well defined on the quotient.
    ``value_xy`` takes an optional reduction hint and returns it updated; the
    integrator threads it through consecutive evaluations.
    """

    f_min: float
    f_max: float
    constant: float | None = None

    def value_xy(self, x: float, y: float, hint=None):
        raise NotImplementedError

    def __call__(self, point: QuotientPoint) -> float:
        z = psl2.base_point(point.rep)
        return self.value_xy(z.x, z.y)[0]

    def spec(self) -> dict:
        raise NotImplementedError


class ConstantSpeed(SpeedField):
    def __init__(self, c: float):
        if not c > 0:
            raise ConfigError(f"constant speed must be positive, got {c!r}")
        self.constant = self.f_min = self.f_max = float(c)

    def value_xy(self, x, y, hint=None):
        return self.constant, hint

    def spec(self):
        return {"kind": "constant", "c": self.constant}


def _bump_profile(group: FuchsianGroup, radius: float, cosh_r: float, x, y, hint):
    """exp(1 - 1/(1 - (r/R)^2)) for r = d(z, orbit of i) < R, else 0.

    With R below the inradius of the Dirichlet domain at most one orbit point
    lies within R, so the profile is smooth and invariant on X.
    """
    ch = (x * x + y * y + 1.0) / (2.0 * y)
    if ch >= cosh_r:
        x, y, hint = group.reduce_point(x, y, hint)
        ch = (x * x + y * y + 1.0) / (2.0 * y)
        if ch >= cosh_r:
            return 0.0, hint
    r = math.acosh(max(ch, 1.0)) / radius
    return math.exp(1.0 - 1.0 / (1.0 - r * r)), hint


def _check_radius(group: FuchsianGroup, radius: float) -> None:
    if group.domain_inradius is None or not 0 < radius < group.domain_inradius:
        raise ConfigError("bump radius must lie in (0, inradius of the Dirichlet domain)")


class BumpSpeed(SpeedField):
    """1 + amplitude * phi, phi the smooth bump profile around the orbit of i."""

    def __init__(self, group: FuchsianGroup, amplitude: float = 0.5, radius: float = 1.2):
        if not amplitude > -1.0:
            raise ConfigError("bump amplitude must exceed -1")
        _check_radius(group, radius)
        self.group = group
        self.amplitude = float(amplitude)
        self.radius = float(radius)
        self.f_min = min(1.0, 1.0 + self.amplitude)
        self.f_max = max(1.0, 1.0 + self.amplitude)
        self._cosh_r = math.cosh(self.radius)

    def value_xy(self, x, y, hint=None):
        u, hint = _bump_profile(self.group, self.radius, self._cosh_r, x, y, hint)
        return 1.0 + self.amplitude * u, hint

    def spec(self):
        return {"kind": "bump", "amplitude": self.amplitude, "radius": self.radius}


class SinusoidalSpeed(SpeedField):
    """1 + amplitude * sin(2 pi frequency * phi + phase), phi the bump profile.

    The oscillating coordinate is the bump profile rather than a raw
    coordinate of g.i, which would not be invariant under the group.
    """

    def __init__(self, group: FuchsianGroup, amplitude: float = 0.5, frequency: float = 1.0,
                 phase: float = 0.0, radius: float = 1.2):
        if not 0 <= abs(amplitude) < 1.0:
            raise ConfigError("sinusoidal amplitude must satisfy |amplitude| < 1")
        _check_radius(group, radius)
        self.group = group
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.phase = float(phase)
        self.radius = float(radius)
        self.f_min = 1.0 - abs(self.amplitude)
        self.f_max = 1.0 + abs(self.amplitude)
        self._cosh_r = math.cosh(self.radius)

    def value_xy(self, x, y, hint=None):
        u, hint = _bump_profile(self.group, self.radius, self._cosh_r, x, y, hint)
        return 1.0 + self.amplitude * math.sin(2.0 * math.pi * self.frequency * u + self.phase), hint

    def spec(self):
        return {"kind": "sinusoidal", "amplitude": self.amplitude, "frequency": self.frequency,
                "phase": self.phase, "radius": self.radius}


def speed_from_spec(spec: dict, group: FuchsianGroup) -> SpeedField:
    """Build one of the named built-in fields from a parameter mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", "constant")
    try:
        if kind == "constant":
            return ConstantSpeed(float(spec.get("c", 1.0)))
        if kind == "bump":
            return BumpSpeed(group, **{k: float(v) for k, v in spec.items()})
        if kind == "sinusoidal":
            return SinusoidalSpeed(group, **{k: float(v) for k, v in spec.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for speed field {kind!r}: {exc}") from None
    raise ConfigError(f"unknown speed field {kind!r}")


# ---------------------------------------------------------------------------
# time changes


@dataclass(frozen=True)
class TimeChange:
    speed: SpeedField
    integrator_step: float = 1e-3

    def __post_init__(self):
        if not self.integrator_step > 0:
            raise ConfigError("integrator_step must be positive")

    @property
    def f_min(self) -> float:
        return self.speed.f_min

    @property
    def f_max(self) -> float:
        return self.speed.f_max


class _Rhs:
    """u -> speed at theta_u(x), remembering the last reduction."""

    def __init__(self, speed: SpeedField, rep: GroupElement):
        self.speed = speed
        self.rep = rep
        self.hint = None

    def __call__(self, u: float) -> float:
        # rep . (u + i) without forming rep b_u
        x, y = psl2.mobius_xy(self.rep, u, 1.0)
        v, self.hint = self.speed.value_xy(x, y, self.hint)
        return v


def _rk4_step(f, b: float, h: float) -> float:
    k1 = f(b)
    k2 = f(b + 0.5 * h * k1)
    k3 = f(b + 0.5 * h * k2)
    k4 = f(b + h * k3)
    return b + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _steps(t: float, h: float) -> tuple[int, float]:
    n = int(abs(t) // h)
    rem = abs(t) - n * h
    if rem < 0.0:
        rem = 0.0
    return n, rem


def beta(tc: TimeChange, t: float, x: QuotientPoint) -> float:
    """Fixed-step RK4 solution of the reparametrisation ODE at time t."""
    if tc.speed.constant is not None:
        return tc.speed.constant * t
    return _beta_rk4(tc.speed, tc.integrator_step, t, x.rep)


def _beta_rk4(speed: SpeedField, step: float, t: float, rep: GroupElement) -> float:
    if not step > 0:
        raise ConfigError("integrator step must be positive")
    f = _Rhs(speed, rep)
    sgn = 1.0 if t >= 0 else -1.0
    n, rem = _steps(t, step)
    b = 0.0
    for _ in range(n):
        b = _rk4_step(f, b, sgn * step)
    if rem > 0.0:
        b = _rk4_step(f, b, sgn * rem)
    return b


def beta_grid(tc: TimeChange, times, x: QuotientPoint) -> list[float]:
    """beta at each of the sorted, non-negative ``times`` in one sweep.

    Equal to calling :func:`beta` at every sample: between samples the grid
    of full steps is continued from the last node.
    """
    return list(iter_beta(tc, times, x))


def iter_beta(tc: TimeChange, times, x: QuotientPoint):
    """Lazy form of :func:`beta_grid`."""
    if tc.speed.constant is not None:
        for t in times:
            yield tc.speed.constant * t
        return
    h = tc.integrator_step
    f = _Rhs(tc.speed, x.rep)
    node_b, node_k = 0.0, 0
    for t in times:
        if t < 0:
            raise DomainError("beta_grid needs non-negative times")
        n, rem = _steps(t, h)
        if n < node_k:
            raise DomainError("beta_grid needs sorted times")
        while node_k < n:
            node_b = _rk4_step(f, node_b, h)
            node_k += 1
        yield _rk4_step(f, node_b, rem) if rem > 0 else node_b


def alpha(tc: TimeChange, t: float, x: QuotientPoint, tol: float = 1e-10) -> float:
    """Inverse of beta in the time slot: beta(alpha(t, x), x) = t.

    Walks the RK4 grid until the target is bracketed, bisects the last
    partial step to ``tol`` and finishes with one Newton step using
    d beta/du = speed.
    """
    if tc.speed.constant is not None:
        return t / tc.speed.constant
    if t == 0:
        return 0.0
    h = tc.integrator_step
    f = _Rhs(tc.speed, x.rep)
    sgn = 1.0 if t > 0 else -1.0
    target = abs(t)
    b, k = 0.0, 0
    while True:
        nb = _rk4_step(f, b, sgn * h)
        if abs(nb) >= target:
            break
        b, k = nb, k + 1
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if abs(_rk4_step(f, b, sgn * mid)) < target:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    val = _rk4_step(f, b, sgn * r)
    r -= (abs(val) - target) / f(val)
    return sgn * (k * h + r)


def psi(tc: TimeChange, t: float, x: QuotientPoint) -> QuotientPoint:
    return horocycle_flow(x, beta(tc, t, x))
