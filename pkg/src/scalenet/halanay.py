"""Exponential envelopes for delay differential inequalities.

For a nonnegative scalar satisfying ``D+ u(t) <= a u(t) + b sup_{t-tau(t)<=s<=t} u(s) + c``
with ``a < 0``, ``b >= 0``, ``c >= 0`` and ``a + b <= -sigma < 0``, the solution obeys

    u(t) <= sup_{-tau0 <= s <= 0} u(s) * exp(-rate * t) + c / sigma

where ``rate`` is the unique positive root of ``lam + a + b*exp(lam*tau0) = 0``.
The root is computed against the delay upper bound ``tau0``; since
``exp(lam*tau)`` grows with ``tau``, this is the worst (smallest) admissible
rate for any delay profile bounded by ``tau0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import InvalidInputError, NoContractionError


def _validate_abc(a: float, b: float, tau0: float) -> None:
    if not all(math.isfinite(v) for v in (a, b, tau0)):
        raise InvalidInputError("halanay coefficients must be finite")
    if a >= 0.0:
        raise InvalidInputError(f"decay coefficient must be negative, got a = {a}")
    if b < 0.0:
        raise InvalidInputError(f"delayed gain must be nonnegative, got b = {b}")
    if tau0 < 0.0:
        raise InvalidInputError(f"delay bound must be nonnegative, got tau0 = {tau0}")
    if a + b >= 0.0:
        raise NoContractionError(f"need a + b < 0 for a decaying envelope, got {a + b}")


def solve_rate(a: float, b: float, tau0: float) -> float:
    """Positive root of ``lam + a + b*exp(lam*tau0) = 0``.

    The residual is negative at 0 (it equals a + b < 0) and nonnegative at
    ``-(a+b)``, so bisection on [0, -(a+b)] always converges; iterations stop
    once the bracket cannot be split in floating point.
    """
    _validate_abc(a, b, tau0)
    if b == 0.0:
        return -a

    def residual(lam: float) -> float:
        return lam + a + b * math.exp(lam * tau0)

    lo, hi = 0.0, -(a + b)
    if residual(hi) <= 0.0:  # only by rounding; the exact value is b*(e^{hi*tau0}-1) >= 0
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class HalanayParams:
    """Coefficients of the delayed differential inequality.

    ``sigma`` is the contraction margin ``-(a + b)``.
    """

    a: float
    b: float
    c: float
    tau0: float

    def __post_init__(self):
        _validate_abc(self.a, self.b, self.tau0)
        if not math.isfinite(self.c) or self.c < 0.0:
            raise InvalidInputError(f"constant forcing must be nonnegative, got c = {self.c}")

    @property
    def sigma(self) -> float:
        return -(self.a + self.b)


@dataclass(frozen=True)
class Envelope:
    """Evaluates ``initial_sup * exp(-rate * t) + offset``."""

    initial_sup: float
    rate: float
    offset: float

    def __post_init__(self):
        if self.initial_sup < 0.0 or self.rate <= 0.0 or self.offset < 0.0:
            raise InvalidInputError(
                f"envelope needs initial_sup >= 0, rate > 0, offset >= 0; got "
                f"({self.initial_sup}, {self.rate}, {self.offset})"
            )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.initial_sup * np.exp(-self.rate * t) + self.offset


def envelope(params: HalanayParams, initial_sup: float) -> Envelope:
    """Envelope for the inequality: rate from solve_rate, offset c/sigma."""
    if initial_sup < 0.0:
        raise InvalidInputError(f"initial_sup must be nonnegative, got {initial_sup}")
    rate = solve_rate(params.a, params.b, params.tau0)
    return Envelope(initial_sup=initial_sup, rate=rate, offset=params.c / params.sigma)
