"""Equilibrium density profiles and physical parameters.

A valid profile is strictly positive and strictly increasing on [0, 1]
(heavy fluid on top): that is the unstable configuration the rest of the
toolkit analyzes.  Profiles expose pointwise derivatives up to third order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


class ProfileError(ValueError):
    """Invalid density profile (fails positivity or monotonicity)."""


PROFILE_KINDS = ("linear", "exponential", "tabulated")

# positivity is verified on this many uniform samples, then polished locally
_CHECK_SAMPLES = 1024
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PhysicalParams:
    """Gravity g, viscosity mu, capillary coefficient sigma, period scale L."""

    g: float
    mu: float
    sigma: float
    L: float

    def __post_init__(self) -> None:
        if not (self.g > 0):
            raise ValueError("g must be positive")
        if not (self.mu > 0):
            raise ValueError("mu must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not (self.L > 0):
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class DensityProfile:
    """Density rho0 on [0, 1] with evaluators for rho0', rho0'', rho0'''."""

    kind: str
    params: tuple[float, ...]
    rho: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d2: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d3: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, x, order: int = 0):
        f = (self.rho, self.d1, self.d2, self.d3)[order]
        return f(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CharacteristicLength:
    """L0 = 1 / max(rho0'/rho0) and the location of the maximum."""

    L0: float
    argmax_x3: float


def _golden_max(f: Callable[[float], float], a: float, b: float,
                tol: float = 1e-12) -> tuple[float, float]:
    """Golden-section maximization of a scalar function on [a, b]."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def _check_positive(name: str, f: Callable, failure: str) -> None:
    """Sampled positivity check with local golden-section refinement."""
    xs = np.linspace(0.0, 1.0, _CHECK_SAMPLES)
    vals = np.asarray(f(xs), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = xs[~np.isfinite(vals)][0]
        raise ProfileError(f"{name} is not finite at x3 = {bad:.6f}")
    i = int(np.argmin(vals))
    if vals[i] <= 0:
        raise ProfileError(f"{failure} ({name} = {vals[i]:.6g} at x3 = {xs[i]:.6f})")
    # polish around the sampled minimum; the true minimum may sit between samples
    lo, hi = max(0.0, xs[i] - 2.0 / _CHECK_SAMPLES), min(1.0, xs[i] + 2.0 / _CHECK_SAMPLES)
    xm, neg_min = _golden_max(lambda x: -float(f(np.array([x]))[0]), lo, hi)
    if -neg_min <= 0:
        raise ProfileError(f"{failure} ({name} = {-neg_min:.6g} at x3 = {xm:.6f})")


def make_profile(kind: str, params: Sequence[float] | None = None,
                 table: Sequence[tuple[float, float]] | None = None) -> DensityProfile:
    """Build a density profile of the given kind and validate it.

    kinds:
      linear(a, b):       rho0 = a + b*x3
      exponential(a, b):  rho0 = a*exp(b*x3)
      tabulated:          cubic-spline interpolation of `table` = [(x, rho0)]
    """
    if kind == "linear":
        a, b = map(float, params)
        rho = lambda x: a + b * x
        d1 = lambda x: np.full_like(x, b)
        d2 = lambda x: np.zeros_like(x)
        d3 = lambda x: np.zeros_like(x)
        prof = DensityProfile("linear", (a, b), rho, d1, d2, d3)
    elif kind == "exponential":
        a, b = map(float, params)
        rho = lambda x: a * np.exp(b * x)
        d1 = lambda x: a * b * np.exp(b * x)
        d2 = lambda x: a * b * b * np.exp(b * x)
        d3 = lambda x: a * b ** 3 * np.exp(b * x)
        prof = DensityProfile("exponential", (a, b), rho, d1, d2, d3)
    elif kind == "tabulated":
        if table is None:
            raise ProfileError("tabulated profile requires a (x, rho0) table")
        pts = np.asarray(sorted(table), dtype=float)
        if pts.shape[0] < 4:
            raise ProfileError("tabulated profile needs at least 4 points")
        if abs(pts[0, 0]) > 1e-12 or abs(pts[-1, 0] - 1.0) > 1e-12:
            raise ProfileError("tabulated profile must span [0, 1]")
        spline = CubicSpline(pts[:, 0], pts[:, 1])
        # spline third derivative is piecewise constant; adequate because no
        # implemented formula uses derivatives above third order
        prof = DensityProfile(
            "tabulated", tuple(pts[:, 1]),
            lambda x: spline(x), lambda x: spline(x, 1),
            lambda x: spline(x, 2), lambda x: spline(x, 3),
        )
    else:
        raise ProfileError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")

    _check_positive("rho0'", prof.d1, "profile not increasing")
    _check_positive("rho0", prof.rho, "profile not positive")
    return prof


def characteristic_length(profile: DensityProfile) -> CharacteristicLength:
    """L0 from the maximum of rho0'/rho0, by grid scan + golden-section polish."""
    xs = np.linspace(0.0, 1.0, _CHECK_SAMPLES)
    quot = profile(xs, 1) / profile(xs, 0)
    i = int(np.argmax(quot))
    lo = max(0.0, xs[i] - 2.0 / _CHECK_SAMPLES)
    hi = min(1.0, xs[i] + 2.0 / _CHECK_SAMPLES)
    f = lambda x: float(profile(np.array([x]), 1)[0] / profile(np.array([x]), 0)[0])
    xm, fm = _golden_max(f, lo, hi)
    # keep whichever candidate won the polish; endpoints are included in the scan
    if quot[i] > fm:
        xm, fm = float(xs[i]), float(quot[i])
    return CharacteristicLength(L0=1.0 / fm, argmax_x3=xm)


def lambda_upper_bound(profile: DensityProfile, params: PhysicalParams) -> float:
    """Universal growth-rate bound sqrt(g / L0)."""
    return math.sqrt(params.g / characteristic_length(profile).L0)
