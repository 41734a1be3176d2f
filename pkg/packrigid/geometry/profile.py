"""Radial profiles of centrally symmetric convex bodies."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from ..const import (
    CURVATURE_CHECK_SAMPLES,
    DEFAULT_PROFILE_SAMPLES,
    FD_STEP,
    KINK_TOL,
    MIN_PROFILE_SAMPLES,
    PERIODICITY_TOL,
)

if TYPE_CHECKING:
    from .body import ConvexBody

_LOGGER = logging.getLogger(__name__)


class ProfileError(Exception):
    """Invalid radial profile."""


class PeriodicityError(ProfileError):
    """Profile values are not pi-periodic."""


class CurvatureError(ProfileError):
    """Curvature functional is not positive."""


def uniform_angles(count: int) -> np.ndarray:
    """Return count uniform angles covering [0, pi)."""
    return np.arange(count) * (math.pi / count)


def unit_vectors(t) -> np.ndarray:
    """Return (cos t, sin t) stacked on the last axis."""
    t = np.asarray(t, dtype=float)
    return np.stack((np.cos(t), np.sin(t)), axis=-1)


def unit_normals(t) -> np.ndarray:
    """Return the derivative (-sin t, cos t) of unit_vectors."""
    t = np.asarray(t, dtype=float)
    return np.stack((-np.sin(t), np.cos(t)), axis=-1)


class RadialProfile(ABC):
    """Boundary radius f(t) = 1 / ||(cos t, sin t)|| as a pi-periodic function."""

    smooth = True

    @abstractmethod
    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        """Return the nu-th derivative of the profile at t (nu <= 2)."""

    @abstractmethod
    def descriptor(self) -> dict[str, Any]:
        """Return the JSON descriptor of the profile."""

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t)

    def curvature(self, t) -> np.ndarray:
        """Return c_f = f^2 + 2 f'^2 - f f''."""
        f = self.evaluate(t)
        f1 = self.evaluate(t, 1)
        f2 = self.evaluate(t, 2)
        return f * f + 2.0 * f1 * f1 - f * f2

    def is_kink(self, t) -> np.ndarray:
        """Return True where the boundary has no unique support line."""
        return np.zeros(np.shape(t), dtype=bool)

    def samples(self, count: int = DEFAULT_PROFILE_SAMPLES) -> np.ndarray:
        """Return the profile at count uniform angles of [0, pi)."""
        return self.evaluate(uniform_angles(count))


class SplineProfile(RadialProfile):
    """Periodic cubic spline through uniform samples of [0, pi)."""

    def __init__(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < MIN_PROFILE_SAMPLES:
            raise ProfileError(
                f"profile needs at least {MIN_PROFILE_SAMPLES} samples, got {values.size}"
            )
        if values.size % 2:
            raise ProfileError(f"profile sample count must be even, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise ProfileError("profile values must be finite and positive")
        self._values = values.copy()
        self._values.flags.writeable = False
        knots = np.append(uniform_angles(values.size), math.pi)
        self._spline = CubicSpline(
            knots, np.append(values, values[0]), bc_type="periodic"
        )

    @classmethod
    def from_circle(cls, values) -> SplineProfile:
        """Build from uniform samples of the full circle [0, 2 pi)."""
        values = np.asarray(values, dtype=float)
        half = values.size // 2
        if values.size % 2 or half == 0:
            raise ProfileError("full-circle samples must have an even count")
        front, back = values[:half], values[half:]
        gap = float(np.max(np.abs(front - back)))
        if gap > PERIODICITY_TOL * max(1.0, float(np.max(np.abs(values)))):
            raise PeriodicityError(f"profile is not pi-periodic (deviation {gap:.3e})")
        return cls(front)

    @property
    def values(self) -> np.ndarray:
        """Return the stored samples on [0, pi)."""
        return self._values

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        return self._spline(np.mod(np.asarray(t, dtype=float), math.pi), nu)

    def descriptor(self) -> dict[str, Any]:
        return {"samples": self._values.tolist()}


class PolygonProfile(RadialProfile):
    """Profile of the symmetric polygon {x : |n_i . x| <= 1 for all i}."""

    smooth = False

    def __init__(self, normals) -> None:
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        if normals.shape[-1] != 2 or normals.shape[0] < 2:
            raise ProfileError("polygon profile needs at least two facet normals")
        if np.linalg.matrix_rank(normals) < 2:
            raise ProfileError("facet normals must span the plane")
        self._normals = normals

    @property
    def normals(self) -> np.ndarray:
        """Return the facet normals."""
        return self._normals

    def _active(self, t):
        proj = unit_vectors(t) @ self._normals.T
        absproj = np.abs(proj)
        idx = np.argmax(absproj, axis=-1)
        g = np.take_along_axis(absproj, idx[..., None], axis=-1)[..., 0]
        sign = np.sign(np.take_along_axis(proj, idx[..., None], axis=-1)[..., 0])
        return absproj, idx, g, sign

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        _, idx, g, sign = self._active(t)
        if nu == 0:
            return 1.0 / g
        g1 = sign * np.einsum("...i,...i->...", unit_normals(t), self._normals[idx])
        if nu == 1:
            return -g1 / (g * g)
        if nu == 2:
            return (2.0 * g1 * g1 + g * g) / g**3
        raise ProfileError(f"derivative order {nu} not supported")

    def is_kink(self, t) -> np.ndarray:
        absproj, _, g, _ = self._active(t)
        top2 = np.sort(absproj, axis=-1)[..., -2]
        return (g - top2) <= KINK_TOL * g

    def descriptor(self) -> dict[str, Any]:
        return {"facets": self._normals.tolist()}


class BodyProfile(RadialProfile):
    """Exact profile of a body, with f' taken from its duality map."""

    def __init__(self, body: ConvexBody) -> None:
        self._body = body
        self.smooth = body.smooth

    @property
    def body(self) -> ConvexBody:
        """Return the wrapped body."""
        return self._body

    def _derivative(self, t) -> np.ndarray:
        s = unit_vectors(t)
        f = 1.0 / self._body.norm(s)
        phi = self._body.duality_map(s)
        return -np.einsum("...i,...i->...", phi, unit_normals(t)) * f**3

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if nu == 0:
            return 1.0 / self._body.norm(unit_vectors(t))
        if nu == 1:
            return self._derivative(t)
        if nu == 2:
            return (self._derivative(t + FD_STEP) - self._derivative(t - FD_STEP)) / (
                2.0 * FD_STEP
            )
        raise ProfileError(f"derivative order {nu} not supported")

    def is_kink(self, t) -> np.ndarray:
        return self._body.is_kink(unit_vectors(t))

    def descriptor(self) -> dict[str, Any]:
        return {"body": self._body.descriptor()}


class BlendProfile(RadialProfile):
    """Convex combination (1 - s) f_a + s f_b of two profiles."""

    def __init__(self, start: RadialProfile, end: RadialProfile, s: float) -> None:
        self._start = start
        self._end = end
        self._s = float(s)
        self.smooth = start.smooth and end.smooth

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        return (1.0 - self._s) * self._start.evaluate(
            t, nu
        ) + self._s * self._end.evaluate(t, nu)

    def descriptor(self) -> dict[str, Any]:
        raise ProfileError("blended profiles are transient and cannot be stored")


@dataclass(frozen=True)
class Bump:
    """Bump s u^3 (u-1)^3 (u-c) on [x1, x2], scaled so g'(c) - f'(c) = a."""

    x1: float
    x2: float
    c: float
    a: float

    @property
    def length(self) -> float:
        return self.x2 - self.x1

    @property
    def mapped_contact(self) -> float:
        return (self.c - self.x1) / self.length

    @property
    def scale(self) -> float:
        ct = self.mapped_contact
        return self.a * self.length / (ct**3 * (ct - 1.0) ** 3)

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial.fromroots([0.0, 0.0, 0.0, 1.0, 1.0, 1.0, self.mapped_contact])

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        u = np.mod(t - self.x1, math.pi) / self.length
        inside = u <= 1.0
        poly = self.polynomial.deriv(nu) if nu else self.polynomial
        values = self.scale * poly(np.where(inside, u, 0.0)) / self.length**nu
        return np.where(inside, values, 0.0)

    def overlaps(self, other: Bump) -> bool:
        """Return True when the two bump supports meet modulo pi."""
        start = math.fmod(other.x1 - self.x1, math.pi) % math.pi
        return start <= self.length or start + other.length >= math.pi

    def descriptor(self) -> dict[str, float]:
        return {"x1": self.x1, "x2": self.x2, "c": self.c, "a": self.a}


class BumpedProfile(RadialProfile):
    """Base profile plus disjoint polynomial bumps, mirrored to antipodes."""

    def __init__(self, base: RadialProfile, bumps: tuple[Bump, ...]) -> None:
        self._base = base
        self._bumps = tuple(bumps)
        self.smooth = base.smooth

    @property
    def base(self) -> RadialProfile:
        return self._base

    @property
    def bumps(self) -> tuple[Bump, ...]:
        return self._bumps

    def evaluate(self, t, nu: int = 0) -> np.ndarray:
        value = self._base.evaluate(t, nu)
        for bump in self._bumps:
            value = value + bump.evaluate(t, nu)
        return value

    def is_kink(self, t) -> np.ndarray:
        return self._base.is_kink(t)

    def descriptor(self) -> dict[str, Any]:
        return {
            "base": self._base.descriptor(),
            "bumps": [bump.descriptor() for bump in self._bumps],
        }


def check_curvature(
    profile: RadialProfile, t=None, count: int = DEFAULT_PROFILE_SAMPLES
) -> float:
    """Return min c_f over t (default uniform samples); raise when not positive."""
    if t is None:
        t = uniform_angles(count)
    values = profile.evaluate(t)
    if np.any(values <= 0.0):
        raise ProfileError("profile is not positive")
    curvature = profile.curvature(t)
    lowest = float(np.min(curvature))
    if not lowest > 0.0:
        worst = float(np.asarray(t).ravel()[int(np.argmin(curvature))])
        raise CurvatureError(f"c_f = {lowest:.3e} <= 0 at t = {worst:.6f}")
    return lowest


def bump_profile(
    profile: RadialProfile,
    interval: tuple[float, float],
    c: float,
    a: float,
    check_samples: int = DEFAULT_PROFILE_SAMPLES,
) -> RadialProfile:
    """Add a bump on interval moving f'(c) by a while keeping f and c_f > 0.

    The bump vanishes to second order at both interval ends, so g is C^2
    wherever f is; it is repeated on the antipodal interval by periodicity.
    """
    x1, x2 = (float(value) for value in interval)
    if not 0.0 < x2 - x1 < math.pi:
        raise ProfileError(f"bump interval [{x1}, {x2}] must be shorter than pi")
    if not x1 < c < x2:
        raise ProfileError(f"contact angle {c} is not interior to [{x1}, {x2}]")
    if a == 0.0:
        return profile

    bump = Bump(x1, x2, float(c), float(a))
    base, bumps = profile, ()
    if isinstance(profile, BumpedProfile):
        base, bumps = profile.base, profile.bumps
        for other in bumps:
            if bump.overlaps(other):
                raise ProfileError(f"bump on [{x1}, {x2}] overlaps an existing bump")
    result = BumpedProfile(base, (*bumps, bump))

    local = np.linspace(x1, x2, CURVATURE_CHECK_SAMPLES)
    check_curvature(result, np.concatenate((uniform_angles(check_samples), local)))
    _LOGGER.debug("Bump at c=%.6f a=%.3e on [%.6f, %.6f]", c, a, x1, x2)
    return result
