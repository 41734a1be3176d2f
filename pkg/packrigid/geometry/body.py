"""Centrally symmetric convex bodies: gauges, duality maps and surgery."""

from __future__ import annotations

from abc import ABC, abstractmethod
import logging
import math
from typing import Any, Callable

import numpy as np
import voluptuous as vol

from ..const import (
    BUMP_HALF_WIDTH_RATIO,
    BUMP_MAX_HALF_WIDTH,
    CONF_KIND,
    DEFAULT_PROFILE_SAMPLES,
    DISTANCE_SAMPLES,
    DUAL_PROFILE_SAMPLES,
    EPS_ZERO,
    MIN_PROFILE_SAMPLES,
    NORM_BISECTION_STEPS,
    NORM_MAX_DOUBLINGS,
    NORM_NEWTON_STEPS,
    PERIODICITY_TOL,
    REFINE_STEPS,
    BodyKind,
)
from .profile import (
    BodyProfile,
    Bump,
    BumpedProfile,
    CurvatureError,
    PolygonProfile,
    ProfileError,
    RadialProfile,
    SplineProfile,
    bump_profile,
    check_curvature,
    uniform_angles,
    unit_normals,
    unit_vectors,
)

_LOGGER = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BodyError(Exception):
    """Malformed convex body."""


class NormConvergenceError(BodyError):
    """Radial root find did not converge."""


class NonSmoothPointError(BodyError):
    """Duality map requested where the support line is not unique."""


class RetargetError(BodyError):
    """Support targets cannot be reached within the curvature budget."""


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise BodyError(f"expected plane vectors, got shape {x.shape}")
    return x


def golden_max(
    func: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    steps: int = REFINE_STEPS,
) -> np.ndarray:
    """Vectorized golden-section maximization of func on [lo, hi]."""
    a, b = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    best = np.maximum(fc, fd)
    for _ in range(steps):
        left = fc > fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        new_c = np.where(left, b - _GOLDEN * (b - a), d)
        new_d = np.where(left, c, a + _GOLDEN * (b - a))
        fx = func(np.where(left, new_c, new_d))
        fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
        c, d = new_c, new_d
        best = np.maximum(best, fx)
    return best


class ConvexBody(ABC):
    """Centrally symmetric convex body C, used through its gauge ||.||_C."""

    kind: BodyKind
    euclidean = False
    smooth = True
    positive_curvature = True
    smoothness: int | str = "analytic"

    @abstractmethod
    def norm(self, x) -> np.ndarray:
        """Return the Minkowski gauge of x (vectorized over leading axes)."""

    @abstractmethod
    def duality_map(self, x) -> np.ndarray:
        """Return phi_C(x), the gradient of half the squared gauge."""

    @abstractmethod
    def descriptor(self) -> dict[str, Any]:
        """Return the JSON descriptor of the body."""

    def is_kink(self, x) -> np.ndarray:
        """Return True where x is not a smooth point of the gauge."""
        return np.zeros(np.shape(x)[:-1], dtype=bool)

    def dual_body(self) -> ConvexBody | None:
        """Return the polar body in closed form, or None."""
        return None

    @property
    def profile(self) -> RadialProfile:
        """Return the exact radial profile of the body."""
        return BodyProfile(self)

    def radius(self, t) -> np.ndarray:
        """Return the boundary radius 1 / ||(cos t, sin t)||."""
        return 1.0 / self.norm(unit_vectors(t))

    def boundary(self, count: int) -> np.ndarray:
        """Return count boundary points ordered counterclockwise."""
        s = unit_vectors(np.arange(count) * (2.0 * math.pi / count))
        return s / self.norm(s)[:, None]

    def dual_norm(self, y) -> np.ndarray:
        """Return sup over z in C of |y . z| by sampling plus refinement."""
        dual = self.dual_body()
        if dual is not None:
            return dual.norm(y)
        y = _as_points(y)
        flat = y.reshape(-1, 2)
        t = uniform_angles(DISTANCE_SAMPLES)
        z = unit_vectors(t) * self.radius(t)[:, None]
        values = np.abs(flat @ z.T)
        best = np.argmax(values, axis=1)
        step = math.pi / DISTANCE_SAMPLES

        def support(angles: np.ndarray) -> np.ndarray:
            return np.abs(_dot(flat, unit_vectors(angles))) * self.radius(angles)

        refined = golden_max(support, t[best] - step, t[best] + step)
        result = np.maximum(values[np.arange(flat.shape[0]), best], refined)
        return result.reshape(y.shape[:-1])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor()})"


class Disc(ConvexBody):
    """Euclidean unit disc."""

    kind = BodyKind.Disc
    euclidean = True

    def norm(self, x) -> np.ndarray:
        return np.linalg.norm(_as_points(x), axis=-1)

    def duality_map(self, x) -> np.ndarray:
        return _as_points(x).copy()

    def dual_body(self) -> ConvexBody:
        return self

    def descriptor(self) -> dict[str, Any]:
        return {CONF_KIND: BodyKind.Disc.value}


class EllipseBody(ConvexBody):
    """Image T(B) of the unit disc under an invertible linear map T."""

    kind = BodyKind.Ellipse
    euclidean = True

    def __init__(self, matrix) -> None:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (2, 2) or abs(np.linalg.det(matrix)) < EPS_ZERO:
            raise BodyError("ellipse needs an invertible 2x2 matrix")
        self._matrix = matrix
        self._inverse = np.linalg.inv(matrix)
        self._metric = self._inverse.T @ self._inverse

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def norm(self, x) -> np.ndarray:
        return np.linalg.norm(_as_points(x) @ self._inverse.T, axis=-1)

    def duality_map(self, x) -> np.ndarray:
        return _as_points(x) @ self._metric

    def dual_body(self) -> ConvexBody:
        return EllipseBody(self._inverse.T)

    def descriptor(self) -> dict[str, Any]:
        return {CONF_KIND: BodyKind.Ellipse.value, "matrix": self._matrix.tolist()}


class PNormBody(ConvexBody):
    """Unit ball of the p-norm, p > 1."""

    kind = BodyKind.PNorm
    smoothness = 1

    def __init__(self, p: float) -> None:
        if not p > 1.0:
            raise BodyError(f"p-norm needs p > 1, got {p}")
        self._p = float(p)
        self.euclidean = self._p == 2.0
        self.positive_curvature = self.euclidean
        if self.euclidean or float(self._p).is_integer() and self._p % 2 == 0:
            self.smoothness = "analytic"

    @property
    def p(self) -> float:
        return self._p

    def norm(self, x) -> np.ndarray:
        x = np.abs(_as_points(x))
        scale = np.max(x, axis=-1)
        safe = np.where(scale > 0.0, scale, 1.0)
        ratio = x / safe[..., None]
        return scale * np.sum(ratio**self._p, axis=-1) ** (1.0 / self._p)

    def duality_map(self, x) -> np.ndarray:
        x = _as_points(x)
        length = self.norm(x)
        safe = np.where(length > 0.0, length, 1.0)
        unit = x / safe[..., None]
        phi = np.sign(unit) * np.abs(unit) ** (self._p - 1.0)
        return phi * length[..., None]

    def dual_body(self) -> ConvexBody:
        return PNormBody(self._p / (self._p - 1.0))

    def descriptor(self) -> dict[str, Any]:
        return {CONF_KIND: BodyKind.PNorm.value, "p": self._p}


class ExpFamilyBody(ConvexBody):
    """Sublevel set {x : phi_{a,w}(x) <= 1} of an exponential sum."""

    kind = BodyKind.ExpFamily

    def __init__(self, directions, w: float) -> None:
        directions = np.asarray(directions, dtype=float)
        if directions.ndim != 2 or directions.shape[1] != 2 or directions.shape[0] < 3:
            raise BodyError("exp-family body needs at least three plane vectors")
        if np.linalg.matrix_rank(directions) < 2:
            raise BodyError("exp-family vectors must span the plane")
        if not w > math.log(2 * directions.shape[0]):
            raise BodyError(
                f"exp-family weight w={w} must exceed log(2j)="
                f"{math.log(2 * directions.shape[0]):.6f}"
            )
        self._directions = directions
        self._w = float(w)

    @property
    def directions(self) -> np.ndarray:
        return self._directions

    @property
    def w(self) -> float:
        return self._w

    def _exponentials(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ay = y @ self._directions.T
        return np.exp(self._w * (ay - 1.0)), np.exp(self._w * (-ay - 1.0))

    def potential(self, y) -> np.ndarray:
        """Return phi_{a,w}(y)."""
        plus, minus = self._exponentials(np.asarray(y, dtype=float))
        return np.sum(plus + minus, axis=-1) / (2.0 * self._directions.shape[0])

    def potential_gradient(self, y) -> np.ndarray:
        """Return the gradient of phi_{a,w} at y."""
        plus, minus = self._exponentials(np.asarray(y, dtype=float))
        scale = self._w / (2.0 * self._directions.shape[0])
        return scale * (plus - minus) @ self._directions

    def _boundary_parameter(self, unit: np.ndarray) -> np.ndarray:
        """Solve phi_{a,w}(t u) = 1 for t > 0, for each unit vector u."""
        upper = np.ones(unit.shape[:-1])
        for _ in range(NORM_MAX_DOUBLINGS):
            low = self.potential(upper[..., None] * unit) <= 1.0
            if not np.any(low):
                break
            upper = np.where(low, 2.0 * upper, upper)
        else:
            raise NormConvergenceError("could not bracket the exp-family boundary")

        lower = np.zeros_like(upper)
        for _ in range(NORM_BISECTION_STEPS):
            mid = 0.5 * (lower + upper)
            above = self.potential(mid[..., None] * unit) > 1.0
            upper = np.where(above, mid, upper)
            lower = np.where(above, lower, mid)
        t = 0.5 * (lower + upper)
        for _ in range(NORM_NEWTON_STEPS):
            point = t[..., None] * unit
            slope = _dot(self.potential_gradient(point), unit)
            step = (self.potential(point) - 1.0) / slope
            t = np.where(slope > 0.0, t - step, t)

        residual = np.abs(self.potential(t[..., None] * unit) - 1.0)
        if not np.all(np.isfinite(t)) or np.any(t <= 0.0) or np.any(residual > 1e-9):
            raise NormConvergenceError(
                f"exp-family root find failed (residual {np.max(residual):.3e})"
            )
        return t

    def norm(self, x) -> np.ndarray:
        x = _as_points(x)
        length = np.linalg.norm(x, axis=-1)
        positive = length > 0.0
        safe = np.where(positive, length, 1.0)
        t = self._boundary_parameter(x / safe[..., None])
        return np.where(positive, length / t, 0.0)

    def duality_map(self, x) -> np.ndarray:
        x = _as_points(x)
        gauge = self.norm(x)
        safe = np.where(gauge > 0.0, gauge, 1.0)
        y = x / safe[..., None]
        grad = self.potential_gradient(y)
        return gauge[..., None] * grad / _dot(grad, y)[..., None]

    def descriptor(self) -> dict[str, Any]:
        return {
            CONF_KIND: BodyKind.ExpFamily.value,
            "directions": self._directions.tolist(),
            "w": self._w,
        }


class ProfileBody(ConvexBody):
    """Body whose boundary radius is a radial profile."""

    kind = BodyKind.Profile

    def __init__(self, profile: RadialProfile, euclidean: bool = False) -> None:
        self._profile = profile
        self.euclidean = euclidean
        self.smooth = profile.smooth
        self.positive_curvature = profile.smooth
        self.smoothness = 2 if profile.smooth else 0

    @property
    def profile(self) -> RadialProfile:
        return self._profile

    def norm(self, x) -> np.ndarray:
        x = _as_points(x)
        theta = np.arctan2(x[..., 1], x[..., 0])
        return np.linalg.norm(x, axis=-1) / self._profile.evaluate(theta)

    def is_kink(self, x) -> np.ndarray:
        x = _as_points(x)
        return self._profile.is_kink(np.arctan2(x[..., 1], x[..., 0]))

    def duality_map(self, x) -> np.ndarray:
        x = _as_points(x)
        length = np.linalg.norm(x, axis=-1)
        theta = np.arctan2(x[..., 1], x[..., 0])
        kinks = self._profile.is_kink(theta) & (length > 0.0)
        if np.any(kinks):
            angle = float(np.ravel(theta)[np.argmax(np.ravel(kinks))])
            raise NonSmoothPointError(f"no unique support at angle {angle:.6f}")
        f = self._profile.evaluate(theta)
        f1 = self._profile.evaluate(theta, 1)
        phi = unit_vectors(theta) / (f * f)[..., None] - (f1 / f**3)[
            ..., None
        ] * unit_normals(theta)
        return length[..., None] * phi

    def descriptor(self) -> dict[str, Any]:
        data = {CONF_KIND: BodyKind.Profile.value, "profile": self._profile.descriptor()}
        if self.euclidean:
            data["euclidean"] = True
        return data


class GaugeBlendBody(ConvexBody):
    """Body with gauge (1 - s) ||x||_A + s ||x||_B."""

    kind = BodyKind.Blend

    def __init__(self, start: ConvexBody, end: ConvexBody, s: float) -> None:
        if not 0.0 <= s <= 1.0:
            raise BodyError(f"blend parameter {s} outside [0, 1]")
        self._start = start
        self._end = end
        self._s = float(s)
        self.smooth = start.smooth and end.smooth
        self.positive_curvature = start.positive_curvature and end.positive_curvature
        self.euclidean = (s == 0.0 and start.euclidean) or (s == 1.0 and end.euclidean)

    @property
    def s(self) -> float:
        return self._s

    def norm(self, x) -> np.ndarray:
        return (1.0 - self._s) * self._start.norm(x) + self._s * self._end.norm(x)

    def is_kink(self, x) -> np.ndarray:
        return self._start.is_kink(x) | self._end.is_kink(x)

    def duality_map(self, x) -> np.ndarray:
        x = _as_points(x)
        norm_a, norm_b = self._start.norm(x), self._end.norm(x)
        gauge = (1.0 - self._s) * norm_a + self._s * norm_b
        safe_a = np.where(norm_a > 0.0, norm_a, 1.0)[..., None]
        safe_b = np.where(norm_b > 0.0, norm_b, 1.0)[..., None]
        gradient = (1.0 - self._s) * self._start.duality_map(
            x
        ) / safe_a + self._s * self._end.duality_map(x) / safe_b
        return gauge[..., None] * gradient

    def descriptor(self) -> dict[str, Any]:
        return {
            CONF_KIND: BodyKind.Blend.value,
            "start": self._start.descriptor(),
            "end": self._end.descriptor(),
            "s": self._s,
        }


def norm(body: ConvexBody, x) -> np.ndarray:
    """Return ||x||_C."""
    return body.norm(x)


def duality_map(body: ConvexBody, x) -> np.ndarray:
    """Return phi_C(x)."""
    return body.duality_map(x)


def dual_norm(body: ConvexBody, y) -> np.ndarray:
    """Return ||y||_C*, the support function of C at y."""
    return body.dual_norm(y)


def radial_profile(
    body: ConvexBody, samples: int = DEFAULT_PROFILE_SAMPLES
) -> SplineProfile:
    """Sample the radial profile of body into a periodic spline."""
    if samples < MIN_PROFILE_SAMPLES or samples % 2:
        raise ProfileError(
            f"profile needs an even sample count >= {MIN_PROFILE_SAMPLES}, got {samples}"
        )
    profile = SplineProfile(body.radius(uniform_angles(samples)))
    if body.positive_curvature:
        check_curvature(profile, count=samples)
    return profile


def body_from_profile(
    profile: RadialProfile, strict: bool = True, euclidean: bool = False
) -> ProfileBody:
    """Build the body with boundary radius profile.

    With strict set the profile must be smooth with positive curvature;
    polygon fixtures are loaded with strict=False.
    """
    t = uniform_angles(DEFAULT_PROFILE_SAMPLES)
    drift = np.max(np.abs(profile.evaluate(t + math.pi) - profile.evaluate(t)))
    if drift > PERIODICITY_TOL:
        raise ProfileError(f"profile is not pi-periodic (deviation {drift:.3e})")
    if strict:
        if not profile.smooth:
            raise ProfileError("strict profile bodies must be smooth")
        check_curvature(profile)
    return ProfileBody(profile, euclidean=euclidean)


def dual_profile_body(
    body: ConvexBody, samples: int = DUAL_PROFILE_SAMPLES
) -> ConvexBody:
    """Return the polar body, in closed form when known, else sampled."""
    dual = body.dual_body()
    if dual is not None:
        return dual
    t = uniform_angles(samples)
    return ProfileBody(SplineProfile(1.0 / body.dual_norm(unit_vectors(t))))


def dual_map_inverse_check(body: ConvexBody, x, dual: ConvexBody | None = None) -> float:
    """Return max ||phi_C*(phi_C(x)) - x|| over the given points."""
    if dual is None:
        dual = dual_profile_body(body)
    x = _as_points(x)
    residual = dual.duality_map(body.duality_map(x)) - x
    return float(np.max(np.linalg.norm(np.atleast_2d(residual), axis=-1)))


def body_distance(
    first: ConvexBody, second: ConvexBody, samples: int = DISTANCE_SAMPLES
) -> float:
    """Return sup over unit vectors of | ||x||_A - ||x||_B |."""
    t = uniform_angles(samples)

    def gap(angles: np.ndarray) -> np.ndarray:
        s = unit_vectors(angles)
        return np.abs(first.norm(s) - second.norm(s))

    values = gap(t)
    k = int(np.argmax(values))
    step = math.pi / samples
    refined = golden_max(gap, np.array([t[k] - step]), np.array([t[k] + step]))
    return float(max(values[k], refined[0]))


def hausdorff_distance(
    first: ConvexBody, second: ConvexBody, samples: int = DISTANCE_SAMPLES
) -> float:
    """Return the Hausdorff distance, via support functions."""
    t = uniform_angles(samples)

    def gap(angles: np.ndarray) -> np.ndarray:
        s = unit_vectors(angles)
        return np.abs(first.dual_norm(s) - second.dual_norm(s))

    values = gap(t)
    k = int(np.argmax(values))
    step = math.pi / samples
    refined = golden_max(gap, np.array([t[k] - step]), np.array([t[k] + step]))
    return float(max(values[k], refined[0]))


def retarget_supports(
    body: ConvexBody,
    contact_points,
    targets,
    eps: float,
) -> ConvexBody:
    """Bend the boundary near each contact point so its support is along target.

    Contact points keep their gauge; only f' changes at the contact angles.
    """
    points = np.atleast_2d(_as_points(contact_points))
    targets = np.atleast_2d(_as_points(targets))
    if points.shape != targets.shape:
        raise RetargetError("one target per contact point is required")

    base = body.profile if isinstance(body, ProfileBody) else BodyProfile(body)
    raw = np.arctan2(points[:, 1], points[:, 0])
    angles = np.mod(raw, math.pi)
    flip = np.where(angles == raw, 1.0, -1.0)
    order = np.argsort(angles)
    ordered = angles[order]
    if len(ordered) > 1:
        gaps = np.diff(np.append(ordered, ordered[0] + math.pi))
        if np.min(gaps) <= 0.0:
            raise RetargetError("contact points must be pairwise linearly independent")
        left = np.roll(gaps, 1)
        half = np.minimum(
            BUMP_HALF_WIDTH_RATIO * np.minimum(gaps, left), BUMP_MAX_HALF_WIDTH
        )
    else:
        half = np.array([BUMP_MAX_HALF_WIDTH])
    widths = np.empty_like(angles)
    widths[order] = half

    profile: RadialProfile = base
    changed = False
    for c, h, sign, target in zip(angles, widths, flip, targets):
        y = sign * target
        alpha = float(_dot(y, unit_vectors(c)))
        beta = float(_dot(y, unit_normals(c)))
        if not alpha > 0.0:
            raise RetargetError(f"target {target.tolist()} points away from its contact")
        f = float(base.evaluate(c))
        f1 = float(base.evaluate(c, 1))
        a = -f * beta / alpha - f1
        if abs(a) <= 1e-13 * max(1.0, abs(f1)):
            continue
        try:
            profile = bump_profile(profile, (c - h, c + h), c, a)
        except (CurvatureError, ProfileError) as exc:
            raise RetargetError(f"bump at angle {c:.6f} rejected: {exc}") from exc
        changed = True

    if not changed:
        return body
    t = uniform_angles(DISTANCE_SAMPLES)
    deviation = float(np.max(np.abs(profile.evaluate(t) - base.evaluate(t))))
    if deviation > eps:
        raise RetargetError(f"profile moved by {deviation:.3e} > eps={eps:.3e}")
    _LOGGER.debug("Retargeted %d supports, profile deviation %.3e", len(angles), deviation)
    return ProfileBody(profile)


# descriptor schemas
_POINT = vol.All([vol.Coerce(float)], vol.Length(min=2, max=2))

BODY_SCHEMA = vol.Schema(
    {vol.Required(CONF_KIND): vol.In([kind.value for kind in BodyKind])},
    extra=vol.ALLOW_EXTRA,
)
ELLIPSE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): str,
        vol.Required("matrix"): vol.All([_POINT], vol.Length(min=2, max=2)),
    }
)
PNORM_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): str,
        vol.Required("p"): vol.All(vol.Coerce(float), vol.Range(min=1.0, min_included=False)),
    }
)
EXPFAMILY_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): str,
        vol.Required("directions"): vol.All([_POINT], vol.Length(min=3)),
        vol.Required("w"): vol.Coerce(float),
    }
)
PROFILE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): str,
        vol.Required("profile"): dict,
        vol.Optional("euclidean", default=False): bool,
    }
)
BLEND_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_KIND): str,
        vol.Required("start"): dict,
        vol.Required("end"): dict,
        vol.Required("s"): vol.All(vol.Coerce(float), vol.Range(min=0.0, max=1.0)),
    }
)
BUMP_SCHEMA = vol.Schema(
    {
        vol.Required("x1"): vol.Coerce(float),
        vol.Required("x2"): vol.Coerce(float),
        vol.Required("c"): vol.Coerce(float),
        vol.Required("a"): vol.Coerce(float),
    }
)


def _samples_valid(data: dict) -> dict:
    count = data.get("n")
    if count is not None and count != len(data["samples"]):
        raise vol.Invalid(
            f"n={count} does not match {len(data['samples'])} samples", path=["n"]
        )
    return data


PROFILE_DESCRIPTOR_SCHEMA = vol.Any(
    vol.All(
        vol.Schema(
            {
                vol.Optional("n"): int,
                vol.Required("samples"): [vol.Coerce(float)],
            }
        ),
        _samples_valid,
    ),
    vol.Schema({vol.Required("facets"): vol.All([_POINT], vol.Length(min=2))}),
    vol.Schema({vol.Required("body"): dict}),
    vol.Schema({vol.Required("base"): dict, vol.Required("bumps"): [BUMP_SCHEMA]}),
)


def profile_from_descriptor(data: dict) -> RadialProfile:
    """Build a radial profile from its JSON descriptor."""
    data = PROFILE_DESCRIPTOR_SCHEMA(data)
    if "samples" in data:
        return SplineProfile(data["samples"])
    if "facets" in data:
        return PolygonProfile(data["facets"])
    if "body" in data:
        return BodyProfile(body_from_descriptor(data["body"]))
    bumps = tuple(Bump(**bump) for bump in data["bumps"])
    return BumpedProfile(profile_from_descriptor(data["base"]), bumps)


def body_from_descriptor(data: dict) -> ConvexBody:
    """Build a body from its JSON descriptor, raising vol.Invalid on bad input."""
    kind = BodyKind(BODY_SCHEMA(data)[CONF_KIND])
    try:
        if kind is BodyKind.Disc:
            return Disc()
        if kind is BodyKind.Ellipse:
            return EllipseBody(ELLIPSE_SCHEMA(data)["matrix"])
        if kind is BodyKind.PNorm:
            return PNormBody(PNORM_SCHEMA(data)["p"])
        if kind is BodyKind.ExpFamily:
            data = EXPFAMILY_SCHEMA(data)
            return ExpFamilyBody(data["directions"], data["w"])
        if kind is BodyKind.Profile:
            data = PROFILE_SCHEMA(data)
            profile = profile_from_descriptor(data["profile"])
            return ProfileBody(profile, euclidean=data["euclidean"])
        data = BLEND_SCHEMA(data)
        return GaugeBlendBody(
            body_from_descriptor(data["start"]),
            body_from_descriptor(data["end"]),
            data["s"],
        )
    except (BodyError, ProfileError) as exc:
        raise vol.Invalid(str(exc)) from exc
