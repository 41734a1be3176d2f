"""Packing construction: circle packing, continuation, flows and re-solving."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
import logging
import math

import numpy as np
import scipy.linalg
import scipy.optimize
import voluptuous as vol

from ..const import (
    CONF_DAMPING_BACKTRACKS,
    CONF_DAMPING_FACTOR,
    CONF_HOMOTOPY_PATH,
    CONF_INITIAL_STEP,
    CONF_MAX_NEWTON,
    CONF_MIN_STEP,
    CONF_NEWTON_TOL,
    CONTACT_TOL,
    DEFAULT_DAMPING_BACKTRACKS,
    DEFAULT_DAMPING_FACTOR,
    DEFAULT_INITIAL_STEP,
    DEFAULT_MAX_NEWTON,
    DEFAULT_MIN_STEP,
    DEFAULT_NEWTON_TOL,
    DEFAULT_PINS,
    EPS_ZERO,
    GENERAL_EDGE_TOL,
    MOBIUS_RETRIES,
    HomotopyPath,
)
from .body import (
    BodyError,
    ConvexBody,
    Disc,
    GaugeBlendBody,
    ProfileBody,
)
from .profile import (
    BlendProfile,
    BodyProfile,
    CurvatureError,
    ProfileError,
    check_curvature,
)
from .rigidity import (
    NonSmoothEdgeError,
    Packing,
    RankPolicy,
    assemble_packing_matrix,
    assemble_rigidity_matrix,
    independence_test,
    rank_report,
)
from .sparsity import ContactGraph, is_maximal_planar, triangulation_faces

_LOGGER = logging.getLogger(__name__)

ANGLE_SUM_TOL = 1e-10
ANGLE_SUM_MAX_ITERATIONS = 20000
TANGENCY_TOL = 1e-8
SEPARATION_TOL = 1e-9
FINAL_RESIDUAL_TOL = 1e-9
SINGULAR_CONDITION = 1e13
PREDICTOR_STEP = 1e-6
STEP_GROWTH = 1.5
REGULARIZATION_WEIGHTS = (1e-8, 1e-6, 1e-4, 1e-2, 1.0)
FLOW_GAP_FLOOR = 0.25
FLOW_MAX_DOUBLINGS = 8


class PackingError(Exception):
    """Packing construction failed."""


class CirclePackingError(PackingError):
    """Circle packing of a triangulation failed."""


class NewtonDivergenceError(PackingError):
    """Newton iteration did not converge."""


class GeneralPositionError(PackingError):
    """No general-position transform found within the retry budget."""


class DependentPackingError(PackingError):
    """Packing is not independent."""


class StepUnderflowError(PackingError):
    """Homotopy step fell below the minimum."""

    def __init__(self, s: float, message: str) -> None:
        super().__init__(f"step underflow at s={s:.6f}: {message}")
        self.s = s


class FlowError(PackingError):
    """Subgraph flow could not open the removed contacts."""

    def __init__(self, t: float, message: str) -> None:
        super().__init__(f"flow stopped at t={t:.3e}: {message}")
        self.t = t


@dataclass(frozen=True, eq=False)
class PinnedTriangle:
    """Clique {a, b, c} with fixed, non-collinear centers."""

    vertices: tuple[int, int, int]
    positions: np.ndarray

    def __post_init__(self) -> None:
        vertices = tuple(int(v) for v in self.vertices)
        positions = np.array(self.positions, dtype=float)
        if len(set(vertices)) != 3 or positions.shape != (3, 2):
            raise PackingError("pinned triangle needs three vertices and positions")
        u, v = positions[1] - positions[0], positions[2] - positions[0]
        if abs(u[0] * v[1] - u[1] * v[0]) / 2.0 <= 1e-9:
            raise PackingError("pinned positions are collinear")
        positions.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def default(cls, graph: ContactGraph) -> PinnedTriangle:
        """Pin the outer triangle of graph at the default unit-disc triple."""
        if graph.outer is None:
            raise PackingError(f"{graph} has no outer triangle")
        return cls(graph.outer, np.array(DEFAULT_PINS))

    def check(self, graph: ContactGraph) -> None:
        a, b, c = self.vertices
        if not (graph.has_edge(a, b) and graph.has_edge(b, c) and graph.has_edge(a, c)):
            raise PackingError(f"pinned vertices {self.vertices} are not a clique")

    def disc_radii(self) -> np.ndarray:
        """Return radii making the three pinned discs mutually tangent."""
        pa, pb, pc = self.positions
        ab, bc, ac = (
            np.linalg.norm(pa - pb),
            np.linalg.norm(pb - pc),
            np.linalg.norm(pa - pc),
        )
        return np.array([ab + ac - bc, ab + bc - ac, ac + bc - ab]) / 2.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Return True for points inside the closed triangle."""
        a, b, c = self.positions
        matrix = np.column_stack((b - a, c - a))
        coords = np.linalg.solve(matrix, (np.atleast_2d(points) - a).T).T
        slack = 1e-12
        return (
            (coords[:, 0] >= -slack)
            & (coords[:, 1] >= -slack)
            & (coords.sum(axis=1) <= 1.0 + slack)
        )


@dataclass(frozen=True)
class ContinuationConfig:
    """Step and Newton settings shared by the packing solvers."""

    initial_step: float = DEFAULT_INITIAL_STEP
    min_step: float = DEFAULT_MIN_STEP
    newton_tol: float = DEFAULT_NEWTON_TOL
    max_newton_iterations: int = DEFAULT_MAX_NEWTON
    damping_factor: float = DEFAULT_DAMPING_FACTOR
    damping_backtracks: int = DEFAULT_DAMPING_BACKTRACKS
    homotopy_path: HomotopyPath = HomotopyPath.Profile

    def __post_init__(self) -> None:
        if not 0.0 < self.min_step <= self.initial_step <= 1.0:
            raise ValueError(
                f"need 0 < min_step <= initial_step <= 1, got "
                f"{self.min_step}, {self.initial_step}"
            )
        if not self.newton_tol > 0.0:
            raise ValueError("newton_tol must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> ContinuationConfig:
        data = CONTINUATION_SCHEMA(data)
        return cls(
            initial_step=data[CONF_INITIAL_STEP],
            min_step=data[CONF_MIN_STEP],
            newton_tol=data[CONF_NEWTON_TOL],
            max_newton_iterations=data[CONF_MAX_NEWTON],
            damping_factor=data[CONF_DAMPING_FACTOR],
            damping_backtracks=data[CONF_DAMPING_BACKTRACKS],
            homotopy_path=HomotopyPath(data[CONF_HOMOTOPY_PATH]),
        )


CONTINUATION_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_INITIAL_STEP, default=DEFAULT_INITIAL_STEP): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False)
        ),
        vol.Optional(CONF_MIN_STEP, default=DEFAULT_MIN_STEP): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
        vol.Optional(CONF_NEWTON_TOL, default=DEFAULT_NEWTON_TOL): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, min_included=False)
        ),
        vol.Optional(CONF_MAX_NEWTON, default=DEFAULT_MAX_NEWTON): vol.All(
            int, vol.Range(min=1)
        ),
        vol.Optional(CONF_DAMPING_FACTOR, default=DEFAULT_DAMPING_FACTOR): vol.All(
            vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False)
        ),
        vol.Optional(CONF_DAMPING_BACKTRACKS, default=DEFAULT_DAMPING_BACKTRACKS): vol.All(
            int, vol.Range(min=0)
        ),
        vol.Optional(CONF_HOMOTOPY_PATH, default=HomotopyPath.Profile.value): vol.In(
            [path.value for path in HomotopyPath]
        ),
    }
)


@dataclass(frozen=True, eq=False)
class NewtonResult:
    """Solution of a contact system."""

    x: np.ndarray
    iterations: int
    residual: float
    condition: float


class ContactSystem:
    """Contact equations h = 0 of a graph in a chosen set of coordinates.

    Coordinates index z = (p_0x, p_0y, ..., p_{n-1}y, r_0, ..., r_{n-1});
    unselected coordinates stay at their base values.
    """

    def __init__(
        self, body: ConvexBody, graph: ContactGraph, p, r, columns
    ) -> None:
        self.body = body
        self.graph = graph
        self._n = graph.n
        self._base = np.concatenate(
            (np.asarray(p, dtype=float).ravel(), np.asarray(r, dtype=float))
        )
        self._columns = np.asarray(columns, dtype=int)

    def with_body(self, body: ConvexBody) -> ContactSystem:
        p, r = self.unpack(self.initial())
        return ContactSystem(body, self.graph, p, r, self._columns)

    def with_graph(self, graph: ContactGraph) -> ContactSystem:
        p, r = self.unpack(self.initial())
        return ContactSystem(self.body, graph, p, r, self._columns)

    def initial(self) -> np.ndarray:
        return self._base[self._columns].copy()

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = self._base.copy()
        z[self._columns] = x
        return z[: 2 * self._n].reshape(self._n, 2), z[2 * self._n :]

    def residual(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return h and the gauge residuals at x."""
        p, r = self.unpack(x)
        edges = self.graph.edge_array
        lengths = self.body.norm(p[edges[:, 0]] - p[edges[:, 1]])
        sums = r[edges[:, 0]] + r[edges[:, 1]]
        return 0.5 * (lengths**2 - sums**2), lengths - sums

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        p, r = self.unpack(x)
        point = assemble_rigidity_matrix(self.body, self.graph, p)
        radii = np.zeros((self.graph.m, self._n))
        edges = self.graph.edge_array
        rows = np.arange(self.graph.m)
        sums = r[edges[:, 0]] + r[edges[:, 1]]
        radii[rows, edges[:, 0]] = -sums
        radii[rows, edges[:, 1]] = -sums
        return np.hstack((point, radii))[:, self._columns]

    def radii_positive(self, x: np.ndarray) -> bool:
        return bool(np.all(self.unpack(x)[1] > 0.0))

    def min_gap(self, x: np.ndarray, pairs: np.ndarray) -> float:
        """Return the smallest gauge gap over the given vertex pairs."""
        if pairs.size == 0:
            return math.inf
        p, r = self.unpack(x)
        gaps = self.body.norm(p[pairs[:, 0]] - p[pairs[:, 1]]) - (
            r[pairs[:, 0]] + r[pairs[:, 1]]
        )
        return float(np.min(gaps))

    def min_relative_gap(self, x: np.ndarray, pairs: np.ndarray) -> float:
        """Return the smallest gap divided by the radius sum of its pair."""
        if pairs.size == 0:
            return math.inf
        p, r = self.unpack(x)
        sums = r[pairs[:, 0]] + r[pairs[:, 1]]
        gaps = self.body.norm(p[pairs[:, 0]] - p[pairs[:, 1]]) - sums
        return float(np.min(gaps / sums))


def _linear_step(matrix: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    if matrix.shape[0] == matrix.shape[1]:
        condition = float(np.linalg.cond(matrix))
        if not condition < SINGULAR_CONDITION:
            raise NewtonDivergenceError(f"Jacobian is singular (condition {condition:.3e})")
        return np.linalg.solve(matrix, rhs), condition
    solution, _, rank, singular = np.linalg.lstsq(matrix, rhs, rcond=None)
    condition = float(singular[0] / singular[rank - 1]) if rank else math.inf
    return solution, condition


def _regularized_step(matrix: np.ndarray, rhs: np.ndarray, weight: float) -> np.ndarray:
    """Levenberg-Marquardt step with damping weight * ||J||_F^2."""
    size = matrix.shape[1]
    damping = math.sqrt(weight) * max(float(np.linalg.norm(matrix)), EPS_ZERO)
    stacked = np.vstack((matrix, damping * np.eye(size)))
    padded = np.concatenate((rhs, np.zeros(size)))
    return np.linalg.lstsq(stacked, padded, rcond=None)[0]


def _line_search(
    system: ContactSystem,
    x: np.ndarray,
    step: np.ndarray,
    current: float,
    cfg: ContinuationConfig,
) -> np.ndarray | None:
    """Return the first damped point that keeps radii positive and lowers |h|."""
    scale = 1.0
    for _ in range(cfg.damping_backtracks + 1):
        trial = x + scale * step
        if system.radii_positive(trial):
            trial_h, _ = system.residual(trial)
            if float(np.linalg.norm(trial_h)) < current:
                return trial
        scale *= cfg.damping_factor
    return None


def solve_contacts(
    system: ContactSystem,
    cfg: ContinuationConfig,
    x0: np.ndarray | None = None,
) -> NewtonResult:
    """Damped Newton (Gauss-Newton when not square) on h = 0.

    When the damped Newton step does not lower |h|, Levenberg-Marquardt steps
    with growing damping are tried before giving up.
    """
    x = system.initial() if x0 is None else np.array(x0, dtype=float)
    condition = math.nan
    for iteration in range(cfg.max_newton_iterations + 1):
        h, gauge = system.residual(x)
        worst = float(np.max(np.abs(gauge))) if gauge.size else 0.0
        if worst <= cfg.newton_tol:
            return NewtonResult(x, iteration, worst, condition)
        if iteration == cfg.max_newton_iterations:
            break
        jacobian = system.jacobian(x)
        current = float(np.linalg.norm(h))
        try:
            step, condition = _linear_step(jacobian, -h)
            accepted = _line_search(system, x, step, current, cfg)
        except NewtonDivergenceError as exc:
            _LOGGER.debug("Newton step %d rejected: %s", iteration, exc)
            accepted = None
        for weight in REGULARIZATION_WEIGHTS:
            if accepted is not None:
                break
            step = _regularized_step(jacobian, -h, weight)
            accepted = _line_search(system, x, step, current, cfg)
        if accepted is None:
            raise NewtonDivergenceError(
                f"line search failed at iteration {iteration} (|h| = {current:.3e})"
            )
        x = accepted
    raise NewtonDivergenceError(
        f"no convergence in {cfg.max_newton_iterations} iterations (residual {worst:.3e})"
    )


def _free_columns(n: int, pinned: tuple[int, ...]) -> np.ndarray:
    pinned_columns = {2 * v + i for v in pinned for i in range(2)}
    return np.array([c for c in range(3 * n) if c not in pinned_columns], dtype=int)


def _check_output(packing: Packing, label: str) -> None:
    residual = packing.max_residual()
    if residual > FINAL_RESIDUAL_TOL:
        raise PackingError(f"{label}: contact residual {residual:.3e}")
    gaps = packing.non_edge_gaps()
    if gaps.size and np.min(gaps) <= 0.0:
        raise PackingError(f"{label}: non-edge overlap {np.min(gaps):.3e}")


def _angle_sums(faces: np.ndarray, radii: np.ndarray) -> np.ndarray:
    sums = np.zeros_like(radii)
    for corner in range(3):
        v = faces[:, corner]
        u = faces[:, (corner + 1) % 3]
        w = faces[:, (corner + 2) % 3]
        ratio = radii[u] * radii[w] / ((radii[v] + radii[u]) * (radii[v] + radii[w]))
        np.add.at(sums, v, 2.0 * np.arcsin(np.sqrt(ratio)))
    return sums


def _interior_radii(inner: np.ndarray, radii: np.ndarray, interior: np.ndarray) -> None:
    """Solve angle sum 2*pi at the interior vertices in place."""
    petals = np.bincount(inner.ravel(), minlength=len(radii))[interior]
    delta = np.sin(math.pi / petals)
    error = math.inf
    for iteration in range(ANGLE_SUM_MAX_ITERATIONS):
        theta = _angle_sums(inner, radii)[interior]
        error = float(np.max(np.abs(theta - 2.0 * math.pi)))
        if error < ANGLE_SUM_TOL:
            _LOGGER.debug("Angle sums converged after %d sweeps", iteration)
            return
        beta = np.sin(theta / (2.0 * petals))
        neighbor = beta * radii[interior] / (1.0 - beta)
        radii[interior] = (1.0 - delta) / delta * neighbor

    _LOGGER.debug("Angle-sum iteration stalled at %.3e, polishing", error)
    base = radii.copy()

    def angle_error(log_radii: np.ndarray) -> np.ndarray:
        trial = base.copy()
        trial[interior] = np.exp(log_radii)
        return _angle_sums(inner, trial)[interior] - 2.0 * math.pi

    solution = scipy.optimize.root(
        angle_error, np.log(radii[interior]), method="hybr", tol=1e-14
    )
    error = float(np.max(np.abs(angle_error(solution.x))))
    if error >= ANGLE_SUM_TOL:
        raise CirclePackingError(f"angle sums did not converge (error {error:.3e})")
    radii[interior] = np.exp(solution.x)


def _circle_intersection(pu, pv, du, dv, side_of, same_side: bool) -> np.ndarray:
    """Return the point at distances du, dv from pu, pv on the requested side."""
    axis = pv - pu
    length = float(np.linalg.norm(axis))
    e = axis / length
    along = (du * du - dv * dv + length * length) / (2.0 * length)
    height = math.sqrt(max(du * du - along * along, 0.0))
    normal = np.array([-e[1], e[0]])
    reference = axis[0] * (side_of - pu)[1] - axis[1] * (side_of - pu)[0]
    sign = 1.0 if (reference > 0.0) == same_side else -1.0
    return pu + along * e + sign * height * normal


def circle_pack(
    triangulation: ContactGraph, outer: PinnedTriangle | None = None
) -> Packing:
    """Return the disc packing of a triangulation with the outer discs pinned.

    Radii come from the uniform neighbor angle-sum iteration; the layout then
    walks the faces breadth first from the outer triangle.
    """
    if not is_maximal_planar(triangulation):
        raise CirclePackingError(f"{triangulation} is not maximal planar")
    outer = outer or PinnedTriangle.default(triangulation)
    outer.check(triangulation)
    faces = triangulation_faces(triangulation)
    outer_set = frozenset(outer.vertices)
    if outer_set not in {frozenset(face) for face in faces}:
        raise CirclePackingError(f"pinned vertices {outer.vertices} are not a face")
    inner = np.array([face for face in faces if frozenset(face) != outer_set], dtype=int)

    radii = np.empty(triangulation.n)
    radii[np.array(outer.vertices)] = outer.disc_radii()
    interior = np.array(
        [v for v in range(triangulation.n) if v not in outer_set], dtype=int
    )
    if interior.size:
        radii[interior] = 0.5 * float(np.min(outer.disc_radii()))
        _interior_radii(inner, radii, interior)

    placement = _layout(triangulation, faces, outer, radii)
    packing = Packing(triangulation, Disc(), placement, radii, pinned=outer.vertices)
    residual = packing.max_residual()
    if residual > TANGENCY_TOL:
        raise CirclePackingError(f"tangency residual {residual:.3e} after layout")
    gaps = packing.non_edge_gaps()
    if gaps.size and np.min(gaps) < SEPARATION_TOL:
        raise CirclePackingError(f"non-edge separation {np.min(gaps):.3e} after layout")
    return packing


def _layout(
    graph: ContactGraph,
    faces: list[tuple[int, int, int]],
    outer: PinnedTriangle,
    radii: np.ndarray,
) -> np.ndarray:
    placement = np.full((graph.n, 2), np.nan)
    for v, position in zip(outer.vertices, outer.positions):
        placement[v] = position
    by_edge: dict[frozenset, list[tuple[int, int, int]]] = {}
    for face in faces:
        for i in range(3):
            by_edge.setdefault(frozenset((face[i], face[(i + 1) % 3])), []).append(face)

    outer_set = frozenset(outer.vertices)
    start = next(face for face in faces if frozenset(face) == outer_set)
    done = {frozenset(start)}
    queue = deque([start])
    while queue:
        face = queue.popleft()
        for i in range(3):
            u, v, x = face[i], face[(i + 1) % 3], face[(i + 2) % 3]
            for other in by_edge[frozenset((u, v))]:
                if frozenset(other) in done:
                    continue
                w = next(vertex for vertex in other if vertex not in (u, v))
                if np.isnan(placement[w, 0]):
                    placement[w] = _circle_intersection(
                        placement[u],
                        placement[v],
                        radii[u] + radii[w],
                        radii[v] + radii[w],
                        placement[x],
                        same_side=frozenset(face) == outer_set,
                    )
                done.add(frozenset(other))
                queue.append(other)
    if np.any(np.isnan(placement)):
        raise CirclePackingError("layout did not reach every vertex")
    return placement


def general_edge_condition(packing: Packing) -> bool:
    """Return True when all edge vectors are pairwise linearly independent."""
    return _min_edge_sine(packing)[0] > GENERAL_EDGE_TOL


def _min_edge_sine(packing: Packing) -> tuple[float, float]:
    vectors = packing.edge_vectors()
    if len(vectors) < 2:
        return math.inf, math.inf
    i, j = np.triu_indices(len(vectors), k=1)
    dets = np.abs(vectors[i, 0] * vectors[j, 1] - vectors[i, 1] * vectors[j, 0])
    lengths = np.linalg.norm(vectors, axis=1)
    return float(np.min(dets / (lengths[i] * lengths[j]))), float(np.min(dets))


def _mobius_image(packing: Packing, rng: np.random.Generator) -> Packing:
    """Apply z -> alpha / (z - pole) + beta with the pole outside every disc."""
    centers = packing.p[:, 0] + 1j * packing.p[:, 1]
    middle = complex(np.mean(centers))
    bound = float(np.max(np.abs(centers - middle) + packing.r))
    distance = bound * rng.uniform(1.5, 4.0)
    pole = middle + distance * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    alpha = distance * distance * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    shifted = centers - pole
    power = np.abs(shifted) ** 2 - packing.r**2
    if np.any(power <= 0.0):
        raise GeneralPositionError("pole landed inside a disc")
    images = alpha * np.conj(shifted) / power + middle
    radii = np.abs(alpha) * packing.r / power
    placement = np.column_stack((images.real, images.imag))
    return packing.replace(p=placement, r=radii)


def mobius_general_position(packing: Packing, seed) -> Packing:
    """Move a disc packing by Mobius maps until no two edges are parallel."""
    if not isinstance(packing.body, Disc):
        raise PackingError("Mobius general position needs a disc packing")
    rng = np.random.default_rng(seed)
    candidate = packing
    for attempt in range(MOBIUS_RETRIES):
        if attempt:
            try:
                candidate = _mobius_image(packing, rng)
            except GeneralPositionError:
                continue
        sine, det = _min_edge_sine(candidate)
        if (
            sine > GENERAL_EDGE_TOL
            and det >= 1e-9
            and candidate.max_residual() <= TANGENCY_TOL
            and candidate.is_valid()
        ):
            _LOGGER.debug("General position after %d attempts", attempt)
            return candidate
    raise GeneralPositionError(f"no general position within {MOBIUS_RETRIES} attempts")


def homotopy_body(
    target: ConvexBody, s: float, path: HomotopyPath = HomotopyPath.Profile
) -> ConvexBody:
    """Return the body at parameter s on the path from the disc to target."""
    if s >= 1.0:
        return target
    if s <= 0.0:
        return Disc()
    if path is HomotopyPath.Gauge:
        return GaugeBlendBody(Disc(), target, s)
    blend = BlendProfile(BodyProfile(Disc()), target.profile, s)
    check_curvature(blend)
    return ProfileBody(blend)


def _path_body(target: ConvexBody, s: float, path: HomotopyPath) -> ConvexBody:
    """Return homotopy_body, taking the gauge blend where a profile blend is not convex."""
    try:
        return homotopy_body(target, s, path)
    except CurvatureError as exc:
        _LOGGER.debug("Profile blend at s=%.6f rejected (%s), using the gauge blend", s, exc)
        return homotopy_body(target, s, HomotopyPath.Gauge)


def body_pack(
    body: ConvexBody,
    triangulation: ContactGraph,
    outer: PinnedTriangle | None = None,
    cfg: ContinuationConfig | None = None,
) -> Packing:
    """Continue the disc packing of a triangulation to a packing of body."""
    cfg = cfg or ContinuationConfig()
    outer = outer or PinnedTriangle.default(triangulation)
    start = circle_pack(triangulation, outer)
    if isinstance(body, Disc):
        return start

    system = ContactSystem(
        Disc(),
        triangulation,
        start.p,
        start.r,
        _free_columns(triangulation.n, outer.vertices),
    )
    x = system.initial()
    s, step = 0.0, cfg.initial_step
    while s < 1.0:
        target = min(1.0, s + step)
        try:
            next_body = _path_body(body, target, cfg.homotopy_path)
            guess = _predict(system, body, s, target, x, cfg.homotopy_path)
            next_system = system.with_body(next_body)
            result = solve_contacts(next_system, cfg, guess)
            if next_system.min_gap(result.x, _non_edges(triangulation)) <= 0.0:
                raise NewtonDivergenceError("non-edge bodies overlap")
        except (
            BodyError,
            NewtonDivergenceError,
            NonSmoothEdgeError,
            ProfileError,
            np.linalg.LinAlgError,
        ) as exc:
            step /= 2.0
            _LOGGER.debug("Homotopy step to s=%.6f failed (%s), step %.3e", target, exc, step)
            if step < cfg.min_step:
                raise StepUnderflowError(target, str(exc)) from exc
            continue
        _LOGGER.debug(
            "Homotopy s=%.6f accepted after %d Newton steps, cond(R~)=%.3e",
            target,
            result.iterations,
            result.condition,
        )
        s, x, system = target, result.x, next_system
        step = min(cfg.initial_step, step * STEP_GROWTH)

    p, r = system.unpack(x)
    packing = Packing(triangulation, body, p, r, pinned=outer.vertices)
    _check_output(packing, "body_pack")
    if not np.all(outer.contains(packing.p)):
        raise PackingError("a center left the pinned triangle")
    return packing


def _non_edges(graph: ContactGraph) -> np.ndarray:
    i, j = np.triu_indices(graph.n, k=1)
    keep = [not graph.has_edge(u, v) for u, v in zip(i, j)]
    return np.column_stack((i[keep], j[keep])).astype(int)


def _predict(
    system: ContactSystem,
    target: ConvexBody,
    s: float,
    s_next: float,
    x: np.ndarray,
    path: HomotopyPath,
) -> np.ndarray:
    """Euler predictor along the homotopy, falling back to x."""
    s_ahead = min(s + PREDICTOR_STEP, 1.0)
    try:
        ahead = system.with_body(_path_body(target, s_ahead, path))
        rate = (ahead.residual(x)[0] - system.residual(x)[0]) / (s_ahead - s)
        tangent, _ = _linear_step(system.jacobian(x), -rate)
    except (BodyError, NewtonDivergenceError, ProfileError, np.linalg.LinAlgError):
        return x
    guess = x + (s_next - s) * tangent
    return guess if system.radii_positive(guess) else x


def subgraph_flow(
    packing: Packing,
    subgraph: ContactGraph,
    t_end: float,
    steps: int,
    cfg: ContinuationConfig | None = None,
    gap_target: float | None = None,
) -> Packing:
    """Open the contacts of a triangulation packing that are not in subgraph.

    Integrates x' = R~^{-1} a with a = 1 on removed edges and 0 on kept ones,
    projecting back onto the kept contacts after every RK4 step. Steps that
    break the projection or bring a non-edge pair within a quarter of its
    initial relative gap are halved.

    With gap_target set, the flow stops once every opened pair has a gap of
    gap_target times its radius sum, and runs past t_end (doubling the
    horizon) until it gets there.
    """
    cfg = cfg or ContinuationConfig()
    triangulation = packing.graph
    if len(packing.pinned) != 3:
        raise PackingError("subgraph flow needs a packing with three pinned vertices")
    if not is_maximal_planar(triangulation):
        raise PackingError("subgraph flow starts from a triangulation packing")
    removed = np.array(
        [not subgraph.has_edge(u, v) for u, v in triangulation.edges], dtype=float
    )
    if subgraph.n != triangulation.n or any(
        not triangulation.has_edge(u, v) for u, v in subgraph.edges
    ):
        raise PackingError(f"{subgraph} is not a spanning subgraph of {triangulation}")
    if not removed.any():
        return packing

    system = ContactSystem(
        packing.body,
        triangulation,
        packing.p,
        packing.r,
        _free_columns(triangulation.n, packing.pinned),
    )
    kept = system.with_graph(subgraph)
    opened = np.array([e for e, flag in zip(triangulation.edges, removed) if flag], dtype=int)
    far = _non_edges(triangulation)
    x = system.initial()
    floor = FLOW_GAP_FLOOR * system.min_relative_gap(x, far)

    def velocity(state: np.ndarray) -> np.ndarray:
        return _linear_step(system.jacobian(state), removed)[0]

    def reached(state: np.ndarray) -> bool:
        return gap_target is not None and system.min_relative_gap(state, opened) >= gap_target

    horizon, doublings = t_end, 0
    t, dt = 0.0, t_end / steps
    while not reached(x):
        if t >= horizon * (1.0 - 1e-12):
            if gap_target is None or doublings == FLOW_MAX_DOUBLINGS:
                break
            horizon, doublings = 2.0 * horizon, doublings + 1
        h = min(dt, horizon - t)
        try:
            k1 = velocity(x)
            k2 = velocity(x + 0.5 * h * k1)
            k3 = velocity(x + 0.5 * h * k2)
            k4 = velocity(x + h * k3)
            trial = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            trial = solve_contacts(kept, cfg, trial).x
            if not system.radii_positive(trial):
                raise NewtonDivergenceError("radius collapsed")
            if system.min_relative_gap(trial, far) < floor:
                raise NewtonDivergenceError("a non-edge pair approaches contact")
        except (NewtonDivergenceError, NonSmoothEdgeError, np.linalg.LinAlgError) as exc:
            dt /= 2.0
            _LOGGER.debug("Flow step at t=%.3e failed (%s), dt %.3e", t, exc, dt)
            if dt < cfg.min_step * t_end:
                if t > 0.0:
                    break
                raise FlowError(t, str(exc)) from exc
            continue
        x, t = trial, t + h
        dt = min(dt * STEP_GROWTH, horizon / steps)
    _LOGGER.debug(
        "Flow reached t=%.3e (horizon %.3e), smallest opened relative gap %.3e",
        t,
        horizon,
        system.min_relative_gap(x, opened),
    )

    p, r = system.unpack(x)
    result = Packing(subgraph, packing.body, p, r, pinned=packing.pinned)
    if system.min_gap(x, opened) <= CONTACT_TOL:
        raise FlowError(t, "removed contacts did not open")
    _check_output(result, "subgraph_flow")
    return result


def _select_columns(matrix: np.ndarray, count: int) -> np.ndarray:
    """Return count well-conditioned columns by QR with column pivoting."""
    _, _, pivots = scipy.linalg.qr(matrix, mode="economic", pivoting=True)
    return np.sort(pivots[:count])


def _kept_pins(pinned: tuple[int, ...], columns: np.ndarray) -> tuple[int, ...]:
    """Return the pinned vertices none of whose coordinates are solved for."""
    moving = set(int(c) for c in columns)
    return tuple(v for v in pinned if 2 * v not in moving and 2 * v + 1 not in moving)


def continuation_result(
    packing: Packing,
    new_body: ConvexBody,
    cfg: ContinuationConfig | None = None,
    policy: RankPolicy | None = None,
) -> tuple[Packing, NewtonResult]:
    """Re-solve the contacts for new_body in |E| pivoted coordinates.

    Pinned vertices with a pivoted coordinate may move and are unpinned in
    the result.
    """
    cfg = cfg or ContinuationConfig()
    if not independence_test(packing, policy):
        raise DependentPackingError("continuation needs an independent packing")
    matrix = assemble_packing_matrix(packing).matrix
    columns = _select_columns(matrix, packing.graph.m)
    system = ContactSystem(new_body, packing.graph, packing.p, packing.r, columns)
    result = solve_contacts(system, cfg)
    p, r = system.unpack(result.x)
    pinned = _kept_pins(packing.pinned, columns)
    moved = Packing(packing.graph, new_body, p, r, pinned=pinned)
    _check_output(moved, "continue_packing")
    _LOGGER.debug(
        "Continuation converged in %d Newton steps, %d of %d pins kept",
        result.iterations,
        len(pinned),
        len(packing.pinned),
    )
    return moved, result


def continue_packing(
    packing: Packing,
    new_body: ConvexBody,
    cfg: ContinuationConfig | None = None,
    policy: RankPolicy | None = None,
) -> Packing:
    """Carry an independent packing over to a nearby body."""
    return continuation_result(packing, new_body, cfg, policy)[0]


def resolve_radii(
    packing: Packing,
    radii,
    cfg: ContinuationConfig | None = None,
    policy: RankPolicy | None = None,
) -> Packing:
    """Hold the contact graph and new radii fixed and re-solve the centers.

    The radii are moved along the segment from the old to the new values,
    halving the step when Newton fails or a non-edge pair overlaps.
    """
    cfg = cfg or ContinuationConfig()
    radii = np.asarray(radii, dtype=float)
    if radii.shape != packing.r.shape or not np.all(radii > 0.0):
        raise PackingError(f"need {packing.n} positive radii, got {radii.shape}")
    point = assemble_rigidity_matrix(packing.body, packing.graph, packing.p)
    rank = rank_report(point, policy).rank
    columns = _select_columns(point, max(rank, 1))
    far = _non_edges(packing.graph)

    system = ContactSystem(packing.body, packing.graph, packing.p, packing.r, columns)
    x = system.initial()
    s, step = 0.0, 1.0
    while s < 1.0:
        target = min(1.0, s + step)
        blend = radii if target == 1.0 else (1.0 - target) * packing.r + target * radii
        next_system = ContactSystem(packing.body, packing.graph, packing.p, blend, columns)
        try:
            result = solve_contacts(next_system, cfg, x)
            if next_system.min_gap(result.x, far) <= 0.0:
                raise NewtonDivergenceError("non-edge bodies overlap")
        except (NewtonDivergenceError, NonSmoothEdgeError, np.linalg.LinAlgError) as exc:
            step /= 2.0
            _LOGGER.debug("Radii step to s=%.6f failed (%s), step %.3e", target, exc, step)
            if step < cfg.min_step:
                raise NewtonDivergenceError(
                    f"radii continuation stalled at s={target:.6f}: {exc}"
                ) from exc
            continue
        s, x, system = target, result.x, next_system
        step = min(1.0, step * STEP_GROWTH)

    p, r = system.unpack(x)
    moved = Packing(
        packing.graph, packing.body, p, r, pinned=_kept_pins(packing.pinned, columns)
    )
    _check_output(moved, "resolve_radii")
    return moved
