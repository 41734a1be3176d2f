"""Packings, (packing) rigidity matrices, ranks, flexes and stresses."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
import scipy.linalg

from ..const import (
    CONTACT_TOL,
    FLEX_TOL,
    RANK_RELATIVE_TOL,
    RANK_SWEEP_FACTORS,
    STRESS_ZERO_TOL,
    RigidityVerdict,
)
from .body import ConvexBody, EllipseBody, NonSmoothPointError
from .sparsity import ContactGraph

_LOGGER = logging.getLogger(__name__)

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


class RigidityError(Exception):
    """Rigidity analysis failed."""


class InvalidPackingError(RigidityError):
    """Placement and radii violate the packing conditions."""


class NonSmoothEdgeError(RigidityError):
    """An edge direction is not a smooth point of the body."""


class KernelInconsistencyError(RigidityError):
    """Trivial flexes are missing from the kernel."""


def _readonly(values, shape: tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != shape:
        raise InvalidPackingError(f"{name} has shape {array.shape}, expected {shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidPackingError(f"{name} has non-finite entries")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Packing:
    """Contact graph, body, centers p and radii r of a homothetic packing."""

    graph: ContactGraph
    body: ConvexBody
    p: np.ndarray
    r: np.ndarray
    pinned: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        n = self.graph.n
        object.__setattr__(self, "p", _readonly(self.p, (n, 2), "placement"))
        object.__setattr__(self, "r", _readonly(self.r, (n,), "radii"))
        object.__setattr__(self, "pinned", tuple(int(v) for v in self.pinned))
        if np.any(self.r <= 0.0):
            raise InvalidPackingError("radii must be positive")

    @property
    def n(self) -> int:
        return self.graph.n

    def edge_vectors(self) -> np.ndarray:
        """Return p_u - p_v for each edge (u, v)."""
        edges = self.graph.edge_array
        return self.p[edges[:, 0]] - self.p[edges[:, 1]]

    def contact_residuals(self) -> np.ndarray:
        """Return ||p_u - p_v||_C - (r_u + r_v) on edges."""
        edges = self.graph.edge_array
        return self.body.norm(self.edge_vectors()) - (
            self.r[edges[:, 0]] + self.r[edges[:, 1]]
        )

    def pair_gaps(self) -> tuple[np.ndarray, np.ndarray]:
        """Return all vertex pairs i < j and their gauge gaps."""
        i, j = np.triu_indices(self.n, k=1)
        gaps = self.body.norm(self.p[i] - self.p[j]) - (self.r[i] + self.r[j])
        return np.stack((i, j), axis=1), gaps

    def non_edge_gaps(self) -> np.ndarray:
        pairs, gaps = self.pair_gaps()
        mask = np.array([not self.graph.has_edge(u, v) for u, v in pairs], dtype=bool)
        return gaps[mask]

    def max_residual(self) -> float:
        residuals = self.contact_residuals()
        return float(np.max(np.abs(residuals))) if residuals.size else 0.0

    def validate(self, tol: float = CONTACT_TOL) -> None:
        """Raise unless edges touch within tol and non-edges are separated by more."""
        residuals = self.contact_residuals()
        if residuals.size and np.max(np.abs(residuals)) > tol:
            worst = int(np.argmax(np.abs(residuals)))
            raise InvalidPackingError(
                f"edge {self.graph.edges[worst]} has contact residual "
                f"{residuals[worst]:.3e} > {tol:.1e}"
            )
        pairs, gaps = self.pair_gaps()
        for (u, v), gap in zip(pairs, gaps):
            if not self.graph.has_edge(u, v) and gap <= tol:
                raise InvalidPackingError(
                    f"non-edge ({u}, {v}) has gap {gap:.3e} <= {tol:.1e}"
                )

    def is_valid(self, tol: float = CONTACT_TOL) -> bool:
        try:
            self.validate(tol)
        except InvalidPackingError:
            return False
        return True

    def replace(self, **changes) -> Packing:
        return replace(self, **changes)


def contact_graph(
    body: ConvexBody, p, r, tol: float = CONTACT_TOL
) -> ContactGraph:
    """Return the graph of pairs whose gauge gap is within tol of zero."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    i, j = np.triu_indices(len(r), k=1)
    gaps = body.norm(p[i] - p[j]) - (r[i] + r[j])
    touching = np.abs(gaps) <= tol
    return ContactGraph(len(r), list(zip(i[touching].tolist(), j[touching].tolist())))


def packing_map(packing: Packing) -> np.ndarray:
    """Return h_e = (||p_u - p_v||_C^2 - (r_u + r_v)^2) / 2 on edges."""
    edges = packing.graph.edge_array
    sums = packing.r[edges[:, 0]] + packing.r[edges[:, 1]]
    return 0.5 * (packing.body.norm(packing.edge_vectors()) ** 2 - sums**2)


def _edge_supports(body: ConvexBody, graph: ContactGraph, p: np.ndarray) -> np.ndarray:
    edges = graph.edge_array
    vectors = p[edges[:, 0]] - p[edges[:, 1]]
    lengths = np.linalg.norm(vectors, axis=-1)
    if np.any(lengths == 0.0):
        raise NonSmoothEdgeError(
            f"edge {graph.edges[int(np.argmin(lengths))]} has coincident ends"
        )
    kinks = body.is_kink(vectors)
    if np.any(kinks):
        raise NonSmoothEdgeError(
            f"edge {graph.edges[int(np.argmax(kinks))]} points at a non-smooth boundary point"
        )
    try:
        return body.duality_map(vectors)
    except NonSmoothPointError as exc:
        raise NonSmoothEdgeError(str(exc)) from exc


def assemble_rigidity_matrix(body: ConvexBody, graph: ContactGraph, p) -> np.ndarray:
    """Return R_C(G,p), the |E| x 2|V| Jacobian of the rigidity map."""
    p = np.asarray(p, dtype=float)
    matrix = np.zeros((graph.m, 2 * graph.n))
    if graph.m == 0:
        return matrix
    edges = graph.edge_array
    phi = _edge_supports(body, graph, p)
    rows = np.arange(graph.m)
    # phi_C is odd, so the w entries are phi_C(p_w - p_u) = -phi_C(p_u - p_w)
    for i in range(2):
        matrix[rows, 2 * edges[:, 0] + i] = phi[:, i]
        matrix[rows, 2 * edges[:, 1] + i] = -phi[:, i]
    return matrix


@dataclass(frozen=True, eq=False)
class PackingRigidityMatrix:
    """[R_C(G,p) | I(G,r)] with labeled rows and columns."""

    matrix: np.ndarray
    n: int
    row_labels: tuple[tuple[int, int], ...]

    @property
    def column_labels(self) -> list[tuple]:
        points = [("p", v, i) for v in range(self.n) for i in range(2)]
        return points + [("r", v) for v in range(self.n)]

    @property
    def point_block(self) -> np.ndarray:
        return self.matrix[:, : 2 * self.n]

    @property
    def radii_block(self) -> np.ndarray:
        return self.matrix[:, 2 * self.n :]

    @staticmethod
    def point_column(v: int, i: int) -> int:
        return 2 * v + i

    def radius_column(self, v: int) -> int:
        return 2 * self.n + v


def assemble_packing_matrix(
    packing: Packing, gauge_lengths: bool = False
) -> PackingRigidityMatrix:
    """Return the packing rigidity matrix.

    With gauge_lengths set, the radii entries are -||p_v - p_w||_C instead of
    -(r_v + r_w); the two agree on exact contacts.
    """
    graph = packing.graph
    point = assemble_rigidity_matrix(packing.body, graph, packing.p)
    radii = np.zeros((graph.m, graph.n))
    if graph.m:
        edges = graph.edge_array
        if gauge_lengths:
            values = packing.body.norm(packing.edge_vectors())
        else:
            values = packing.r[edges[:, 0]] + packing.r[edges[:, 1]]
        rows = np.arange(graph.m)
        radii[rows, edges[:, 0]] = -values
        radii[rows, edges[:, 1]] = -values
    return PackingRigidityMatrix(np.hstack((point, radii)), graph.n, graph.edges)


@dataclass(frozen=True)
class RankPolicy:
    """SVD rank threshold: atol if given, else max(m, n) * sigma_max * rtol."""

    rtol: float = RANK_RELATIVE_TOL
    atol: float | None = None
    sweep: tuple[float, ...] = RANK_SWEEP_FACTORS

    def tolerance(self, singular_values: np.ndarray, shape: tuple[int, int]) -> float:
        if self.atol is not None:
            return self.atol
        if singular_values.size == 0:
            return 0.0
        return max(shape) * float(singular_values[0]) * self.rtol

    def scaled(self, factor: float) -> RankPolicy:
        if self.atol is not None:
            return replace(self, atol=self.atol * factor)
        return replace(self, rtol=self.rtol * factor)


@dataclass(frozen=True, eq=False)
class RankReport:
    """Numerical rank with orthonormal kernel bases."""

    rank: int
    singular_values: np.ndarray
    right_kernel: np.ndarray
    left_kernel: np.ndarray
    tolerance: float
    shape: tuple[int, int] = field(default=(0, 0))

    @property
    def nullity(self) -> int:
        return self.right_kernel.shape[1]

    @property
    def left_nullity(self) -> int:
        return self.left_kernel.shape[1]


def rank_report(matrix, policy: RankPolicy | None = None) -> RankReport:
    """Return rank, singular values and kernels of matrix."""
    policy = policy or RankPolicy()
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        matrix = np.atleast_2d(matrix)
    rows, cols = matrix.shape
    if matrix.size == 0:
        return RankReport(0, np.zeros(0), np.eye(cols), np.eye(rows), 0.0, (rows, cols))
    u, s, vh = scipy.linalg.svd(matrix, full_matrices=True)
    tol = policy.tolerance(s, matrix.shape)
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0.0 else 0
    return RankReport(rank, s, vh[rank:].T.copy(), u[:, rank:].copy(), tol, (rows, cols))


def rank_sweep(matrix, policy: RankPolicy | None = None) -> tuple[int, ...]:
    """Return the rank at each tolerance factor of the policy sweep."""
    policy = policy or RankPolicy()
    return tuple(rank_report(matrix, policy.scaled(f)).rank for f in policy.sweep)


@dataclass(frozen=True)
class IndependenceResult:
    """Independence verdict with its tolerance sweep."""

    independent: bool
    rank: int
    edges: int
    sweep: tuple[int, ...]

    @property
    def ambiguous(self) -> bool:
        verdicts = {rank == self.edges for rank in self.sweep}
        return len(verdicts) > 1


def independence_sweep(
    packing: Packing, policy: RankPolicy | None = None
) -> IndependenceResult:
    """Decide rank R_C(G,p) = |E| and report its stability across the sweep."""
    policy = policy or RankPolicy()
    matrix = assemble_rigidity_matrix(packing.body, packing.graph, packing.p)
    rank = rank_report(matrix, policy).rank
    return IndependenceResult(
        rank == packing.graph.m, rank, packing.graph.m, rank_sweep(matrix, policy)
    )


def independence_test(packing: Packing, policy: RankPolicy | None = None) -> bool:
    """Return True iff rank R_C(G,p) = |E|."""
    return independence_sweep(packing, policy).independent


@dataclass(frozen=True, eq=False)
class TrivialFlexBasis:
    """Translation flexes, plus the rotation flex for Euclidean bodies."""

    flexes: np.ndarray

    @property
    def rank(self) -> int:
        if self.flexes.size == 0:
            return 0
        return int(np.linalg.matrix_rank(self.flexes))


def trivial_flexes(packing: Packing) -> TrivialFlexBasis:
    """Return the flexes induced by isometries of the normed plane."""
    n = packing.n
    flexes = [np.tile([1.0, 0.0], n), np.tile([0.0, 1.0], n)]
    if packing.body.euclidean:
        generator = _ROTATION
        if isinstance(packing.body, EllipseBody):
            matrix = packing.body.matrix
            generator = matrix @ _ROTATION @ np.linalg.inv(matrix)
        flexes.append((packing.p @ generator.T).ravel())
    return TrivialFlexBasis(np.array(flexes))


@dataclass(frozen=True)
class RigidityResult:
    """Infinitesimal rigidity verdict."""

    verdict: RigidityVerdict
    kernel_dim: int
    k: int

    @property
    def rigid(self) -> bool:
        return self.verdict is RigidityVerdict.Rigid


def infinitesimal_rigidity_test(
    packing: Packing, policy: RankPolicy | None = None
) -> RigidityResult:
    """Compare dim ker R_C(G,p) with the isometry dimension k.

    For smooth bodies a rigid verdict is also a sticky rigidity verdict.
    """
    matrix = assemble_rigidity_matrix(packing.body, packing.graph, packing.p)
    report = rank_report(matrix, policy)
    basis = trivial_flexes(packing)
    k = min(3 if packing.body.euclidean else 2, basis.rank)
    if matrix.size:
        scale = (1.0 + float(np.max(np.abs(matrix)))) * (
            1.0 + float(np.max(np.abs(packing.p)))
        )
        drift = float(np.max(np.abs(matrix @ basis.flexes.T)))
        if drift > FLEX_TOL * scale:
            raise KernelInconsistencyError(
                f"trivial flexes leave residual {drift:.3e} in R_C(G,p)"
            )
    if report.nullity < k:
        raise KernelInconsistencyError(
            f"kernel dimension {report.nullity} is below k={k}"
        )
    verdict = RigidityVerdict.Rigid if report.nullity == k else RigidityVerdict.Flexible
    return RigidityResult(verdict, report.nullity, k)


def normalize_stress(stress: np.ndarray) -> np.ndarray:
    """Scale to max-absolute entry 1 with the first nonzero entry positive."""
    stress = np.asarray(stress, dtype=float)
    peak = float(np.max(np.abs(stress)))
    if peak == 0.0:
        return stress.copy()
    stress = stress / peak
    nonzero = np.flatnonzero(np.abs(stress) > STRESS_ZERO_TOL)
    if stress[nonzero[0]] < 0.0:
        stress = -stress
    return stress


def _left_kernel_vector(matrix: np.ndarray, policy: RankPolicy | None) -> np.ndarray | None:
    report = rank_report(matrix, policy)
    if report.left_nullity == 0 or matrix.shape[0] == 0:
        return None
    return normalize_stress(report.left_kernel[:, 0])


def edge_length_stress(
    packing: Packing, policy: RankPolicy | None = None
) -> np.ndarray | None:
    """Return a weighting balancing supports and gauge lengths at every vertex."""
    matrix = assemble_packing_matrix(packing, gauge_lengths=True).matrix
    return _left_kernel_vector(matrix, policy)


def equilibrium_stress(
    packing: Packing, policy: RankPolicy | None = None
) -> np.ndarray | None:
    """Return a weighting balancing the supports at every vertex."""
    matrix = assemble_rigidity_matrix(packing.body, packing.graph, packing.p)
    return _left_kernel_vector(matrix, policy)


def stress_residuals(packing: Packing, stress) -> tuple[np.ndarray, np.ndarray]:
    """Return per-vertex sums of a_vw phi(p_v - p_w) and of a_vw ||p_v - p_w||_C."""
    stress = np.asarray(stress, dtype=float)
    edges = packing.graph.edge_array
    vectors = packing.edge_vectors()
    supports = packing.body.duality_map(vectors) * stress[:, None]
    lengths = packing.body.norm(vectors) * stress
    support_sum = np.zeros((packing.n, 2))
    length_sum = np.zeros(packing.n)
    np.add.at(support_sum, edges[:, 0], supports)
    np.add.at(support_sum, edges[:, 1], -supports)
    np.add.at(length_sum, edges[:, 0], lengths)
    np.add.at(length_sum, edges[:, 1], lengths)
    return support_sum, length_sum


def length_balance_residual(packing: Packing, stress) -> np.ndarray:
    """Return sum over w of a_vw ||p_v - p_w||_C for each vertex v."""
    return stress_residuals(packing, stress)[1]


def vertex_index(graph: ContactGraph, p, stress, v: int) -> int:
    """Count cyclic sign changes of the stress around v in angular order."""
    p = np.asarray(p, dtype=float)
    stress = np.asarray(stress, dtype=float)
    incident = []
    for w in graph.neighbors(v):
        e = graph.edge_index(v, w)
        if abs(stress[e]) > STRESS_ZERO_TOL:
            dx, dy = p[w] - p[v]
            incident.append((math.atan2(dy, dx), e, stress[e]))
    if not incident:
        raise RigidityError(f"vertex {v} has no nonzero incident stress")
    incident.sort()
    signs = [value > 0.0 for _, _, value in incident]
    return sum(signs[i] != signs[(i + 1) % len(signs)] for i in range(len(signs)))


@dataclass(frozen=True)
class IndexBoundReport:
    """Vertex indices against the upper and lower index bounds."""

    indices: dict[int, int]
    total: int
    upper_bound: int
    upper_holds: bool
    lower_holds: bool

    @property
    def relevant(self) -> tuple[int, ...]:
        return tuple(sorted(self.indices))


def index_bound_check(graph: ContactGraph, p, stress) -> IndexBoundReport:
    """Compare the index sum with 4|V'| - 8 and each index with 4.

    Vertices with fewer than two nonzero incident stresses are skipped.
    """
    stress = np.asarray(stress, dtype=float)
    indices = {}
    for v in range(graph.n):
        nonzero = sum(
            abs(stress[graph.edge_index(v, w)]) > STRESS_ZERO_TOL
            for w in graph.neighbors(v)
        )
        if nonzero >= 2:
            indices[v] = vertex_index(graph, p, stress, v)
    total = sum(indices.values())
    upper = 4 * len(indices) - 8
    return IndexBoundReport(
        indices,
        total,
        upper,
        bool(indices) and total <= upper,
        bool(indices) and all(value >= 4 for value in indices.values()),
    )


def radii_projection_rank(packing: Packing, policy: RankPolicy | None = None) -> int:
    """Return the rank of the radii projection restricted to ker R_C(G,p,r)."""
    matrix = assemble_packing_matrix(packing).matrix
    kernel = rank_report(matrix, policy).right_kernel
    radii_rows = kernel[2 * packing.n :, :]
    return rank_report(radii_rows, policy).rank if radii_rows.size else 0


def rank_equivalence(
    packing: Packing, policy: RankPolicy | None = None
) -> tuple[bool, bool]:
    """Return (rank d(rho) = |V|, rank R_C(G,p) = |E|); equal for surjective packings."""
    return (
        radii_projection_rank(packing, policy) == packing.n,
        independence_test(packing, policy),
    )


def framework_crossings(graph: ContactGraph, p) -> list[tuple[int, int]]:
    """Return pairs of edge indices whose segments cross or overlap."""
    p = np.asarray(p, dtype=float)
    edges = graph.edge_array
    if graph.m < 2:
        return []
    scale = max(1.0, float(np.max(np.abs(p))))
    tol = 1e-12 * scale * scale
    first, second = np.triu_indices(graph.m, k=1)
    a, b = p[edges[first, 0]], p[edges[first, 1]]
    c, d = p[edges[second, 0]], p[edges[second, 1]]

    def orient(x, y, z):
        cross = (y[:, 0] - x[:, 0]) * (z[:, 1] - x[:, 1]) - (y[:, 1] - x[:, 1]) * (
            z[:, 0] - x[:, 0]
        )
        return np.where(np.abs(cross) <= tol, 0.0, np.sign(cross))

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    shared = (
        (edges[first, 0] == edges[second, 0])
        | (edges[first, 0] == edges[second, 1])
        | (edges[first, 1] == edges[second, 0])
        | (edges[first, 1] == edges[second, 1])
    )
    proper = (o1 * o2 < 0) & (o3 * o4 < 0) & ~shared

    # shared endpoint: overlap when the other ends are collinear on the same side
    overlap = np.zeros_like(proper)
    for idx in np.flatnonzero(shared):
        e, f = graph.edges[first[idx]], graph.edges[second[idx]]
        common = set(e) & set(f)
        hub = common.pop()
        x = p[e[0] if e[1] == hub else e[1]] - p[hub]
        y = p[f[0] if f[1] == hub else f[1]] - p[hub]
        cross = x[0] * y[1] - x[1] * y[0]
        if abs(cross) <= tol and float(np.dot(x, y)) > 0.0:
            overlap[idx] = True

    hits = np.flatnonzero(proper | overlap)
    return [(int(first[i]), int(second[i])) for i in hits]
