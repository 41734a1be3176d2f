"""Fixtures, randomized trial campaigns and the densification pipeline."""

from __future__ import annotations

import asyncio
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import logging
import math
from typing import Any

import numpy as np
import voluptuous as vol

from .const import (
    CONF_FAMILIES,
    CONF_MASTER_SEED,
    CONF_N_RANGE,
    CONF_PERTURBATION,
    CONF_RANK_RTOL,
    CONF_SUBGRAPH_EDGES,
    CONF_SWEEP_FACTORS,
    CONF_TRIALS,
    CONF_WORKERS,
    DEFAULT_EPS,
    DEFAULT_FLOW_GAP,
    DEFAULT_FLOW_STEPS,
    DEFAULT_MASTER_SEED,
    DEFAULT_N_RANGE,
    DEFAULT_PERTURBATION,
    DEFAULT_RETRIES,
    DEFAULT_SUPPORT_PERTURBATION,
    DEFAULT_TRIALS,
    DEFAULT_WORKERS,
    FLOW_GAP_MARGIN,
    MAX_AMBIGUOUS_SHARE,
    MAX_FAILED_SHARE,
    RANK_RELATIVE_TOL,
    RANK_SWEEP_FACTORS,
    RESULT_AMBIGUOUS,
    RESULT_FAILED,
    RESULT_SUCCESS,
    BodyFamily,
    TrialStage,
)
from .geometry.body import (
    ConvexBody,
    Disc,
    ExpFamilyBody,
    PNormBody,
    ProfileBody,
    body_distance,
    body_from_profile,
    retarget_supports,
)
from .geometry.packer import (
    ContinuationConfig,
    PinnedTriangle,
    body_pack,
    circle_pack,
    continue_packing,
    general_edge_condition,
    mobius_general_position,
    resolve_radii,
    subgraph_flow,
)
from .geometry.profile import PolygonProfile, SplineProfile, uniform_angles
from .geometry.rigidity import (
    Packing,
    RankPolicy,
    assemble_packing_matrix,
    assemble_rigidity_matrix,
    contact_graph,
    edge_length_stress,
    equilibrium_stress,
    framework_crossings,
    independence_sweep,
    index_bound_check,
    infinitesimal_rigidity_test,
    radii_projection_rank,
    rank_report,
    stress_residuals,
)
from .geometry.sparsity import (
    ContactGraph,
    embed_in_triangulation,
    is_planar,
    pebble_sparse,
    random_connected_subgraph,
    random_triangulation,
)

_LOGGER = logging.getLogger(__name__)

SQUARE_FACETS = ((1.0, 0.0), (0.0, 1.0))
SQUARE_X1 = np.array([1.0, 1.0])
SQUARE_X2 = np.array([1.0, -1.0])


class HarnessError(Exception):
    """Harness pipeline failed."""


class FixtureError(HarnessError):
    """Fixture parameters give an invalid packing."""


class DensifyError(HarnessError):
    """Densification exhausted its retries."""

    def __init__(self, stage: TrialStage, message: str) -> None:
        super().__init__(f"{stage.value}: {message}")
        self.stage = stage


def square_counterexample(t: float) -> Packing:
    """Return the 4-cycle square packing with two large and two small squares.

    The cycle v1 v2 v3 v4 carries a stress balancing the contact supports at
    every vertex, but no stress balancing the gauge lengths as well.
    """
    if not t > 0.5:
        raise FixtureError(f"small squares overlap for t={t} <= 1/2")
    graph = ContactGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    p1 = (1.0 + t) * (SQUARE_X1 + SQUARE_X2)
    p2 = t * (SQUARE_X1 - SQUARE_X2)
    placement = np.array([p1, p2, -p1, -p2])
    radii = np.array([1.0 + 2.0 * t, 1.0, 1.0 + 2.0 * t, 1.0])
    body = ProfileBody(PolygonProfile(SQUARE_FACETS))
    packing = Packing(graph, body, placement, radii)
    packing.validate()
    return packing


def contact_directions(packing: Packing) -> np.ndarray:
    """Return (p_u - p_w) / ||p_u - p_w||_C for every edge (u, w)."""
    vectors = packing.edge_vectors()
    return vectors / packing.body.norm(vectors)[:, None]


def analyze_packing(packing: Packing, policy: RankPolicy | None = None) -> dict[str, Any]:
    """Return the rank, sparsity and planarity report of a packing."""
    policy = policy or RankPolicy()
    graph = packing.graph
    k = 3 if packing.body.euclidean else 2
    independence = independence_sweep(packing, policy)
    rigidity = infinitesimal_rigidity_test(packing, policy)
    packing_matrix = assemble_packing_matrix(packing).matrix
    gaps = packing.non_edge_gaps()
    return {
        "n": graph.n,
        "m": graph.m,
        "k": k,
        "sparse": pebble_sparse(graph, k).verdict.value,
        "sparse_22": pebble_sparse(graph, 2).verdict.value,
        "planar_graph": is_planar(graph)[0],
        "crossings": len(framework_crossings(graph, packing.p)),
        "rank": independence.rank,
        "rank_sweep": list(independence.sweep),
        "independent": independence.independent,
        "rank_ambiguous": independence.ambiguous,
        "kernel_dim": rigidity.kernel_dim,
        "rigidity": rigidity.verdict.value,
        "packing_rank": rank_report(packing_matrix, policy).rank,
        "radii_projection_rank": radii_projection_rank(packing, policy),
        "general_edge_condition": general_edge_condition(packing),
        "max_residual": packing.max_residual(),
        "min_gap": float(np.min(gaps)) if gaps.size else None,
        "valid": packing.is_valid(),
    }


def stress_report(packing: Packing, policy: RankPolicy | None = None) -> dict[str, Any]:
    """Return the framework stress, the edge-length stress and their residuals."""
    policy = policy or RankPolicy()
    framework = assemble_rigidity_matrix(packing.body, packing.graph, packing.p)
    lengths = assemble_packing_matrix(packing, gauge_lengths=True).matrix
    stress = equilibrium_stress(packing, policy)
    report: dict[str, Any] = {
        "edges": [list(edge) for edge in packing.graph.edges],
        "framework_rank": rank_report(framework, policy).rank,
        "length_matrix_rank": rank_report(lengths, policy).rank,
        "framework_stress": None,
        "edge_length_stress": None,
    }
    if stress is not None:
        supports, balance = stress_residuals(packing, stress)
        bound = index_bound_check(packing.graph, packing.p, stress)
        report["framework_stress"] = stress.tolist()
        report["support_residual"] = float(np.max(np.abs(supports)))
        report["length_balance_residual"] = balance.tolist()
        report["vertex_indices"] = {str(v): int(i) for v, i in bound.indices.items()}
        report["index_upper_bound_holds"] = bool(bound.upper_holds)
    length_stress = edge_length_stress(packing, policy)
    if length_stress is not None:
        report["edge_length_stress"] = length_stress.tolist()
    return report


@dataclass(frozen=True)
class TrialConfig:
    """Randomized campaign settings."""

    trials: int = DEFAULT_TRIALS
    families: tuple[BodyFamily, ...] = (BodyFamily.ExpFamily, BodyFamily.PNorm)
    n_range: tuple[int, int] = DEFAULT_N_RANGE
    subgraph_edges: tuple[int, int] | None = None
    radii_perturbation: tuple[float, float] = DEFAULT_PERTURBATION
    master_seed: int = DEFAULT_MASTER_SEED
    policy: RankPolicy = field(default_factory=RankPolicy)
    workers: int = DEFAULT_WORKERS
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trial count must be positive, got {self.trials}")
        if not self.families:
            raise ValueError("at least one body family is required")
        low, high = self.n_range
        if not 4 <= low <= high:
            raise ValueError(f"n range {self.n_range} must satisfy 4 <= low <= high")
        small, large = self.radii_perturbation
        if not 0.0 < small <= large:
            raise ValueError(f"perturbation range {self.radii_perturbation} is invalid")

    @classmethod
    def from_dict(
        cls, data: dict, continuation: ContinuationConfig | None = None
    ) -> TrialConfig:
        data = TRIAL_SCHEMA(data)
        edges = data.get(CONF_SUBGRAPH_EDGES)
        return cls(
            trials=data[CONF_TRIALS],
            families=tuple(BodyFamily(family) for family in data[CONF_FAMILIES]),
            n_range=tuple(data[CONF_N_RANGE]),
            subgraph_edges=tuple(edges) if edges else None,
            radii_perturbation=tuple(data[CONF_PERTURBATION]),
            master_seed=data[CONF_MASTER_SEED],
            policy=RankPolicy(
                rtol=data[CONF_RANK_RTOL], sweep=tuple(data[CONF_SWEEP_FACTORS])
            ),
            workers=data[CONF_WORKERS],
            continuation=continuation or ContinuationConfig(),
        )

    def edge_range(self, n: int) -> tuple[int, int]:
        """Return the subgraph edge-count range for n vertices."""
        low, high = self.subgraph_edges or (n - 1, 2 * n - 2)
        return max(low, n - 1), min(high, 3 * n - 6)


def _pair(kind):
    return vol.All([kind], vol.Length(min=2, max=2))


TRIAL_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_TRIALS, default=DEFAULT_TRIALS): vol.All(int, vol.Range(min=1)),
        vol.Optional(
            CONF_FAMILIES,
            default=[BodyFamily.ExpFamily.value, BodyFamily.PNorm.value],
        ): vol.All([vol.In([family.value for family in BodyFamily])], vol.Length(min=1)),
        vol.Optional(CONF_N_RANGE, default=list(DEFAULT_N_RANGE)): _pair(int),
        vol.Optional(CONF_SUBGRAPH_EDGES): vol.Any(None, _pair(int)),
        vol.Optional(CONF_PERTURBATION, default=list(DEFAULT_PERTURBATION)): _pair(
            vol.Coerce(float)
        ),
        vol.Optional(CONF_MASTER_SEED, default=DEFAULT_MASTER_SEED): int,
        vol.Optional(CONF_RANK_RTOL, default=RANK_RELATIVE_TOL): vol.Coerce(float),
        vol.Optional(CONF_SWEEP_FACTORS, default=list(RANK_SWEEP_FACTORS)): vol.All(
            [vol.Coerce(float)], vol.Length(min=1)
        ),
        vol.Optional(CONF_WORKERS, default=DEFAULT_WORKERS): vol.All(int, vol.Range(min=1)),
    },
    extra=vol.REMOVE_EXTRA,
)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial; failures carry their stage."""

    index: int
    family: str
    n: int
    m: int
    status: str
    stage: str | None = None
    error: str | None = None
    perturbation: float | None = None
    k: int | None = None
    sparse: bool | None = None
    tight: bool | None = None
    planar: bool | None = None
    independent: bool | None = None
    rank: int | None = None
    kernel_dim: int | None = None
    residual: float | None = None
    graph_preserved: bool | None = None

    @property
    def completed(self) -> bool:
        return self.status == RESULT_SUCCESS

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TrialReport:
    """Trial records sorted by index, with aggregate rates over completed trials."""

    records: tuple[TrialRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "records", tuple(sorted(self.records, key=lambda rec: rec.index))
        )

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def completed(self) -> tuple[TrialRecord, ...]:
        return tuple(rec for rec in self.records if rec.completed)

    @property
    def failed(self) -> int:
        return sum(rec.status == RESULT_FAILED for rec in self.records)

    @property
    def ambiguous(self) -> int:
        return sum(rec.status == RESULT_AMBIGUOUS for rec in self.records)

    def failures_by_stage(self) -> dict[str, int]:
        return dict(Counter(rec.stage for rec in self.records if rec.stage))

    def _rate(self, key: str, records=None) -> float | None:
        records = self.completed if records is None else records
        if not records:
            return None
        return sum(bool(getattr(rec, key)) for rec in records) / len(records)

    @property
    def sparse_rate(self) -> float | None:
        return self._rate("sparse")

    @property
    def planar_rate(self) -> float | None:
        return self._rate("planar")

    @property
    def independence_rate(self) -> float | None:
        return self._rate("independent")

    @property
    def tight_kernel_rate(self) -> float | None:
        """Return the share of tight trials whose kernel dimension equals k."""
        tight = [rec for rec in self.completed if rec.tight]
        if not tight:
            return None
        return sum(rec.kernel_dim == rec.k for rec in tight) / len(tight)

    @property
    def ambiguous_rate(self) -> float:
        return self.ambiguous / self.total if self.total else 0.0

    @property
    def failure_rate(self) -> float:
        return self.failed / self.total if self.total else 0.0

    @property
    def passed(self) -> bool:
        """Return True when every completed trial agrees with the sparsity theorem.

        Failed and rank-ambiguous trials must each stay below their share of
        the campaign.
        """
        rates = (
            self.sparse_rate,
            self.planar_rate,
            self.independence_rate,
            self.tight_kernel_rate,
        )
        return (
            bool(self.completed)
            and all(rate is None or rate == 1.0 for rate in rates)
            and self.ambiguous_rate < MAX_AMBIGUOUS_SHARE
            and self.failure_rate < MAX_FAILED_SHARE
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "completed": len(self.completed),
            "failed": self.failed,
            "rank_ambiguous": self.ambiguous,
            "failures_by_stage": self.failures_by_stage(),
            "sparse_rate": self.sparse_rate,
            "planar_rate": self.planar_rate,
            "independence_rate": self.independence_rate,
            "tight_kernel_rate": self.tight_kernel_rate,
            "ambiguous_rate": self.ambiguous_rate,
            "failure_rate": self.failure_rate,
            "passed": self.passed,
            "records": [rec.as_dict() for rec in self.records],
        }

    def summary_table(self) -> str:
        """Return a plain text summary of the campaign."""

        def show(rate: float | None) -> str:
            return "n/a" if rate is None else f"{100.0 * rate:.1f}%"

        rows = [
            ("trials", str(self.total)),
            ("completed", str(len(self.completed))),
            ("failed", f"{self.failed} ({show(self.failure_rate)})"),
            ("rank ambiguous", f"{self.ambiguous} ({show(self.ambiguous_rate)})"),
            ("sparse", show(self.sparse_rate)),
            ("planar framework", show(self.planar_rate)),
            ("independent", show(self.independence_rate)),
            ("tight with kernel = k", show(self.tight_kernel_rate)),
        ]
        rows.extend(
            (f"failed at {stage}", str(count))
            for stage, count in sorted(self.failures_by_stage().items())
        )
        width = max(len(label) for label, _ in rows)
        lines = [f"{label.ljust(width)}  {value}" for label, value in rows]
        lines.append("PASSED" if self.passed else "FAILED")
        return "\n".join(lines)


def sample_body(family: BodyFamily, rng: np.random.Generator) -> ConvexBody:
    """Draw a random smooth strictly convex body of the given family."""
    if family is BodyFamily.Disc:
        return Disc()
    if family is BodyFamily.PNorm:
        while True:
            p = float(rng.uniform(1.5, 4.0))
            if abs(p - 2.0) > 1e-3:
                return PNormBody(p)
    if family is BodyFamily.ExpFamily:
        j = int(rng.integers(3, 6))
        while True:
            angles = np.sort(rng.uniform(0.0, math.pi, size=j))
            spread = np.diff(np.append(angles, angles[0] + math.pi))
            if np.min(spread) > 0.05:
                break
        directions = np.column_stack((np.cos(angles), np.sin(angles)))
        base = math.log(2 * j)
        return ExpFamilyBody(directions, float(rng.uniform(base + 0.5, base + 3.0)))
    t = uniform_angles(256)
    values = np.ones_like(t)
    for harmonic in range(1, 4):
        amplitude = rng.uniform(0.0, 0.03 / (4 * harmonic * harmonic))
        values += amplitude * np.cos(2 * harmonic * t + rng.uniform(0.0, 2.0 * math.pi))
    return body_from_profile(SplineProfile(values))


def _perturbation_scale(bounds: tuple[float, float], rng: np.random.Generator) -> float:
    low, high = bounds
    return float(math.exp(rng.uniform(math.log(low), math.log(high))))


def run_trial(cfg: TrialConfig, index: int) -> TrialRecord:
    """Run one campaign trial; failures are returned, never raised."""
    rng = np.random.default_rng([cfg.master_seed, index])
    family = cfg.families[int(rng.integers(len(cfg.families)))]
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    stage = TrialStage.Sample
    m, perturbation = 0, None
    try:
        low, high = cfg.edge_range(n)
        m = int(rng.integers(low, high + 1))
        body = sample_body(family, rng)
        triangulation = random_triangulation(n, rng)
        subgraph = random_connected_subgraph(triangulation, m, rng)
        stage = TrialStage.Pack
        packing = body_pack(body, triangulation, cfg=cfg.continuation)
        stage = TrialStage.Flow
        perturbation = _perturbation_scale(cfg.radii_perturbation, rng)
        # opened gaps must absorb the radius change
        packing = subgraph_flow(
            packing,
            subgraph,
            DEFAULT_FLOW_GAP,
            DEFAULT_FLOW_STEPS,
            cfg.continuation,
            gap_target=FLOW_GAP_MARGIN * perturbation,
        )
        stage = TrialStage.Resolve
        radii = packing.r * (1.0 + perturbation * rng.uniform(-1.0, 1.0, size=n))
        packing = resolve_radii(packing, radii, cfg.continuation, cfg.policy)
        stage = TrialStage.Analyze
        found = contact_graph(packing.body, packing.p, packing.r)
        analyzed = packing.replace(graph=found)
        k = 3 if body.euclidean else 2
        certificate = pebble_sparse(found, k)
        independence = independence_sweep(analyzed, cfg.policy)
        rigidity = infinitesimal_rigidity_test(analyzed, cfg.policy)
    except Exception as exc:  # pylint: disable=broad-except
        _LOGGER.debug("Trial %d failed at %s: %s", index, stage.value, exc)
        return TrialRecord(
            index,
            family.value,
            n,
            m,
            RESULT_FAILED,
            stage=stage.value,
            error=f"{type(exc).__name__}: {exc}",
            perturbation=perturbation,
        )

    return TrialRecord(
        index,
        family.value,
        n,
        found.m,
        RESULT_AMBIGUOUS if independence.ambiguous else RESULT_SUCCESS,
        perturbation=perturbation,
        k=k,
        sparse=certificate.is_sparse,
        tight=certificate.is_tight,
        planar=not framework_crossings(found, packing.p),
        independent=independence.independent,
        rank=independence.rank,
        kernel_dim=rigidity.kernel_dim,
        residual=packing.max_residual(),
        graph_preserved=found == subgraph.with_outer(None),
    )


def run_theorem_trials(cfg: TrialConfig) -> TrialReport:
    """Run a campaign sequentially."""
    return TrialReport(tuple(run_trial(cfg, index) for index in range(cfg.trials)))


async def async_run_theorem_trials(cfg: TrialConfig) -> TrialReport:
    """Run a campaign on a thread pool."""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        records = await asyncio.gather(
            *(
                loop.run_in_executor(pool, run_trial, cfg, index)
                for index in range(cfg.trials)
            )
        )
    report = TrialReport(tuple(records))
    _LOGGER.info(
        "Campaign finished: %d trials, %d completed, %d failed, %d rank ambiguous",
        report.total,
        len(report.completed),
        report.failed,
        report.ambiguous,
    )
    return report


@dataclass(frozen=True)
class DensifyConfig:
    """Densification settings."""

    eps: float = DEFAULT_EPS
    support_perturbation: float = DEFAULT_SUPPORT_PERTURBATION
    retries: int = DEFAULT_RETRIES
    flow_gap: float = DEFAULT_FLOW_GAP
    flow_steps: int = DEFAULT_FLOW_STEPS
    policy: RankPolicy = field(default_factory=RankPolicy)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)

    def __post_init__(self) -> None:
        if not self.eps > 0.0 or self.support_perturbation < 0.0 or self.retries < 1:
            raise ValueError("densify needs eps > 0, perturbation >= 0 and retries >= 1")


def _support_targets(
    packing: Packing, relative: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    directions = contact_directions(packing)
    supports = packing.body.duality_map(directions)
    scale = relative * np.linalg.norm(supports, axis=1)
    noise = rng.normal(size=supports.shape) * scale[:, None]
    return directions, supports + noise


def densify_independent(
    body: ConvexBody,
    graph: ContactGraph,
    seed,
    triangulation: ContactGraph | None = None,
    cfg: DensifyConfig | None = None,
) -> tuple[ConvexBody, Packing]:
    """Find a body near body and an independent packing with contact graph graph.

    Packs a triangulation containing graph, opens the extra contacts, then
    bends the boundary at the contact directions toward random supports.
    The bumps keep the boundary radius at every contact direction, so the
    packing still touches along graph for the new body; once it is
    independent there, continue_packing re-solves it onto the new body.
    """
    cfg = cfg or DensifyConfig()
    if not pebble_sparse(graph, 2).is_sparse:
        raise DensifyError(TrialStage.Sample, f"{graph} is not (2,2)-sparse")
    rng = np.random.default_rng(seed)
    stage, reason = TrialStage.Sample, "no attempt made"
    for attempt in range(cfg.retries):
        host = triangulation if triangulation is not None and attempt == 0 else None
        try:
            stage = TrialStage.Sample
            host = host or embed_in_triangulation(graph, rng)
            stage = TrialStage.GeneralPosition
            discs = mobius_general_position(circle_pack(host), rng)
            pins = PinnedTriangle(host.outer, discs.p[list(host.outer)])
            stage = TrialStage.Pack
            packing = body_pack(body, host, pins, cfg.continuation)
            stage = TrialStage.Flow
            packing = subgraph_flow(
                packing,
                graph.with_outer(None),
                cfg.flow_gap,
                cfg.flow_steps,
                cfg.continuation,
            )
            stage = TrialStage.GeneralPosition
            if not general_edge_condition(packing):
                raise HarnessError("edge vectors are not in general position")
            stage = TrialStage.Retarget
            directions, targets = _support_targets(packing, cfg.support_perturbation, rng)
            new_body = retarget_supports(body, directions, targets, cfg.eps)
            distance = body_distance(body, new_body)
            if distance > cfg.eps:
                raise HarnessError(f"body moved by {distance:.3e} > eps={cfg.eps:.3e}")
            stage = TrialStage.Continue
            moved = packing.replace(body=new_body)
            moved.validate()
            result = independence_sweep(moved, cfg.policy)
            if not result.independent:
                raise HarnessError(f"rank {result.rank} < {result.edges} edges")
            moved = continue_packing(moved, new_body, cfg.continuation, cfg.policy)
        except Exception as exc:  # pylint: disable=broad-except
            reason = f"{type(exc).__name__}: {exc}"
            _LOGGER.warning(
                "Densify attempt %d failed at %s: %s", attempt + 1, stage.value, reason
            )
            continue
        _LOGGER.debug(
            "Densified %s after %d attempts, body moved by %.3e",
            graph,
            attempt + 1,
            distance,
        )
        return new_body, moved
    raise DensifyError(stage, reason)
