"""
Two-stage (successive refinement) region with two side-information
sequences: Y at the first decoder, Z at the second. The region is computed
exhaustively over deterministic block maps at tiny scale, and the second stage
can also be designed by conditional descent given a fixed first-stage code.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence as Seq, Tuple

import numpy as np

from core_model import DistortionMatrix, STOCHASTIC_TOL, make_rng, validate_dmc
from empirical import BlockDistribution, DEFAULT_TABLE_CAP, JointBlockDistribution
from errors import CapExceeded, NegativeEntry, NonStochasticRow, TableTooLarge
from wz_solver import (
    CONVERGENCE_TOL, HULL_TOL, MAX_ITERATIONS, MONOTONE_TOL, WzCode, block_reconstruction,
    canonical_labels, entropy_bits, lower_hull, restricted_growth_strings, _block_costs, _one_hot,
)

logger = logging.getLogger(__name__)

SR_BLOCK_CAP = 4


@dataclass(frozen=True, eq=False)
class TwoSidedChannel:
    """P(y, z | x), indexed [x][y][z]."""
    table: np.ndarray

    @classmethod
    def of(cls, table) -> "TwoSidedChannel":
        arr = np.array(table, dtype=np.float64)
        if arr.ndim != 3 or arr.size == 0:
            raise ValueError("Two-sided channel must be an x-by-y-by-z table.")
        if np.any(arr < 0) or np.any(arr > 1):
            raise NegativeEntry("Two-sided channel entries must lie in [0, 1].")
        for x, total in enumerate(arr.sum(axis=(1, 2))):
            if abs(total - 1.0) > STOCHASTIC_TOL:
                raise NonStochasticRow(f"Two-sided channel row {x} sums to {total!r}, not 1.")
        arr.setflags(write=False)
        return cls(arr)

    @property
    def y_channel(self) -> np.ndarray:
        return self.table.sum(axis=2)

    @property
    def z_channel(self) -> np.ndarray:
        return self.table.sum(axis=1)


@dataclass(frozen=True, eq=False)
class ThreeWayJoint:
    block: BlockDistribution
    channel: TwoSidedChannel
    conditional: np.ndarray

    @property
    def block_length(self) -> int:
        return self.block.block_length

    @property
    def y_conditional(self) -> np.ndarray:
        return self.conditional.sum(axis=2)

    @property
    def z_conditional(self) -> np.ndarray:
        return self.conditional.sum(axis=1)


def join_two_sided(p: BlockDistribution, ch: TwoSidedChannel, table_cap: int = DEFAULT_TABLE_CAP) -> ThreeWayJoint:
    """Block law P(b^l, c^l | a^l) = prod_i P(b_i, c_i | a_i)."""
    alpha, beta, zeta = ch.table.shape
    if alpha != p.alpha:
        raise ValueError(f"Channel input alphabet {alpha} != source alphabet {p.alpha}.")
    entries = p.size * (beta * zeta) ** p.block_length
    if entries > table_cap:
        raise TableTooLarge(f"Three-way table needs {entries} entries, cap is {table_cap}.")
    w = ch.table
    for _ in range(p.block_length - 1):
        a, b, c = w.shape
        w = np.einsum("abc,def->adbecf", w, ch.table).reshape(a * alpha, b * beta, c * zeta)
    w = np.ascontiguousarray(w)
    w.setflags(write=False)
    return ThreeWayJoint(p, ch, w)


@dataclass(frozen=True)
class SrPoint:
    d1: float
    d2: float
    rate: float
    delta_rate: float
    u_map: Tuple[int, ...]
    v_map: Tuple[int, ...]
    h: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    h2: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    converged: bool = True

    def to_row(self) -> dict:
        return {"D1": self.d1, "D2": self.d2, "HU": self.rate, "HVgU": self.delta_rate}


@dataclass
class SrRegion:
    points: List[SrPoint]
    frontier: List[SrPoint] = field(init=False)
    hull_frontier: List[SrPoint] = field(init=False)

    def __post_init__(self):
        ordered = sorted(self.points, key=lambda p: (p.d1, p.d2, p.rate, p.delta_rate))
        self.frontier = []
        for p in ordered:
            if not self.frontier or p.d2 < self.frontier[-1].d2 - HULL_TOL:
                self.frontier.append(p)
        idx = lower_hull([(p.d1, p.d2) for p in self.frontier])
        self.hull_frontier = [self.frontier[i] for i in idx]

    def dominated(self, d1: float, d2: float, tol: float = 1e-6) -> bool:
        """True when some frontier point is at least as good in both distortions."""
        return any(p.d1 <= d1 + tol and p.d2 <= d2 + tol for p in self.frontier)


def _joint_entropy(pa: np.ndarray, u_map: Seq[int], v_map: Seq[int], v_size: int) -> float:
    labels = np.array(u_map) * v_size + np.array(v_map)
    return entropy_bits(np.bincount(labels, weights=pa, minlength=(max(u_map) + 1) * v_size))


def _stage_distortions(joint3: ThreeWayJoint, u_map, v_map, rho: DistortionMatrix, rho2: DistortionMatrix):
    ell, alpha = joint3.block_length, joint3.block.alpha
    pa = joint3.block.probabilities
    u = np.array(u_map, dtype=np.int64)
    v = np.array(v_map, dtype=np.int64)
    u_size, v_size = int(u.max()) + 1, int(v.max()) + 1
    h, d1 = block_reconstruction(pa, joint3.y_conditional, _one_hot(u, u_size), rho, ell, alpha)
    h2, d2 = block_reconstruction(pa, joint3.z_conditional, _one_hot(u * v_size + v, u_size * v_size), rho2,
                                  ell, alpha)
    return h, d1, h2, d2


def _sr_point(joint3: ThreeWayJoint, u_map, v_map, rho, rho2, converged: bool = True) -> SrPoint:
    ell = joint3.block_length
    pa = joint3.block.probabilities
    hu = entropy_bits(np.bincount(u_map, weights=pa)) / ell
    hv_u = _joint_entropy(pa, u_map, v_map, max(v_map) + 1) / ell - hu
    h, d1, h2, d2 = _stage_distortions(joint3, u_map, v_map, rho, rho2)
    return SrPoint(d1, d2, hu, max(0.0, hv_u), tuple(u_map), tuple(v_map), h, h2, converged)


def brute_force_sr_region(joint3: ThreeWayJoint, rate: float, delta_rate: float, rho: DistortionMatrix,
                          rho2: DistortionMatrix, u_cap: Optional[int] = None,
                          v_cap: Optional[int] = None) -> SrRegion:
    a_count = joint3.block.size
    if a_count > SR_BLOCK_CAP:
        raise CapExceeded(f"Region enumeration needs alpha^l <= {SR_BLOCK_CAP}, got {a_count}.")
    u_cap = a_count + 3 if u_cap is None else u_cap
    v_cap = a_count * u_cap + 1 if v_cap is None else v_cap
    if u_cap > a_count + 3 or v_cap > a_count * u_cap + 1:
        raise CapExceeded(f"|U| <= {a_count + 3} and |V| <= {a_count * u_cap + 1} are required.")
    points = []
    for u_map in restricted_growth_strings(a_count, u_cap):
        for v_map in restricted_growth_strings(a_count, v_cap):
            point = _sr_point(joint3, u_map, v_map, rho, rho2)
            if point.rate <= rate + 1e-9 and point.delta_rate <= delta_rate + 1e-9:
                points.append(point)
    logger.debug("%d feasible (U, V) map pairs", len(points))
    return SrRegion(points)


def conditional_second_stage(joint3: ThreeWayJoint, first: WzCode, lam: float, rho: DistortionMatrix,
                             rho2: DistortionMatrix, v_size: Optional[int] = None, seed: int = 0,
                             restarts: int = 8) -> SrPoint:
    """Descent on V given U minimizing D2 + lam * H(V|U)/l, with q(v|u) and h' refreshed each pass."""
    if lam < 0:
        raise ValueError("Lagrange multiplier must be nonnegative.")
    a_count = joint3.block.size
    v_size = v_size or a_count
    u = np.array(first.assignment, dtype=np.int64)
    ell, alpha = joint3.block_length, joint3.block.alpha
    pa, wz = joint3.block.probabilities, joint3.z_conditional
    u_size = int(u.max()) + 1

    def evaluate(v: np.ndarray):
        cells = u * v_size + v
        h2, d2 = block_reconstruction(pa, wz, _one_hot(cells, u_size * v_size), rho2, ell, alpha)
        q = np.bincount(cells, weights=pa, minlength=u_size * v_size).reshape(u_size, v_size)
        hu = entropy_bits(q.sum(axis=1))
        return h2, q, d2, (entropy_bits(q.ravel()) - hu) / ell

    def descend(v: np.ndarray):
        h2, q, d2, rate = evaluate(v)
        objective = d2 + lam * rate
        for _ in range(MAX_ITERATIONS):
            costs = _block_costs(h2, rho2, ell, alpha).reshape(a_count, -1, u_size, v_size)
            expected = np.einsum("ac,acv->av", wz, costs[np.arange(a_count), :, u, :])
            qu = q.sum(axis=1, keepdims=True)
            cond = np.where(q > 0, q / np.where(qu > 0, qu, 1.0), 0.0)
            used = cond > 0
            penalty = np.where(used, lam * -np.log2(np.where(used, cond, 1.0)), np.inf)
            v = (expected + penalty[u]).argmin(axis=1)
            h2, q, d2, rate = evaluate(v)
            new_objective = d2 + lam * rate
            if new_objective > objective + MONOTONE_TOL:
                raise ArithmeticError(f"Second-stage descent increased the objective to {new_objective}.")
            if objective - new_objective < CONVERGENCE_TOL:
                return tuple(int(t) for t in v), new_objective, True
            objective = new_objective
        return tuple(int(t) for t in v), objective, False

    rng = make_rng(seed)
    starts = [np.arange(a_count) % v_size, np.zeros(a_count, dtype=np.int64)]
    starts += [rng.integers(0, v_size, size=a_count) for _ in range(restarts)]
    best = None
    for start in starts:
        v_map, objective, converged = descend(start)
        v_map = canonical_labels(v_map)
        if best is None or objective < best[0] - HULL_TOL or (abs(objective - best[0]) <= HULL_TOL and v_map < best[1]):
            best = (objective, v_map, converged)
    point = _sr_point(joint3, canonical_labels(first.assignment), best[1], rho, rho2, best[2])
    logger.debug("Second stage at lambda=%g: D2=%.6f, H(V|U)/l=%.6f", lam, point.d2, point.delta_rate)
    return point


def region_points(region: SrRegion) -> List[dict]:
    return [p.to_row() for p in region.frontier]


def single_stage_distortion(joint3: ThreeWayJoint, u_map: Seq[int], rho: DistortionMatrix) -> float:
    """First-stage distortion of a U map with Y side information."""
    u = np.array(canonical_labels(u_map), dtype=np.int64)
    _, d1 = block_reconstruction(joint3.block.probabilities, joint3.y_conditional, _one_hot(u, int(u.max()) + 1),
                                 rho, joint3.block_length, joint3.block.alpha)
    return d1


def y_joint(joint3: ThreeWayJoint) -> JointBlockDistribution:
    """The single-stage joint with Y side information."""
    ch = validate_dmc(joint3.channel.y_channel)
    table = joint3.block.probabilities[:, None] * joint3.y_conditional
    return JointBlockDistribution(joint3.block, ch, joint3.y_conditional, table)
