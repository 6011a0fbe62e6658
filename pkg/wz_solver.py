"""
Informational distortion-rate function of a block joint law with decoder side
information, by Lagrangian alternating minimization (ECVQ style) over
deterministic block-to-U assignments, plus an exhaustive oracle and the lower
convex hull that turns operating points into a queryable curve.

Rates are H(U)/l bits per letter, distortions are per letter. Entropies use
base-2 logarithms with 0 log 0 = 0.
"""
import hashlib
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence as Seq, Tuple

import numpy as np

from core_model import DistortionMatrix, derive_seed, make_rng
from empirical import JointBlockDistribution, block_symbols
from errors import CapExceeded, EmptyGrid

logger = logging.getLogger(__name__)

LAMBDA_MAX = 1e6
MAX_ITERATIONS = 500
CONVERGENCE_TOL = 1e-10
MONOTONE_TOL = 1e-9
HULL_TOL = 1e-12
BRUTE_FORCE_BLOCKS = 8
EXHAUSTIVE_START_BLOCKS = 5
MAX_REFINE_ROUNDS = 32


def entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def default_lambda_grid(count: int) -> List[float]:
    return [float(v) for v in np.geomspace(1e-3, 1e3, count)]


# --- Reconstruction ---

def block_reconstruction(pa: np.ndarray, w: np.ndarray, test_channel: np.ndarray, rho: DistortionMatrix,
                         block_length: int, alpha: int) -> Tuple[np.ndarray, float]:
    """
    Coordinate-wise Bayes reconstruction h[b, u, i] from the posterior
    P(a) W(b|a) T(u|a), ties to the smallest symbol; returns (h, per-letter distortion).
    Cells of zero probability reconstruct as the all-0 block.
    """
    weights = pa[:, None, None] * w[:, :, None] * test_channel[:, None, :]
    syms = block_symbols(block_length, alpha)
    b_count, u_count = w.shape[1], test_channel.shape[1]
    h = np.zeros((b_count, u_count, block_length), dtype=np.int64)
    total = 0.0
    for i in range(block_length):
        cost = np.einsum("abu,ax->bux", weights, rho.table[syms[:, i]])
        h[:, :, i] = cost.argmin(axis=-1)
        total += float(cost.min(axis=-1).sum())
    return h, total / block_length


def _block_costs(h: np.ndarray, rho: DistortionMatrix, block_length: int, alpha: int) -> np.ndarray:
    """D[a, b, u] = sum_i rho[a_i][h[b, u, i]]."""
    syms = block_symbols(block_length, alpha)
    return rho.table[syms[:, None, None, :], h[None, :, :, :]].sum(axis=-1)


def _one_hot(assignment: np.ndarray, u_count: int) -> np.ndarray:
    t = np.zeros((len(assignment), u_count))
    t[np.arange(len(assignment)), assignment] = 1.0
    return t


def optimal_reconstruction(joint: JointBlockDistribution, test_channel: np.ndarray,
                           rho: DistortionMatrix) -> np.ndarray:
    t = np.asarray(test_channel, dtype=np.float64)
    h, _ = block_reconstruction(joint.marginal, joint.conditional, t, rho, joint.block_length, joint.block.alpha)
    return h


def canonical_labels(assignment: Seq[int]) -> Tuple[int, ...]:
    """Relabels U symbols in order of first use."""
    seen = {}
    return tuple(seen.setdefault(int(u), len(seen)) for u in assignment)


# --- Codes and points ---

@dataclass(frozen=True, eq=False)
class WzCode:
    """Deterministic test channel a^l -> u, its induced marginal q and the reconstruction table h."""
    block_length: int
    alpha: int
    usize: int
    assignment: Tuple[int, ...]
    q: np.ndarray
    h: np.ndarray

    @property
    def test_channel(self) -> np.ndarray:
        return _one_hot(np.array(self.assignment), self.usize)

    def reconstruct(self, side_block: int, u: int) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.h[side_block, u])

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(repr((self.block_length, self.alpha, self.usize, self.assignment)).encode())
        digest.update(np.ascontiguousarray(self.q).tobytes())
        digest.update(np.ascontiguousarray(self.h).tobytes())
        return digest.hexdigest()

    def to_dict(self) -> dict:
        return {"block": self.block_length, "usize": self.usize, "assignment": list(self.assignment),
                "q": self.q.tolist()}


@dataclass(frozen=True)
class OperatingPoint:
    rate: float
    distortion: float
    lam: float
    code: Optional[WzCode] = None
    converged: bool = True

    @property
    def objective(self) -> float:
        return self.distortion + self.lam * self.rate


def _evaluate(joint: JointBlockDistribution, rho: DistortionMatrix, assignment: Seq[int],
              usize: int) -> Tuple[WzCode, float, float]:
    a = np.array(assignment, dtype=np.int64)
    q = np.bincount(a, weights=joint.marginal, minlength=usize)
    h, dist = block_reconstruction(joint.marginal, joint.conditional, _one_hot(a, usize), rho,
                                   joint.block_length, joint.block.alpha)
    code = WzCode(joint.block_length, joint.block.alpha, usize, tuple(int(v) for v in a), q, h)
    return code, entropy_bits(q) / joint.block_length, dist


def make_code(joint: JointBlockDistribution, rho: DistortionMatrix, assignment: Seq[int],
              usize: Optional[int] = None) -> OperatingPoint:
    """Operating point of a fixed assignment (labels canonicalized), with optimal h."""
    labels = canonical_labels(assignment)
    size = usize if usize is not None else max(labels) + 1
    code, rate, dist = _evaluate(joint, rho, labels, size)
    return OperatingPoint(rate, dist, math.nan, code)


def _descend(joint: JointBlockDistribution, rho: DistortionMatrix, lam: float, usize: int,
             start: np.ndarray) -> Tuple[Tuple[int, ...], float, bool]:
    ell = joint.block_length
    pa, w = joint.marginal, joint.conditional
    assignment = start.copy()
    code, rate, dist = _evaluate(joint, rho, assignment, usize)
    objective = dist + lam * rate
    for _ in range(MAX_ITERATIONS):
        d_block = _block_costs(code.h, rho, ell, joint.block.alpha)
        expected = np.einsum("ab,abu->au", w, d_block)
        used = code.q > 0
        penalty = np.where(used, lam * -np.log2(np.where(used, code.q, 1.0)), np.inf)
        cost = expected + penalty[None, :]
        assignment = cost.argmin(axis=1)
        code, rate, dist = _evaluate(joint, rho, assignment, usize)
        new_objective = dist + lam * rate
        if new_objective > objective + MONOTONE_TOL:
            raise ArithmeticError(f"Descent increased the objective from {objective} to {new_objective}.")
        if objective - new_objective < CONVERGENCE_TOL:
            return canonical_labels(assignment), new_objective, True
        objective = new_objective
    logger.warning("Descent at lambda=%g stopped after %d iterations", lam, MAX_ITERATIONS)
    return canonical_labels(assignment), objective, False


def _partition_starts(a_count: int, usize: int) -> Iterator[np.ndarray]:
    """Every partition for small block alphabets; otherwise one-block splits and pairwise merges."""
    if a_count <= EXHAUSTIVE_START_BLOCKS:
        for labels in restricted_growth_strings(a_count, usize):
            yield np.array(labels, dtype=np.int64)
        return
    if usize >= 2:
        for a in range(a_count):
            split = np.zeros(a_count, dtype=np.int64)
            split[a] = 1
            yield split
    if usize >= a_count - 1:
        for i, j in itertools.combinations(range(a_count), 2):
            merged = np.arange(a_count)
            merged[j] = i
            yield np.array(canonical_labels(merged), dtype=np.int64)


def _starts(a_count: int, usize: int, restarts: int, seed: int) -> Iterator[np.ndarray]:
    yield np.arange(a_count) % usize
    yield np.zeros(a_count, dtype=np.int64)
    yield from _partition_starts(a_count, usize)
    rng = make_rng(seed)
    for _ in range(restarts):
        yield rng.integers(0, usize, size=a_count)


def solve_lagrangian(joint: JointBlockDistribution, lam: float, usize: int, seed: int, restarts: int,
                     rho: DistortionMatrix) -> OperatingPoint:
    """
    Best local minimum of distortion + lam * rate over the structured and seeded
    starts; ties go to the least assignment. With at most EXHAUSTIVE_START_BLOCKS
    blocks every partition is a start, so the result is the exact minimum.
    """
    if lam < 0:
        raise ValueError("Lagrange multiplier must be nonnegative.")
    a_count = joint.block.size
    if usize < 1 or usize > a_count + 1:
        raise ValueError(f"|U| must lie in 1..{a_count + 1}, got {usize}.")
    best = None
    for start in _starts(a_count, usize, restarts, seed):
        labels, objective, converged = _descend(joint, rho, lam, usize, start)
        key = (objective, labels)
        if best is None or objective < best[0][0] - HULL_TOL or (
                abs(objective - best[0][0]) <= HULL_TOL and labels < best[0][1]):
            best = (key, converged)
    (_, labels), converged = best
    code, rate, dist = _evaluate(joint, rho, labels, usize)
    return OperatingPoint(rate, dist, lam, code, converged)


# --- Curves ---

def lower_hull(points: Seq[Tuple[float, float]]) -> List[int]:
    """Indices of the nonincreasing lower convex hull vertices, sorted by rate."""
    order = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))
    pareto = []
    for i in order:
        if not pareto or points[i][1] < points[pareto[-1]][1] - HULL_TOL:
            if pareto and abs(points[i][0] - points[pareto[-1]][0]) <= HULL_TOL:
                continue
            pareto.append(i)
    hull: List[int] = []
    for i in pareto:
        while len(hull) >= 2:
            (r1, d1), (r2, d2), (r3, d3) = points[hull[-2]], points[hull[-1]], points[i]
            if (r2 - r1) * (d3 - d1) - (d2 - d1) * (r3 - r1) <= HULL_TOL:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


@dataclass
class RdCurve:
    points: List[OperatingPoint]
    hull: List[OperatingPoint] = field(init=False)

    def __post_init__(self):
        if not self.points:
            raise EmptyGrid("A curve needs at least one operating point.")
        idx = lower_hull([(p.rate, p.distortion) for p in self.points])
        self.hull = [self.points[i] for i in idx]

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.hull])

    @property
    def distortions(self) -> np.ndarray:
        return np.array([p.distortion for p in self.hull])

    def query(self, rate: float) -> float:
        """
        Hull value at `rate`: the hull minimum beyond the largest rate, inf below
        the smallest. Curves from drf_curve and brute_force_drf always hold the
        rate-0 one-cell assignment, so the inf branch only fires for hand-built
        curves.
        """
        rates = self.rates
        if rate < rates[0] - HULL_TOL:
            return math.inf
        return float(np.interp(rate, rates, self.distortions))

    def query_pointwise(self, rate: float) -> float:
        feasible = [p.distortion for p in self.points if p.rate <= rate + HULL_TOL]
        return min(feasible) if feasible else math.inf

    def vertex_at_most(self, rate: float) -> OperatingPoint:
        """Hull vertex with the largest rate not above `rate`."""
        chosen = [p for p in self.hull if p.rate <= rate + HULL_TOL]
        if not chosen:
            raise EmptyGrid(f"No hull vertex at rate <= {rate}.")
        return chosen[-1]

    def bracket(self, rate: float) -> Tuple[OperatingPoint, Optional[OperatingPoint], float]:
        """(lower vertex, upper vertex, probability of the upper one) for time sharing at `rate`."""
        low = self.vertex_at_most(rate)
        higher = [p for p in self.hull if p.rate > rate + HULL_TOL]
        if not higher or low.rate >= rate - HULL_TOL:
            return low, None, 0.0
        high = higher[0]
        return low, high, (rate - low.rate) / (high.rate - low.rate)

    def on_hull(self, point: OperatingPoint) -> bool:
        return any(point is p for p in self.hull)


def drf_curve(joint: JointBlockDistribution, lambdas: Seq[float], usize: int, seed: int, restarts: int,
              rho: DistortionMatrix, refine: bool = True) -> RdCurve:
    if not lambdas:
        raise EmptyGrid("Lambda grid is empty.")
    grid = sorted(set(float(v) for v in lambdas) | {0.0, LAMBDA_MAX})
    points = [solve_lagrangian(joint, lam, usize, derive_seed(seed, "drf-lambda", j), restarts, rho)
              for j, lam in enumerate(grid)]
    points.append(make_code(joint, rho, [0] * joint.block.size, usize))
    curve = RdCurve(points)
    if not refine:
        return curve
    tried = set(grid)
    for round_index in range(MAX_REFINE_ROUNDS):
        improved = False
        hull = curve.hull
        for j in range(len(hull) - 1):
            lam = (hull[j].distortion - hull[j + 1].distortion) / (hull[j + 1].rate - hull[j].rate)
            if any(abs(lam - t) <= 1e-12 for t in tried):
                continue
            tried.add(lam)
            point = solve_lagrangian(joint, lam, usize, derive_seed(seed, "drf-refine", len(tried)), restarts, rho)
            points.append(point)
            if point.distortion < curve.query(point.rate) - MONOTONE_TOL:
                improved = True
        curve = RdCurve(points)
        if not improved:
            break
    logger.debug("Curve with %d points, %d hull vertices", len(curve.points), len(curve.hull))
    return curve


def restricted_growth_strings(length: int, max_labels: int) -> Iterator[Tuple[int, ...]]:
    """Every assignment of `length` items to at most `max_labels` labels, up to relabeling."""
    if length == 0:
        yield ()
        return

    def extend(prefix: List[int], top: int):
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for v in range(min(top + 2, max_labels)):
            prefix.append(v)
            yield from extend(prefix, max(top, v))
            prefix.pop()

    yield from extend([0], 0)


def brute_force_drf(joint: JointBlockDistribution, usize: int, rho: DistortionMatrix) -> RdCurve:
    """
    Every assignment of the blocks that occur to at most `usize` labels.
    Blocks of zero probability add neither rate nor distortion; they share label 0.
    """
    a_count = joint.block.size
    support = np.flatnonzero(joint.marginal > 0)
    if support.size > BRUTE_FORCE_BLOCKS:
        raise CapExceeded(f"Brute force needs at most {BRUTE_FORCE_BLOCKS} occurring blocks, got {support.size}.")
    if usize < 1 or usize > a_count + 1:
        raise CapExceeded(f"|U| must lie in 1..{a_count + 1}, got {usize}.")
    points = []
    for partial in restricted_growth_strings(int(support.size), usize):
        labels = np.zeros(a_count, dtype=np.int64)
        labels[support] = partial
        code, rate, dist = _evaluate(joint, rho, labels, usize)
        points.append(OperatingPoint(rate, dist, math.nan, code))
    return RdCurve(points)
