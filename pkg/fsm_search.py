"""
Exhaustive operational optimum over M-state encoder/decoder pairs.

Machines are enumerated once per grid in canonical form: states are numbered
by first visit from the initial state 0 (inputs scanned in symbol order) and
every state is reachable, so each machine appears once up to relabeling and
unreachable states. This first-visit form is a unique representative, not the
lexicographically least relabeling; for M <= 2 the two coincide, since the
only relabeling that keeps the initial state at 0 is the identity.

Per-state codes are the full binary prefix trees with at most alpha leaves and
depth at most L_max. A non-full code is dominated: contracting every node with
a single child gives a full code with the same number of words, none longer,
so the rate can only drop while the machine's behavior is unchanged.

Reconstruction tables f' never influence the decoder-state process, so for a
fixed skeleton (codes, g', delay) the best f' is chosen cell by cell from the
accumulated cell costs. That is exactly the minimum over all enumerated f'.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence as Seq, Tuple

import numpy as np

from core_model import Channel, DistortionMatrix, Sequence
from errors import BudgetExceeded, FactorizationError
from fsm_machines import FsmDecoder, FsmEncoder, PrefixCode, fsm_encode, tree_shapes

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**8
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SearchGrid:
    max_states: int = 2
    max_delay: int = 1
    max_length: int = 2
    alpha: int = 2
    beta: int = 2
    gamma: int = 2
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.max_states < 1 or self.max_delay < 0 or self.max_length < 1:
            raise ValueError("Grid needs M >= 1, d >= 0, L_max >= 1.")
        if min(self.alpha, self.beta, self.gamma) < 1:
            raise ValueError("Alphabet sizes must be >= 1.")

    def codes(self) -> List[PrefixCode]:
        return [PrefixCode.from_shape(s) for s in tree_shapes(self.alpha, self.max_length)]

    def restricted(self, max_states: int, max_delay: int) -> "SearchGrid":
        return SearchGrid(max_states, max_delay, self.max_length, self.alpha, self.beta, self.gamma, self.budget)


# --- Canonical forms ---

def _first_visit_order(next_of, m: int, start: int) -> List[int]:
    """States in order of first visit from `start`; next_of(s) lists successors in scan order."""
    order = [start]
    i = 0
    while i < len(order):
        for t in next_of(order[i]):
            if t not in order:
                order.append(t)
        i += 1
    return order


def _is_canonical(next_of, m: int) -> bool:
    return _first_visit_order(next_of, m, 0) == list(range(m))


def canonicalize_encoder(codes, output, next_state, start: int = 0) -> FsmEncoder:
    """Relabels by first visit from `start` and drops unreachable states."""
    order = _first_visit_order(lambda s: next_state[s], len(codes), start)
    new = {old: i for i, old in enumerate(order)}
    return FsmEncoder(
        codes=tuple(codes[s] for s in order),
        output=tuple(tuple(output[s]) for s in order),
        next_state=tuple(tuple(new[t] for t in next_state[s]) for s in order),
    )


def canonicalize_decoder(codes, output, next_state, delay, side_size, reconstruction_size,
                         start: int = 0) -> FsmDecoder:
    order = _first_visit_order(lambda s: [t for row in next_state[s] for t in row], len(codes), start)
    new = {old: i for i, old in enumerate(order)}
    return FsmDecoder(
        codes=tuple(codes[s] for s in order),
        output=tuple(tuple(tuple(r) for r in output[s]) for s in order),
        next_state=tuple(tuple(tuple(new[t] for t in r) for r in next_state[s]) for s in order),
        delay=delay, side_size=side_size, reconstruction_size=reconstruction_size,
    )


def permute_encoder(enc: FsmEncoder, perm: Seq[int]):
    """Raw tables of `enc` with state s renamed perm[s]; the initial state becomes perm[0]."""
    m = enc.state_count
    inv = [0] * m
    for s, p in enumerate(perm):
        inv[p] = s
    codes = [enc.codes[inv[p]] for p in range(m)]
    output = [enc.output[inv[p]] for p in range(m)]
    next_state = [tuple(perm[t] for t in enc.next_state[inv[p]]) for p in range(m)]
    return codes, output, next_state, perm[0]


def permute_decoder(dec: FsmDecoder, perm: Seq[int]):
    m = dec.state_count
    inv = [0] * m
    for s, p in enumerate(perm):
        inv[p] = s
    codes = [dec.codes[inv[p]] for p in range(m)]
    output = [dec.output[inv[p]] for p in range(m)]
    next_state = [tuple(tuple(perm[t] for t in r) for r in dec.next_state[inv[p]]) for p in range(m)]
    return codes, output, next_state, perm[0]


# --- Enumeration ---

def _encoder_transition_tables(m: int, alpha: int) -> List[Tuple[Tuple[int, ...], ...]]:
    rows = list(itertools.product(range(m), repeat=alpha))
    return [g for g in itertools.product(rows, repeat=m) if _is_canonical(lambda s: g[s], m)]


def _encoder_state_options(codes: List[PrefixCode], alpha: int) -> List[Tuple[int, Tuple[int, ...]]]:
    return [(ci, f) for ci, c in enumerate(codes) for f in itertools.product(range(len(c)), repeat=alpha)]


@lru_cache(maxsize=16)
def enumerate_encoders(grid: SearchGrid) -> Tuple[FsmEncoder, ...]:
    codes = grid.codes()
    options = _encoder_state_options(codes, grid.alpha)
    out = []
    for m in range(1, grid.max_states + 1):
        for g in _encoder_transition_tables(m, grid.alpha):
            for per_state in itertools.product(options, repeat=m):
                out.append(FsmEncoder(
                    codes=tuple(codes[ci] for ci, _ in per_state),
                    output=tuple(f for _, f in per_state),
                    next_state=g,
                ))
    return tuple(out)


@dataclass(frozen=True)
class DecoderSkeleton:
    """A decoder without its reconstruction table."""
    codes: Tuple[PrefixCode, ...]
    next_state: Tuple[Tuple[Tuple[int, ...], ...], ...]
    parse_class: Tuple[int, ...]
    parse_next: Tuple[Tuple[int, ...], ...]

    @property
    def state_count(self) -> int:
        return len(self.codes)

    @property
    def cells(self) -> int:
        return sum(len(c) * len(self.next_state[s][0]) if len(c) else 0 for s, c in enumerate(self.codes))


def _decoder_transition_tables(code_sizes: Tuple[int, ...], m: int, beta: int):
    per_state = [list(itertools.product(itertools.product(range(m), repeat=beta), repeat=size))
                 for size in code_sizes]
    for g in itertools.product(*per_state):
        if _is_canonical(lambda s: [t for row in g[s] for t in row], m):
            yield g


@lru_cache(maxsize=16)
def enumerate_decoder_skeletons(grid: SearchGrid) -> Tuple[DecoderSkeleton, ...]:
    codes = grid.codes()
    out = []
    for m in range(1, grid.max_states + 1):
        for code_ids in itertools.product(range(len(codes)), repeat=m):
            chosen = tuple(codes[ci] for ci in code_ids)
            for g in _decoder_transition_tables(tuple(len(c) for c in chosen), m, grid.beta):
                try:
                    trial = FsmDecoder(
                        codes=chosen,
                        output=tuple(tuple((0,) * grid.beta for _ in range(len(c))) for c in chosen),
                        next_state=g, delay=0, side_size=grid.beta, reconstruction_size=grid.gamma,
                    )
                except FactorizationError:
                    continue
                out.append(DecoderSkeleton(chosen, g, trial.parse_class, trial.parse_next))
    return tuple(out)


def count_pairs(grid: SearchGrid) -> int:
    """Full (encoder, decoder) pair count, f' tables included.

    Encoders: canonical transition tables times (code, f) choices per state in
    closed form. Decoders: each skeleton contributes gamma^(cells) tables.
    """
    codes = grid.codes()
    per_state = len(_encoder_state_options(codes, grid.alpha))
    encoders = sum(len(_encoder_transition_tables(m, grid.alpha)) * per_state**m
                   for m in range(1, grid.max_states + 1))
    decoders = sum(grid.gamma ** sk.cells for sk in enumerate_decoder_skeletons(grid)) * (grid.max_delay + 1)
    return encoders * decoders


def _check_budget(grid: SearchGrid) -> int:
    estimate = count_pairs(grid)
    if estimate > grid.budget:
        raise BudgetExceeded(estimate, grid.budget)
    return estimate


def _with_output(sk: DecoderSkeleton, output, delay: int, grid: SearchGrid) -> FsmDecoder:
    return FsmDecoder(codes=sk.codes, output=output, next_state=sk.next_state, delay=delay,
                      side_size=grid.beta, reconstruction_size=grid.gamma)


def enumerate_pairs(grid: SearchGrid) -> Iterator[Tuple[FsmEncoder, FsmDecoder]]:
    """Every canonical (encoder, decoder) pair of the grid, reconstruction tables included."""
    estimate = _check_budget(grid)
    logger.info("Enumerating %d pairs", estimate)
    encoders = enumerate_encoders(grid)
    skeletons = enumerate_decoder_skeletons(grid)
    for enc in encoders:
        for delay in range(grid.max_delay + 1):
            for sk in skeletons:
                shape = [(len(c), grid.beta) for c in sk.codes]
                flat = sum(k * b for k, b in shape)
                for values in itertools.product(range(grid.gamma), repeat=flat):
                    it = iter(values)
                    output = tuple(tuple(tuple(next(it) for _ in range(b)) for _ in range(k)) for k, b in shape)
                    yield enc, _with_output(sk, output, delay, grid)


# --- Search ---

@dataclass(frozen=True)
class OperationalResult:
    distortion: float
    rate: float
    bits: int
    feasible: bool
    encoder: Optional[FsmEncoder] = None
    decoder: Optional[FsmDecoder] = None

    def to_dict(self) -> dict:
        return {
            "distortion": self.distortion if self.feasible else None,
            "rate": self.rate,
            "bits": self.bits,
            "feasible": self.feasible,
            "encoder": self.encoder.to_dict() if self.encoder else None,
            "decoder": self.decoder.to_dict() if self.decoder else None,
        }


@dataclass(frozen=True)
class _Candidate:
    distortion: float
    bits: int
    enc_states: int
    dec_states: int
    delay: int
    order: Tuple[int, int, int]


@dataclass(frozen=True)
class _DecoderGroup:
    """Skeletons sharing codes and parse structure; only g' differs inside a group."""
    state_count: int
    codes: Tuple[PrefixCode, ...]
    parse_class: Tuple[int, ...]
    parse_next: Tuple[Tuple[int, ...], ...]
    members: Tuple[int, ...]
    tables: np.ndarray
    onehot: np.ndarray

    def codeword_indices(self, u: Seq[str]) -> Optional[List[int]]:
        p = 0
        out = []
        for word in u:
            code = self.codes[self.parse_class.index(p)]
            if word not in code:
                return None
            k = code.index(word)
            out.append(k)
            p = self.parse_next[p][k]
        return out


@lru_cache(maxsize=16)
def _decoder_groups(grid: SearchGrid) -> Tuple[_DecoderGroup, ...]:
    skeletons = enumerate_decoder_skeletons(grid)
    k_max = max(1, max(len(c) for c in grid.codes()))
    keyed: Dict[tuple, List[int]] = {}
    for idx, sk in enumerate(skeletons):
        keyed.setdefault((sk.state_count, sk.codes, sk.parse_class, sk.parse_next), []).append(idx)
    groups = []
    for (m, codes, classes, parse_next), members in keyed.items():
        tables = np.zeros((len(members), m, k_max, grid.beta), dtype=np.int64)
        for b, idx in enumerate(members):
            sk = skeletons[idx]
            for s in range(m):
                for k in range(len(sk.codes[s])):
                    tables[b, s, k] = sk.next_state[s][k]
        onehot = (tables[..., None] == np.arange(m)).astype(np.float64)
        groups.append(_DecoderGroup(m, codes, classes, parse_next, tuple(members), tables, onehot))
    return tuple(groups)


def _cell_costs(xs: np.ndarray, ks: List[int], onehot: np.ndarray, ch: Channel,
                rho: DistortionMatrix, delays: Seq[int]) -> List[np.ndarray]:
    """
    Accumulated cost[b, s, k, y, xhat] of writing xhat into cell (s, k, y) of
    table b, one array per delay. onehot[b, s, k, y, t] marks the transitions.
    The state process does not depend on the delay, so it is run once.
    """
    batch, m, k_max, beta, _ = onehot.shape
    pi = np.zeros((batch, m))
    pi[:, 0] = 1.0
    weights = []
    for i, k in enumerate(ks):
        w = pi[:, :, None] * ch.matrix[xs[i]][None, None, :]
        weights.append(w[..., None])
        pi = np.einsum("bsy,bsyt->bt", w, onehot[:, :, k])
    out = []
    for delay in delays:
        cost = np.zeros((batch, m, k_max, beta, rho.reconstruction_size))
        for i in range(delay, len(ks)):
            cost[:, :, ks[i]] += weights[i] * rho.table[xs[i - delay]]
        out.append(cost)
    return out


def _pad_cost(xs: np.ndarray, delay: int, rho: DistortionMatrix) -> float:
    n = len(xs)
    return float(sum(rho.table[xs[j]][0] for j in range(max(0, n - delay), n)))


class OperationalProfile:
    """All skeleton-level candidates for one sequence; answers any (R, M', d') on the grid."""

    def __init__(self, x: Sequence, grid: SearchGrid, ch: Channel, rho: DistortionMatrix):
        self.x = x
        self.grid = grid
        self.ch = ch
        self.rho = rho
        self.candidates: List[_Candidate] = []
        self._evaluate()

    def _evaluate(self):
        xs = self.x.symbols
        n = len(xs)
        encoders = enumerate_encoders(self.grid)
        groups = _decoder_groups(self.grid)
        seen: Dict[Tuple[str, ...], int] = {}
        for e_idx, enc in enumerate(encoders):
            u = fsm_encode(self.x, enc).codewords
            if u not in seen:
                seen[u] = e_idx
        logger.debug("%d encoders yield %d distinct codeword sequences", len(encoders), len(seen))
        for u, e_idx in seen.items():
            bits = sum(len(w) for w in u)
            enc_states = encoders[e_idx].state_count
            for g_idx, group in enumerate(groups):
                ks = group.codeword_indices(u)
                if ks is None:
                    continue
                delays = range(self.grid.max_delay + 1)
                for delay, cost in zip(delays, _cell_costs(xs, ks, group.onehot, self.ch, self.rho, delays)):
                    totals = cost.min(axis=-1).sum(axis=(1, 2, 3)) + _pad_cost(xs, delay, self.rho)
                    b = int(np.argmin(totals))
                    self.candidates.append(_Candidate(
                        float(totals[b]) / n if n else 0.0, bits, enc_states, group.state_count, delay,
                        (e_idx, g_idx, b),
                    ))

    def optimum(self, rate: float, max_states: Optional[int] = None,
                max_delay: Optional[int] = None) -> OperationalResult:
        if rate < 0:
            raise ValueError("Rate must be nonnegative.")
        m_cap = self.grid.max_states if max_states is None else max_states
        d_cap = self.grid.max_delay if max_delay is None else max_delay
        n = len(self.x)
        budget_bits = n * rate + 1e-9
        pool = [c for c in self.candidates
                if c.bits <= budget_bits and c.enc_states <= m_cap and c.dec_states <= m_cap and c.delay <= d_cap]
        if not pool:
            return OperationalResult(math.inf, 0.0, 0, False)
        best_d = min(c.distortion for c in pool)
        best = min((c for c in pool if c.distortion <= best_d + TIE_TOL), key=lambda c: (c.bits, c.order))
        enc, dec = self._witness(best)
        return OperationalResult(best.distortion, best.bits / n if n else 0.0, best.bits, True, enc, dec)

    def _witness(self, c: _Candidate) -> Tuple[FsmEncoder, FsmDecoder]:
        e_idx, g_idx, b = c.order
        enc = enumerate_encoders(self.grid)[e_idx]
        group = _decoder_groups(self.grid)[g_idx]
        sk = enumerate_decoder_skeletons(self.grid)[group.members[b]]
        u = fsm_encode(self.x, enc).codewords
        ks = group.codeword_indices(u)
        cost = _cell_costs(self.x.symbols, ks, group.onehot[b:b + 1], self.ch, self.rho, [c.delay])[0][0]
        best = cost.argmin(axis=-1)
        output = tuple(tuple(tuple(int(v) for v in best[s, k]) for k in range(len(sk.codes[s])))
                       for s in range(sk.state_count))
        return enc, _with_output(sk, output, c.delay, self.grid)


def operational_optimum(x: Sequence, rate: float, grid: SearchGrid, ch: Channel,
                        rho: DistortionMatrix) -> OperationalResult:
    if rate < 0:
        raise ValueError("Rate must be nonnegative.")
    _check_budget(grid)
    return OperationalProfile(x, grid, ch, rho).optimum(rate)


def operational_profile(x: Sequence, grid: SearchGrid, ch: Channel, rho: DistortionMatrix) -> OperationalProfile:
    _check_budget(grid)
    return OperationalProfile(x, grid, ch, rho)
