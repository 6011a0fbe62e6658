"""
Decoder-description accounting for universal FSM coding with a growing state
budget, the enumerate-and-describe wrapper codec, and the ingredients of the
converse construction (max-entropy noise, parameters, process generator).
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence as Seq, Tuple

import numpy as np
from scipy import optimize

from core_model import Channel, DistortionMatrix, Sequence, derive_seed, make_rng
from errors import CodebookTooLarge, HeaderMismatch, InfeasibleDelta, NotAchievable
from fsm_machines import (
    BitReader, BitWriter, Bitstream, FsmDecoder, PrefixCode, concat_codewords, fsm_decode,
    fsm_encode, parse_bitstream, tree_shapes,
)
from fsm_search import SearchGrid, canonicalize_decoder, operational_optimum

logger = logging.getLogger(__name__)

MU_MAX = 1e3
CODEBOOK_CAP = 2**20


# --- Max-entropy noise ---

@dataclass(frozen=True)
class MaxEntSolution:
    distribution: np.ndarray
    phi: float
    mu: float

    def to_dict(self) -> dict:
        return {"distribution": self.distribution.tolist(), "phi": self.phi,
                "mu": self.mu if math.isfinite(self.mu) else None}


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _tilted(rho0: np.ndarray, mu: float) -> np.ndarray:
    w = np.exp2(-mu * (rho0 - rho0.min()))
    return w / w.sum()


def maxent_distribution(rho0: Seq[float], delta: float) -> MaxEntSolution:
    """argmax H(Z) subject to E rho0(Z) <= delta, in the form P(z) ~ 2^(-mu rho0(z))."""
    r = np.asarray(rho0, dtype=np.float64)
    low = float(r.min())
    if delta < low - 1e-12:
        raise InfeasibleDelta(f"Delta {delta} is below the smallest cost {low}.")
    uniform = np.full(r.size, 1.0 / r.size)
    if float(uniform @ r) <= delta:
        return MaxEntSolution(uniform, _entropy(uniform), 0.0)
    if delta <= low + 1e-12:
        point = (r <= low + 1e-12).astype(np.float64)
        point /= point.sum()
        return MaxEntSolution(point, _entropy(point), math.inf)

    def gap(mu: float) -> float:
        return float(_tilted(r, mu) @ r) - delta

    if gap(MU_MAX) > 0:
        mu = MU_MAX
    else:
        mu = optimize.bisect(gap, 0.0, MU_MAX, xtol=1e-14, maxiter=400)
    p = _tilted(r, mu)
    return MaxEntSolution(p, _entropy(p), float(mu))


# --- Header accounting ---

def tree_count_bound(alpha: int) -> int:
    """sum_{k=1}^{alpha} (k-1)!"""
    return sum(math.factorial(k - 1) for k in range(1, alpha + 1))


def _ceil_log2_power(base: int, exponent: int) -> int:
    """ceil(exponent * log2(base)), exact while base^exponent stays small."""
    if base <= 1 or exponent == 0:
        return 0
    if exponent * math.log2(base) < 4096:
        return (base**exponent - 1).bit_length()
    return math.ceil(exponent * math.log2(base))


@dataclass(frozen=True)
class HeaderBudget:
    states: int
    alpha: int
    beta: int
    gamma: int
    max_delay: int = 0

    @property
    def tree_bits(self) -> int:
        return (tree_count_bound(self.alpha) - 1).bit_length()

    @property
    def output_bits(self) -> int:
        return _ceil_log2_power(self.gamma, self.states * self.alpha * self.beta)

    @property
    def transition_bits(self) -> int:
        return _ceil_log2_power(self.states, self.states * self.alpha * self.beta)

    @property
    def delay_bits(self) -> int:
        return delay_field_bits(self.max_delay)

    @property
    def total(self) -> int:
        return self.states * self.tree_bits + self.output_bits + self.transition_bits + self.delay_bits


def decoder_description_bits(states: int, alpha: int, beta: int, gamma: int, max_delay: int = 0) -> int:
    """Bits describing any decoder of the class, delay field included when max_delay > 0."""
    if min(states, alpha, beta, gamma) < 1 or max_delay < 0:
        raise ValueError("Header parameters must be >= 1 and the delay bound >= 0.")
    return HeaderBudget(states, alpha, beta, gamma, max_delay).total


def delay_field_bits(max_delay: int) -> int:
    return max_delay.bit_length()


# --- Wrapper codec ---

@dataclass(frozen=True)
class WrapperStream:
    bits: Bitstream
    header_bits: int
    delay_bits: int
    decoder: FsmDecoder
    distortion: float

    @property
    def total_bits(self) -> int:
        return self.bits.bit_length


def _tree_table(alpha: int) -> List[PrefixCode]:
    return [PrefixCode.from_shape(s) for s in tree_shapes(alpha)]


def _write_mixed_radix(writer: BitWriter, digits: List[int], radix: int, width: int):
    value = 0
    for d in reversed(digits):
        value = value * radix + d
    writer.write_uint(value, width)


def _read_mixed_radix(reader: BitReader, count: int, radix: int, width: int) -> List[int]:
    value = reader.read_uint(width)
    digits = []
    for _ in range(count):
        value, d = divmod(value, radix) if radix > 1 else (value, 0)
        digits.append(d)
    if value:
        raise HeaderMismatch("Table field exceeds its radix range.")
    return digits


def write_decoder_description(writer: BitWriter, dec: FsmDecoder, grid: SearchGrid):
    """Per-state tree indices, then f', then g', each over M states padded to alpha rows."""
    budget = HeaderBudget(grid.max_states, grid.alpha, grid.beta, grid.gamma, grid.max_delay)
    trees = _tree_table(grid.alpha)
    m = dec.state_count
    if m > grid.max_states:
        raise ValueError(f"Decoder has {m} states, the header describes {grid.max_states}.")
    for s in range(grid.max_states):
        writer.write_uint(trees.index(dec.codes[s]) if s < m else 0, budget.tree_bits)
    f_digits, g_digits = [], []
    for s in range(grid.max_states):
        for k in range(grid.alpha):
            for y in range(grid.beta):
                live = s < m and k < len(dec.codes[s])
                f_digits.append(dec.output[s][k][y] if live else 0)
                g_digits.append(dec.next_state[s][k][y] if live else 0)
    _write_mixed_radix(writer, f_digits, grid.gamma, budget.output_bits)
    _write_mixed_radix(writer, g_digits, grid.max_states, budget.transition_bits)
    writer.write_uint(dec.delay, budget.delay_bits)


def read_decoder_description(reader: BitReader, grid: SearchGrid) -> FsmDecoder:
    budget = HeaderBudget(grid.max_states, grid.alpha, grid.beta, grid.gamma, grid.max_delay)
    trees = _tree_table(grid.alpha)
    m = grid.max_states
    codes = []
    for _ in range(m):
        index = reader.read_uint(budget.tree_bits)
        if index >= len(trees):
            raise HeaderMismatch(f"Tree index {index} out of range.")
        codes.append(trees[index])
    cells = m * grid.alpha * grid.beta
    f_digits = _read_mixed_radix(reader, cells, grid.gamma, budget.output_bits)
    g_digits = _read_mixed_radix(reader, cells, m, budget.transition_bits)
    delay = reader.read_uint(budget.delay_bits)

    def table(digits):
        return [[tuple(digits[(s * grid.alpha + k) * grid.beta:(s * grid.alpha + k + 1) * grid.beta])
                 for k in range(len(codes[s]))] for s in range(m)]

    return canonicalize_decoder(codes, table(f_digits), table(g_digits), delay, grid.beta, grid.gamma)


def wrapper_encode(x: Sequence, rate: float, delta: float, grid: SearchGrid, ch: Channel,
                   rho: DistortionMatrix) -> WrapperStream:
    """Finds a pair meeting (rate, delta) on the grid and sends the decoder description ahead of its bits."""
    result = operational_optimum(x, rate, grid, ch, rho)
    if not result.feasible or result.distortion > delta + 1e-12:
        raise NotAchievable(f"No pair on the grid reaches distortion {delta} at rate {rate}.")
    writer = BitWriter()
    write_decoder_description(writer, result.decoder, grid)
    header = decoder_description_bits(grid.max_states, grid.alpha, grid.beta, grid.gamma, grid.max_delay)
    delay_bits = delay_field_bits(grid.max_delay)
    writer.write_stream(concat_codewords(fsm_encode(x, result.encoder).codewords))
    stream = writer.getvalue()
    logger.info("Wrapper stream: %d header bits, %d total", header, stream.bit_length)
    return WrapperStream(stream, header, delay_bits, result.decoder, result.distortion)


def wrapper_decode(stream: Bitstream, y: Sequence, grid: SearchGrid) -> Tuple[Sequence, FsmDecoder]:
    reader = BitReader(stream)
    dec = read_decoder_description(reader, grid)
    words = parse_bitstream(stream, y, dec, offset=reader.position)
    return fsm_decode(words, y, dec), dec


# --- Growth sweep ---

@dataclass(frozen=True)
class SweepRow:
    n: int
    states: int
    header_bits: int
    normalized: float


def theta_sweep(theta: float, ns: Seq[int], alpha: int = 2, beta: int = 2, gamma: int = 2) -> List[SweepRow]:
    if theta <= 0:
        raise ValueError("theta must be positive.")
    rows = []
    for n in ns:
        states = max(1, math.floor(n**theta + 1e-9))
        bits = decoder_description_bits(states, alpha, beta, gamma)
        rows.append(SweepRow(n, states, bits, bits / n))
    return rows


# --- Converse construction ---

@dataclass(frozen=True)
class ConverseParameters:
    phi: float
    rate: float
    source_rate: float
    feasible: bool


def converse_parameters(theta: float, delta: float, rho0: Seq[float]) -> ConverseParameters:
    """Rate phi/(theta-1) of the hard process against log2(alpha) - phi for the uniform source."""
    if theta <= 1:
        raise ValueError("The converse construction needs theta > 1.")
    phi = maxent_distribution(rho0, delta).phi
    rate = phi / (theta - 1)
    source_rate = math.log2(len(rho0)) - phi
    return ConverseParameters(phi, rate, source_rate, rate < source_rate)


def converse_state_bound(m: int, rate: float, phi: float) -> float:
    """States needed by a length-m block code viewed as an FSM: m 2^(m(R + phi))."""
    return m * 2.0 ** (m * (rate + phi))


@dataclass(frozen=True)
class ConverseProcess:
    x: Sequence
    codebook: np.ndarray
    choices: np.ndarray
    noise: np.ndarray


def converse_process_generate(m: int, blocks: int, rate: float, delta: float, rho0: Seq[float],
                              seed: int) -> ConverseProcess:
    alpha = len(rho0)
    if m * rate > math.log2(CODEBOOK_CAP):
        raise CodebookTooLarge(f"2^(mR) = 2^{m * rate:g} exceeds 2^20 codewords.")
    size = max(1, math.floor(2 ** (m * rate) + 1e-9))
    noise_law = maxent_distribution(rho0, delta).distribution
    codebook = make_rng(derive_seed(seed, "converse-codebook")).integers(0, alpha, size=(size, m))
    choices = make_rng(derive_seed(seed, "converse-choice")).integers(0, size, size=blocks)
    noise = make_rng(derive_seed(seed, "converse-noise")).choice(alpha, size=(blocks, m), p=noise_law)
    x = (codebook[choices] + noise) % alpha
    return ConverseProcess(Sequence.of(x.ravel(), alpha), codebook, choices, noise)
