"""
Block empirical distributions, their product join with a memoryless channel,
and the composition-rank type header.

Blocks are indexed in base alpha with the first symbol most significant, so
block tables line up with Kronecker powers of the per-letter channel.
"""
import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence as Seq

import numpy as np

from core_model import Channel, Sequence, STOCHASTIC_TOL, validate_dmc
from errors import HeaderMismatch, LengthNotDivisible, RankOverflow, TableTooLarge
from fsm_machines import BitReader, BitWriter, Bitstream

logger = logging.getLogger(__name__)

DEFAULT_TABLE_CAP = 2**24
RANK_LIMIT = 2**64


def block_symbols(block_length: int, alpha: int) -> np.ndarray:
    """(alpha^l, l) array; row i lists the symbols of block i."""
    idx = np.arange(alpha**block_length)
    powers = alpha ** np.arange(block_length - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % alpha


def block_indices(symbols: np.ndarray, block_length: int, alpha: int) -> np.ndarray:
    """Indices of the consecutive non-overlapping blocks of `symbols`."""
    blocks = np.asarray(symbols, dtype=np.int64).reshape(-1, block_length)
    powers = alpha ** np.arange(block_length - 1, -1, -1)
    return blocks @ powers


@dataclass(frozen=True, eq=False)
class BlockDistribution:
    block_length: int
    alpha: int
    probabilities: np.ndarray
    counts: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.alpha**self.block_length

    @property
    def block_count(self) -> int:
        if self.counts is None:
            raise ValueError("Distribution has no counts.")
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockDistribution):
            return False
        same_counts = (self.counts is None and other.counts is None) or (
            self.counts is not None and other.counts is not None and np.array_equal(self.counts, other.counts))
        return (self.block_length == other.block_length and self.alpha == other.alpha and same_counts
                and np.allclose(self.probabilities, other.probabilities, atol=STOCHASTIC_TOL, rtol=0))

    def __hash__(self):
        return hash((self.block_length, self.alpha, self.probabilities.tobytes()))


def _from_counts(counts, block_length: int, alpha: int) -> BlockDistribution:
    counts = np.asarray(counts, dtype=np.int64)
    probs = counts / counts.sum()
    counts.setflags(write=False)
    probs.setflags(write=False)
    return BlockDistribution(block_length, alpha, probs, counts)


def block_empirical(x: Sequence, block_length: int) -> BlockDistribution:
    if block_length < 1:
        raise ValueError("Block length must be >= 1.")
    n = len(x)
    if n == 0:
        raise ValueError("Empty sequence has no empirical distribution.")
    if n % block_length:
        raise LengthNotDivisible(f"Block length {block_length} does not divide n={n}.")
    alpha = x.alphabet.size
    idx = block_indices(x.symbols, block_length, alpha)
    counts = np.bincount(idx, minlength=alpha**block_length)
    return _from_counts(counts, block_length, alpha)


def dms_block_distribution(p: Seq[float], block_length: int) -> BlockDistribution:
    """Exact l-block law of an i.i.d. source with letter distribution p."""
    row = validate_dmc([p]).matrix[0]
    probs = reduce(np.kron, [row] * block_length)
    probs.setflags(write=False)
    return BlockDistribution(block_length, len(row), probs)


# --- Joins ---

def block_channel(ch: Channel, block_length: int) -> np.ndarray:
    """P(b^l | a^l) = prod_i P(b_i | a_i) as an (alpha^l, beta^l) array."""
    return reduce(np.kron, [ch.matrix] * block_length)


@dataclass(frozen=True, eq=False)
class JointBlockDistribution:
    block: BlockDistribution
    channel: Channel
    conditional: np.ndarray
    table: np.ndarray

    @property
    def block_length(self) -> int:
        return self.block.block_length

    @property
    def marginal(self) -> np.ndarray:
        return self.block.probabilities

    @property
    def side_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


def _check_cap(entries: int, cap: int):
    if entries > cap:
        raise TableTooLarge(f"Joint table needs {entries} entries, cap is {cap}.")


def join_with_channel(p: BlockDistribution, ch: Channel, table_cap: int = DEFAULT_TABLE_CAP) -> JointBlockDistribution:
    if ch.input_size != p.alpha:
        raise ValueError(f"Channel input alphabet {ch.input_size} != source alphabet {p.alpha}.")
    _check_cap(p.size * ch.output_size**p.block_length, table_cap)
    w = block_channel(ch, p.block_length)
    table = p.probabilities[:, None] * w
    w.setflags(write=False)
    table.setflags(write=False)
    return JointBlockDistribution(p, ch, w, table)


# --- Type header ---

def _compositions(total: int, parts: int) -> int:
    """Number of ways to write `total` as an ordered sum of `parts` nonnegative integers."""
    if parts == 0:
        return 1 if total == 0 else 0
    return math.comb(total + parts - 1, parts - 1)


def composition_count(total: int, parts: int) -> int:
    return _compositions(total, parts)


def composition_rank(counts: Seq[int]) -> int:
    """Lexicographic rank of `counts` among compositions of sum(counts) into len(counts) parts."""
    parts = len(counts)
    remaining = int(sum(counts))
    if _compositions(remaining, parts) >= RANK_LIMIT:
        raise RankOverflow(f"{parts} parts of {remaining} exceed a 64-bit rank.")
    rank = 0
    for i, c in enumerate(counts[:-1]):
        for v in range(int(c)):
            rank += _compositions(remaining - v, parts - i - 1)
        remaining -= int(c)
    return rank


def composition_unrank(rank: int, total: int, parts: int) -> np.ndarray:
    if rank < 0 or rank >= _compositions(total, parts):
        raise HeaderMismatch(f"Rank {rank} out of range for {parts} parts of {total}.")
    counts = []
    remaining = total
    for i in range(parts - 1):
        v = 0
        while True:
            block = _compositions(remaining - v, parts - i - 1)
            if rank < block:
                break
            rank -= block
            v += 1
        counts.append(v)
        remaining -= v
    counts.append(remaining)
    return np.array(counts, dtype=np.int64)


def _rank_width(total: int, parts: int) -> int:
    return (_compositions(total, parts) - 1).bit_length()


def _check_params(n: int, block_length: int) -> int:
    if block_length < 1 or n < block_length or n % block_length:
        raise LengthNotDivisible(f"Block length {block_length} does not divide n={n}.")
    return n // block_length


def type_header_bits(n: int, block_length: int, alpha: int) -> int:
    """Flag bit plus the rank field (or the fixed-field fallback)."""
    total = _check_params(n, block_length)
    parts = alpha**block_length
    if _compositions(total, parts) >= RANK_LIMIT:
        return 1 + parts * total.bit_length()
    return 1 + _rank_width(total, parts)


def write_type(writer: BitWriter, p: BlockDistribution, n: int):
    total = _check_params(n, p.block_length)
    if p.counts is None or p.block_count != total:
        raise ValueError(f"Type must count exactly {total} blocks.")
    try:
        rank = composition_rank(p.counts.tolist())
    except RankOverflow:
        logger.debug("Rank overflow for %d parts; writing fixed-width counts", p.size)
        writer.write_bit(1)
        for c in p.counts.tolist():
            writer.write_uint(c, total.bit_length())
        return
    writer.write_bit(0)
    writer.write_uint(rank, _rank_width(total, p.size))


def encode_type(p: BlockDistribution, n: int) -> Bitstream:
    w = BitWriter()
    write_type(w, p, n)
    return w.getvalue()


def read_type(reader: BitReader, n: int, block_length: int, alpha: int) -> BlockDistribution:
    total = _check_params(n, block_length)
    parts = alpha**block_length
    if reader.read_bit():
        counts = np.array([reader.read_uint(total.bit_length()) for _ in range(parts)], dtype=np.int64)
        if counts.sum() != total:
            raise HeaderMismatch(f"Fixed-width counts sum to {counts.sum()}, expected {total}.")
    else:
        if _compositions(total, parts) >= RANK_LIMIT:
            raise RankOverflow(f"Rank header for {parts} parts of {total} cannot be decoded.")
        rank = reader.read_uint(_rank_width(total, parts))
        counts = composition_unrank(rank, total, parts)
    return _from_counts(counts, block_length, alpha)


def decode_type(b: Bitstream, n: int, block_length: int, alpha: int) -> BlockDistribution:
    return read_type(BitReader(b), n, block_length, alpha)
