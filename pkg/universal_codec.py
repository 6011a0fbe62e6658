"""
Universal block codec with decoder side information.

The stream carries the l-block type of x and nothing else about the code:
both ends rebuild the same WzCode from the type with the same solver seed,
so the header stays within the type-count budget. Each block is then sent
as the canonical Shannon-length codeword of its U symbol.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from config import Settings
from core_model import Channel, DistortionMatrix, Sequence, derive_seed, make_rng
from empirical import (
    BlockDistribution, block_empirical, block_indices, join_with_channel, read_type,
    type_header_bits, write_type,
)
from errors import CapExceeded, LengthMismatch, LengthNotDivisible, NoTypicalMatch, ParseFailure
from fsm_machines import BitReader, BitWriter, Bitstream, PrefixCode
from wz_solver import OperatingPoint, WzCode, default_lambda_grid, drf_curve, entropy_bits

logger = logging.getLogger(__name__)

TYPICALITY_INDEX_CAP = 24
CODEBOOK_CHUNK = 4096


@dataclass(frozen=True)
class CodecConfig:
    """Everything both ends must agree on."""
    block_length: int
    rate: float
    channel: Channel
    rho: DistortionMatrix
    usize: Optional[int] = None
    lambda_count: int = 32
    restarts: int = 8
    solver_seed: int = 0
    time_sharing: bool = False
    mixing_seed: int = 0
    table_cap: int = Settings().table_cap

    def __post_init__(self):
        if self.block_length < 1:
            raise ValueError("Block length must be >= 1.")
        if self.rate < 0:
            raise ValueError("Rate must be nonnegative.")

    @property
    def alpha(self) -> int:
        return self.channel.input_size


def shannon_lengths(counts: np.ndarray, total: int) -> Dict[int, int]:
    """Smallest L with count * 2^L >= total, for every used symbol."""
    lengths = {}
    for u, c in enumerate(counts.tolist()):
        if c > 0:
            length = 0
            while c << length < total:
                length += 1
            lengths[u] = length
    return lengths


def canonical_codewords(lengths: Dict[int, int]) -> Dict[int, str]:
    items = sorted((length, u) for u, length in lengths.items())
    words = {}
    code = 0
    prev = 0
    for length, u in items:
        code <<= length - prev
        words[u] = format(code, f"0{length}b") if length else ""
        code += 1
        prev = length
    return words


@dataclass(frozen=True)
class CodeBranch:
    point: OperatingPoint
    codewords: Dict[int, str]

    @property
    def code(self) -> WzCode:
        return self.point.code

    @property
    def prefix_code(self) -> PrefixCode:
        return PrefixCode.of(self.codewords[u] for u in sorted(self.codewords))

    def reader_table(self) -> Dict[str, int]:
        return {w: u for u, w in self.codewords.items()}


@dataclass(frozen=True)
class DesignedCode:
    primary: CodeBranch
    secondary: Optional[CodeBranch] = None
    mix: float = 0.0

    def fingerprint(self) -> str:
        parts = [self.primary.code.fingerprint(), repr(sorted(self.primary.codewords.items()))]
        if self.secondary is not None:
            parts += [self.secondary.code.fingerprint(), repr(sorted(self.secondary.codewords.items())),
                      repr(self.mix)]
        return "|".join(parts)


def _branch(point: OperatingPoint, p: BlockDistribution) -> CodeBranch:
    assignment = np.array(point.code.assignment, dtype=np.int64)
    u_counts = np.bincount(assignment, weights=p.counts, minlength=point.code.usize).round().astype(np.int64)
    return CodeBranch(point, canonical_codewords(shannon_lengths(u_counts, p.block_count)))


def design_code(p: BlockDistribution, cfg: CodecConfig) -> DesignedCode:
    """Deterministic in (type, cfg)."""
    if p.counts is None:
        raise ValueError("The codec designs from a counted type.")
    joint = join_with_channel(p, cfg.channel, cfg.table_cap)
    usize = cfg.usize or p.size + 1
    curve = drf_curve(joint, default_lambda_grid(cfg.lambda_count), usize, cfg.solver_seed, cfg.restarts, cfg.rho)
    if cfg.time_sharing:
        low, high, mix = curve.bracket(cfg.rate)
        if high is not None:
            return DesignedCode(_branch(low, p), _branch(high, p), mix)
    else:
        low = curve.vertex_at_most(cfg.rate)
    logger.debug("Designed code at rate %.4f, distortion %.4f", low.rate, low.distortion)
    return DesignedCode(_branch(low, p))


@dataclass(frozen=True)
class EncodedStream:
    bits: Bitstream
    header_bits: int
    n: int
    block_length: int
    alpha: int

    @property
    def total_bits(self) -> int:
        return self.bits.bit_length

    def to_bytes(self) -> bytes:
        return self.bits.data

    @classmethod
    def from_bytes(cls, data: bytes, n: int, block_length: int, alpha: int) -> "EncodedStream":
        return cls(Bitstream(data, 8 * len(data)), type_header_bits(n, block_length, alpha), n, block_length, alpha)


def _mix_choices(blocks: int, design: DesignedCode, mixing_seed: int) -> np.ndarray:
    if design.secondary is None:
        return np.zeros(blocks, dtype=bool)
    return make_rng(derive_seed(mixing_seed, "codec-mix")).random(blocks) < design.mix


def _branches(design: DesignedCode, blocks: int, cfg: CodecConfig) -> List[CodeBranch]:
    choices = _mix_choices(blocks, design, cfg.mixing_seed)
    return [design.secondary if c else design.primary for c in choices.tolist()]


def encode_stream(x: Sequence, cfg: CodecConfig) -> Tuple[EncodedStream, DesignedCode]:
    n = len(x)
    if n % cfg.block_length:
        raise LengthNotDivisible(f"Block length {cfg.block_length} does not divide n={n}.")
    p = block_empirical(x, cfg.block_length)
    design = design_code(p, cfg)
    writer = BitWriter()
    write_type(writer, p, n)
    header = writer.getvalue().bit_length
    blocks = block_indices(x.symbols, cfg.block_length, cfg.alpha).tolist()
    for a, branch in zip(blocks, _branches(design, len(blocks), cfg)):
        writer.write_bits(branch.codewords[branch.code.assignment[a]])
    stream = EncodedStream(writer.getvalue(), header, n, cfg.block_length, cfg.alpha)
    logger.info("Encoded %d letters into %d bits (%d header)", n, stream.total_bits, header)
    return stream, design


def uc_encode(x: Sequence, cfg: CodecConfig) -> EncodedStream:
    return encode_stream(x, cfg)[0]


def _read_symbol(reader: BitReader, table: Dict[str, int], max_length: int) -> int:
    word = ""
    while word not in table:
        if len(word) >= max_length:
            raise ParseFailure(f"No codeword matches '{word}' at bit {reader.position}.")
        word += str(reader.read_bit())
    return table[word]


def _reconstruct(us: List[int], branches: List[CodeBranch], y: Sequence, cfg: CodecConfig) -> Sequence:
    side = block_indices(y.symbols, cfg.block_length, cfg.channel.output_size).tolist()
    out: List[int] = []
    for u, b, branch in zip(us, side, branches):
        out.extend(branch.code.reconstruct(b, u))
    return Sequence.of(out, cfg.rho.reconstruction_size)


def _read_codewords(reader: BitReader, branches: List[CodeBranch]) -> List[int]:
    tables = {}
    us = []
    for branch in branches:
        key = id(branch)
        if key not in tables:
            tables[key] = (branch.reader_table(), max(len(w) for w in branch.codewords.values()))
        us.append(_read_symbol(reader, *tables[key]))
    return us


def decode_stream(stream: EncodedStream, y: Sequence, cfg: CodecConfig) -> Tuple[Sequence, DesignedCode]:
    n = len(y)
    if n != stream.n:
        raise LengthMismatch(f"Stream encodes {stream.n} letters, side information has {n}.")
    reader = BitReader(stream.bits)
    p = read_type(reader, n, cfg.block_length, cfg.alpha)
    design = design_code(p, cfg)
    branches = _branches(design, p.block_count, cfg)
    us = _read_codewords(reader, branches)
    return _reconstruct(us, branches, y, cfg), design


def uc_decode(stream: EncodedStream, y: Sequence, cfg: CodecConfig) -> Sequence:
    return decode_stream(stream, y, cfg)[0]


def rate_bound(n: int, cfg: CodecConfig) -> float:
    """R + 1/l + (alpha^l / n) log2(n/l + 1) + 1/n."""
    ell = cfg.block_length
    return cfg.rate + 1.0 / ell + (cfg.alpha**ell / n) * math.log2(n / ell + 1) + 1.0 / n


# --- Typicality variant ---

@dataclass(frozen=True)
class TypicalityDiagnostics:
    matched: bool
    index: Optional[int]
    index_bits: int
    codebook_size: int
    tv_distance: Optional[float]
    mutual_information: float


def _index_bits(mutual_information: float, blocks: int, eps: float) -> int:
    bits = max(0, math.ceil(blocks * (mutual_information + eps) - 1e-12))
    if bits > TYPICALITY_INDEX_CAP:
        raise CapExceeded(f"Codebook index needs {bits} bits, cap is {TYPICALITY_INDEX_CAP}.")
    return bits


def _codebook_chunks(q: np.ndarray, blocks: int, size: int, seed: int) -> Iterator[Tuple[int, np.ndarray]]:
    rng = make_rng(derive_seed(seed, "typicality-codebook"))
    p = q / q.sum()
    for start in range(0, size, CODEBOOK_CHUNK):
        yield start, rng.choice(len(q), size=(min(CODEBOOK_CHUNK, size - start), blocks), p=p)


def _tv_distances(chunk: np.ndarray, a_idx: np.ndarray, target: np.ndarray, usize: int) -> np.ndarray:
    rows, blocks = chunk.shape
    cells = target.size
    flat = (a_idx[None, :] * usize + chunk) + np.arange(rows)[:, None] * cells
    counts = np.bincount(flat.ravel(), minlength=rows * cells).reshape(rows, cells)
    return 0.5 * np.abs(counts / blocks - target[None, :]).sum(axis=1)


def typicality_encoder_demo(x: Sequence, cfg: CodecConfig, eps: float, seed: int,
                            codebook: Optional[np.ndarray] = None,
                            strict: bool = False) -> Tuple[EncodedStream, TypicalityDiagnostics]:
    """
    Sends the index of the first codebook word jointly typical with x's block
    sequence. Without a match the payload falls back to the codeword stream.
    """
    n = len(x)
    p = block_empirical(x, cfg.block_length)
    design = design_code(p, cfg)
    code = design.primary.code
    blocks = p.block_count
    a_idx = block_indices(x.symbols, cfg.block_length, cfg.alpha)
    target = (p.probabilities[:, None] * code.test_channel).ravel()
    info = entropy_bits(code.q)
    if codebook is None:
        bits = _index_bits(info, blocks, eps)
        size = 2**bits
        chunks = _codebook_chunks(code.q, blocks, size, seed)
    else:
        size = len(codebook)
        bits = (size - 1).bit_length()
        chunks = iter([(0, np.asarray(codebook, dtype=np.int64))])
    match, tv = None, None
    for start, chunk in chunks:
        dist = _tv_distances(chunk, a_idx, target, code.usize)
        hits = np.flatnonzero(dist <= eps + 1e-12)
        if hits.size:
            match, tv = start + int(hits[0]), float(dist[hits[0]])
            break

    writer = BitWriter()
    write_type(writer, p, n)
    header = writer.getvalue().bit_length
    if match is not None:
        writer.write_bit(0)
        writer.write_uint(match, bits)
    else:
        if strict:
            raise NoTypicalMatch(f"None of {size} codewords is {eps}-typical with the input.")
        logger.warning("No typical codeword among %d; sending the codeword stream", size)
        writer.write_bit(1)
        for a in a_idx.tolist():
            writer.write_bits(design.primary.codewords[code.assignment[a]])
    stream = EncodedStream(writer.getvalue(), header, n, cfg.block_length, cfg.alpha)
    return stream, TypicalityDiagnostics(match is not None, match, bits, size, tv, info)


def typicality_decode(stream: EncodedStream, y: Sequence, cfg: CodecConfig, eps: float, seed: int,
                      codebook: Optional[np.ndarray] = None) -> Sequence:
    n = len(y)
    reader = BitReader(stream.bits)
    p = read_type(reader, n, cfg.block_length, cfg.alpha)
    design = design_code(p, cfg)
    code = design.primary.code
    blocks = p.block_count
    branches = [design.primary] * blocks
    if reader.read_bit():
        return _reconstruct(_read_codewords(reader, branches), branches, y, cfg)
    if codebook is not None:
        index = reader.read_uint((len(codebook) - 1).bit_length())
        us = np.asarray(codebook, dtype=np.int64)[index]
    else:
        info = entropy_bits(code.q)
        bits = _index_bits(info, blocks, eps)
        index = reader.read_uint(bits)
        us = None
        for start, chunk in _codebook_chunks(code.q, blocks, 2**bits, seed):
            if start <= index < start + len(chunk):
                us = chunk[index - start]
                break
        if us is None:
            raise ParseFailure(f"Codebook index {index} out of range.")
    return _reconstruct([int(u) for u in us], branches, y, cfg)
