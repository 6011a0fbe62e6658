"""
Finite-state encoders and delayed finite-state decoders with per-state
prefix codes, MSB-first bitstreams, and exact expected-distortion evaluation.

Codewords are binary strings. A decoder's code at a state is selected only
through its parse component: the coarsest partition of decoder states that
is closed under every (codeword, side-symbol) transition. Decoders whose
codes are not constant on that partition are rejected, so the codeword
boundaries never depend on the random side information.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence as Seq, Tuple

import numpy as np

from core_model import Channel, DistortionMatrix, Sequence, derive_seed, make_rng
from errors import FactorizationError, LengthMismatch, ParseFailure, UnknownCodeword

logger = logging.getLogger(__name__)

PAD_SYMBOL = 0


# --- Bits ---

class BitWriter:
    def __init__(self):
        self._bytes = bytearray()
        self._bits = 0

    def write_bit(self, bit: int):
        if self._bits % 8 == 0:
            self._bytes.append(0)
        if bit:
            self._bytes[-1] |= 0x80 >> (self._bits % 8)
        self._bits += 1

    def write_bits(self, text: str):
        for c in text:
            self.write_bit(c == "1")

    def write_uint(self, value: int, width: int):
        """value in exactly `width` bits, MSB first."""
        if value < 0 or (width < value.bit_length()):
            raise ValueError(f"{value} does not fit in {width} bits.")
        for shift in range(width - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def write_stream(self, other: "Bitstream"):
        self.write_bits(other.to_bits())

    def getvalue(self) -> "Bitstream":
        return Bitstream(bytes(self._bytes), self._bits)


class BitReader:
    def __init__(self, stream: "Bitstream", offset: int = 0):
        self.stream = stream
        self.position = offset

    @property
    def remaining(self) -> int:
        return self.stream.bit_length - self.position

    def read_bit(self) -> int:
        if self.position >= self.stream.bit_length:
            raise ParseFailure(f"Stream exhausted at bit {self.position}.")
        byte = self.stream.data[self.position // 8]
        bit = (byte >> (7 - self.position % 8)) & 1
        self.position += 1
        return bit

    def read_uint(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self.read_bit()
        return value


@dataclass(frozen=True)
class Bitstream:
    data: bytes
    bit_length: int

    def __post_init__(self):
        if self.bit_length > 8 * len(self.data):
            raise ValueError("bit_length exceeds the packed byte length.")

    @classmethod
    def from_bits(cls, text: str) -> "Bitstream":
        w = BitWriter()
        w.write_bits(text)
        return w.getvalue()

    def to_bits(self) -> str:
        r = BitReader(self)
        return "".join(str(r.read_bit()) for _ in range(self.bit_length))

    def __add__(self, other: "Bitstream") -> "Bitstream":
        return Bitstream.from_bits(self.to_bits() + other.to_bits())

    def __len__(self) -> int:
        return self.bit_length


# --- Prefix codes ---

@dataclass(frozen=True)
class KraftResult:
    passed: bool
    kraft_sum: float


@dataclass(frozen=True)
class PrefixCode:
    codewords: Tuple[str, ...]

    @classmethod
    def of(cls, words: Iterable[str]) -> "PrefixCode":
        return cls(tuple(words))

    @classmethod
    def from_shape(cls, depths: Seq[int]) -> "PrefixCode":
        """Leaves of a full binary tree given left-to-right by depth; '0' is the left branch."""
        words = []
        acc = Fraction(0)
        for d in depths:
            words.append(format(int(acc * 2**d), f"0{d}b") if d else "")
            acc += Fraction(1, 2**d)
        return cls(tuple(words))

    @property
    def lengths(self) -> Tuple[int, ...]:
        return tuple(len(w) for w in self.codewords)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.lengths

    def __len__(self) -> int:
        return len(self.codewords)

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {w: k for k, w in enumerate(self.codewords)}

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownCodeword(f"'{word}' is not in code {list(self.codewords)}.") from None

    def __contains__(self, word: str) -> bool:
        return word in self._index


def kraft_check(code: PrefixCode) -> KraftResult:
    words = code.codewords
    total = float(sum(Fraction(1, 2 ** len(w)) for w in words))
    ok = total <= 1.0
    if "" in words and len(words) > 1:
        ok = False
    if len(set(words)) != len(words):
        ok = False
    for a in words:
        for b in words:
            if a != b and a and b.startswith(a):
                ok = False
    return KraftResult(ok, total)


def tree_shapes(max_leaves: int, max_depth: Optional[int] = None) -> List[Tuple[int, ...]]:
    """All full binary tree shapes with 1..max_leaves leaves, as left-to-right leaf depths."""
    memo: Dict[int, List[Tuple[int, ...]]] = {1: [(0,)]}

    def exact(k: int) -> List[Tuple[int, ...]]:
        if k not in memo:
            out = []
            for j in range(1, k):
                for left in exact(j):
                    for right in exact(k - j):
                        out.append(tuple(d + 1 for d in left) + tuple(d + 1 for d in right))
            memo[k] = out
        return memo[k]

    shapes = []
    for k in range(1, max_leaves + 1):
        shapes.extend(s for s in exact(k) if max_depth is None or max(s) <= max_depth)
    return shapes


# --- Machines ---

def _check_code(code: PrefixCode, where: str):
    res = kraft_check(code)
    if not res.passed:
        raise ValueError(f"{where}: code {list(code.codewords)} fails Kraft/prefix check (sum {res.kraft_sum}).")


@dataclass(frozen=True)
class FsmEncoder:
    """u_i = f(s_i, x_i), s_{i+1} = g(s_i, x_i), s_1 = 0. f stores codeword indices into codes[s]."""
    codes: Tuple[PrefixCode, ...]
    output: Tuple[Tuple[int, ...], ...]
    next_state: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        m = len(self.codes)
        if m < 1 or len(self.output) != m or len(self.next_state) != m:
            raise ValueError("Encoder tables must have one row per state.")
        for s in range(m):
            _check_code(self.codes[s], f"encoder state {s}")
            if len(self.output[s]) != self.alphabet_size or len(self.next_state[s]) != self.alphabet_size:
                raise ValueError(f"Encoder row {s} has the wrong width.")
            if any(k < 0 or k >= len(self.codes[s]) for k in self.output[s]):
                raise ValueError(f"Encoder state {s} emits a codeword outside its code.")
            if any(t < 0 or t >= m for t in self.next_state[s]):
                raise ValueError(f"Encoder state {s} has a next state outside 0..{m - 1}.")

    @property
    def state_count(self) -> int:
        return len(self.codes)

    @property
    def alphabet_size(self) -> int:
        return len(self.output[0])

    def codeword(self, s: int, x: int) -> str:
        return self.codes[s].codewords[self.output[s][x]]

    def to_dict(self) -> dict:
        return {
            "states": self.state_count,
            "codes": [list(c.codewords) for c in self.codes],
            "f": [[self.codeword(s, x) for x in range(self.alphabet_size)] for s in range(self.state_count)],
            "g": [list(r) for r in self.next_state],
        }


@dataclass(frozen=True)
class FsmDecoder:
    """
    xhat_{i-d} = f'(s'_i, u_i, y_i) for i > d, s'_{i+1} = g'(s'_i, u_i, y_i), s'_1 = 0.
    Tables are indexed [state][codeword index in codes[state]][side symbol].
    """
    codes: Tuple[PrefixCode, ...]
    output: Tuple[Tuple[Tuple[int, ...], ...], ...]
    next_state: Tuple[Tuple[Tuple[int, ...], ...], ...]
    delay: int
    side_size: int
    reconstruction_size: int
    parse_class: Tuple[int, ...] = field(init=False)
    parse_next: Tuple[Tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        m = len(self.codes)
        if m < 1 or len(self.output) != m or len(self.next_state) != m:
            raise ValueError("Decoder tables must have one row per state.")
        if self.delay < 0:
            raise ValueError("Delay must be nonnegative.")
        for s in range(m):
            _check_code(self.codes[s], f"decoder state {s}")
            k_count = len(self.codes[s])
            if len(self.output[s]) != k_count or len(self.next_state[s]) != k_count:
                raise ValueError(f"Decoder state {s} needs one table row per codeword.")
            for k in range(k_count):
                if len(self.output[s][k]) != self.side_size or len(self.next_state[s][k]) != self.side_size:
                    raise ValueError(f"Decoder row ({s},{k}) has the wrong width.")
                if any(v < 0 or v >= self.reconstruction_size for v in self.output[s][k]):
                    raise ValueError(f"Decoder row ({s},{k}) emits a symbol outside the reconstruction alphabet.")
                if any(t < 0 or t >= m for t in self.next_state[s][k]):
                    raise ValueError(f"Decoder row ({s},{k}) has a next state outside 0..{m - 1}.")
        classes, parse_next = _parse_factorization(self.codes, self.next_state)
        object.__setattr__(self, "parse_class", classes)
        object.__setattr__(self, "parse_next", parse_next)

    @property
    def state_count(self) -> int:
        return len(self.codes)

    def parse_code(self, parse_state: int) -> PrefixCode:
        return self.codes[self.parse_class.index(parse_state)]

    @cached_property
    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """(F, G) as arrays of shape (M, Kmax, beta); rows past a state's code size are zero."""
        m = self.state_count
        k_max = max(1, max(len(c) for c in self.codes))
        F = np.zeros((m, k_max, self.side_size), dtype=np.int64)
        G = np.zeros((m, k_max, self.side_size), dtype=np.int64)
        for s in range(m):
            for k in range(len(self.codes[s])):
                F[s, k] = self.output[s][k]
                G[s, k] = self.next_state[s][k]
        return F, G

    def to_dict(self) -> dict:
        return {
            "states": self.state_count,
            "delay": self.delay,
            "codes": [list(c.codewords) for c in self.codes],
            "f": [[list(r) for r in rows] for rows in self.output],
            "g": [[list(r) for r in rows] for rows in self.next_state],
            "parse_class": list(self.parse_class),
        }


def _parse_factorization(codes, next_state) -> Tuple[Tuple[int, ...], Tuple[Tuple[int, ...], ...]]:
    """Finest partition closed under transitions; codes must be constant on each block."""
    m = len(codes)
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    changed = True
    while changed:
        changed = False
        blocks: Dict[int, List[int]] = {}
        for s in range(m):
            blocks.setdefault(find(s), []).append(s)
        for members in blocks.values():
            k_count = len(codes[members[0]])
            for k in range(k_count):
                targets = [find(t) for s in members if k < len(next_state[s]) for t in next_state[s][k]]
                for t in targets[1:]:
                    if find(t) != find(targets[0]):
                        parent[find(t)] = find(targets[0])
                        changed = True

    roots: Dict[int, int] = {}
    classes = []
    for s in range(m):
        classes.append(roots.setdefault(find(s), len(roots)))
    for s in range(m):
        for t in range(m):
            if classes[s] == classes[t] and codes[s] != codes[t]:
                raise FactorizationError(
                    f"States {s} and {t} must share a parse state but carry different codes.")
    parse_next = []
    for c in range(len(roots)):
        s = classes.index(c)
        parse_next.append(tuple(classes[next_state[s][k][0]] for k in range(len(codes[s]))))
    return tuple(classes), tuple(parse_next)


# --- Operations ---

@dataclass(frozen=True)
class EncodeResult:
    codewords: Tuple[str, ...]
    bits: int
    states: Tuple[int, ...]


def fsm_encode(x: Sequence, enc: FsmEncoder) -> EncodeResult:
    if x.alphabet.size > enc.alphabet_size:
        raise ValueError("Sequence alphabet exceeds encoder input alphabet.")
    s = 0
    words, states = [], []
    for xi in x.symbols.tolist():
        states.append(s)
        words.append(enc.codeword(s, xi))
        s = enc.next_state[s][xi]
    return EncodeResult(tuple(words), sum(len(w) for w in words), tuple(states))


def concat_codewords(u: Seq[str]) -> Bitstream:
    return Bitstream.from_bits("".join(u))


def _codeword_indices(u: Seq[str], dec: FsmDecoder) -> List[int]:
    p = 0
    out = []
    for i, word in enumerate(u):
        code = dec.parse_code(p)
        try:
            k = code.index(word)
        except UnknownCodeword as e:
            raise UnknownCodeword(f"Position {i}: {e}") from None
        out.append(k)
        p = dec.parse_next[p][k]
    return out


def fsm_decode(u: Seq[str], y: Sequence, dec: FsmDecoder) -> Sequence:
    n = len(y)
    if len(u) != n:
        raise LengthMismatch(f"{len(u)} codewords for {n} side-information symbols.")
    ks = _codeword_indices(u, dec)
    d = dec.delay
    xh = [PAD_SYMBOL] * n
    s = 0
    for i, (k, yi) in enumerate(zip(ks, y.symbols.tolist())):
        if i >= d:
            xh[i - d] = dec.output[s][k][yi]
        s = dec.next_state[s][k][yi]
    return Sequence.of(xh, dec.reconstruction_size)


def parse_bitstream(b: Bitstream, y: Sequence, dec: FsmDecoder, offset: int = 0) -> List[str]:
    """Isolates n = len(y) codewords; the active code follows the parse component only."""
    reader = BitReader(b, offset)
    p = 0
    out = []
    for i in range(len(y)):
        code = dec.parse_code(p)
        if len(code) == 0:
            raise ParseFailure(f"Position {i}: the active code is empty.")
        word = ""
        while word not in code:
            if not any(w.startswith(word) for w in code.codewords):
                raise ParseFailure(f"Position {i}: '{word}' is not a prefix of any codeword.")
            try:
                word += str(reader.read_bit())
            except ParseFailure:
                raise ParseFailure(f"Position {i}: stream exhausted mid-codeword.") from None
        out.append(word)
        p = dec.parse_next[p][code.index(word)]
    return out


def state_distributions(x: Sequence, enc: FsmEncoder, dec: FsmDecoder, ch: Channel) -> List[np.ndarray]:
    """pi_1..pi_{n+1}: the decoder-state law before each step (and after the last)."""
    u = fsm_encode(x, enc).codewords
    ks = _codeword_indices(u, dec)
    _, G = dec.dense
    m = dec.state_count
    pi = np.zeros(m)
    pi[0] = 1.0
    out = [pi]
    for xi, k in zip(x.symbols.tolist(), ks):
        nxt = np.zeros(m)
        np.add.at(nxt, G[:, k, :].ravel(), (pi[:, None] * ch.matrix[xi][None, :]).ravel())
        pi = nxt
        out.append(pi)
    return out


def expected_distortion_exact(x: Sequence, enc: FsmEncoder, dec: FsmDecoder, ch: Channel,
                              rho: DistortionMatrix) -> float:
    n = len(x)
    if n == 0:
        return 0.0
    u = fsm_encode(x, enc).codewords
    ks = _codeword_indices(u, dec)
    F, G = dec.dense
    d = dec.delay
    xs = x.symbols
    m = dec.state_count
    pi = np.zeros(m)
    pi[0] = 1.0
    total = 0.0
    for i, k in enumerate(ks):
        weights = pi[:, None] * ch.matrix[xs[i]][None, :]
        if i >= d:
            total += float((weights * rho.table[xs[i - d]][F[:, k, :]]).sum())
        nxt = np.zeros(m)
        np.add.at(nxt, G[:, k, :].ravel(), weights.ravel())
        pi = nxt
    for j in range(max(0, n - d), n):
        total += rho.table[xs[j]][PAD_SYMBOL]
    return total / n


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int


def expected_distortion_monte_carlo(x: Sequence, enc: FsmEncoder, dec: FsmDecoder, ch: Channel,
                                    rho: DistortionMatrix, samples: int, seed: int) -> MonteCarloEstimate:
    """Simulates `samples` independent side-information draws in one vectorized pass."""
    n = len(x)
    u = fsm_encode(x, enc).codewords
    ks = _codeword_indices(u, dec)
    F, G = dec.dense
    d = dec.delay
    xs = x.symbols
    rng = make_rng(derive_seed(seed, "fsm-monte-carlo"))
    cdf = np.cumsum(ch.matrix, axis=1)[xs]
    y = np.minimum((rng.random((samples, n))[:, :, None] >= cdf[None, :, :]).sum(axis=2), ch.output_size - 1)
    state = np.zeros(samples, dtype=np.int64)
    loss = np.zeros(samples)
    for i, k in enumerate(ks):
        if i >= d:
            loss += rho.table[xs[i - d]][F[state, k, y[:, i]]]
        state = G[state, k, y[:, i]]
    for j in range(max(0, n - d), n):
        loss += rho.table[xs[j]][PAD_SYMBOL]
    per_sample = loss / max(n, 1)
    stderr = float(per_sample.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    logger.debug("Monte Carlo over %d samples: mean %.6f", samples, per_sample.mean())
    return MonteCarloEstimate(float(per_sample.mean()), stderr, samples)
