"""
Alphabets, sequences, memoryless channels, distortion measures and seeded
randomness shared by every other module.

All probability tables are float64 numpy arrays marked read-only after
validation. The project-wide pseudorandom generator is numpy's PCG64; every
stochastic operation takes an explicit 64-bit seed.
"""
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence as Seq, Tuple, Union

import numpy as np

from config import ModelDocument, load_model_document_file
from errors import LengthMismatch, NegativeEntry, NonStochasticRow

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
SEED_MASK = (1 << 64) - 1
PRNG_NAME = "PCG64"


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"Alphabet size must be >= 1, got {self.size}.")


@dataclass(frozen=True, eq=False)
class Sequence:
    symbols: np.ndarray
    alphabet: Alphabet

    @classmethod
    def of(cls, symbols: Iterable[int], alphabet_size: int) -> "Sequence":
        arr = _frozen(list(symbols), np.int64)
        if arr.ndim != 1:
            raise ValueError("A sequence is one-dimensional.")
        if arr.size and (arr.min() < 0 or arr.max() >= alphabet_size):
            raise ValueError(f"Symbol outside alphabet of size {alphabet_size}.")
        return cls(arr, Alphabet(alphabet_size))

    @classmethod
    def from_string(cls, text: str, alphabet_size: int = 2) -> "Sequence":
        """'0110' -> Sequence; convenient for tests and the CLI."""
        return cls.of((int(c) for c in text), alphabet_size)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Sequence) and self.alphabet == other.alphabet
                and np.array_equal(self.symbols, other.symbols))

    def __hash__(self):
        return hash((self.alphabet.size, self.symbols.tobytes()))

    def tolist(self):
        return self.symbols.tolist()

    def __str__(self) -> str:
        return "".join(str(s) for s in self.symbols.tolist())


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic P(y|x), indexed [x][y]."""
    matrix: np.ndarray

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, Channel) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True, eq=False)
class DistortionMatrix:
    """rho[x][xhat] >= 0, finite."""
    table: np.ndarray
    rho_max: float

    @classmethod
    def of(cls, table) -> "DistortionMatrix":
        arr = np.array(table, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("Distortion table must be a non-empty rectangle.")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Distortion entries must be finite.")
        if np.any(arr < 0):
            raise NegativeEntry("Distortion entries must be nonnegative.")
        arr.setflags(write=False)
        return cls(arr, float(arr.max()))

    @property
    def source_size(self) -> int:
        return self.table.shape[0]

    @property
    def reconstruction_size(self) -> int:
        return self.table.shape[1]


def hamming(size: int) -> DistortionMatrix:
    return DistortionMatrix.of(1.0 - np.eye(size))


def difference_distortion(rho0: Seq[float]) -> DistortionMatrix:
    """rho[x][xhat] = rho0((x - xhat) mod alpha) over the cyclic group of order alpha."""
    alpha = len(rho0)
    table = [[rho0[(x - xh) % alpha] for xh in range(alpha)] for x in range(alpha)]
    return DistortionMatrix.of(table)


def validate_dmc(matrix) -> Channel:
    """Checks a P(y|x) table. Rows are never renormalized."""
    rows = [list(r) for r in matrix]
    if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("Channel table must be rectangular with at least one row and column.")
    arr = np.array(rows, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1):
        bad = np.argwhere((arr < 0) | (arr > 1))[0]
        raise NegativeEntry(f"Channel entry [{bad[0]}][{bad[1]}] = {arr[tuple(bad)]} is outside [0, 1].")
    sums = arr.sum(axis=1)
    for x, total in enumerate(sums):
        if abs(total - 1.0) > STOCHASTIC_TOL:
            raise NonStochasticRow(f"Channel row {x} sums to {total!r}, not 1.")
    arr.setflags(write=False)
    return Channel(arr)


def bsc(crossover: float) -> Channel:
    return validate_dmc([[1.0 - crossover, crossover], [crossover, 1.0 - crossover]])


def identity_channel(size: int) -> Channel:
    return validate_dmc(np.eye(size))


def uniform_channel(input_size: int, output_size: int) -> Channel:
    return validate_dmc(np.full((input_size, output_size), 1.0 / output_size))


# --- Seeds ---

def derive_seed(master: int, label: str, index: int = 0) -> int:
    """Sub-seed for a labelled operation: BLAKE2b(master, label, index) truncated to 64 bits."""
    h = hashlib.blake2b(digest_size=8)
    h.update((master & SEED_MASK).to_bytes(8, "big"))
    h.update(label.encode("utf-8"))
    h.update(int(index).to_bytes(8, "big", signed=True))
    return int.from_bytes(h.digest(), "big")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & SEED_MASK))


def sample_side_info(x: Sequence, ch: Channel, seed: int) -> Sequence:
    """Draws y_i ~ P(.|x_i) independently by inverse-CDF on one uniform per letter."""
    if x.alphabet.size > ch.input_size:
        raise ValueError("Sequence alphabet exceeds channel input alphabet.")
    rng = make_rng(seed)
    draws = rng.random(len(x))
    cdf = np.cumsum(ch.matrix, axis=1)[x.symbols]
    y = (draws[:, None] >= cdf).sum(axis=1)
    y = np.minimum(y, ch.output_size - 1)
    return Sequence.of(y, ch.output_size)


def dms_sequence(p: Seq[float], n: int, seed: int) -> Sequence:
    """n letters drawn i.i.d. from p."""
    source = validate_dmc([p])
    rng = make_rng(seed)
    cdf = np.cumsum(source.matrix[0])
    x = (rng.random(n)[:, None] >= cdf).sum(axis=1)
    return Sequence.of(np.minimum(x, source.output_size - 1), source.output_size)


def average_distortion(x: Sequence, xh: Sequence, rho: DistortionMatrix) -> float:
    if len(x) != len(xh):
        raise LengthMismatch(f"Lengths differ: {len(x)} vs {len(xh)}.")
    if len(x) == 0:
        return 0.0
    return float(rho.table[x.symbols, xh.symbols].mean())


# --- Documents ---

def model_from_document(doc: ModelDocument) -> Tuple[Channel, DistortionMatrix, Union[Sequence, None]]:
    ch = validate_dmc(doc.channel)
    if doc.distortion == "hamming":
        rho = hamming(doc.alphabet_x)
    else:
        rho = DistortionMatrix.of(doc.distortion)
    x = Sequence.of(doc.sequence, doc.alphabet_x) if doc.sequence is not None else None
    return ch, rho, x


def load_model_document(path: Union[str, Path]) -> Tuple[Channel, DistortionMatrix, Union[Sequence, None]]:
    doc = load_model_document_file(path)
    logger.debug("Loaded model document %s (alpha=%d, beta=%d)", path, doc.alphabet_x, doc.alphabet_y)
    return model_from_document(doc)
