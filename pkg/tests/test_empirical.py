import itertools

import numpy as np
import pytest

from core_model import Sequence, bsc, dms_sequence, identity_channel, uniform_channel
from empirical import (
    BlockDistribution, block_empirical, composition_count, composition_rank, composition_unrank, decode_type,
    dms_block_distribution, encode_type, join_with_channel, type_header_bits,
)
from errors import HeaderMismatch, LengthNotDivisible, RankOverflow, TableTooLarge


def test_periodic_input():
    p = block_empirical(Sequence.from_string("01010101"), 2)
    assert p.probabilities.tolist() == [0.0, 1.0, 0.0, 0.0]
    assert p.block_count == 4


def test_two_blocks():
    p = block_empirical(Sequence.from_string("0011"), 2)
    assert p.probabilities.tolist() == [0.5, 0.0, 0.0, 0.5]


def test_all_blocks_once():
    p = block_empirical(Sequence.from_string("00011011"), 2)
    assert p.probabilities.tolist() == [0.25] * 4


def test_block_length_must_divide():
    with pytest.raises(LengthNotDivisible):
        block_empirical(Sequence.from_string("011"), 2)


def test_dms_block_distribution_is_product():
    p = dms_block_distribution([0.25, 0.75], 2)
    assert p.probabilities == pytest.approx([0.0625, 0.1875, 0.1875, 0.5625])


def test_join_with_identity_channel():
    p = block_empirical(Sequence.from_string("0011"), 2)
    joint = join_with_channel(p, identity_channel(2))
    assert np.allclose(joint.table, np.diag(p.probabilities))


def test_join_with_uniform_channel():
    p = block_empirical(Sequence.from_string("00011011"), 2)
    joint = join_with_channel(p, uniform_channel(2, 2))
    assert np.allclose(joint.table, p.probabilities[:, None] / 4)
    assert joint.side_marginal == pytest.approx([0.25] * 4)


def test_join_single_row():
    joint = join_with_channel(block_empirical(Sequence.from_string("0"), 1), bsc(0.1))
    assert joint.table[0] == pytest.approx([0.9, 0.1])
    assert joint.table[1] == pytest.approx([0.0, 0.0])


def test_join_respects_table_cap():
    p = dms_block_distribution([0.5, 0.5], 4)
    with pytest.raises(TableTooLarge):
        join_with_channel(p, bsc(0.1), table_cap=100)


def test_header_width_for_sixteen_letters():
    assert composition_count(8, 4) == 165
    # flag bit plus an 8-bit rank, within the ceil(4 log2 9) + 1 budget
    assert type_header_bits(16, 2, 2) == 9
    assert type_header_bits(16, 2, 2) <= 13 + 1


def test_single_block_round_trip():
    x = Sequence.from_string("10")
    p = block_empirical(x, 2)
    assert decode_type(encode_type(p, 2), 2, 2, 2) == p


def test_every_type_round_trips():
    ranks = set()
    types = [c for c in itertools.product(range(5), repeat=4) if sum(c) == 4]
    assert len(types) == 35
    for counts in types:
        arr = np.array(counts, dtype=np.int64)
        p = BlockDistribution(2, 2, arr / 4, arr)
        stream = encode_type(p, 8)
        assert stream.bit_length == type_header_bits(8, 2, 2)
        assert decode_type(stream, 8, 2, 2) == p
        ranks.add(composition_rank(counts))
    assert ranks == set(range(35))


def test_unrank_rejects_out_of_range():
    with pytest.raises(HeaderMismatch):
        composition_unrank(35, 4, 4)


def test_rank_overflow_falls_back_to_fixed_fields():
    with pytest.raises(RankOverflow):
        composition_rank([16] + [0] * 1023)
    x = dms_sequence([0.5, 0.5], 160, seed=2)
    p = block_empirical(x, 10)
    stream = encode_type(p, 160)
    assert stream.bit_length == 1 + 1024 * 5 == type_header_bits(160, 10, 2)
    assert decode_type(stream, 160, 10, 2) == p
