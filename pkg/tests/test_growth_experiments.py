import math

import numpy as np
import pytest

from core_model import Sequence, hamming, identity_channel, uniform_channel
from errors import CodebookTooLarge, InfeasibleDelta, NotAchievable
from fsm_machines import BitReader, BitWriter
from fsm_search import SearchGrid, operational_optimum
from growth_experiments import (
    HeaderBudget, converse_parameters, converse_process_generate, converse_state_bound, decoder_description_bits,
    delay_field_bits, maxent_distribution, read_decoder_description, theta_sweep, tree_count_bound,
    wrapper_decode, wrapper_encode, write_decoder_description,
)

DECADES = [10**3, 10**4, 10**5, 10**6, 10**7]


def binary_entropy(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_maxent_uniform_when_constraint_is_slack():
    sol = maxent_distribution([0.0, 1.0], 0.5)
    assert sol.distribution.tolist() == [0.5, 0.5]
    assert sol.phi == pytest.approx(1.0)


def test_maxent_point_mass_at_zero_distortion():
    sol = maxent_distribution([0.0, 1.0], 0.0)
    assert sol.distribution.tolist() == [1.0, 0.0]
    assert sol.phi == 0.0
    assert sol.to_dict()["mu"] is None


def test_maxent_matches_binary_entropy():
    sol = maxent_distribution([0.0, 1.0], 0.11)
    assert sol.phi == pytest.approx(binary_entropy(0.11), abs=1e-6)
    assert sol.distribution[1] == pytest.approx(0.11, abs=1e-9)


def test_maxent_rejects_infeasible_delta():
    with pytest.raises(InfeasibleDelta):
        maxent_distribution([0.5, 1.0], 0.1)


def test_decoder_description_bits():
    assert decoder_description_bits(2, 2, 2, 2) == 18
    assert decoder_description_bits(1, 2, 2, 2) == 5
    assert HeaderBudget(3, 2, 2, 1).output_bits == 0
    assert tree_count_bound(3) == 4
    with pytest.raises(ValueError):
        decoder_description_bits(0, 2, 2, 2)


def test_delay_field_bits():
    assert delay_field_bits(0) == 0
    assert delay_field_bits(1) == 1
    assert delay_field_bits(3) == 2


@pytest.mark.parametrize("theta", [0.3, 0.5])
def test_sweep_decreases_for_slow_growth(theta):
    values = [row.normalized for row in theta_sweep(theta, DECADES)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("theta", [1.0, 1.1, 1.5])
def test_sweep_increases_for_fast_growth(theta):
    values = [row.normalized for row in theta_sweep(theta, DECADES)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_sweep_state_counts():
    rows = theta_sweep(0.5, [10**4, 10**6])
    assert [r.states for r in rows] == [100, 1000]
    assert rows[0].header_bits == decoder_description_bits(100, 2, 2, 2)


def test_wrapper_with_perfect_side_information():
    grid = SearchGrid(1, 0, 1)
    x = Sequence.from_string("01101001")
    stream = wrapper_encode(x, 0.0, 0.0, grid, identity_channel(2), hamming(2))
    assert stream.total_bits == 5
    xh, dec = wrapper_decode(stream.bits, x, grid)
    assert xh == x
    assert dec == stream.decoder


def test_wrapper_header_round_trips_witness():
    grid = SearchGrid(2, 1, 1)
    x = Sequence.from_string("011010")
    result = operational_optimum(x, 0.5, grid, uniform_channel(2, 2), hamming(2))
    writer = BitWriter()
    write_decoder_description(writer, result.decoder, grid)
    stream = writer.getvalue()
    assert stream.bit_length == decoder_description_bits(2, 2, 2, 2, max_delay=1) == 19
    assert read_decoder_description(BitReader(stream), grid) == result.decoder


def test_wrapper_not_achievable_without_rate_or_side_information():
    with pytest.raises(NotAchievable):
        wrapper_encode(Sequence.from_string("0110"), 0.0, 0.0, SearchGrid(1, 0, 1), uniform_channel(2, 2),
                       hamming(2))


def test_converse_parameters():
    params = converse_parameters(3.0, 0.11, [0.0, 1.0])
    assert params.phi == pytest.approx(binary_entropy(0.11), abs=1e-6)
    assert params.rate == pytest.approx(params.phi / 2)
    assert params.source_rate == pytest.approx(1.0 - params.phi)
    assert params.feasible
    with pytest.raises(ValueError):
        converse_parameters(1.0, 0.11, [0.0, 1.0])
    assert converse_state_bound(4, 0.5, 0.5) == 64.0


def test_noiseless_converse_process_is_codebook_concatenation():
    proc = converse_process_generate(4, 6, 0.5, 0.0, [0.0, 1.0], seed=3)
    assert len(proc.x) == 24
    blocks = proc.x.symbols.reshape(6, 4)
    assert np.array_equal(blocks, proc.codebook[proc.choices])
    assert proc.codebook.shape == (4, 4)


def test_zero_rate_converse_process_has_one_word():
    proc = converse_process_generate(4, 5, 0.0, 0.11, [0.0, 1.0], seed=1)
    assert proc.codebook.shape == (1, 4)
    assert set(proc.choices.tolist()) == {0}


def test_converse_process_is_reproducible_and_capped():
    a = converse_process_generate(6, 4, 0.5, 0.11, [0.0, 1.0], seed=9)
    b = converse_process_generate(6, 4, 0.5, 0.11, [0.0, 1.0], seed=9)
    assert a.x == b.x
    with pytest.raises(CodebookTooLarge):
        converse_process_generate(30, 1, 1.0, 0.11, [0.0, 1.0], seed=0)


def test_wrapper_stream_is_header_plus_encoder_bits_with_delay():
    grid = SearchGrid(1, 1, 1)
    x = Sequence.from_string("0110")
    stream = wrapper_encode(x, 1.0, 0.0, grid, uniform_channel(2, 2), hamming(2))
    assert stream.header_bits == decoder_description_bits(1, 2, 2, 2, max_delay=1) == 6
    assert stream.delay_bits == 1
    assert stream.total_bits == stream.header_bits + len(x)
    xh, _ = wrapper_decode(stream.bits, Sequence.from_string("0000"), grid)
    assert xh == x
