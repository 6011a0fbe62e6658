import numpy as np
import pytest

from core_model import (
    Sequence, average_distortion, bsc, dms_sequence, hamming, identity_channel, sample_side_info,
)
from empirical import block_empirical
from errors import LengthMismatch, NoTypicalMatch
from universal_codec import (
    CodecConfig, EncodedStream, canonical_codewords, design_code, encode_stream, rate_bound, shannon_lengths,
    typicality_decode, typicality_encoder_demo, uc_decode, uc_encode,
)

X = Sequence.from_string("0110100111010010")
ALL_BLOCKS = Sequence.from_string("0001101100011011")


def config(rate, ch=None, **kwargs):
    kwargs.setdefault("lambda_count", 8)
    kwargs.setdefault("restarts", 4)
    return CodecConfig(2, rate, ch or bsc(0.2), hamming(2), **kwargs)


def test_shannon_lengths_and_canonical_codewords():
    lengths = shannon_lengths(np.array([4, 2, 2, 0]), 8)
    assert lengths == {0: 1, 1: 2, 2: 2}
    assert canonical_codewords(lengths) == {0: "0", 1: "10", 2: "11"}
    assert canonical_codewords(shannon_lengths(np.array([5]), 5)) == {0: ""}


def test_lossless_round_trip_at_full_rate():
    cfg = config(1.0)
    y = sample_side_info(X, cfg.channel, seed=4)
    stream = uc_encode(X, cfg)
    assert uc_decode(stream, y, cfg) == X
    assert stream.total_bits <= len(X) * rate_bound(len(X), cfg)


def test_zero_rate_with_perfect_side_information():
    cfg = config(0.0, identity_channel(2))
    stream = uc_encode(X, cfg)
    assert stream.total_bits == stream.header_bits
    assert uc_decode(stream, X, cfg) == X


def test_design_is_deterministic():
    cfg = config(0.5)
    p = block_empirical(X, 2)
    assert design_code(p, cfg).fingerprint() == design_code(p, cfg).fingerprint()
    assert uc_encode(X, cfg).to_bytes() == uc_encode(X, cfg).to_bytes()


def test_stream_survives_byte_serialization():
    cfg = config(0.5)
    y = sample_side_info(X, cfg.channel, seed=8)
    stream, _ = encode_stream(X, cfg)
    restored = EncodedStream.from_bytes(stream.to_bytes(), len(X), 2, 2)
    assert uc_decode(restored, y, cfg) == uc_decode(stream, y, cfg)


def test_rate_bound_holds_across_inputs():
    cfg = config(0.5)
    for seed in range(4):
        x = dms_sequence([0.7, 0.3], 32, seed)
        stream = uc_encode(x, cfg)
        assert stream.total_bits / len(x) <= rate_bound(len(x), cfg)


def test_decode_rejects_wrong_side_length():
    cfg = config(0.5)
    stream = uc_encode(X, cfg)
    with pytest.raises(LengthMismatch):
        uc_decode(stream, Sequence.from_string("01"), cfg)


def test_time_sharing_round_trip_is_consistent():
    cfg = config(0.4, time_sharing=True, mixing_seed=3)
    y = sample_side_info(X, cfg.channel, seed=1)
    first = uc_decode(uc_encode(X, cfg), y, cfg)
    second = uc_decode(uc_encode(X, cfg), y, cfg)
    assert first == second
    assert len(first) == len(X)


def test_vacuous_typicality_matches_first_word():
    cfg = config(0.5)
    stream, diag = typicality_encoder_demo(X, cfg, eps=1.0, seed=2)
    assert diag.matched
    assert diag.index == 0
    y = sample_side_info(X, cfg.channel, seed=2)
    assert len(typicality_decode(stream, y, cfg, eps=1.0, seed=2)) == len(X)


def test_typicality_with_own_block_sequence_is_exact():
    cfg = config(1.0)
    code = design_code(block_empirical(ALL_BLOCKS, 2), cfg).primary.code
    blocks = [int("".join(map(str, ALL_BLOCKS.tolist()[i:i + 2])), 2) for i in range(0, 16, 2)]
    codebook = np.array([[code.assignment[a] for a in blocks]])
    stream, diag = typicality_encoder_demo(ALL_BLOCKS, cfg, eps=0.0, seed=0, codebook=codebook)
    assert diag.matched and diag.tv_distance == pytest.approx(0.0)
    y = sample_side_info(ALL_BLOCKS, cfg.channel, seed=5)
    assert typicality_decode(stream, y, cfg, eps=0.0, seed=0, codebook=codebook) == ALL_BLOCKS


def test_strict_typicality_without_match():
    cfg = config(1.0)
    with pytest.raises(NoTypicalMatch):
        typicality_encoder_demo(ALL_BLOCKS, cfg, eps=0.0, seed=0, codebook=np.zeros((1, 8), dtype=np.int64),
                                strict=True)


def test_rate_bound_at_desk_scale():
    cfg = config(0.5)
    n = 1024
    x = dms_sequence([0.7, 0.3], n, seed=31)
    stream = uc_encode(x, cfg)
    bound = cfg.rate + 1 / 2 + (4 / n) * np.log2(n / 2 + 1)
    assert stream.total_bits / n <= bound + 1e-9


def test_channel_seed_distortion_matches_design():
    cfg = config(0.5)
    x = dms_sequence([0.6, 0.4], 1024, seed=37)
    stream, design = encode_stream(x, cfg)
    samples = np.array([
        average_distortion(x, uc_decode(stream, sample_side_info(x, cfg.channel, seed), cfg), cfg.rho)
        for seed in range(100)
    ])
    stderr = samples.std(ddof=1) / np.sqrt(samples.size)
    assert abs(samples.mean() - design.primary.point.distortion) <= 3 * stderr + 1e-9


def test_typicality_match_frequency_over_seeds():
    cfg = CodecConfig(1, 0.5, bsc(0.2), hamming(2), lambda_count=8, restarts=4)
    matched = sum(
        typicality_encoder_demo(dms_sequence([0.5, 0.5], 48, seed), cfg, eps=0.05, seed=seed)[1].matched
        for seed in range(200)
    )
    assert matched >= 180
