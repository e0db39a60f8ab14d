"""Sequence pipeline: digit maps, aggregation, and the T+2-layer stack."""

import math

import numpy as np
import pytest

from vmfhead.errors import DomainError, EncodingError, InstanceTooLarge, PrecisionBudgetExceeded
from vmfhead.seq2seq import (
    DigitConfig,
    RAggregate,
    SequenceSample,
    aggregate_R,
    build_seq2seq_transformer,
    decode_sequence,
    psi_decode,
    psi_encode,
    psi_strided,
    reference_seq2seq,
)


def seq_mean(elements):
    return np.tile(elements.mean(axis=0), (elements.shape[0], 1))


def seq_identity(elements):
    return elements.copy()


class TestDigitConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            DigitConfig(digits=0)
        with pytest.raises(DomainError):
            DigitConfig(digits=41)


class TestPsi:
    def test_endpoint_values(self):
        cfg = DigitConfig(digits=8)
        assert psi_encode(0.0, cfg) == 0.0
        np.testing.assert_allclose(psi_encode(1.0, cfg), 1.0 - 3.0**-8, rtol=1e-15)
        np.testing.assert_allclose(psi_encode(0.5, cfg), 2.0 / 3.0, rtol=1e-15)

    def test_monotone(self):
        cfg = DigitConfig(digits=10)
        xs = np.linspace(0.0, 1.0, 10_001)
        vals = np.array([psi_encode(float(x), cfg) for x in xs])
        assert np.all(np.diff(vals) >= 0.0)

    def test_decode_round_trip(self):
        cfg = DigitConfig(digits=8)
        for x in (0.0, 0.25, 0.5, 0.75):
            assert psi_decode(psi_encode(x, cfg), cfg) == x
        np.testing.assert_allclose(psi_decode(2.0 / 3.0, cfg), 0.5)

    def test_decode_rejects_middle_digits(self):
        cfg = DigitConfig(digits=4)
        with pytest.raises(EncodingError):
            psi_decode(1.0 / 3.0 + 1.0 / 81.0, cfg)

    def test_domain(self):
        cfg = DigitConfig(digits=4)
        with pytest.raises(DomainError):
            psi_encode(-0.1, cfg)
        with pytest.raises(DomainError):
            psi_encode(1.1, cfg)

    def test_strided_reduces_to_plain(self):
        cfg = DigitConfig(digits=6)
        for x in (0.0, 0.3, 0.5, 0.9, 1.0):
            np.testing.assert_allclose(float(psi_strided(x, cfg, 1)), psi_encode(x, cfg), rtol=1e-15)


class TestAggregation:
    def test_hand_examples(self):
        cfg = DigitConfig(digits=4)
        s0 = SequenceSample(1, 0, np.array([[0.0]]))
        assert aggregate_R(s0, cfg).value == 0.0
        s1 = SequenceSample(1, 0, np.array([[0.5]]))
        r = aggregate_R(s1, cfg)
        np.testing.assert_allclose(r.value, 2.0 / 3.0, rtol=1e-15)
        assert r.ternary_string() == "2000"

    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        cfg = DigitConfig(digits=6)
        for _ in range(100):
            e = rng.random((4, 3))
            s = SequenceSample(4, 2, e)
            back = decode_sequence(aggregate_R(s, cfg), 4, 2, cfg)
            assert np.array_equal(back.elements, np.floor(e * 2**6) / 2**6)

    def test_float_path_round_trip(self):
        rng = np.random.default_rng(1)
        cfg = DigitConfig(digits=4)
        for _ in range(100):
            e = rng.random((2, 2))
            s = SequenceSample(2, 1, e)
            back = decode_sequence(aggregate_R(s, cfg).value, 2, 1, cfg)
            assert np.array_equal(back.elements, np.floor(e * 2**4) / 2**4)

    def test_float_path_budget_guard(self):
        cfg = DigitConfig(digits=6)
        s = SequenceSample(4, 2, np.random.default_rng(2).random((4, 3)))
        r = aggregate_R(s, cfg)  # 72 ternary digits: exact form fine
        with pytest.raises(PrecisionBudgetExceeded):
            decode_sequence(r.value, 4, 2, cfg)

    def test_shape_mismatch_rejected(self):
        cfg = DigitConfig(digits=4)
        s = SequenceSample(2, 1, np.random.default_rng(3).random((2, 2)))
        r = aggregate_R(s, cfg)
        with pytest.raises(EncodingError):
            decode_sequence(r, 3, 1, cfg)
        with pytest.raises(EncodingError):
            decode_sequence(r, 2, 0, cfg)

    def test_middle_digit_rejected(self):
        cfg = DigitConfig(digits=1)
        with pytest.raises(EncodingError):
            decode_sequence(1.0 / 3.0, 1, 0, cfg)

    def test_weights_match_direct_sum(self):
        """The packed digits realize 3 sum_i 3^(-(i-1)(m+1)) sum_p 3^(-p)
        psi(x_ip) with the width-strided digit map."""
        cfg = DigitConfig(digits=3)
        rng = np.random.default_rng(4)
        for t_len, m in ((1, 0), (2, 1), (3, 0)):
            width = t_len * (m + 1)
            e = rng.random((t_len, m + 1))
            s = SequenceSample(t_len, m, e)
            direct = 0.0
            for i in range(t_len):
                for p in range(m + 1):
                    direct += 3.0 * 3.0 ** (-i * (m + 1)) * 3.0 ** (-(p + 1)) * float(
                        psi_strided(e[i, p], cfg, width)
                    )
            np.testing.assert_allclose(aggregate_R(s, cfg).value, direct, rtol=1e-12)


class TestReference:
    def test_identity_returns_truncation(self):
        cfg = DigitConfig(digits=5)
        e = np.random.default_rng(5).random((3, 2))
        s = SequenceSample(3, 1, e)
        out = np.stack(reference_seq2seq(seq_identity, s, cfg))
        assert np.array_equal(out, np.floor(e * 2**5) / 2**5)

    def test_mean_matches_direct(self):
        cfg = DigitConfig(digits=4)
        e = np.random.default_rng(6).random((2, 2))
        s = SequenceSample(2, 1, e)
        out = np.stack(reference_seq2seq(seq_mean, s, cfg))
        np.testing.assert_array_equal(out, seq_mean(np.floor(e * 2**4) / 2**4))

    def test_truncation_error_bound(self):
        cfg = DigitConfig(digits=6)
        rng = np.random.default_rng(7)
        bound = math.sqrt(2.0) * 2.0**-cfg.digits
        for _ in range(25):
            e = rng.random((3, 2))
            s = SequenceSample(3, 1, e)
            out = np.stack(reference_seq2seq(seq_mean, s, cfg))
            assert float(np.max(np.linalg.norm(out - seq_mean(e), axis=1))) <= bound


class TestStackAssembly:
    def test_layer_counts(self):
        cfg = DigitConfig(digits=2)
        for t_len in (1, 2, 3):
            stack = build_seq2seq_transformer(seq_mean, t_len, 1, cfg, mode="hybrid")
            assert stack.attention_layer_count == t_len + 2

    def test_hybrid_matches_reference(self):
        cfg = DigitConfig(digits=4)
        stack = build_seq2seq_transformer(seq_mean, 2, 1, cfg, mode="hybrid")
        rng = np.random.default_rng(8)
        for _ in range(25):
            s = SequenceSample(2, 1, rng.random((2, 2)))
            out = stack.evaluate(s)
            ref = np.stack(reference_seq2seq(seq_mean, s, cfg))
            assert float(np.max(np.abs(out - ref))) <= 1e-9

    def test_summation_layer_is_exact(self):
        cfg = DigitConfig(digits=4)
        stack = build_seq2seq_transformer(seq_mean, 2, 1, cfg, mode="hybrid")
        rng = np.random.default_rng(9)
        for _ in range(10):
            s = SequenceSample(2, 1, rng.random((2, 2)))
            trace = stack.stage_trace(s)
            vals = trace["layers"][1]["attention"][:, stack.layout.val]
            assert float(np.max(np.abs(vals - aggregate_R(s, cfg).value))) <= 1e-12

    def test_full_mode_fixture(self, fixtures):
        fx = fixtures["seq2seq_full_t2_m0_digits2"]
        cfg = DigitConfig(digits=2)
        stack = build_seq2seq_transformer(seq_mean, 2, 0, cfg, n_points=fx["n_points"], lam=fx["lam"], mode="full")
        grid = np.linspace(0.0, 1.0, fx["grid"])
        worst = 0.0
        for x1 in grid:
            for x2 in grid:
                s = SequenceSample(2, 0, np.array([[x1], [x2]]))
                ref = np.stack(reference_seq2seq(seq_mean, s, cfg))
                worst = max(worst, float(np.max(np.abs(stack.evaluate(s) - ref))))
        assert worst <= fx["sup_error"] * 1.25

    def test_full_mode_caps(self):
        cfg = DigitConfig(digits=4)
        with pytest.raises(InstanceTooLarge):
            build_seq2seq_transformer(seq_mean, 2, 1, cfg, mode="full")
        with pytest.raises(InstanceTooLarge):
            build_seq2seq_transformer(seq_mean, 4, 0, DigitConfig(digits=2), mode="full")

    def test_hybrid_budget_cap(self):
        with pytest.raises(InstanceTooLarge):
            build_seq2seq_transformer(seq_mean, 3, 2, DigitConfig(digits=4), mode="hybrid")

    def test_mode_validation(self):
        with pytest.raises(DomainError):
            build_seq2seq_transformer(seq_mean, 2, 1, DigitConfig(digits=2), mode="other")

    def test_encode_shape_guard(self):
        cfg = DigitConfig(digits=2)
        stack = build_seq2seq_transformer(seq_mean, 2, 1, cfg, mode="hybrid")
        with pytest.raises(DomainError):
            stack.encode_inputs(SequenceSample(3, 1, np.zeros((3, 2))))
