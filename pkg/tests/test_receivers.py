import math

import numpy as np
import pytest

from antsel.channel import complex_gaussian, projection_height_sq, qr_factorize, stream_generator
from antsel.receivers import (
    LinkBudget,
    detect_df,
    detect_linear,
    df_stage_snrs,
    mmse_post_snr,
    qpsk_bit_error_rate,
    qpsk_demodulate,
    qpsk_modulate,
    qpsk_slice,
    simulate_frame,
    transmit,
    vblast_order,
    zf_post_snr,
)


def rand_matrix(n_r, n_t, seed=0, stream=0):
    return complex_gaussian(stream_generator(seed, stream), (n_r, n_t))


def orthonormal(n_r, L, seed=0):
    q, _ = np.linalg.qr(rand_matrix(n_r, L, seed=seed))
    return q


class TestBudgetAndConstellation:
    def test_budget_validation(self):
        with pytest.raises(ValueError):
            LinkBudget(rho0=-1.0, L=2)
        with pytest.raises(ValueError):
            LinkBudget(rho0=1.0, L=0)
        assert LinkBudget(rho0=10.0, L=2).stream_scale == pytest.approx(math.sqrt(5.0))

    def test_modulation_roundtrip(self):
        rng = stream_generator(0, 0)
        bits = rng.integers(0, 2, size=(2, 64, 2))
        symbols = qpsk_modulate(bits)
        np.testing.assert_allclose(np.abs(symbols), 1.0, rtol=1e-12)
        np.testing.assert_array_equal(qpsk_demodulate(symbols), bits)

    def test_slicing_recovers_clean_points(self):
        symbols = qpsk_modulate(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
        np.testing.assert_allclose(qpsk_slice(symbols + 0.1 - 0.05j), symbols)


class TestPostSnr:
    def test_zf_orthonormal(self):
        report = zf_post_snr(orthonormal(4, 2), LinkBudget(10.0, 2))
        assert report.snrs == pytest.approx((5.0, 5.0), rel=1e-9)

    def test_zf_hand_pair(self):
        H = np.array([[1.0, 1 / np.sqrt(2)], [0.0, 1 / np.sqrt(2)]], dtype=complex)
        report = zf_post_snr(H, LinkBudget(10.0, 2))
        assert report.snrs == pytest.approx((2.5, 2.5), rel=1e-9)

    @pytest.mark.parametrize("n_r,L", [(n_r, L) for n_r in range(2, 6) for L in range(2, 5) if n_r >= L])
    def test_zf_routes_agree(self, n_r, L):
        from antsel.channel import gram_inverse_diag

        budget = LinkBudget(7.0, L)
        for stream in range(10):
            H = rand_matrix(n_r, L, seed=21, stream=stream)
            via_heights = np.asarray(zf_post_snr(H, budget).snrs)
            via_gram = (budget.rho0 / L) / gram_inverse_diag(H)
            np.testing.assert_allclose(via_heights, via_gram, rtol=1e-9)

    def test_mmse_orthonormal_matches_zf(self):
        H = orthonormal(4, 2, seed=1)
        budget = LinkBudget(10.0, 2)
        assert mmse_post_snr(H, budget).snrs == pytest.approx(zf_post_snr(H, budget).snrs, rel=1e-9)

    def test_mmse_vanishes_at_zero_snr(self):
        H = rand_matrix(3, 2, seed=2)
        assert max(mmse_post_snr(H, LinkBudget(1e-9, 2)).snrs) < 1e-8

    def test_mmse_meets_zf_at_high_snr(self):
        H = rand_matrix(3, 2, seed=3)
        budget = LinkBudget(1e6, 2)
        zf = np.asarray(zf_post_snr(H, budget).snrs)
        mmse = np.asarray(mmse_post_snr(H, budget).snrs)
        np.testing.assert_allclose(mmse / zf, 1.0, rtol=0.01)

    def test_mmse_dominates_zf(self):
        budget = LinkBudget(5.0, 3)
        for stream in range(20):
            H = rand_matrix(4, 3, seed=4, stream=stream)
            zf = np.asarray(zf_post_snr(H, budget).snrs)
            mmse = np.asarray(mmse_post_snr(H, budget).snrs)
            assert np.all(mmse >= zf - 1e-9)


class TestLinearDetection:
    def test_noiseless_recovery(self):
        H = rand_matrix(3, 2, seed=5)
        budget = LinkBudget(4.0, 2)
        bits = stream_generator(6, 0).integers(0, 2, size=(2, 32, 2))
        s = qpsk_modulate(bits)
        y = transmit(H, budget, s, np.zeros((3, 32), dtype=complex))
        for eq in ("zf", "mmse"):
            np.testing.assert_allclose(detect_linear(H, y, budget, equalizer=eq), s, atol=1e-12)

    def test_orthonormal_reduces_to_per_stream_slicing(self):
        H = orthonormal(4, 2, seed=7)
        budget = LinkBudget(6.0, 2)
        rng = stream_generator(8, 0)
        s = qpsk_modulate(rng.integers(0, 2, size=(2, 100, 2)))
        noise = complex_gaussian(rng, (4, 100))
        y = transmit(H, budget, s, noise)
        detected = detect_linear(H, y, budget)
        per_stream = qpsk_slice((H.conj().T @ y) / budget.stream_scale)
        np.testing.assert_allclose(detected, per_stream)

    def test_awgn_bit_error_oracle(self):
        # single stream on a unit channel: empirical BER vs the closed form
        budget = LinkBudget(4.0, 1)
        H = np.array([[1.0]], dtype=complex)
        rng = stream_generator(9, 0)
        n = 200_000
        bits = rng.integers(0, 2, size=(1, n, 2))
        s = qpsk_modulate(bits)
        y = transmit(H, budget, s, complex_gaussian(rng, (1, n)))
        errs = int(np.sum(qpsk_demodulate(detect_linear(H, y, budget)) != bits))
        p = qpsk_bit_error_rate(budget.rho0)
        sigma = math.sqrt(p * (1 - p) * 2 * n)
        assert abs(errs - p * 2 * n) < 3 * sigma

    def test_dimension_mismatch(self):
        H = rand_matrix(3, 2)
        with pytest.raises(ValueError):
            detect_linear(H, np.zeros((4, 8), dtype=complex), LinkBudget(1.0, 2))


class TestDecisionFeedback:
    def test_orthogonal_columns_match_linear(self):
        H = orthonormal(4, 2, seed=10) * 2.0
        budget = LinkBudget(8.0, 2)
        rng = stream_generator(11, 0)
        s = qpsk_modulate(rng.integers(0, 2, size=(2, 200, 2)))
        y = transmit(H, budget, s, complex_gaussian(rng, (4, 200)))
        df = detect_df(H, y, budget, (0, 1))
        lin = detect_linear(H, y, budget)
        np.testing.assert_allclose(df, lin)

    def test_noiseless_exact_both_modes(self):
        H = rand_matrix(3, 2, seed=12)
        budget = LinkBudget(4.0, 2)
        s = qpsk_modulate(stream_generator(13, 0).integers(0, 2, size=(2, 16, 2)))
        y = transmit(H, budget, s, np.zeros((3, 16), dtype=complex))
        for feedback in ("actual", "genie"):
            out = detect_df(H, y, budget, (1, 0), feedback=feedback, transmitted=s)
            np.testing.assert_allclose(out, s, atol=1e-12)

    def test_stage_snrs_follow_projection_heights(self):
        budget = LinkBudget(9.0, 3)
        for stream in range(10):
            H = rand_matrix(4, 3, seed=14, stream=stream)
            order = tuple(stream_generator(15, stream).permutation(3))
            snrs = df_stage_snrs(H, budget, order)
            for stage, k in enumerate(order):
                expected = 3.0 * projection_height_sq(H, k, order[stage + 1:]).height_sq
                assert snrs[stage] == pytest.approx(expected, rel=1e-9)

    def test_genie_stage_snrs_match_triangular_diagonal(self):
        budget = LinkBudget(10.0, 2)
        for stream in range(10):
            H = rand_matrix(3, 5, seed=16, stream=stream)
            from antsel.selection import select_qr_greedy

            out = select_qr_greedy(H, 2)
            selection = [out.subset.indices[p] for p in reversed(out.decode_order)]
            H_sel = H[:, selection]
            _, r = qr_factorize(H_sel)
            snrs = df_stage_snrs(H_sel, budget, (1, 0))
            diag = (budget.rho0 / budget.L) * np.abs(np.diagonal(r)) ** 2
            np.testing.assert_allclose(snrs, diag[::-1], rtol=1e-9)

    def test_genie_requires_transmitted(self):
        H = rand_matrix(3, 2, seed=17)
        with pytest.raises(ValueError):
            detect_df(H, np.zeros((3, 4), dtype=complex), LinkBudget(1.0, 2), (0, 1), feedback="genie")

    def test_invalid_permutation(self):
        H = rand_matrix(3, 2, seed=18)
        with pytest.raises(ValueError):
            detect_df(H, np.zeros((3, 4), dtype=complex), LinkBudget(1.0, 2), (0, 0))

    def test_ber_monotone_in_snr_common_noise(self):
        H = rand_matrix(3, 2, seed=19)
        rng = stream_generator(20, 0)
        bits = rng.integers(0, 2, size=(2, 3000, 2))
        s = qpsk_modulate(bits)
        noise = complex_gaussian(rng, (3, 3000))
        errors = []
        for rho_db in (0.0, 5.0, 10.0, 15.0, 20.0):
            budget = LinkBudget(10 ** (rho_db / 10), 2)
            y = transmit(H, budget, s, noise)
            det = detect_df(H, y, budget, (0, 1))
            errors.append(int(np.sum(qpsk_demodulate(det) != bits)))
        assert all(a >= b for a, b in zip(errors, errors[1:]))


class TestSimulateFrame:
    def test_roundtrip_at_high_snr(self):
        H = rand_matrix(3, 2, seed=23)
        budget = LinkBudget(1e6, 2)
        rng = stream_generator(24, 0)
        bits = rng.integers(0, 2, size=(2, 40, 2))
        noise = complex_gaussian(rng, (3, 40))
        for receiver in ("zf", "mmse", "df-zf", "df-mmse"):
            frame = simulate_frame(H, budget, bits, noise, receiver=receiver)
            assert frame.transmitted.shape == frame.detected.shape == (2, 40)
            assert frame.received.shape == (3, 40)
            np.testing.assert_array_equal(qpsk_demodulate(frame.detected), bits)

    def test_unknown_receiver(self):
        H = rand_matrix(3, 2, seed=25)
        with pytest.raises(ValueError):
            simulate_frame(H, LinkBudget(1.0, 2), np.zeros((2, 4, 2), dtype=int),
                           np.zeros((3, 4), dtype=complex), receiver="sphere")


class TestVblastOrder:
    def test_orthogonal_norms(self):
        H = np.diag([1.0, 3.0]).astype(complex)  # squared norms 1 and 9
        assert vblast_order(H, LinkBudget(5.0, 2)) == (1, 0)

    def test_single_stream(self):
        H = rand_matrix(3, 1, seed=21)
        assert vblast_order(H, LinkBudget(5.0, 1)) == (0,)

    def test_always_a_permutation(self):
        for stream in range(10):
            H = rand_matrix(4, 3, seed=22, stream=stream)
            order = vblast_order(H, LinkBudget(5.0, 3))
            assert sorted(order) == [0, 1, 2]
