"""Acceptance gate: every contractual criterion at its stated tolerance.

Slow statistical criteria share one module-scoped run of the outage
experiments.  Each test prints a one-line verdict so a verbose run reads
as a checklist.
"""

import math
import time

import numpy as np
import pytest

from antsel import verify
from antsel.analytic import leading_coefficient_exact
from antsel.montecarlo import independence_suite, lemma_harness

SEED = 20250809
FULL_TRIALS = 10_000_000


def report(num, name, detail):
    print(f"[criterion {num:02d}] PASS {name}: {detail}")


@pytest.fixture(scope="module")
def outage_fits():
    # 10M trials per rule on a common seed; shared by criteria 6, 7 and 9
    return verify.outage_slope_fits(FULL_TRIALS, SEED)


def test_criterion_01_analytic_expansion_anchor():
    t0 = time.perf_counter()
    ratio_33 = verify.quadrature_anchor_ratio(3, 3)
    ratio_43 = verify.quadrature_anchor_ratio(4, 3)
    elapsed = time.perf_counter() - t0
    assert 0.98 <= ratio_33 <= 1.02
    assert 0.98 <= ratio_43 <= 1.02
    assert elapsed < 1.0
    report(1, "analytic expansion anchor",
           f"(3,3) ratio {ratio_33:.5f}, (4,3) ratio {ratio_43:.5f} in {elapsed:.3f}s")


def test_criterion_02_analytic_slope():
    s_u = verify.quadrature_slope(3, 3, restricted=False)
    s_r = verify.quadrature_slope(3, 3, restricted=True)
    assert abs(s_u - 4.0) <= 0.05
    assert abs(s_u - s_r) <= 0.05
    report(2, "analytic log-log slope", f"unrestricted {s_u:.4f}, restricted {s_r:.4f}")


def test_criterion_03_coefficient_identities():
    t0 = time.perf_counter()
    from fractions import Fraction

    for n_t in range(2, 13):
        for n_r in range(2, 13):
            m = (n_t - 1) * (n_r - 1)
            assert leading_coefficient_exact(n_t, n_r) > 0
            tail = sum(Fraction(math.factorial(k), math.factorial(m + k + 1)) for k in range(n_t - 2))
            # the bound constrains the factorial-ratio tail sum (the
            # m-scaled coefficient would violate it already at (3,3))
            assert tail < Fraction(1, m * math.factorial(m))

    from antsel.analytic import binomial_identity_check, exp_integral, series_partial

    assert abs(series_partial(4, 1000) - 1.0 / 480.0) / (1.0 / 480.0) < 1e-9
    assert all(binomial_identity_check(m, k) for m in range(1, 21) for k in range(m))
    from scipy import integrate

    for k in range(-4, 9):
        for x in (0.1, 1.0, 5.0):
            ref, _ = integrate.quad(lambda t: t ** (-k) * math.exp(-x * t), 1.0, np.inf,
                                    epsabs=0.0, epsrel=1e-13, limit=300)
            assert abs(exp_integral(k, x) - ref) / abs(ref) < 1e-10
    for k in range(1, 7):
        for x in (0.1, 1.0, 5.0):
            res = k * exp_integral(k + 1, x) - math.exp(-x) + x * exp_integral(k, x)
            assert abs(res) < 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(3, "coefficient positivity and special-function identities", f"{elapsed:.2f}s")


def test_criterion_04_marginal_distributions():
    t0 = time.perf_counter()
    details = []
    for n_t, n_r in ((3, 3), (4, 2)):
        pv_h, pv_a = verify.marginal_ks_pvalues(n_t, n_r, 100_000, SEED)
        assert pv_h > 0.01, f"height KS failed for ({n_t},{n_r}): p={pv_h}"
        assert pv_a > 0.01, f"angle KS failed for ({n_t},{n_r}): p={pv_a}"
        details.append(f"({n_t},{n_r}): p_h={pv_h:.3f}, p_a={pv_a:.3f}")
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    report(4, "marginal distributions", "; ".join(details) + f" in {elapsed:.1f}s")


def test_criterion_05_independence_structure():
    t0 = time.perf_counter()
    rep = independence_suite(4, 3, 1_000_000, master_seed=SEED)
    elapsed = time.perf_counter() - t0
    failed = [c.name for c in rep.checks if not c.passed]
    assert rep.passed, failed
    assert elapsed < 60.0
    report(5, "independence structure", f"{len(rep.checks)} checks in {elapsed:.1f}s")


def test_criterion_06_diversity_order_separation(outage_fits):
    mm = outage_fits["maxmin"].slope
    rnd = outage_fits["random"].slope
    ff = outage_fits["first-fixed"].slope
    fo = outage_fits["first-ordered"].slope
    assert 3.2 <= mm <= 4.8
    assert 1.7 <= rnd <= 2.3
    assert mm - rnd >= 1.5
    assert 3.2 <= ff <= 4.8
    assert 3.2 <= fo <= 4.8
    report(6, "diversity-order separation",
           f"maxmin {mm:.2f}, random {rnd:.2f}, first-fixed {ff:.2f}, first-ordered {fo:.2f}")


def test_criterion_07_qr_df_structure(outage_fits):
    worst, first_ok = verify.qr_df_stage_oracle(100, SEED)
    assert worst < 1e-9
    assert first_ok
    qr = outage_fits["qr-greedy"].slope
    assert 3.2 <= qr <= 4.8
    report(7, "greedy/decision-feedback structure",
           f"stage-SNR error {worst:.1e}, first-layer slope {qr:.2f}")


def test_criterion_08_ber_ordering():
    res = verify.ber_ordering_test(200_000, 20.0, SEED)
    assert res["qr_bits"] >= 10 ** 6 and res["ff_bits"] >= 10 ** 6
    assert res["z"] > 1.645, res
    report(8, "decision-feedback BER ordering at 20 dB",
           f"qr {res['qr_ber']:.2e} < first-fixed {res['ff_ber']:.2e}, z = {res['z']:.2f}")


def test_criterion_09_dmt(outage_fits):
    fits = verify.dmt_estimates(FULL_TRIALS, SEED + 1)
    d1 = fits[1.0].slope
    d0 = fits[0.0].slope
    assert 1.5 <= d1 <= 2.5
    assert abs(d0 - outage_fits["maxmin"].slope) <= 0.3
    report(9, "diversity-multiplexing estimates", f"d(0) = {d0:.2f}, d(1) = {d1:.2f}")


def test_criterion_10_lemma_harnesses():
    r3 = lemma_harness("III", (1, 2), FULL_TRIALS, master_seed=SEED)
    assert abs(r3.fits[0].slope - 3.0) <= 0.15, r3
    r4 = lemma_harness("IV", (1, 1), FULL_TRIALS, master_seed=SEED)
    assert all(abs(f.slope - 1.0) <= 0.1 for f in r4.fits), r4
    assert abs(r4.fits[0].slope - r4.fits[1].slope) <= 0.1
    r5 = lemma_harness("V", (2, 1), FULL_TRIALS, master_seed=SEED)
    assert abs(r5.fits[0].slope - r5.fits[1].slope) <= 0.1, r5
    assert r5.passed
    report(10, "exponential-equivalence harnesses",
           f"III {r3.fits[0].slope:.3f}; IV {r4.fits[0].slope:.3f}/{r4.fits[1].slope:.3f}; "
           f"V {r5.fits[0].slope:.3f}/{r5.fits[1].slope:.3f}")


def test_criterion_11_reproducibility():
    ok, detail = verify.reproducibility_check(SEED)
    assert ok, detail
    report(11, "reproducibility", detail)
