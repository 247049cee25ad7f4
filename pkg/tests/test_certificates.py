import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expstab.certificates import (LADDER, EstimatorConfig, StabilityEnvelope, check_bound, check_envelope,
                                  classify, es_form_ii, es_form_iii, es_from_nu_beta, es_from_nu_delta,
                                  estimate_envelope, geometric_prefactor, geometric_rate, ses_form,
                                  ses_from_nu, transform_es, transform_ses)
from expstab.errors import ContractError, NoRateDerivable
from expstab.evolution import EvolutionFamily, build_norm_table
from expstab.zoo import constant_scalar, identity_family, paper_example, random_family, zero_family


def dipping_family(alpha=0.5, scale=0.02):
    """Scalar family with log|A_m^0| = -alpha m - scale m^2 at even m, -alpha m at odd m.

    Every start n sees ||A_m^n|| <= e^{scale n^2} e^{-alpha (m-n)}: a uniform
    rate with a prefactor growing faster than any e^{beta n}.
    """
    def S(m):
        m = np.asarray(m, dtype=float)
        return -alpha * m - np.where(m % 2 == 0, scale * m * m, 0.0)

    def log_abs(n):
        n = np.asarray(n)
        return np.where(n == 0, 0.0, S(n) - S(np.maximum(n - 1, 0)))

    return EvolutionFamily("scalar", 1, "linf", coef=lambda n: math.exp(float(log_abs(n))),
                           log_abs=log_abs, label="dipping")


# ------------------------------------------------------------------ envelopes

def test_envelope_validation():
    with pytest.raises(ContractError):
        StabilityEnvelope.ues(0.5, 1.0)  # N < 1
    with pytest.raises(ContractError):
        StabilityEnvelope("UES", 1.0, 0.0, 0.2)
    with pytest.raises(ContractError):
        StabilityEnvelope.ses(1.0, 1.0, 1.0)  # beta must stay below alpha
    with pytest.raises(ContractError):
        StabilityEnvelope("NES", 1.0)
    with pytest.raises(ContractError):
        StabilityEnvelope.es(1.0, 0.0, 0.3)


@pytest.mark.parametrize("c", [0.05, 0.2, 0.3])
def test_nes_envelope_from_example(c):
    alpha = -math.log(c * math.e)
    env = StabilityEnvelope.nes(alpha, lambda n: np.asarray(n) + 1.0)
    rep = check_envelope(build_norm_table(paper_example(c), 300), env)
    assert rep.passed and rep.margin >= -1e-9


@pytest.mark.parametrize("c", [0.05, 0.1, 0.13])
def test_ses_envelope_from_example(c):
    alpha = -math.log(c * math.e)
    rep = check_envelope(build_norm_table(paper_example(c), 300), StabilityEnvelope.ses(math.e, alpha, 1.0))
    assert rep.passed


def test_too_small_envelope_fails_with_witness():
    table = build_norm_table(paper_example(0.2), 100)
    rep = check_envelope(table, StabilityEnvelope.ues(math.exp(10), 0.5))
    assert not rep.passed
    m, n = rep.worst_pair
    assert table.entry(m, n) > 10 - 0.5 * (m - n)


def test_nes_prefactor_must_be_nondecreasing():
    env = StabilityEnvelope.nes(1.0, lambda n: 5.0 - np.asarray(n, float))
    with pytest.raises(ContractError):
        check_envelope(build_norm_table(constant_scalar(0.1), 20), env)


def _tight_ues(table, alpha):
    M = table.horizon
    best = 0.0
    for lo, block in table.iter_blocks():
        n = np.arange(lo, lo + block.shape[0])
        with np.errstate(invalid="ignore"):
            v = block + alpha * (np.arange(M + 1)[None, :] - n[:, None])
        best = max(best, float(np.nanmax(v)))
    return StabilityEnvelope("UES", alpha, best)


@pytest.mark.parametrize("seed", range(50))
def test_ues_envelope_passes_as_every_weaker_kind(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(seed, int(rng.integers(1, 4)), float(rng.uniform(0.3, 0.9)),
                        ("dense", "upper-triangular", "rotation-contraction")[seed % 3])
    table = build_norm_table(fam, 80)
    env = _tight_ues(table, 0.05)
    assert check_envelope(table, env).passed
    for kind in ("SES", "ES", "NES"):
        assert check_envelope(table, env.with_kind(kind)).passed, kind


# --------------------------------------------------------- reparameterizations

def test_es_forms_round_trip():
    f = transform_es(0.7, 0.4)
    assert f.nu == pytest.approx(1.1) and f.delta == 0.7
    assert es_from_nu_beta(f.nu, f.beta) == pytest.approx((0.7, 0.4))
    assert es_from_nu_delta(f.nu, f.delta) == pytest.approx((0.7, 0.4))
    assert ses_from_nu(0.7, transform_ses(0.7, 0.4)) == pytest.approx(0.4)
    with pytest.raises(ContractError):
        transform_ses(0.5, 0.5)


@given(st.floats(0.05, 2.0), st.floats(0.0, 1.5), st.floats(0.0, 3.0), st.integers(0, 3))
def test_reparameterized_bounds_give_identical_verdicts(alpha, beta, logN, which):
    c = (0.05, 0.1, 0.2, 0.3)[which]
    table = build_norm_table(paper_example(c), 120)
    f = transform_es(alpha, beta)
    base = check_envelope(table, StabilityEnvelope("ES", alpha, logN, beta))
    for alt in (es_form_ii(logN, f.nu, f.beta), es_form_iii(logN, f.nu, f.delta)):
        rep = check_bound(table, alt)
        assert rep.verdict == base.verdict
        assert rep.margin == pytest.approx(base.margin, abs=1e-9, rel=1e-12)
    if beta < alpha:
        ses = check_bound(table, ses_form(logN, alpha, transform_ses(alpha, beta)))
        assert ses.verdict == check_envelope(table, StabilityEnvelope("SES", alpha, logN, beta)).verdict


def test_geometric_rate():
    assert geometric_rate(2.0, 3, 0.125) == pytest.approx(math.log(4) / 3)
    with pytest.raises(NoRateDerivable):
        geometric_rate(2.0, 1, 0.5)
    # constant scalar 0.9: ||A_{n+1}^n|| = 0.9, so N = 1, k = 1 gives a valid UES envelope
    alpha = geometric_rate(1.0, 1, 0.9)
    env = StabilityEnvelope.ues(geometric_prefactor(1.0, 1, 0.9), alpha)
    assert check_envelope(build_norm_table(constant_scalar(0.9), 100), env).passed


# ------------------------------------------------------------------ classifier

def test_classify_simple_families():
    assert classify(zero_family(), 100).verdict == "UES"
    assert classify(identity_family(), 100).verdict == "none"
    rep = classify(constant_scalar(0.5), 200)
    assert rep.verdict == "UES" and rep.alpha_hat == pytest.approx(math.log(2), rel=1e-9)
    assert rep.certificate.passed


def test_classify_detects_superlinear_prefactor():
    rep = classify(dipping_family(), 200)
    assert rep.superlinear_flag and rep.verdict == "NES"
    assert rep.alpha_hat == pytest.approx(0.5, rel=1e-6)
    assert rep.certificate.passed


def test_classifier_rejects_short_horizons():
    with pytest.raises(ContractError):
        classify(constant_scalar(0.5), 32)


def test_classify_is_deterministic():
    a = classify(random_family(9, 3, 0.6), 200)
    b = classify(random_family(9, 3, 0.6), 200)
    assert (a.verdict, a.alpha_hat, a.beta_hat) == (b.verdict, b.alpha_hat, b.beta_hat)


def test_boundary_flag_near_threshold():
    assert classify(paper_example(0.3675), 400).boundary
    assert not classify(paper_example(0.2), 400).boundary


@pytest.mark.parametrize("seed", range(12))
def test_verdict_is_backed_by_a_certificate(seed):
    fam = random_family(seed, 2, 0.4 + 0.05 * seed, ("dense", "rotation-contraction")[seed % 2])
    rep = classify(fam, 150)
    if rep.verdict != "none":
        assert rep.certificate is not None and rep.certificate.passed
    if rep.verdict != rep.estimated_verdict:
        assert not rep.certificate.passed
        assert LADDER.index(rep.verdict) == LADDER.index(rep.estimated_verdict) + 1


def test_implies_ladder():
    rep = classify(paper_example(0.1), 400)
    assert rep.implies("SES") and rep.implies("ES") and rep.implies("NES") and not rep.implies("UES")


def test_tolerance_config_is_used():
    table = build_norm_table(paper_example(0.1), 400)
    loose = estimate_envelope(table, EstimatorConfig(tol_beta=2.0))
    assert loose.verdict == "UES"
