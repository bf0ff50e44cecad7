import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bubbletower.cascade import (ConfigError, EpsilonUnderflow, TowerConfig, build_table,
                                 compute_alphas, compute_a_and_d, compute_betas,
                                 compute_epsilon, compute_gammas, epsilon_rho_exponent,
                                 identity_suite, mean_field_masses, nu, sigma, validate_alpha1)


# --- admissibility --------------------------------------------------------------

def test_validate_reference_alpha_admissible():
    ok, diag = validate_alpha1(2, 1.0, 2.5, 1e-6)
    assert ok and diag == "admissible"


def test_validate_even_alpha_rejected():
    ok, diag = validate_alpha1(2, 1.0, 4.0, 1e-6)
    assert not ok
    assert "2N (k=0)" in diag


def test_validate_alpha_two_rejected():
    ok, diag = validate_alpha1(3, 2.0, 2.0, 1e-6)
    assert not ok and "exceed 2" in diag


def test_validate_m3_tau2_alpha3_hits_shifted_lattice():
    # 3 = (2/2)*5 - 2, so the second excluded family contains it
    ok, diag = validate_alpha1(3, 2.0, 3.0, 1e-6)
    assert not ok
    assert "(2/tau)N - 2" in diag


@pytest.mark.parametrize("bad", [dict(tol=0.0), dict(tol=-1.0), dict(alpha1=math.nan),
                                 dict(tau=math.inf)])
def test_validate_rejects_bad_inputs(bad):
    args = dict(m=2, tau=1.0, alpha1=2.5, tol=1e-6) | bad
    with pytest.raises(ValueError):
        validate_alpha1(**args)


def test_config_error_carries_key():
    with pytest.raises(ConfigError) as e:
        TowerConfig(m=2, tau=1.0, alpha1=4.0, rho=0.1)
    assert e.value.key == "alpha1"
    with pytest.raises(ConfigError) as e:
        TowerConfig(m=2, tau=-1.0, alpha1=2.5, rho=0.1)
    assert e.value.key == "tau"


def test_tau_one_excludes_even_integers():
    for k in range(2, 8):
        assert not validate_alpha1(3, 1.0, 2.0 * k)[0]


# --- alpha, beta ---------------------------------------------------------------------

def test_alphas_examples():
    assert np.allclose(compute_alphas(4, 1.0, 2.5), [2.5, 6.5, 10.5, 14.5], rtol=0, atol=1e-14)
    assert np.allclose(compute_alphas(3, 2.0, 3.0), [3, 12, 9], rtol=0, atol=1e-14)
    assert np.allclose(compute_alphas(2, 1.0, 2.5), [2.5, 6.5], rtol=0, atol=1e-14)


def test_betas_examples():
    assert np.array_equal(compute_betas(4, 1.0), [7, 5, 3, 1])
    assert np.allclose(compute_betas(3, 2.0), [4, 5, 1])
    b = compute_betas(2, 1.0)
    assert np.array_equal(b, [3, 1])
    assert b[0] == 2 - 1 + 2 / 1.0


def test_parity_weights():
    for i in range(1, 12):
        assert nu(i) + sigma(i) == 1
        assert (nu(i) == 0) == (i % 2 == 1)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(2, 7), tau=st.floats(0.3, 4.0), alpha1=st.floats(2.05, 9.0))
def test_sequence_invariants(m, tau, alpha1):
    al = compute_alphas(m, tau, alpha1)
    be = compute_betas(m, tau)
    assert np.all(al > 2)
    assert be[-1] == 1.0 and np.all(be > 0)
    assert np.all(np.diff(be / al) < 0)


# --- a, d, epsilon ------------------------------------------------------------------

def test_a_and_log_d_m4():
    cfg = TowerConfig(m=4, tau=1.0, alpha1=2.5, rho=0.1)
    al = compute_alphas(4, 1.0, 2.5)
    a, ld = compute_a_and_d(cfg, al)
    assert np.allclose(a, -np.log(2 * al ** 2), rtol=0, atol=1e-14)
    assert ld[3] == pytest.approx(a[3], abs=1e-14)
    assert ld[2] == pytest.approx(a[2] + 2 * a[3], abs=1e-13)
    assert ld[0] == pytest.approx(a[0] + 2 * (a[1] + a[2] + a[3]), abs=1e-13)
    # five-decimal reference values (the last digit of a_4 is off by 2e-5 there)
    assert np.allclose(a, [-2.52573, -4.43675, -5.39590, -6.04146], rtol=0, atol=5e-5)
    assert ld[2] == pytest.approx(-17.47882, abs=5e-5)
    assert ld[0] == pytest.approx(-34.27395, abs=5e-5)


def test_epsilon_m2_example():
    cfg = TowerConfig(m=2, tau=1.0, alpha1=2.5, rho=0.5)
    eps = compute_epsilon(cfg, compute_alphas(2, 1.0, 2.5))
    assert eps == pytest.approx((0.5 / 32.5) ** 8, rel=1e-12)
    assert eps == pytest.approx(3.14e-15, rel=2e-3)


def test_epsilon_m3_example(m3_config):
    cfg = m3_config.replace(rho=0.5)
    eps = compute_epsilon(cfg, compute_alphas(3, 2.0, 3.0))
    assert eps == pytest.approx(2 * 0.25 ** 5 / (3 ** 4 * 12 ** 2 * 9 ** 4), rel=1e-12)
    assert eps == pytest.approx(2.55e-11, rel=2e-3)


def test_epsilon_monotone_in_rho(ref_config):
    al = compute_alphas(2, 1.0, 2.5)
    eps = [compute_epsilon(ref_config.replace(rho=r), al) for r in (0.5, 0.1, 0.01, 1e-3)]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_epsilon_exponent_matches_beta1():
    for m in range(2, 7):
        for tau in (0.5, 1.0, 2.3):
            assert epsilon_rho_exponent(m, tau) == pytest.approx(compute_betas(m, tau)[0] + 1,
                                                                 rel=1e-14)


def test_epsilon_power_ratio_constant(ref_config):
    al = compute_alphas(2, 1.0, 2.5)
    vals = []
    for r in (0.3, 0.03, 0.003):
        le = math.log(compute_epsilon(ref_config.replace(rho=r), al))
        vals.append((2.5 - 2) * le - epsilon_rho_exponent(2, 1.0) * math.log(r))
    assert np.ptp(vals) < 1e-10


def test_epsilon_underflow_signalled():
    cfg = TowerConfig(m=6, tau=0.5, alpha1=2.3, rho=1e-3)
    with pytest.raises(EpsilonUnderflow):
        compute_epsilon(cfg, compute_alphas(6, 0.5, 2.3))
    assert np.isfinite(build_table(cfg).log_epsilon)


# --- gamma, masses ---------------------------------------------------------------

def test_gamma_balance_reference(ref_table):
    g = ref_table.gamma
    assert g[0] - g[1] == pytest.approx(math.pi, rel=1e-10)


def test_gamma_balance_m3(m3_config):
    g = build_table(m3_config).gamma
    assert g[0] - g[1] / 2 + g[2] == pytest.approx(2 * math.pi, rel=1e-10)


def test_gamma_h0_zero_form(ref_table):
    expect = 4 * math.pi * ref_table.alpha * ref_table.log_delta / ref_table.log_epsilon
    assert np.allclose(ref_table.gamma, expect, rtol=1e-14)


def test_gamma_rejects_unpierced():
    with pytest.raises(ValueError):
        compute_gammas(np.array([-1.0]), np.array([3.0]), 0.0)


def test_gamma_small_rho_limit(ref_config):
    # gamma_i is smooth in x = 1/log(rho); the intercept at x = 0 is
    # 4 pi beta_i (alpha1 - 2)/(beta1 + 1)
    be = compute_betas(2, 1.0)
    lim = 4 * math.pi * be * 0.5 / (be[0] + 1)
    rhos = np.logspace(-20, -300, 15)
    x = 1 / np.log(rhos)
    g = np.array([build_table(ref_config.replace(rho=r)).gamma for r in rhos])
    for i in range(2):
        icpt = np.polyfit(x, g[:, i], 3)[-1]
        assert icpt == pytest.approx(lim[i], rel=1e-6)


def test_masses_examples():
    l0, l1 = mean_field_masses(2, 1.0, 2.5)
    assert l0 == pytest.approx(10 * math.pi, rel=1e-14)
    assert l1 == pytest.approx(26 * math.pi, rel=1e-14)
    l0, l1 = mean_field_masses(3, 2.0, 3.0)
    assert l0 == pytest.approx(48 * math.pi, rel=1e-14)
    assert l1 == pytest.approx(12 * math.pi, rel=1e-14)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_masses_even_m_tau_one(m):
    al = compute_alphas(m, 1.0, 2.7)
    l0, _ = mean_field_masses(m, 1.0, 2.7)
    assert l0 == pytest.approx(4 * math.pi * al[0::2].sum(), rel=1e-12)


# --- table and identity suite -------------------------------------------------------

def test_table_orderings(ref_table):
    d = ref_table.delta
    assert np.all(np.diff(d) > 0)
    assert ref_table.epsilon < d[0]
    lb = ref_table.log_boundaries
    assert np.all(np.diff(lb) > 0)
    assert lb[0] == pytest.approx(ref_table.log_epsilon, abs=1e-12)
    assert lb[-1] == pytest.approx(0.0, abs=1e-12)


def test_identity_examples_m4():
    tb = build_table(TowerConfig(m=4, tau=1.0, alpha1=2.5, rho=0.1))
    sgn = np.array([1, -1, 1, -1])
    assert np.sum(sgn * tb.alpha) == pytest.approx(-8.0, abs=1e-13)
    assert 4 * math.pi * -8 - 2 * math.pi * 0.5 == pytest.approx(-2 * math.pi * (14.5 + 2))
    rep = identity_suite(tb)
    assert rep.passed, rep.errors


def test_identity_example_m3(m3_config):
    tb = build_table(m3_config)
    assert tb.alpha[0] - tb.alpha[1] / 2 + tb.alpha[2] == pytest.approx(3 + 2 + 1)
    assert identity_suite(tb).passed


def test_eta_positive_and_reference_value(ref_table):
    assert ref_table.eta == pytest.approx(0.5, rel=1e-12)


def test_farfield_coefficients(ref_table, m3_config):
    assert ref_table.farfield_coefficient == pytest.approx(8.5)
    assert build_table(m3_config).farfield_coefficient == pytest.approx(-11.0)


def test_table_rows_and_scalars(ref_table):
    cols, rows = ref_table.rows()
    assert len(rows) == 2 and len(rows[0]) == len(cols)
    s = ref_table.scalars()
    assert s["lambda0"] == pytest.approx(10 * math.pi)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(2, 6), tau=st.sampled_from([0.5, 1.0, 1.7, 2.3]),
       alpha1=st.floats(2.05, 8.0), rho=st.floats(1e-4, 0.5))
def test_identity_suite_property(m, tau, alpha1, rho):
    if not validate_alpha1(m, tau, alpha1)[0]:
        return
    rep = identity_suite(build_table(TowerConfig(m=m, tau=tau, alpha1=alpha1, rho=rho)))
    assert rep.passed, rep.errors
