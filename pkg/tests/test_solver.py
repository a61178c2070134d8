"""Equilibrium solver tests against independently computed reference values.

Every literal below was produced by a 50-digit arbitrary-precision root
finder applied to the defining polynomials, then rounded to double. The
solver under test must reproduce them to close to machine precision.
"""
import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hftequil import (
    ConstraintViolated,
    Equilibrium,
    NegativeDiscriminant,
    NoRootInBracket,
    QuarticRoots,
    RootsNotSeparated,
    monopoly_quartic_roots,
    nash_best_response_beta,
    pricing_from_beta,
    solve_equilibrium,
    solve_monopoly_beta,
    solve_nash,
    solve_taxed,
    system_residual,
    validate_equilibrium,
)
from hftequil.solver import _bisect, _newton_polish, _smaller_quadratic_root
from helpers import make_params

# sigma_S = sigma_K = 1, gamma = 1, rho = 0.05
MONO_BETA_DT01 = 0.93181244195427218522
MONO_ROOT2_DT01 = 1.0734464085482122316
MONO_LAMBDA_DT01 = 0.49875565842868347443
MONO_PHI_DT01 = 0.13172557301921612951
MONO_BETA_DT004 = 0.95630247438115536323
MONO_LAMBDA_DT004 = 0.49950131643753598235
MONO_PHI_DT004 = 0.08548557749247969019

# sigma_S = 1, sigma_K = 2, gamma = 0.5, dt = 0.004
SCALED_ROOTS_DT004 = (1.9126049487623107265, 2.0915978821024168792)

# best response of a gamma = 1, rho = 0.05 trader at dt = 0.01
BEST_RESPONSE = {
    1.0: 0.86842715908136059061,
    1.5: 0.57562604013217316517,
    2.0: 0.42704466617133755065,
}

# two identical traders, gamma = 1, rho = 0.05, dt = 0.004
NASH2_BETA_SIGMA = 1.3510840013879891546
NASH2_BETA = 0.67554200069399457728
NASH2_LAMBDA = 0.47818737958370030533
NASH2_PHI = 0.087286010596710060133

# gamma = (0.5, 2.0), rho = 0.05, dt = 4e-5
HETERO_PHIS = (0.00648616194358, 0.0129311725201)

REL = 5e-14


class TestMonopolyQuartic:
    def test_beta_dt_001(self):
        p = make_params(dt=0.01)
        assert solve_monopoly_beta(p) == pytest.approx(MONO_BETA_DT01, rel=REL)

    def test_beta_dt_0004(self):
        p = make_params(dt=0.004)
        assert solve_monopoly_beta(p) == pytest.approx(MONO_BETA_DT004, rel=REL)

    def test_beta_equals_vol_ratio_at_dt_zero(self):
        p = make_params(dt=0.0, sigma_K=3.0)
        assert solve_monopoly_beta(p) == 3.0

    def test_root_stays_below_vol_ratio(self):
        for dt in (0.2, 0.05, 0.01, 1e-4, 1e-7):
            p = make_params(dt=dt, sigma_K=2.0, gamma=0.7)
            assert 0.0 < solve_monopoly_beta(p) <= 2.0

    def test_both_roots_and_classification(self):
        p = make_params(dt=0.01)
        roots = monopoly_quartic_roots(p)
        assert isinstance(roots, QuarticRoots)
        assert roots.admissible == pytest.approx(MONO_BETA_DT01, rel=REL)
        assert roots.inadmissible == pytest.approx(MONO_ROOT2_DT01, rel=REL)
        assert roots.inadmissible_phi < 0.0
        assert roots.reason == "phi < 0"

    def test_scaled_volatility_roots(self):
        p = make_params(dt=0.004, sigma_K=2.0, gamma=0.5)
        roots = monopoly_quartic_roots(p)
        assert roots.admissible == pytest.approx(SCALED_ROOTS_DT004[0], rel=REL)
        assert roots.inadmissible == pytest.approx(SCALED_ROOTS_DT004[1], rel=REL)

    def test_volatility_scaling_identity(self):
        # beta(m*sigma, gamma) = m * beta(sigma, gamma*m) for the quartic
        p = make_params(dt=0.01, sigma_K=2.0, gamma=0.5)
        assert solve_monopoly_beta(p) == pytest.approx(2.0 * MONO_BETA_DT01, rel=REL)

    def test_roots_not_separated_at_dt_zero(self):
        with pytest.raises(RootsNotSeparated):
            monopoly_quartic_roots(make_params(dt=0.0))

    def test_requires_single_trader(self):
        with pytest.raises(ValueError):
            solve_monopoly_beta(make_params(k=2, dt=0.01))

    def test_requires_untaxed(self):
        with pytest.raises(ValueError):
            solve_monopoly_beta(make_params(dt=0.01, tax=1e-3))


class TestBestResponse:
    @pytest.mark.parametrize("beta_sigma", sorted(BEST_RESPONSE))
    def test_frozen_values(self, beta_sigma):
        p = make_params(dt=0.01)
        u = nash_best_response_beta(beta_sigma, 0, p)
        assert u == pytest.approx(BEST_RESPONSE[beta_sigma], rel=REL)

    def test_dt_zero_closed_form(self):
        p = make_params(dt=0.0, sigma_K=2.0)
        # with r = 4 and no tax the response is r / beta_sigma
        assert nash_best_response_beta(2.5, 0, p) == pytest.approx(4.0 / 2.5, rel=1e-15)

    def test_rejects_nonpositive_aggregate(self):
        p = make_params(dt=0.01)
        with pytest.raises(ValueError):
            nash_best_response_beta(0.0, 0, p)
        with pytest.raises(ValueError):
            nash_best_response_beta(-1.0, 0, p)

    def test_trader_index_out_of_range(self):
        p = make_params(dt=0.01)
        with pytest.raises(IndexError):
            nash_best_response_beta(1.0, 1, p)

    def test_response_decreases_in_aggregate(self):
        p = make_params(dt=0.01)
        us = [nash_best_response_beta(b, 0, p) for b in (0.5, 1.0, 1.5, 2.0, 3.0)]
        assert all(a > b for a, b in zip(us, us[1:]))


class TestNash:
    def test_monopoly_limit_matches_quartic(self):
        p = make_params(dt=0.01)
        eq, diag = solve_nash(p)
        assert eq.beta_sigma == pytest.approx(MONO_BETA_DT01, rel=REL)
        assert eq.lam == pytest.approx(MONO_LAMBDA_DT01, rel=REL)
        assert eq.phis[0] == pytest.approx(MONO_PHI_DT01, rel=REL)
        assert eq.mus[0] == pytest.approx(eq.lam * eq.phis[0], rel=1e-12)
        assert diag.iterations > 0
        assert diag.bracket[0] < eq.beta_sigma < diag.bracket[1] or math.isclose(
            diag.bracket[0], eq.beta_sigma
        )

    def test_two_identical_traders(self):
        p = make_params(k=2, dt=0.004)
        eq, _ = solve_nash(p)
        assert eq.beta_sigma == pytest.approx(NASH2_BETA_SIGMA, rel=REL)
        assert eq.betas[0] == pytest.approx(NASH2_BETA, rel=REL)
        assert eq.betas[1] == pytest.approx(NASH2_BETA, rel=REL)
        assert eq.lam == pytest.approx(NASH2_LAMBDA, rel=REL)
        assert eq.phis[0] == pytest.approx(NASH2_PHI, rel=REL)

    def test_heterogeneous_decay_ordering(self):
        p = make_params(k=2, dt=4e-5, gammas=[0.5, 2.0])
        eq, _ = solve_nash(p)
        assert eq.phis[0] == pytest.approx(HETERO_PHIS[0], rel=5e-12)
        assert eq.phis[1] == pytest.approx(HETERO_PHIS[1], rel=5e-12)
        # the more inventory-averse trader trades less and unwinds faster
        assert eq.betas[0] > eq.betas[1]
        assert eq.phis[0] < eq.phis[1]

    @pytest.mark.parametrize("k", [1, 2, 4, 7])
    def test_dt_zero_closed_forms(self, k):
        p = make_params(k=k, dt=0.0, sigma_S=2.0, sigma_K=3.0)
        eq, _ = solve_nash(p)
        m = 3.0 / 2.0
        assert eq.beta_sigma == pytest.approx(math.sqrt(k) * m, rel=1e-14)
        assert eq.lam == pytest.approx(math.sqrt(k) / (1 + k) * (2.0 / 3.0), rel=1e-14)
        assert eq.phis == tuple(0.0 for _ in range(k))
        assert eq.mus == tuple(0.0 for _ in range(k))

    def test_dt_zero_ignores_penalty_heterogeneity(self):
        p = make_params(k=3, dt=0.0, gammas=[0.5, 1.0, 2.0])
        eq, _ = solve_nash(p)
        expected = math.sqrt(3.0) / 3.0
        for b in eq.betas:
            assert b == pytest.approx(expected, rel=1e-14)

    def test_residuals_scale(self):
        p = make_params(k=3, dt=0.002, gammas=[0.5, 1.0, 2.0])
        eq, diag = solve_nash(p)
        assert max(abs(r) for r in system_residual(eq, p)) < 1e-10
        assert diag.aggregate_residual < 1e-10
        assert len(diag.residuals) == 3
        assert len(diag.h_samples) == 10

    def test_rejects_taxed_params(self):
        with pytest.raises(ValueError):
            solve_nash(make_params(dt=0.01, tax=1e-3))

    def test_solve_equilibrium_dispatch(self):
        p = make_params(k=2, dt=0.004)
        eq_nash, _ = solve_nash(p)
        eq_disp, _ = solve_equilibrium(p)
        assert eq_disp == eq_nash
        pt = make_params(k=2, dt=0.004, tax=1e-3)
        eq_taxed, _ = solve_equilibrium(pt)
        assert eq_taxed.tax == 1e-3


class TestPricingAndValidation:
    def test_pricing_formulas_by_hand(self):
        p = make_params(k=2, dt=0.004)
        betas = (0.6, 0.7)
        bs = 1.3
        lam, phis, mus = pricing_from_beta(bs, betas, p)
        assert lam == pytest.approx(bs / (1.0 + bs * bs), rel=1e-15)
        for b, phi, mu in zip(betas, phis, mus):
            assert phi == pytest.approx(1.0 - lam * b / (1.0 - lam * bs), rel=1e-14)
            assert mu == pytest.approx(lam * phi, rel=1e-15)

    def test_tax_enters_decay_rate(self):
        p = make_params(dt=0.004, tax=1e-3)
        lam, phis, _ = pricing_from_beta(0.9, (0.9,), p)
        expected = 1.0 - (lam + 2e-3) * 0.9 / (1.0 - lam * 0.9)
        assert phis[0] == pytest.approx(expected, rel=1e-14)

    def test_validate_accepts_solution(self):
        p = make_params(k=2, dt=0.004)
        eq, _ = solve_nash(p)
        validate_equilibrium(eq, p)

    def test_validate_rejects_tampered_lambda(self):
        p = make_params(k=2, dt=0.004)
        eq, _ = solve_nash(p)
        bad = dataclasses.replace(eq, lam=eq.lam * 1.01)
        with pytest.raises(ConstraintViolated) as exc:
            validate_equilibrium(bad, p)
        assert exc.value.which == "lambda_formula"

    def test_validate_rejects_broken_aggregate(self):
        p = make_params(k=2, dt=0.004)
        eq, _ = solve_nash(p)
        bad = dataclasses.replace(eq, betas=(eq.betas[0], eq.betas[1] + 1e-6))
        with pytest.raises(ConstraintViolated) as exc:
            validate_equilibrium(bad, p)
        assert exc.value.which == "aggregate_identity"

    def test_validate_rejects_negative_phi_when_untaxed(self):
        p = make_params(dt=0.01)
        eq, _ = solve_nash(p)
        bad = dataclasses.replace(
            eq, phis=(-0.01,), mus=(eq.lam * -0.01,)
        )
        with pytest.raises(ConstraintViolated):
            validate_equilibrium(bad, p)

    def test_eta_in_unit_interval(self):
        for k in (1, 2, 4):
            eq, _ = solve_nash(make_params(k=k, dt=0.004))
            assert 0.0 < eq.eta < 1.0

    def test_to_dict_uses_lambda_key(self):
        eq, _ = solve_nash(make_params(dt=0.01))
        d = eq.to_dict()
        assert set(d) == {"betas", "beta_sigma", "lambda", "phis", "mus", "tax"}
        assert d["lambda"] == eq.lam


class TestTaxed:
    def test_zero_tax_matches_untaxed_exactly(self):
        p = make_params(k=2, dt=0.004)
        eq_taxed, _ = solve_taxed(p)
        eq_nash, _ = solve_nash(p)
        assert eq_taxed == eq_nash

    def test_monopoly_impact_falls_with_tax(self):
        p = make_params(dt=4e-5)
        lams = []
        for c in (0.0, 5e-4, 1e-3, 1.5e-3, 2e-3):
            eq, _ = solve_taxed(p.with_tax(c))
            lams.append(eq.lam)
        assert all(a > b for a, b in zip(lams, lams[1:]))
        assert lams[0] == pytest.approx(0.499995001137905127, rel=1e-12)
        assert lams[-1] == pytest.approx(0.499982199949771631, rel=1e-12)

    def test_duopoly_impact_rises_with_tax(self):
        p = make_params(k=2, dt=4e-5)
        lams = []
        for c in (0.0, 5e-4, 1e-3, 1.5e-3, 2e-3):
            eq, _ = solve_taxed(p.with_tax(c))
            lams.append(eq.lam)
        assert all(a < b for a, b in zip(lams, lams[1:]))
        assert lams[0] == pytest.approx(0.472123723851085698, rel=1e-12)
        assert lams[-1] == pytest.approx(0.472771778428609213, rel=1e-12)

    def test_effective_spread_rises_for_both(self):
        for k in (1, 2):
            p = make_params(k=k, dt=4e-5)
            spread = []
            for c in (0.0, 1e-3, 2e-3):
                eq, _ = solve_taxed(p.with_tax(c))
                spread.append(eq.lam + c)
            assert all(a < b for a, b in zip(spread, spread[1:]))

    def test_dt_zero_taxed_closed_form(self):
        c = 1e-3
        p = make_params(k=2, dt=0.0, tax=c)
        eq, _ = solve_taxed(p)
        t = eq.beta_sigma
        # aggregate solves t*(t + 2c(r + t^2)) = k*r with r = 1, k = 2
        assert t * (t + 2 * c * (1.0 + t * t)) == pytest.approx(2.0, rel=1e-12)
        assert eq.phis == (0.0, 0.0)

    def test_continuation_diagnostics(self):
        p = make_params(k=2, dt=0.004, tax=2e-3)
        eq, diag = solve_taxed(p)
        assert diag.continuation_steps >= 1
        assert eq.tax == 2e-3
        validate_equilibrium(eq, p)


class TestNumericalCore:
    def test_bisect_finds_simple_root(self):
        root, iters, bracket = _bisect(lambda x: x * x - 2.0, 0.0, 2.0, scale=1.0)
        assert root == pytest.approx(math.sqrt(2.0), abs=1e-13)
        assert iters > 10
        assert bracket[0] <= root <= bracket[1]

    def test_bisect_requires_sign_change(self):
        with pytest.raises(NoRootInBracket):
            _bisect(lambda x: x * x + 1.0, -1.0, 1.0, scale=1.0)

    def test_newton_polish_stays_in_bracket(self):
        f = lambda x: x * x * x - 2.0
        fp = lambda x: 3.0 * x * x
        x = _newton_polish(f, fp, 1.25, 1.2, 1.3)
        assert x == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-15)
        assert 1.2 <= x <= 1.3

    def test_newton_polish_guards_against_divergence(self):
        # derivative vanishes at the start point; polish must not escape
        f = lambda x: x * x - 2.0
        fp = lambda x: 0.0
        x = _newton_polish(f, fp, 1.4, 1.0, 2.0)
        assert 1.0 <= x <= 2.0

    def test_smaller_quadratic_root(self):
        # x^2 - 3x + 2 has roots 1 and 2
        assert _smaller_quadratic_root(1.0, -3.0, 2.0) == pytest.approx(1.0, rel=1e-15)
        with pytest.raises(NegativeDiscriminant):
            _smaller_quadratic_root(1.0, 0.0, 1.0)


@given(
    scale=st.floats(0.1, 10.0),
    dt=st.sampled_from([0.0, 0.004, 0.01, 0.05]),
    k=st.integers(1, 4),
)
def test_joint_volatility_scaling_leaves_betas_unchanged(scale, dt, k):
    """Scaling both volatilities by the same factor preserves the signal
    loadings, the price impact, and the decay rates, because only the
    volatility ratio enters the defining equations."""
    base = make_params(k=k, dt=dt)
    scaled = make_params(k=k, dt=dt, sigma_S=scale, sigma_K=scale)
    eq0, _ = solve_nash(base)
    eq1, _ = solve_nash(scaled)
    assert eq1.beta_sigma == pytest.approx(eq0.beta_sigma, rel=1e-11)
    assert eq1.lam == pytest.approx(eq0.lam, rel=1e-11)
    for p0, p1 in zip(eq0.phis, eq1.phis):
        assert p1 == pytest.approx(p0, rel=1e-10, abs=1e-13)


@given(
    gammas=st.lists(st.floats(0.2, 5.0), min_size=2, max_size=4),
    dt=st.sampled_from([0.002, 0.01]),
)
def test_trader_permutation_symmetry(gammas, dt):
    p = make_params(dt=dt, gammas=gammas)
    q = make_params(dt=dt, gammas=list(reversed(gammas)))
    eq_p, _ = solve_nash(p)
    eq_q, _ = solve_nash(q)
    assert eq_p.beta_sigma == pytest.approx(eq_q.beta_sigma, rel=1e-11)
    assert eq_p.lam == pytest.approx(eq_q.lam, rel=1e-11)
    for a, b in zip(eq_p.betas, reversed(eq_q.betas)):
        assert a == pytest.approx(b, rel=1e-9)


@given(k=st.integers(1, 6), dt=st.sampled_from([0.001, 0.01]))
def test_identical_traders_split_the_aggregate_evenly(k, dt):
    p = make_params(k=k, dt=dt)
    eq, _ = solve_nash(p)
    for b in eq.betas:
        assert b == pytest.approx(eq.beta_sigma / k, rel=1e-11)
    phis = set(eq.phis)
    assert max(phis) - min(phis) < 1e-12


@given(
    dt=st.floats(1e-6, 0.2),
    gamma=st.floats(0.1, 5.0),
    sigma_K=st.floats(0.3, 3.0),
)
def test_quartic_residual_is_tiny_at_reported_root(dt, gamma, sigma_K):
    from hftequil.solver import _quartic, _quartic_scale

    p = make_params(dt=dt, gamma=gamma, sigma_K=sigma_K)
    beta = solve_monopoly_beta(p)
    r = p.vol_ratio_sq
    res = abs(_quartic(beta, r, gamma, 0.05, dt))
    assert res <= 1e-12 * _quartic_scale(beta, r, gamma, 0.05, dt)
