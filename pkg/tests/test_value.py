"""Value function coefficients and the dynamic programming check.

The frozen chain below was produced by solving the defining linear
relations in 50-digit arithmetic from the frozen equilibrium of the unit
monopoly at dt = 0.004, then rounding to double.
"""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hftequil import (
    DegenerateDenominator,
    Equilibrium,
    default_dpe_grid,
    dpe_argmax,
    dpe_argmax_gap,
    dpe_residual,
    dpe_rhs,
    evaluate_value,
    solve_nash,
    stationary_inventory_std,
    value_coefficients,
)
from hftequil.value import ValueCoefficients
from helpers import make_params

# unit monopoly, dt = 0.004
CHAIN = {
    "A": 0.0204154575740418,
    "B": 0.976479009922532,
    "C": 0.0659907066298219,
    "D": 9.76283714120547,
    "E": 0.0611426559035037,
    "zeta": 0.0612159416486017,
    "F": 0.0426916184622178,
    "G": -0.0446423800062261,
}


def coeffs_for(params, trader=0):
    eq, _ = solve_nash(params)
    return eq, value_coefficients(eq, trader, params)


class TestCoefficients:
    def test_frozen_chain(self):
        _, cs = coeffs_for(make_params(dt=0.004))
        for key, want in CHAIN.items():
            assert getattr(cs, key) == pytest.approx(want, rel=1e-11), key

    def test_defining_relations(self):
        p = make_params(k=2, dt=0.01, gammas=[0.5, 2.0])
        for i in range(2):
            eq, cs = coeffs_for(p, trader=i)
            t = p.traders[i]
            disc = 1.0 - t.rho * p.dt
            gdt = t.gamma * p.dt
            beta, phi, lam = eq.betas[i], eq.phis[i], eq.lam
            den = 1.0 - disc * (1.0 - phi) ** 2
            assert cs.A == pytest.approx(disc * (1 - phi) ** 2 * gdt / den, rel=1e-14)
            assert cs.B == pytest.approx(
                disc * beta * (2 * cs.eta - beta * (cs.A + gdt)), rel=1e-14
            )
            assert cs.C == pytest.approx(
                disc * (beta * (1 - phi) * (cs.A + gdt) + phi * cs.eta), rel=1e-14
            )
            # two equivalent forms of the constant's fixed point
            assert cs.D == pytest.approx(disc * cs.B * p.sigma_S**2 / (2 * t.rho), rel=1e-14)
            assert cs.D == pytest.approx(
                disc * (cs.D + 0.5 * cs.B * p.sigma_S**2 * p.dt), rel=1e-12
            )
            # E is the positive root of its quadratic
            pp = gdt + 2 * lam * t.rho * p.dt
            qq = 2 * lam * gdt * disc
            assert cs.E**2 + pp * cs.E - qq == pytest.approx(0.0, abs=1e-15)
            # workdown rate and its two link identities
            assert cs.zeta == pytest.approx((cs.E + gdt) / (cs.E + gdt + 2 * lam), rel=1e-14)
            assert cs.E == pytest.approx(2 * lam * cs.zeta * disc, rel=1e-12)
            assert cs.F + gdt == pytest.approx(lam * phi / (1 - phi), rel=1e-11)

    def test_sign_pattern(self):
        for p in (
            make_params(dt=0.004),
            make_params(k=2, dt=0.01),
            make_params(k=4, dt=0.002, gammas=[0.5, 1.0, 2.0, 4.0]),
        ):
            for i in range(p.k):
                _, cs = coeffs_for(p, trader=i)
                assert cs.A > 0 and cs.B > 0 and cs.C > 0 and cs.D > 0
                assert cs.E > 0 and cs.F > 0
                assert 0.0 < cs.zeta < 1.0
                assert 0.0 < cs.eta < 1.0

    def test_rejects_dt_zero_and_tax(self):
        p0 = make_params(dt=0.0)
        eq0, _ = solve_nash(p0)
        with pytest.raises(ValueError):
            value_coefficients(eq0, 0, p0)
        pt = make_params(dt=0.004, tax=1e-3)
        from hftequil import solve_taxed

        eqt, _ = solve_taxed(pt)
        with pytest.raises(ValueError):
            value_coefficients(eqt, 0, pt)

    def test_rejects_bad_trader_index(self):
        p = make_params(dt=0.004)
        eq, _ = solve_nash(p)
        with pytest.raises(ValueError):
            value_coefficients(eq, 1, p)
        with pytest.raises(ValueError):
            value_coefficients(eq, -1, p)

    def test_to_dict_round_trip(self):
        _, cs = coeffs_for(make_params(dt=0.004))
        d = cs.to_dict()
        assert set(d) == {"A", "B", "C", "D", "E", "zeta", "F", "G", "eta"}
        assert ValueCoefficients(**d) == cs


class TestDynamicProgramming:
    @pytest.mark.parametrize(
        "params",
        [
            make_params(dt=0.004),
            make_params(k=2, dt=0.004),
            make_params(k=4, dt=0.01),
            make_params(k=2, dt=0.1, gammas=[0.5, 2.0]),
        ],
        ids=["mono", "duo", "k4", "hetero"],
    )
    def test_residual_and_argmax(self, params):
        for i in range(params.k):
            eq, cs = coeffs_for(params, trader=i)
            assert dpe_residual(cs, eq, i, params) <= 1e-9
            assert dpe_argmax_gap(cs, eq, i, params) <= 1e-12

    def test_argmax_is_a_maximum(self):
        p = make_params(dt=0.004)
        eq, cs = coeffs_for(p)
        M, dS, Z = 0.3, -0.05, 0.8
        star = dpe_argmax(cs, eq, 0, p, M, dS, Z)
        assert star == pytest.approx(-cs.zeta * Z, abs=1e-13)
        at_star = dpe_rhs(cs, eq, 0, p, M, dS, Z, star)
        for eps in (1e-3, -1e-3):
            assert dpe_rhs(cs, eq, 0, p, M, dS, Z, star + eps) < at_star

    def test_on_path_value_matches_rhs_without_deviation(self):
        p = make_params(k=2, dt=0.01)
        eq, cs = coeffs_for(p, trader=1)
        disc = 1.0 - p.traders[1].rho * p.dt
        for M, dS in ((0.0, 0.0), (0.5, 0.02), (-1.0, -0.03)):
            v = evaluate_value(cs, M, dS, 0.0)
            rhs = dpe_rhs(cs, eq, 1, p, M, dS, 0.0, 0.0)
            assert v / disc == pytest.approx(rhs, abs=1e-12 * (1 + abs(v)))

    def test_evaluate_value_by_hand(self):
        cs = ValueCoefficients(A=2.0, B=4.0, C=1.0, D=7.0, E=6.0, zeta=0.5, F=3.0, G=2.0, eta=0.9)
        v = evaluate_value(cs, M=1.0, dS=2.0, Z=-1.0)
        expected = -1.0 + 8.0 - 2.0 + 7.0 - 3.0 + 3.0 - 4.0
        assert v == pytest.approx(expected, rel=1e-15)

    def test_evaluate_value_broadcasts(self):
        _, cs = coeffs_for(make_params(dt=0.004))
        M = np.linspace(-1, 1, 4)
        v = evaluate_value(cs, M, 0.0, 0.0)
        assert v.shape == (4,)
        assert v[0] == pytest.approx(evaluate_value(cs, -1.0, 0.0, 0.0), rel=1e-15)

    def test_default_grid_shape_and_scale(self):
        p = make_params(dt=0.004)
        eq, _ = solve_nash(p)
        Ms, dSs, Zs = default_dpe_grid(eq, 0, p)
        assert len(Ms) == len(dSs) == len(Zs) == 5
        sd = stationary_inventory_std(eq, 0, p)
        assert Ms[-1] == pytest.approx(3.0 * sd, rel=1e-12)
        assert dSs[-1] == pytest.approx(3.0 * math.sqrt(0.004), rel=1e-12)
        assert Zs[0] == -1.0 and Zs[-1] == 1.0


class TestStationaryStd:
    def test_formula(self):
        p = make_params(dt=0.01)
        eq, _ = solve_nash(p)
        beta, phi = eq.betas[0], eq.phis[0]
        want = math.sqrt(beta**2 * 0.01 / (1.0 - (1.0 - phi) ** 2))
        assert stationary_inventory_std(eq, 0, p) == pytest.approx(want, rel=1e-14)

    def test_requires_contraction(self):
        p = make_params(dt=0.01)
        fake = Equilibrium(betas=(0.9,), beta_sigma=0.9, lam=0.4, phis=(0.0,), mus=(0.0,), tax=0.0)
        with pytest.raises(ValueError):
            stationary_inventory_std(fake, 0, p)
        fake2 = Equilibrium(betas=(0.9,), beta_sigma=0.9, lam=0.4, phis=(2.5,), mus=(1.0,), tax=0.0)
        with pytest.raises(ValueError):
            stationary_inventory_std(fake2, 0, p)


def test_degenerate_denominator_is_arithmetic_error():
    assert issubclass(DegenerateDenominator, ArithmeticError)


@given(
    gamma=st.floats(0.2, 5.0),
    dt=st.sampled_from([0.002, 0.01, 0.1]),
    k=st.integers(1, 3),
    sigma_K=st.floats(0.5, 2.0),
)
def test_value_chain_invariants(gamma, dt, k, sigma_K):
    p = make_params(k=k, dt=dt, gamma=gamma, sigma_K=sigma_K)
    eq, _ = solve_nash(p)
    cs = value_coefficients(eq, 0, p)
    assert 0.0 < cs.zeta < 1.0
    assert cs.E > 0.0
    assert dpe_argmax_gap(cs, eq, 0, p) <= 1e-11
    assert dpe_residual(cs, eq, 0, p) <= 1e-9
