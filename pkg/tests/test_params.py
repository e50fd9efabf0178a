import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oaqg.params import (
    PhysicalParams, ShortwaveConfig, ParamError, NonConvergence,
    derive, radiative_equilibrium, shortwave_lipschitz_bound,
    determining_modes_constants, coalbedo, coalbedo_slope, with_updates,
)

import oracles


def test_default_products_reproduce_printed_constants():
    p = PhysicalParams()
    d = derive(p)
    assert d.kappa == pytest.approx(15.0, rel=0.01)
    assert d.mu * p.gamma_a == pytest.approx(9.0, rel=0.01)
    assert d.mu * p.gamma_o == pytest.approx(500.0, rel=0.01)
    # ocean weight against squared deformation radius, order 1e-8 m^-2
    assert 1e-9 < d.kappa / p.L_R ** 2 < 1e-7


def test_derived_formulas():
    p = PhysicalParams()
    d = derive(p)
    assert d.a_sq == 2.0 * p.f0 ** 2 / (p.p_delta ** 2 * p.sigma_stat)
    assert d.temp_coeff == 2.0 * p.p * p.f0 / (p.R_star * p.p_delta)
    assert d.nu_T == d.mu * p.nu_T_tilde
    assert derive(p) == d  # pure function, bit-identical rerun


@pytest.mark.parametrize("eps,expected", [(1.0, 0.0), (0.5, 0.35), (0.2, 0.14)])
def test_eps_a_tilde(eps, expected):
    d = derive(with_updates(PhysicalParams(), eps_a=eps))
    assert d.eps_a_tilde == pytest.approx(expected, abs=1e-15)


def test_validation_names_offending_field():
    with pytest.raises(ParamError, match="alpha"):
        derive(with_updates(PhysicalParams(), alpha=1.5))
    with pytest.raises(ParamError, match="eps_a"):
        derive(with_updates(PhysicalParams(), eps_a=0.0))
    with pytest.raises(ParamError, match="k_d"):
        derive(with_updates(PhysicalParams(), k_d=-1e-6))
    with pytest.raises(ParamError, match="unknown"):
        with_updates(PhysicalParams(), not_a_field=1.0)


# ---------------------------------------------------------------------------
# radiative equilibrium
# ---------------------------------------------------------------------------

def test_equilibrium_closed_form_case():
    # eps_a = 1, lambda = 0: quartic roots in closed form
    p = with_updates(PhysicalParams(), eps_a=1.0, lambda_heat=1e-30)
    Ta, To = radiative_equilibrium(p, 170.0, 170.0)
    ta_ref, to_ref = oracles.equilibrium_closed_form(p.sigma_B, 170.0, 170.0)
    assert Ta == pytest.approx(ta_ref, abs=1e-7)
    assert To == pytest.approx(to_ref, abs=1e-7)
    # frozen literals (regenerate with `python tests/oracles.py`)
    assert Ta == pytest.approx(278.274854623, abs=1e-6)
    assert To == pytest.approx(307.961750318, abs=1e-6)


def test_equilibrium_zero_radiation():
    assert radiative_equilibrium(PhysicalParams(), 0.0, 0.0) == (0.0, 0.0)


def test_equilibrium_generic_vs_bruteforce_oracle():
    p = with_updates(PhysicalParams(), eps_a=0.8, lambda_heat=20.0)
    Ta, To = radiative_equilibrium(p, 120.0, 220.0)
    ta_ref, to_ref = oracles.equilibrium_bruteforce(0.8, 20.0, p.sigma_B,
                                                    120.0, 220.0)
    assert Ta == pytest.approx(ta_ref, abs=1e-6)
    assert To == pytest.approx(to_ref, abs=1e-6)


def test_equilibrium_residuals_below_tolerance():
    from oaqg.params import _mean_balance_residual
    p = PhysicalParams()
    for Ra0, Ro0 in [(160.0, 495.04), (10.0, 700.0), (0.0, 50.0)]:
        Ta, To = radiative_equilibrium(p, Ra0, Ro0)
        f1, f2 = _mean_balance_residual(p, Ta, To, Ra0, Ro0)
        scale = max(1.0, Ra0 + Ro0)
        assert math.hypot(f1, f2) < 1e-9 * scale


def test_equilibrium_nonconvergence_reports_residual():
    with pytest.raises(NonConvergence, match="residual"):
        radiative_equilibrium(PhysicalParams(), 160.0, 495.0, max_iter=2)


def test_default_references_are_the_mean_forcing_equilibrium():
    p = PhysicalParams()
    sw = ShortwaveConfig()
    mean_q = sw.dist_ratio_sq * sw.S_const * sw.cosz_base  # profile mean
    Ro0 = sw.R1_o + mean_q * sw.beta_plus
    Ta, To = radiative_equilibrium(p, sw.R1_a, Ro0)
    assert Ta == pytest.approx(p.T_a0, abs=1e-7)
    assert To == pytest.approx(p.T_o0, abs=1e-7)
    assert To > sw.T_plus  # warm branch, consistent with beta_plus above


# ---------------------------------------------------------------------------
# shortwave / coalbedo
# ---------------------------------------------------------------------------

def test_lipschitz_bound_values():
    sw = ShortwaveConfig()
    assert shortwave_lipschitz_bound(sw) == pytest.approx(18.858667, abs=1e-5)
    sw1 = ShortwaveConfig(dist_ratio_sq=1.0)
    assert shortwave_lipschitz_bound(sw1) == pytest.approx(18.13333, abs=1e-4)
    assert shortwave_lipschitz_bound(ShortwaveConfig(mode="constant")) == 0.0
    wide = ShortwaveConfig(beta_minus=0.1, beta_plus=0.9)
    narrow = ShortwaveConfig(beta_minus=0.3, beta_plus=0.7)
    assert shortwave_lipschitz_bound(wide) == pytest.approx(
        2.0 * shortwave_lipschitz_bound(narrow))
    assert shortwave_lipschitz_bound(
        ShortwaveConfig(mode="custom_linear", R2_o=-3.5)) == 3.5


def test_lipschitz_bound_below_heat_exchange_at_defaults():
    assert shortwave_lipschitz_bound(ShortwaveConfig()) < PhysicalParams().lambda_heat


@given(st.floats(min_value=100.0, max_value=400.0),
       st.floats(min_value=100.0, max_value=400.0))
def test_coalbedo_monotone_and_clamped(t1, t2):
    sw = ShortwaveConfig()
    c1, c2 = coalbedo(sw, t1), coalbedo(sw, t2)
    assert sw.beta_minus <= c1 <= sw.beta_plus
    if t1 <= t2:
        assert c1 <= c2
    # two-point slope never exceeds the advertised Lipschitz constant
    if t1 != t2:
        assert abs(c1 - c2) <= sw.ramp_slope * abs(t1 - t2) + 1e-12


def test_coalbedo_slope_corner_rule():
    sw = ShortwaveConfig()
    s = sw.ramp_slope
    vals = coalbedo_slope(sw, np.array([249.0, 250.0, 265.0, 280.0, 281.0]))
    assert vals == pytest.approx([0.0, 0.0, s, s, 0.0])


def test_shortwave_config_validation():
    with pytest.raises(ParamError, match="mode"):
        shortwave_lipschitz_bound(ShortwaveConfig(mode="nope"))
    with pytest.raises(ParamError, match="T_minus"):
        ShortwaveConfig(T_minus=300.0, T_plus=280.0).validate()
    with pytest.raises(ParamError, match="beta_minus"):
        ShortwaveConfig(beta_minus=0.8, beta_plus=0.7).validate()


# ---------------------------------------------------------------------------
# determining-modes admissibility
# ---------------------------------------------------------------------------

def lambda_1_default():
    p = PhysicalParams()
    return (math.pi / (p.alpha * p.L)) ** 2


def test_varsigma_value_and_argmin():
    p = PhysicalParams()
    lam1 = lambda_1_default()
    rep = determining_modes_constants(p, ShortwaveConfig(), lam1, C_rho=1.0)
    expected = p.r * p.L_R ** 2 * lam1 / 2.0  # smallest channel at defaults
    assert rep.varsigma == pytest.approx(expected, rel=1e-12)
    assert "Rossby" in rep.varsigma_argmin
    assert rep.lipschitz_ok


def test_varsigma_drops_unbounded_channels():
    p = with_updates(PhysicalParams(), r=1e9)
    lam1 = lambda_1_default()
    d = derive(p)
    rep = determining_modes_constants(p, ShortwaveConfig(), lam1, C_rho=1.0)
    expected = min(p.k_d / 2.0, p.k_d_prime,
                   p.k_d_prime * lam1 * p.R_star ** 2
                   / (4.0 * p.f0 ** 2 * d.mu * p.gamma_a))
    assert rep.varsigma == pytest.approx(expected, rel=1e-12)


def test_unconditional_when_gronwall_constant_small():
    rep = determining_modes_constants(PhysicalParams(), ShortwaveConfig(),
                                      lambda_1_default(), C_rho=1e-15)
    assert rep.unconditional
    assert rep.eps_star is None and rep.N_order_estimate is None


def test_mode_count_order_reproduces_printed_scale():
    p = PhysicalParams()
    C = 1.0e34
    rep = determining_modes_constants(p, ShortwaveConfig(),
                                      lambda_1_default(), C_rho=C)
    assert not rep.unconditional
    # N ~ (L^2/nu_S) * (C - varsigma) with L^2/nu_S = 1e12 at the defaults
    assert rep.N_order_estimate >= 1e12 * C * 0.999
    assert rep.N_order_estimate == pytest.approx(
        p.L ** 2 / (p.nu_S * rep.eps_star ** 2))
