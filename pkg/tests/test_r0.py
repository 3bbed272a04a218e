import numpy as np
import pytest

import structsim as ss
from structsim.characteristics import g_of_lambda
from structsim.kernels import spectral_kernels
from structsim.r0 import (lambda0_closed_form, lambda_m_for_target_r0,
                          lambda_m_slope, power_iteration_r0, r0_closed_form,
                          r0_reduced)
from structsim.rates import Arity, RateSpec

from conftest import fast_grid, fast_params

# Reference threshold values (squared convention) from adaptive quadrature of
# the closed-form integrals, converged to ~1e-12; midpoint desk-scale grids
# land within ~0.3% of these.
EXACT = {
    ("forward", 7e6): 1.296448,
    ("forward", 5e6): 0.926034,
    ("backward", 7.4e7): 1.248288,
    ("backward", 1e7): 0.168688,
    ("backward", 2.5e7): 0.421719,
}


def test_threshold_values_against_quadrature_reference(forward, backward):
    for (name, lam), expect in EXACT.items():
        params, grid = forward if name == "forward" else backward
        val = lambda0_closed_form(params.with_lambda_m(lam), grid)
        assert val == pytest.approx(expect, rel=7e-3), (name, lam)


def test_zero_transmission_gives_zero(forward):
    params, grid = forward
    dead = ss.ModelParams(**{**{f: getattr(params, f) for f in
                                ("lambda_h", "lambda_m", "theta", "mu_h", "mu_m",
                                 "nu_h", "nu_m", "gamma_h", "k_h", "beta_h")},
                             "beta_m": RateSpec.constant(0.0, Arity.AGE_TAU)})
    assert r0_closed_form(dead, grid).r0 == 0.0


def test_cross_method_agreement(forward, backward):
    for params, grid in (forward, backward):
        rep = power_iteration_r0(params, grid)
        vals = [rep.r0_squared_closed_form, rep.r0_squared_power_iter,
                r0_reduced(params, grid), g_of_lambda(params, grid, 0.0)]
        base = vals[0]
        for v in vals[1:]:
            assert abs(v - base) <= 1e-8 * base
        assert rep.r0 == pytest.approx(np.sqrt(base), rel=1e-12)
        assert rep.residual < 1e-10


def test_power_iteration_rank_one_converges_immediately(forward):
    params, grid = forward
    rep = power_iteration_r0(params, grid, tol=1e-12)
    assert rep.iterations <= 3


def test_power_iteration_survival_start_is_eigenvector(forward):
    # the human block maps the survival profile to lambda0 times itself
    params, grid = forward
    sk = spectral_kernels(params, grid)
    lam0 = lambda0_closed_form(params, grid)
    coef = params.lambda_m * params.theta ** 2 / (params.lambda_h * sk.int_pi_h ** 2) \
        * sk.mosquito_factor(0.0)
    image = sk.pi_h * (coef * sk.human_kernel_action(sk.pi_h))
    resid = np.sum(np.abs(image - lam0 * sk.pi_h)) / np.sum(np.abs(sk.pi_h))
    assert resid < 1e-10


def test_dense_power_iteration_cross_check_age_dependent():
    # age-dependent human mortality breaks reduced-mode eligibility; the
    # structured action and the dense matrix must still agree
    params = fast_params(mu_h=RateSpec.table([0.0, 1.0, 6.0], [0.6, 0.9, 1.4],
                                             Arity.AGE))
    grid = fast_grid(0.05)
    assert not params.reduced_mode_eligible
    rep_s = power_iteration_r0(params, grid)
    rep_d = power_iteration_r0(params, grid, dense=True)
    assert rep_d.r0_squared_power_iter == pytest.approx(
        rep_s.r0_squared_power_iter, rel=1e-10)
    assert rep_s.r0_squared_power_iter == pytest.approx(
        rep_s.r0_squared_closed_form, rel=1e-8)


def test_linearity_in_lambda_m(forward):
    params, grid = forward
    base = lambda0_closed_form(params, grid)
    assert lambda0_closed_form(params.with_lambda_m(1.4e7), grid) \
        == pytest.approx(2.0 * base, rel=1e-12)
    # the ratio checks are exact by linearity
    r1 = lambda0_closed_form(params.with_lambda_m(7e6), grid)
    r2 = lambda0_closed_form(params.with_lambda_m(5e6), grid)
    assert r1 / r2 == pytest.approx(1.4, abs=1e-12)


def test_lambda_m_for_target(forward):
    params, grid = forward
    assert lambda_m_for_target_r0(params, grid, 0.0) == 0.0
    lam = lambda_m_for_target_r0(params, grid, 1.16)
    assert lambda0_closed_form(params.with_lambda_m(lam), grid) \
        == pytest.approx(1.16, rel=1e-12)
    # the tuned threshold is consistent with the characteristic function
    assert g_of_lambda(params.with_lambda_m(lam), grid, 0.0) \
        == pytest.approx(1.16, rel=1e-12)
    # reproduces the nominal recruitment within a few percent
    assert lam == pytest.approx(7e6, rel=0.15)
    with pytest.raises(ValueError):
        lambda_m_for_target_r0(params, grid, -1.0)


def test_monotone_in_biting_rate(forward):
    params, grid = forward
    vals = []
    for theta in (2e4, 3e4, 4e4):
        p = ss.ModelParams(**{**{f: getattr(params, f) for f in
                                 ("lambda_h", "lambda_m", "mu_h", "mu_m", "nu_h",
                                  "nu_m", "gamma_h", "k_h", "beta_h", "beta_m")},
                              "theta": theta})
        vals.append(lambda0_closed_form(p, grid))
    assert vals[0] < vals[1] < vals[2]


def test_grid_convergence_better_than_half_percent():
    for name in ("forward", "backward"):
        coarse = lambda0_closed_form(ss.preset(name, 2e7), ss.preset_grid(name, 0.005))
        fine = lambda0_closed_form(ss.preset(name, 2e7), ss.preset_grid(name, 0.0025))
        assert abs(fine - coarse) / coarse < 0.005


def test_kernel_masses_reported(forward):
    params, grid = forward
    rep = r0_closed_form(params, grid)
    assert rep.kernel_mass_mh > 0 and rep.kernel_mass_hm > 0
    sk = spectral_kernels(params, grid)
    recombined = (params.lambda_m * sk.int_pi_m / (params.lambda_h * sk.int_pi_h)
                  * params.theta ** 2 * rep.kernel_mass_mh * rep.kernel_mass_hm)
    assert recombined == pytest.approx(rep.r0_squared_closed_form, rel=1e-12)
