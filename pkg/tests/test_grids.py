import math

import numpy as np
import pytest

import structsim as ss
from structsim.grids import (Grid, build_survival, cumulative_to_centers,
                             integrate_1d, integrate_triangular)
from structsim.rates import Arity, RateSpec

from conftest import make_params


def test_grid_counts_and_centers():
    g = Grid(delta=0.005, a_max_h=1.0, a_max_m=1.5, tau_max_h=0.6,
             tau_max_m=1.5, eta_max=1.0)
    assert (g.n_ah, g.n_am, g.n_th, g.n_tm, g.n_eta) == (200, 300, 120, 300, 200)
    assert g.ages_h[0] == pytest.approx(0.0025)
    assert g.ages_h[-1] == pytest.approx(1.0 - 0.0025)


def test_grid_rejects_bad_extents():
    with pytest.raises(ValueError, match="multiple"):
        Grid(delta=0.005, a_max_h=1.0003, a_max_m=1.5, tau_max_h=0.6,
             tau_max_m=1.5, eta_max=1.0)
    with pytest.raises(ValueError, match="delta"):
        Grid(delta=-0.1, a_max_h=1.0, a_max_m=1.5, tau_max_h=0.6,
             tau_max_m=1.5, eta_max=1.0)
    with pytest.raises(ValueError, match="exceed"):
        Grid(delta=0.1, a_max_h=1.0, a_max_m=1.0, tau_max_h=2.0,
             tau_max_m=1.0, eta_max=1.0)


def test_integrate_1d_exact_cases():
    # constant over [0, 1]
    assert integrate_1d(np.ones(50), 0.02) == pytest.approx(1.0, abs=1e-14)
    # midpoint is exact on linear integrands
    xs = (np.arange(10) + 0.5) * 0.1
    assert integrate_1d(xs, 0.1) == pytest.approx(0.5, abs=1e-14)
    # exp(-x) on [0, 10] vs closed form
    xs = (np.arange(1000) + 0.5) * 0.01
    assert integrate_1d(np.exp(-xs), 0.01) == pytest.approx(1 - math.exp(-10), abs=1e-5)


def test_integrate_triangular_cases():
    delta = 0.01
    n = 100
    tri = (np.arange(n)[None, :] <= np.arange(n)[:, None]).astype(float)
    # area of the triangle below the diagonal of the unit square
    assert integrate_triangular(tri, delta) == pytest.approx(0.5, abs=2 * delta)
    # separable field against iterated 1d quadrature (Fubini)
    xs = (np.arange(n) + 0.5) * delta
    f, g = np.exp(-xs), np.cos(xs)
    field = np.outer(f, g)
    iterated = integrate_1d(f, delta) * integrate_1d(g, delta)
    assert integrate_triangular(field, delta) == pytest.approx(iterated, rel=1e-12)
    assert integrate_triangular(np.zeros((5, 5)), 0.1) == 0.0


def test_quadrature_error_shrinks_at_least_linearly():
    # Lipschitz integrand with a kink: |x - 1/3| on [0, 1]
    exact = (1.0 / 3) ** 2 / 2 + (2.0 / 3) ** 2 / 2
    errs = []
    for delta in (0.01, 0.005):
        xs = (np.arange(int(1 / delta)) + 0.5) * delta
        errs.append(abs(integrate_1d(np.abs(xs - 1 / 3), delta) - exact))
    assert errs[0] / max(errs[1], 1e-18) >= 1.8


def test_survival_constant_rate_closed_form():
    p = make_params(mu_h=0.022)
    g = Grid(delta=0.005, a_max_h=20.0, a_max_m=1.5, tau_max_h=0.6,
             tau_max_m=1.5, eta_max=1.0)
    sur = build_survival(p, g)
    # pi_h(10) = exp(-0.22), pi_m(0.5) = exp(-10) at the nearest centers
    j = int(round(10.0 / g.delta)) - 1        # center 9.9975
    assert sur.pi_h[j] == pytest.approx(math.exp(-0.022 * g.ages_h[j]), rel=1e-12)
    assert math.exp(-0.22) == pytest.approx(0.80252, abs=5e-6)
    jm = int(round(0.5 / g.delta)) - 1
    assert sur.pi_m[jm] == pytest.approx(math.exp(-20.0 * g.ages_m[jm]), rel=1e-12)
    assert math.exp(-10.0) == pytest.approx(4.54e-5, abs=1e-7)


def test_survival_piecewise_matches_refined_cumsum():
    # edge-aligned piecewise mortality: the cumulative hazard at centers must
    # match a 100x-refined rectangle sum to near machine precision
    mu = RateSpec.piecewise(1.0, 0.5, 2.0, Arity.AGE)
    p = make_params(mu_h=0.5)        # placeholder, only mu matters below
    g = Grid(delta=0.05, a_max_h=3.0, a_max_m=1.0, tau_max_h=0.5,
             tau_max_m=0.5, eta_max=0.5)
    rate = np.asarray(mu(g.ages_h, 0.0))
    cum = cumulative_to_centers(rate, g.delta)
    fine = 100
    xs = (np.arange(g.n_ah * fine) + 0.5) * (g.delta / fine)
    fine_rate = np.asarray(mu(xs, 0.0))
    fine_cum = np.cumsum(fine_rate) * (g.delta / fine)
    centers_idx = (np.arange(g.n_ah) + 1) * fine - fine // 2
    ref = fine_cum[centers_idx - 1]
    assert np.max(np.abs(cum - ref) / np.maximum(ref, 1e-30)) < 1e-10


def test_survival_invariants():
    p = make_params()
    g = Grid(delta=0.01, a_max_h=50.0, a_max_m=1.5, tau_max_h=0.6,
             tau_max_m=1.5, eta_max=1.0)
    sur = build_survival(p, g)
    for pi, mu0 in ((sur.pi_h, 0.022), (sur.pi_m, 20.0)):
        assert pi[0] <= 1.0
        assert np.all(np.diff(pi) <= 0)
        ages = (np.arange(len(pi)) + 0.5) * g.delta
        assert np.all(pi <= np.exp(-mu0 * ages) * (1 + 1e-12))


def test_default_grid_shape():
    g = ss.default_grid(0.022)
    assert g.delta == 0.005
    assert g.a_max_m == 1.5 and g.tau_max_h == 0.6 and g.eta_max == 1.0
    assert abs(g.a_max_h - 5.0 / 0.022) < g.delta
