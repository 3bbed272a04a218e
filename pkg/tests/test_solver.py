import math

import numpy as np
import pytest

import structsim as ss
from structsim.solver import (DegeneratePopulationError, load_snapshot, n_human,
                              n_mosquito, observe, save_snapshot)

from conftest import fast_grid, fast_params, make_params, random_full_state


# ---------------------------------------------------------------------------
# forces of infection


def test_force_zero_without_infectious(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.0, mode="reduced")
    assert np.all(ss.force_mh(st, params, grid) == 0.0)
    assert np.all(ss.force_hm(st, params, grid) == 0.0)


def test_force_zero_without_susceptibles():
    params = fast_params()
    grid = fast_grid()
    st = random_full_state(params, grid, seed=3)
    st.s_h = np.zeros_like(st.s_h)
    assert np.all(ss.force_mh(st, params, grid) == 0.0)
    st2 = random_full_state(params, grid, seed=4)
    st2.s_m = np.zeros_like(st2.s_m)
    assert np.all(ss.force_hm(st2, params, grid) == 0.0)


def test_force_single_cell_hand_value():
    # one infected-mosquito cell of mass M at (s0, tau0): the infection
    # pressure on humans is S_h(a) * theta * beta_m(s0 + delta/2, tau0) * M / N_h
    params = fast_params()
    grid = fast_grid()
    st = ss.default_initial(params, grid, 0.0, mode="full")
    i_idx, j_idx = 30, 10
    density = 7.0
    st.i_m[i_idx, j_idx] = density
    mass = density * grid.delta ** 2
    nh = n_human(st, grid)
    beta = params.beta_m(grid.ages_m[i_idx] + 0.5 * grid.delta, grid.taus_m[j_idx])
    expect = st.s_h * params.theta * beta * mass / nh
    got = ss.force_mh(st, params, grid)
    assert np.allclose(got, expect, rtol=1e-12)


def test_degenerate_population_error():
    params = fast_params()
    grid = fast_grid()
    st = ss.default_initial(params, grid, 0.0, mode="full")
    st.s_h = st.s_h * 1e-9     # far below the guaranteed floor
    with pytest.raises(DegeneratePopulationError):
        ss.force_mh(st, params, grid)


# ---------------------------------------------------------------------------
# initial data


def test_default_initial_dfe_and_mass_reallocation(forward):
    params, grid = forward
    dfe = ss.default_initial(params, grid, 0.0, mode="reduced")
    assert np.all(dfe.i_h == 0.0) and np.all(dfe.i_m == 0.0)
    n0 = n_human(dfe, grid)
    seeded = ss.default_initial(params, grid, 0.01, mode="reduced")
    assert n_human(seeded, grid) == pytest.approx(n0, rel=1e-12)
    assert float(np.sum(seeded.i_h)) * grid.delta == pytest.approx(0.01 * n0, rel=1e-12)
    assert seeded.s_h >= 0 and np.all(seeded.i_h >= 0)

    full_dfe = ss.default_initial(params, grid, 0.0, mode="full")
    full = ss.default_initial(params, grid, 0.01, mode="full")
    assert n_human(full, grid) == pytest.approx(n_human(full_dfe, grid), rel=1e-10)

    with pytest.raises(ValueError):
        ss.default_initial(params, grid, 1.0)


def test_default_initial_mosquito_seed(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.01, mode="reduced", infected_fraction_m=0.3)
    nm0 = n_mosquito(ss.default_initial(params, grid, 0.0, mode="reduced"), grid)
    assert n_mosquito(st, grid) == pytest.approx(nm0, rel=1e-12)
    assert float(np.sum(st.i_m)) * grid.delta ** 2 == pytest.approx(0.3 * nm0, rel=1e-12)


# ---------------------------------------------------------------------------
# stepping invariants


def test_dfe_is_a_fixed_point_reduced(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.0, mode="reduced")
    rows, fin = ss.simulate(params, grid, st, t_end=5.0, output_every=200,
                            return_final=True)
    assert fin.s_h == st.s_h                     # bit-frozen
    assert np.array_equal(fin.s_m, st.s_m)
    assert np.all(fin.i_h == 0.0) and np.all(fin.i_m == 0.0)


def test_dfe_is_a_fixed_point_full():
    params = fast_params()
    grid = fast_grid()
    st = ss.default_initial(params, grid, 0.0, mode="full")
    rows, fin = ss.simulate(params, grid, st, t_end=2.0, return_final=True)
    assert np.max(np.abs(fin.s_h - st.s_h) / st.s_h) < 1e-12
    assert np.all(fin.i_h == 0.0)


def test_positivity_and_step_equals_simulate(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.05, mode="reduced")
    one = ss.step(st, params, grid)
    rows, fin = ss.simulate(params, grid, st, t_end=grid.delta, return_final=True)
    assert one.s_h == fin.s_h
    assert np.array_equal(one.i_m, fin.i_m)
    assert one.s_h >= 0 and np.all(one.i_h >= 0) and np.all(one.i_m >= 0)


def test_t_end_zero_returns_initial_row(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.02, mode="reduced")
    rows = ss.simulate(params, grid, st, t_end=0.0)
    assert len(rows) == 1
    assert rows[0].t == 0.0
    assert rows[0].n_h == pytest.approx(n_human(st, grid))


def test_gronwall_sandwich(forward):
    # discrete population totals must respect the continuous two-sided bounds
    # up to a tolerance of a few boundary cells of mass
    params, grid = forward
    st = ss.default_initial(params, grid, 0.05, mode="reduced")
    rows = ss.simulate(params, grid, st, t_end=5.0, output_every=50)
    n_h0, n_m0 = rows[0].n_h, rows[0].n_m
    mu0 = 0.022
    sup_h = 0.022 + 0.1                      # ||mu_h|| + ||nu_h||
    sup_m = 20.0 + 25.0
    tol_h = 3 * grid.delta * params.lambda_h
    tol_m = 3 * grid.delta * params.lambda_m
    for r in rows:
        up_h = n_h0 * math.exp(-mu0 * r.t) + params.lambda_h / mu0 * (1 - math.exp(-mu0 * r.t))
        lo_h = n_h0 * math.exp(-sup_h * r.t) + params.lambda_h / sup_h * (1 - math.exp(-sup_h * r.t))
        assert r.n_h <= up_h + tol_h
        assert r.n_h >= lo_h - tol_h
        up_m = n_m0 * math.exp(-mu0 * r.t) + params.lambda_m / mu0 * (1 - math.exp(-mu0 * r.t))
        lo_m = n_m0 * math.exp(-sup_m * r.t) + params.lambda_m / sup_m * (1 - math.exp(-sup_m * r.t))
        assert r.n_m <= up_m + tol_m
        assert r.n_m >= lo_m - tol_m


def test_population_balance_defect_is_first_order():
    # dN_h/dt should match recruitment minus weighted removals to O(delta):
    # halving the step must at least halve the worst per-step defect
    params = fast_params()
    defects = []
    for delta in (0.05, 0.025):
        # domain large enough that truncation outflow is far below the
        # first-order time-stepping defect being measured
        grid = ss.Grid(delta=delta, a_max_h=16.0, a_max_m=5.0,
                       tau_max_h=8.0, tau_max_m=2.5, eta_max=8.0)
        st = ss.default_initial(params, grid, 0.1, mode="full")
        worst = 0.0
        state = st
        for _ in range(int(round(0.4 / delta))):
            nxt = ss.step(state, params, grid)
            d_dt = (n_human(nxt, grid) - n_human(state, grid)) / delta
            mu = np.asarray(params.mu_h(grid.ages_h, 0.0), dtype=float)
            mu = np.full(grid.n_ah, float(mu)) if mu.ndim == 0 else mu
            nu_g = params.nu_h(grid.ages_h[:, None],
                               np.broadcast_to(grid.taus_h[None, :],
                                               (grid.n_ah, grid.n_th)))
            removal = (np.sum(mu * state.s_h) * delta
                       + np.sum(mu[:, None] * state.r_h) * delta ** 2
                       + np.sum((mu[:, None] + nu_g) * state.i_h) * delta ** 2)
            rhs = params.lambda_h - removal
            worst = max(worst, abs(d_dt - rhs))
            state = nxt
        defects.append(worst / params.lambda_h)
    assert defects[1] <= defects[0] / 1.7


def test_late_time_susceptible_mosquito_floor(forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.05, mode="reduced")
    rows, fin = ss.simulate(params, grid, st, t_end=3.0, return_final=True)
    beta_sup = float(np.max(np.asarray(params.beta_h(0.0, grid.taus_h))))
    floor = params.lambda_m * np.exp(-(20.0 + params.theta * beta_sup) * grid.ages_m)
    tol = 3 * grid.delta * params.lambda_m
    assert np.all(fin.s_m >= floor - tol)


def test_reduced_full_consistency():
    # with age-independent human rates the reduced dynamics is the exact
    # age-marginal of the full dynamics; observables agree within quadrature
    params = make_params(mu_h=0.022, lambda_m=7e6)
    delta = 0.05
    grid = ss.Grid(delta=delta, a_max_h=round(5.0 / 0.022 / delta) * delta,
                   a_max_m=1.5, tau_max_h=0.6, tau_max_m=1.5, eta_max=1.0)
    red0 = ss.default_initial(params, grid, 0.01, mode="reduced")
    # start the reduced run from the truncated-profile mass so both begin equal
    full0 = ss.default_initial(params, grid, 0.01, mode="full")
    red0.s_h = float(np.sum(full0.s_h)) * delta
    red0.i_h = np.sum(full0.i_h, axis=0) * delta
    rows_r = ss.simulate(params, grid, red0, t_end=2.0, output_every=10)
    rows_f = ss.simulate(params, grid, full0, t_end=2.0, output_every=10)
    for rr, rf in zip(rows_r, rows_f):
        assert rf.total_i_h == pytest.approx(rr.total_i_h, rel=0.01)
        assert rf.n_h == pytest.approx(rr.n_h, rel=0.01)


def test_snapshot_roundtrip(tmp_path, forward):
    params, grid = forward
    st = ss.default_initial(params, grid, 0.02, mode="reduced")
    rows, fin = ss.simulate(params, grid, st, t_end=0.5, return_final=True)
    path = str(tmp_path / "state.bin")
    save_snapshot(fin, grid, path)
    loaded, g2 = load_snapshot(path)
    assert g2 == grid
    assert loaded.t == pytest.approx(fin.t)
    assert loaded.s_h == fin.s_h
    assert np.array_equal(loaded.i_m, fin.i_m)
    # and it can continue stepping
    more = ss.simulate(params, grid, loaded, t_end=0.1)
    assert more[-1].t == pytest.approx(0.6)
