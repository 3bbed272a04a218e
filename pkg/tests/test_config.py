import numpy as np
import pytest

import structsim as ss
from structsim.config import ConfigError, load_config, parse_config
from structsim.params import preset, preset_grid, validate
from structsim.rates import Arity, RateKind, RateSpec

from conftest import make_params

GOOD = """
[population]
lambda_h = 8.4e5
lambda_m = 7e6
theta    = 3.65e4

[rates]
mu_h    = constant(0.022)
mu_m    = constant(20)
nu_h    = constant(0.1)
nu_m    = constant(25)
gamma_h = piecewise(0.1, 0, 50)
k_h     = piecewise(0.1, 0, 40)
beta_h  = gauss(0.1, 0.3, 0.1)
beta_m  = gauss_exp(0.05, 0.2, 0.2, 1.0)

[grid]
delta     = 0.01
a_max_h   = 100.0
a_max_m   = 1.5
tau_max_h = 0.6
tau_max_m = 1.5
eta_max   = 1.0
"""


def test_document_matches_forward_preset():
    params, grid = load_config(GOOD)
    ref = preset("forward", 7e6)
    assert params.lambda_h == ref.lambda_h
    assert params.theta == ref.theta
    assert params.mu_h == ref.mu_h
    assert params.gamma_h == ref.gamma_h
    assert params.beta_m == ref.beta_m
    assert params.reduced_mode_eligible
    assert grid is not None and grid.delta == 0.01


def test_preset_values():
    p = preset("forward")
    assert p.lambda_h == 8.4e5
    assert p.mu_h.params == (0.022,)
    assert p.mu_m.params == (20.0,)
    assert p.nu_h.params == (0.1,)
    assert p.nu_m.params == (25.0,)
    assert p.theta == 3.65e4
    assert p.gamma_h.params == (0.1, 0.0, 50.0)
    assert p.k_h.params == (0.1, 0.0, 40.0)
    b = preset("backward")
    assert b.mu_h.params == (0.002,)
    assert preset("forward").reduced_mode_eligible
    assert preset("backward").reduced_mode_eligible
    with pytest.raises(ValueError, match="unknown preset"):
        preset("sideways")


def test_negative_parameter_is_an_error():
    bad = GOOD.replace("theta    = 3.65e4", "theta    = -1")
    with pytest.raises(ConfigError, match="negative parameter"):
        parse_config(bad)


def test_unknown_key_and_kind_and_syntax():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(GOOD + "\n[population]\nbites = 3\n")
    with pytest.raises(ConfigError, match="unknown rate kind"):
        parse_config(GOOD.replace("constant(20)", "lorentzian(20)"))
    err = None
    try:
        parse_config(GOOD.replace("mu_m    = constant(20)", "mu_m  constant(20)"))
    except ConfigError as exc:
        err = exc
    assert err is not None and err.line is not None  # position-annotated


def test_missing_rate_is_an_error():
    lines = [ln for ln in GOOD.splitlines() if not ln.startswith("k_h")]
    with pytest.raises(ConfigError, match="missing .rates. key 'k_h'"):
        parse_config("\n".join(lines))


def test_table_rate_roundtrip(tmp_path):
    table = tmp_path / "mu.tsv"
    table.write_text("0.0 0.5\n2.0 0.5\n4.0 1.5\n")
    doc = GOOD.replace("mu_h    = constant(0.022)", "mu_h    = table(mu.tsv)")
    params, _ = load_config(doc, base_dir=str(tmp_path))
    assert params.mu_h.kind is RateKind.TABLE
    assert params.mu_h(1.0) == pytest.approx(0.5)
    assert params.mu_h(3.0) == pytest.approx(1.0)
    assert not params.reduced_mode_eligible   # tabulated mu_h varies with age


def test_validate_presets_all_pass():
    # default desk-scale grids, including the long backward human-age axis
    for name in ("forward", "backward"):
        rep = validate(preset(name), preset_grid(name))
        assert rep.all_passed, str(rep)


def test_validate_flags_zero_kernel_and_zero_mortality():
    g = preset_grid("forward", 0.01)
    dead_kernel = make_params(beta_m=RateSpec.constant(0.0, Arity.AGE_TAU))
    rep = validate(dead_kernel, g)
    failed = {c.name for c in rep.failed()}
    assert "beta_m_not_identically_zero" in failed

    no_mortality = make_params(mu_h=RateSpec.constant(0.0, Arity.AGE))
    rep = validate(no_mortality, g)
    assert "mortality_floor" in {c.name for c in rep.failed()}


def test_epsilon_floor_positive(forward):
    params, grid = forward
    eps = params.epsilon_floor(grid)
    assert eps == pytest.approx(8.4e5 / (0.022 + 0.1 + 50.0 + 40.0), rel=1e-12)
