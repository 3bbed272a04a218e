"""Model parameters, built-in presets, and the parameter validator.

A parameter set bundles the three scalar recruitment/contact constants with
the eight structured rates.  Two presets are built in; they differ only in
the human natural mortality and hence in the direction of the bifurcation
at the epidemic threshold:

  forward   mu_h = 0.022  (unique endemic state above threshold)
  backward  mu_h = 0.002  (bistable window below threshold)

Shared preset values: human recruitment 8.4e5, mosquito mortality 20,
human/mosquito disease-induced mortality 0.1 / 25, biting rate 3.65e4,
recovery rate 0 then 50 after 0.1 time units of infection, immunity-loss
rate 0 then 40 after 0.1 time units since recovery, and Gaussian
transmission-probability profiles (human->mosquito centered at infection
age 0.3, mosquito->human centered at 0.2 with an exp(-(a-tau)) senescence
factor that vanishes for a <= tau).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, default_grid
from .rates import Arity, RateSpec, eval_rate

PRESET_NAMES = ("forward", "backward")


@dataclass(frozen=True)
class ModelParams:
    lambda_h: float                # human recruits / Tu
    lambda_m: float                # mosquito recruits / Tu
    theta: float                   # bites / Tu
    mu_h: RateSpec                 # natural mortality, humans (a)
    mu_m: RateSpec                 # natural mortality, mosquitoes (a)
    nu_h: RateSpec                 # disease-induced mortality, humans (a, tau)
    nu_m: RateSpec                 # disease-induced mortality, mosquitoes (a, tau)
    gamma_h: RateSpec              # recovery rate (a, tau)
    k_h: RateSpec                  # immunity-loss rate (a, eta)
    beta_h: RateSpec               # transmission probability human->mosquito (a, tau)
    beta_m: RateSpec               # transmission probability mosquito->human (a, tau)
    reduced_mode_eligible: bool = field(init=False)

    def __post_init__(self) -> None:
        if not (self.lambda_h > 0 and self.lambda_m > 0 and self.theta > 0):
            raise ValueError("lambda_h, lambda_m and theta must be positive")
        eligible = (not self.mu_h.depends_on_age
                    and not self.nu_h.depends_on_age
                    and not self.gamma_h.depends_on_age
                    and not self.k_h.depends_on_age
                    and not self.beta_h.depends_on_age)
        object.__setattr__(self, "reduced_mode_eligible", eligible)

    def with_lambda_m(self, lambda_m: float) -> "ModelParams":
        return ModelParams(self.lambda_h, float(lambda_m), self.theta,
                           self.mu_h, self.mu_m, self.nu_h, self.nu_m,
                           self.gamma_h, self.k_h, self.beta_h, self.beta_m)

    def mu_h_value(self) -> float:
        """Constant human mortality; only defined in reduced-eligible mode."""
        if self.mu_h.kind.value != "constant":
            raise ValueError("mu_h is not constant")
        return self.mu_h.params[0]

    def sup_norms(self, grid: Grid) -> dict[str, float]:
        """Grid sup-norms of the human removal rates (used for the N_h floor)."""
        taus, etas, ages = grid.taus_h, grid.etas, grid.ages_h
        return {
            "mu_h": float(np.max(eval_rate(self.mu_h, ages, 0.0))),
            "nu_h": _blocked_max(self.nu_h, ages, taus),
            "gamma_h": _blocked_max(self.gamma_h, ages, taus),
            "k_h": _blocked_max(self.k_h, ages, etas),
        }

    def epsilon_floor(self, grid: Grid) -> float:
        """Lower bound on the human population preserved by the dynamics."""
        s = self.sup_norms(grid)
        return self.lambda_h / (s["mu_h"] + s["nu_h"] + s["gamma_h"] + s["k_h"])


_BLOCK_ROWS = 65536    # caps transient memory when age axes are very long


def _blocked_max(spec: RateSpec, ages: np.ndarray, seconds: np.ndarray) -> float:
    worst = -np.inf
    for lo in range(0, len(ages), _BLOCK_ROWS):
        block = ages[lo:lo + _BLOCK_ROWS, None]
        worst = max(worst, float(np.max(eval_rate(spec, block, seconds[None, :]))))
    return worst


def _blocked_all_finite_nonneg(spec: RateSpec, ages: np.ndarray,
                               seconds: np.ndarray) -> bool:
    for lo in range(0, len(ages), _BLOCK_ROWS):
        vals = np.asarray(eval_rate(spec, ages[lo:lo + _BLOCK_ROWS, None],
                                    seconds[None, :]))
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            return False
    return True


def _blocked_range(spec: RateSpec, ages: np.ndarray, seconds: np.ndarray):
    lo_v, hi_v = np.inf, -np.inf
    for lo in range(0, len(ages), _BLOCK_ROWS):
        vals = np.asarray(eval_rate(spec, ages[lo:lo + _BLOCK_ROWS, None],
                                    seconds[None, :]))
        lo_v = min(lo_v, float(np.min(vals)))
        hi_v = max(hi_v, float(np.max(vals)))
    return lo_v, hi_v


def preset(name: str, lambda_m: float = 1e7) -> ModelParams:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    mu_h = 0.022 if name == "forward" else 0.002
    return ModelParams(
        lambda_h=8.4e5,
        lambda_m=float(lambda_m),
        theta=3.65e4,
        mu_h=RateSpec.constant(mu_h, Arity.AGE),
        mu_m=RateSpec.constant(20.0, Arity.AGE),
        nu_h=RateSpec.constant(0.1, Arity.AGE_TAU),
        nu_m=RateSpec.constant(25.0, Arity.AGE_TAU),
        gamma_h=RateSpec.piecewise(0.1, 0.0, 50.0, Arity.TAU_ONLY),
        k_h=RateSpec.piecewise(0.1, 0.0, 40.0, Arity.ETA_ONLY),
        beta_h=RateSpec.gauss(0.1, 0.3, 0.1, Arity.TAU_ONLY),
        beta_m=RateSpec.gauss_exp(0.05, 0.2, 0.2, 1.0),
    )


def preset_grid(name: str, delta: float = 0.005) -> Grid:
    mu_h = 0.022 if name == "forward" else 0.002
    return default_grid(mu_h, delta)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed]

    def __str__(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name.ljust(width)}  {c.detail}"
                 for c in self.checks]
        return "\n".join(lines)


def validate(params: ModelParams, grid: Grid) -> ValidationReport:
    """Check the standing assumptions on a concrete grid.

    Failures are report entries, never exceptions: positivity of the scalar
    constants, a strictly positive mortality floor mu_0, boundedness of all
    rates, transmission probabilities within [0, 1], kernels not identically
    zero on the reachable set {age >= infection age}, and consistency of the
    reduced-mode eligibility flag.
    """
    checks: list[ValidationCheck] = []

    def add(name: str, passed: bool, detail: str) -> None:
        checks.append(ValidationCheck(name, bool(passed), detail))

    add("positivity_constants",
        params.lambda_h > 0 and params.lambda_m > 0 and params.theta > 0,
        f"lambda_h={params.lambda_h:g} lambda_m={params.lambda_m:g} theta={params.theta:g}")

    mu_h_grid = np.asarray(eval_rate(params.mu_h, grid.ages_h, 0.0))
    mu_m_grid = np.asarray(eval_rate(params.mu_m, grid.ages_m, 0.0))
    mu0 = float(min(mu_h_grid.min(), mu_m_grid.min()))
    add("mortality_floor", mu0 > 0.0, f"mu_0 = {mu0:g}")

    bounded = True
    worst = ""
    checks_2d = [
        ("nu_h", params.nu_h, grid.ages_h, grid.taus_h),
        ("nu_m", params.nu_m, grid.ages_m, grid.taus_m),
        ("gamma_h", params.gamma_h, grid.ages_h, grid.taus_h),
        ("k_h", params.k_h, grid.ages_h, grid.etas),
    ]
    for name, vals in (("mu_h", mu_h_grid), ("mu_m", mu_m_grid)):
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            bounded, worst = False, name
    for name, spec, ages, seconds in checks_2d:
        if not _blocked_all_finite_nonneg(spec, ages, seconds):
            bounded, worst = False, name
    add("rates_bounded", bounded, "all rates finite and >= 0 on the grid" if bounded
        else f"{worst} is unbounded or negative on the grid")

    in_unit = True
    for name, spec, taus in (("beta_h", params.beta_h, grid.taus_h),
                             ("beta_m", params.beta_m, grid.taus_m)):
        ages = grid.ages_h if name == "beta_h" else grid.ages_m
        lo_v, hi_v = _blocked_range(spec, ages, taus)
        if lo_v < 0 or hi_v > 1:
            in_unit = False
            worst = name
    add("beta_in_unit_interval", in_unit, "beta_h, beta_m within [0, 1]" if in_unit
        else f"{worst} leaves [0, 1] on the grid")

    # transmissibility on the reachable set {(s + tau, tau)}
    for name, spec, taus, ages in (("beta_h", params.beta_h, grid.taus_h, grid.ages_h),
                                   ("beta_m", params.beta_m, grid.taus_m, grid.ages_m)):
        mass = 0.0
        for lo in range(0, len(ages), _BLOCK_ROWS):
            offs = ages[lo:lo + _BLOCK_ROWS, None]
            block = np.asarray(eval_rate(
                spec, offs + taus[None, :],
                np.broadcast_to(taus[None, :], (len(offs), len(taus)))))
            mass += float(np.sum(block))
        mass *= grid.delta ** 2
        add(f"{name}_not_identically_zero", mass > 0.0,
            f"triangular grid sum = {mass:g}")

    eligible_actual = params.reduced_mode_eligible
    # numerical cross-check of age independence for the human rates
    probe_ages = np.array([grid.delta / 2, grid.a_max_h / 2, grid.a_max_h - grid.delta / 2])
    age_free = True
    for spec, second in ((params.mu_h, np.array([0.0])),
                         (params.nu_h, grid.taus_h[::max(1, grid.n_th // 7)]),
                         (params.gamma_h, grid.taus_h[::max(1, grid.n_th // 7)]),
                         (params.k_h, grid.etas[::max(1, grid.n_eta // 7)]),
                         (params.beta_h, grid.taus_h[::max(1, grid.n_th // 7)])):
        vals = np.asarray(eval_rate(spec, probe_ages[:, None], second[None, :]))
        if vals.ndim == 2 and np.any(np.abs(vals - vals[0]) > 1e-12 * (1 + np.abs(vals[0]))):
            age_free = False
    add("reduced_mode_flag_consistent", eligible_actual == age_free,
        f"declared {eligible_actual}, grid probe says {age_free}")

    return ValidationReport(tuple(checks))


def estimate_mu0(params: ModelParams, grid: Grid) -> float:
    mu_h_grid = np.asarray(eval_rate(params.mu_h, grid.ages_h, 0.0))
    mu_m_grid = np.asarray(eval_rate(params.mu_m, grid.ages_m, 0.0))
    return float(min(mu_h_grid.min(), mu_m_grid.min()))
