"""Endemic equilibria and the bifurcation at the epidemic threshold.

When no human rate depends on chronological age, an endemic equilibrium is
parameterized by a single infection intensity K > 0: the normalized
infected density is K times the infection-survival profile c1(tau), and
existence reduces to a scalar condition f(R0, K) = 1 with

    f(R0, K) = R0 * (1 + K * int(nu_h c1)/mu_h)
               * (damped mosquito kernel mass at damping c2*K, normalized)
               * (1 - K * [int c1 + int(gamma_h c1) * immunity integral])

f(R0, 0) = R0 holds identically and f vanishes at the admissible upper
bound K_bar, so roots are found by a dense scan plus bisection (robust
through the fold where two roots merge).  dk_f is the exact analytic
K-derivative of that same expression.

``bifurcation_constant`` evaluates the three-term threshold constant whose
sign classifies the branch direction.  Note it is not algebraically
identical to dk_f at (R0=1, K=0): its recovered-pool term is a single
integral of gamma_h against the immunity survival, whereas the derivative
carries the product of int(gamma_h c1) with the immunity integral.  Both
are exposed; the sweep classifier follows the constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .characteristics import offset_cumulative
from .grids import Grid, build_survival, characteristic_cumulative, cumulative_to_centers
from .kernels import spectral_kernels
from .params import ModelParams
from .r0 import lambda0_closed_form, lambda_m_slope
from .rates import eval_rate
from .solver import StateFields

SCAN_POINTS = 2048


@dataclass(frozen=True)
class ReducedKernels:
    """Precomputed pieces of f(R0, K) for one parameter set and grid."""

    delta: float
    mu_h: float
    taus: np.ndarray
    c1: np.ndarray                  # exp(-int_0^tau (mu_h + nu_h + gamma_h))
    beta_h_tau: np.ndarray
    gamma_tau: np.ndarray
    nu_tau: np.ndarray
    etas: np.ndarray
    immunity_decay: np.ndarray      # exp(-int_0^eta (mu_h + k_h))
    c2: float                       # theta * int beta_h c1
    immunity_integral: float        # int immunity_decay d eta
    int_c1: float
    int_gamma_c1: float
    int_nu_c1: float
    int_gamma_imm: float            # int gamma_h(tau) exp(-int_0^tau (mu_h + k_h))
    recovered_weight: float         # int c1 * (1 + gamma_h * immunity_integral)
    xis_m: np.ndarray
    mosquito_kernel: np.ndarray     # beta_m * pi_m * infection survival on (xi, tau)
    mosq_row_mass: np.ndarray       # per-xi mass of the mosquito kernel (x delta^2)
    mosquito_kernel_mass: float
    age_lag_mass: float             # iint (a - tau) * mosquito kernel


def build_reduced_kernels(params: ModelParams, grid: Grid) -> ReducedKernels:
    if not params.reduced_mode_eligible:
        raise ValueError("reduced kernels require age-independent human rates")
    d = grid.delta
    sk = spectral_kernels(params, grid)
    mu_h = params.mu_h_value()
    taus, etas = grid.taus_h, grid.etas
    c1 = sk.c1
    beta_h_tau = sk.beta_h_tau
    gamma_tau = np.asarray(eval_rate(params.gamma_h, 0.0, taus))
    nu_tau = np.asarray(eval_rate(params.nu_h, 0.0, taus))
    k_eta = np.asarray(eval_rate(params.k_h, 0.0, etas))
    immunity_decay = np.exp(-cumulative_to_centers(
        np.broadcast_to(mu_h + k_eta, etas.shape), d))
    immunity_integral = float(np.sum(immunity_decay)) * d

    int_c1 = float(np.sum(c1)) * d
    int_gamma_c1 = float(np.sum(gamma_tau * c1)) * d
    int_nu_c1 = float(np.sum(nu_tau * c1)) * d
    c2 = params.theta * float(np.sum(beta_h_tau * c1)) * d
    recovered_weight = int_c1 + int_gamma_c1 * immunity_integral
    # recovery outflow against the immunity survival, sampled in infection age
    k_on_tau = np.asarray(eval_rate(params.k_h, 0.0, taus))
    int_gamma_imm = float(np.sum(gamma_tau * np.exp(-cumulative_to_centers(
        np.broadcast_to(mu_h + k_on_tau, taus.shape), d)))) * d

    row_mass = np.sum(sk.mosq_kernel, axis=1) * d * d
    mass = float(np.sum(row_mass))
    age_lag = float(np.sum(row_mass * sk.xis_m))
    return ReducedKernels(delta=d, mu_h=mu_h, taus=taus, c1=c1,
                          beta_h_tau=beta_h_tau, gamma_tau=gamma_tau, nu_tau=nu_tau,
                          etas=etas, immunity_decay=immunity_decay, c2=c2,
                          immunity_integral=immunity_integral, int_c1=int_c1,
                          int_gamma_c1=int_gamma_c1, int_nu_c1=int_nu_c1,
                          int_gamma_imm=int_gamma_imm,
                          recovered_weight=recovered_weight, xis_m=sk.xis_m,
                          mosquito_kernel=sk.mosq_kernel, mosq_row_mass=row_mass,
                          mosquito_kernel_mass=mass, age_lag_mass=age_lag)


def k_bar(kernels: ReducedKernels) -> float:
    """Admissible upper bound of the infection intensity (f vanishes there)."""
    return 1.0 / kernels.recovered_weight


def f_value(r0: float, k: float, kernels: ReducedKernels) -> float:
    """The scalar existence function; endemic equilibria solve f(r0, K) = 1."""
    kb = k_bar(kernels)
    if not (-1e-12 <= k <= kb * (1 + 1e-12)):
        raise ValueError(f"K = {k:g} outside the admissible range [0, {kb:g}]")
    growth = 1.0 + k * kernels.int_nu_c1 / kernels.mu_h
    damped = float(np.sum(kernels.mosq_row_mass * np.exp(-kernels.c2 * k * kernels.xis_m)))
    depletion = 1.0 - k * kernels.recovered_weight
    return r0 * growth * (damped / kernels.mosquito_kernel_mass) * depletion


def dk_f(r0: float, k: float, kernels: ReducedKernels) -> float:
    """Exact partial derivative of f with respect to K."""
    kb = k_bar(kernels)
    if not (-1e-12 <= k <= kb * (1 + 1e-12)):
        raise ValueError(f"K = {k:g} outside the admissible range [0, {kb:g}]")
    w = np.exp(-kernels.c2 * k * kernels.xis_m)
    damped = float(np.sum(kernels.mosq_row_mass * w))
    lag_damped = float(np.sum(kernels.mosq_row_mass * kernels.xis_m * w))
    mass = kernels.mosquito_kernel_mass
    vm = kernels.int_nu_c1 / kernels.mu_h
    g = kernels.int_gamma_c1 * kernels.immunity_integral
    part1 = (r0 * damped / mass) * (vm * (1.0 - 2.0 * k * kernels.int_c1 - 2.0 * k * g)
                                    - (kernels.int_c1 + g))
    part2 = (1.0 + k * vm) * (kernels.c2 * r0 * lag_damped / mass) \
        * (1.0 - k * kernels.int_c1 - k * g)
    return part1 - part2


def bifurcation_constant(kernels: ReducedKernels) -> float:
    """Three-term threshold constant; positive sign marks a backward branch.

    Terms: the transmission-weighted mean age lag of the mosquito kernel
    (negative, since age exceeds infection age on its support), minus the
    recovery outflow integrated against the immunity survival, plus the
    infection-survival mass weighted by (nu_h/mu_h - 1).
    """
    term1 = -kernels.c2 * kernels.age_lag_mass / kernels.mosquito_kernel_mass
    term2 = -kernels.int_gamma_imm
    term3 = float(np.sum(kernels.c1 * (kernels.nu_tau / kernels.mu_h - 1.0))) * kernels.delta
    return term1 + term2 + term3


def c_bif(params: ModelParams, grid: Grid) -> float:
    return bifurcation_constant(build_reduced_kernels(params, grid))


def solve_endemic(r0: float, kernels: ReducedKernels,
                  scan_points: int = SCAN_POINTS) -> list[float]:
    """All strictly positive roots of f(r0, K) = 1 on [0, K_bar].

    Dense uniform scan followed by bisection of every sign-change bracket;
    robust near the fold where two roots approach each other.
    """
    if r0 < 0:
        raise ValueError("r0 must be >= 0")
    kb = k_bar(kernels)
    ks = np.linspace(0.0, kb, scan_points + 1)
    vals = np.array([f_value(r0, k, kernels) - 1.0 for k in ks])
    roots: list[float] = []
    for i in range(scan_points):
        a, b = ks[i], ks[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0 and a > 0.0:
            roots.append(float(a))
            continue
        if fa * fb < 0.0:
            for _ in range(200):
                m = 0.5 * (a + b)
                fm = f_value(r0, m, kernels) - 1.0
                if fm == 0.0 or (b - a) < 1e-12 * kb:
                    break
                if fa * fm < 0.0:
                    b, fb = m, fm
                else:
                    a, fa = m, fm
            roots.append(float(0.5 * (a + b)))
    if vals[-1] == 0.0:
        roots.append(float(ks[-1]))
    return sorted(r for r in roots if r > 1e-12 * kb)


# ---------------------------------------------------------------------------
# branch tracing


@dataclass(frozen=True)
class BranchPoint:
    lambda_m: float
    r0: float
    roots: tuple[float, ...]


@dataclass(frozen=True)
class BifurcationBranch:
    points: tuple[BranchPoint, ...]
    classification: str            # "forward" or "backward"
    fold_r0_star: float | None
    c_bif: float


def trace_branch(params: ModelParams, grid: Grid, lambda_m_min: float,
                 lambda_m_max: float, n_points: int = 200,
                 refine_levels: int = 3, threads: int = 1) -> BifurcationBranch:
    """Endemic roots across a mosquito-recruitment sweep.

    The threshold value is exactly linear in the recruitment rate, so the
    sweep reuses one kernel build.  Sweep points are independent and may be
    evaluated by a thread pool; results are assembled in recruitment order
    either way.  For a backward branch the fold is the smallest threshold
    value still carrying a root, located by refining the first bracket that
    gains a root.
    """
    if not (0 < lambda_m_min < lambda_m_max):
        raise ValueError("need 0 < lambda_m_min < lambda_m_max")
    kernels = build_reduced_kernels(params, grid)
    slope = lambda_m_slope(params, grid)
    cbif = bifurcation_constant(kernels)
    lams = np.linspace(lambda_m_min, lambda_m_max, n_points)

    def point(lm: float) -> BranchPoint:
        return BranchPoint(float(lm), float(slope * lm),
                           tuple(solve_endemic(slope * lm, kernels)))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(point, lams))
    else:
        points = [point(lm) for lm in lams]
    classification = "backward" if cbif > 0 else "forward"

    fold = None
    if classification == "backward":
        if any(p.roots for p in points):
            first = next(i for i, p in enumerate(points) if p.roots)
            lo = lams[first - 1] if first > 0 else lambda_m_min
            hi = lams[first]
            for _ in range(refine_levels):
                sub = np.linspace(lo, hi, 17)
                idx = next((i for i, lm in enumerate(sub)
                            if solve_endemic(slope * lm, kernels)), None)
                if idx is None:
                    break
                hi = sub[idx]
                lo = sub[idx - 1] if idx > 0 else lo
            fold = float(slope * hi)
    return BifurcationBranch(tuple(points), classification, fold, cbif)


# ---------------------------------------------------------------------------
# equilibrium reconstruction


def reconstruct_equilibrium(k_root: float, params: ModelParams,
                            grid: Grid) -> tuple[StateFields, float]:
    """Absolute-scale reduced-mode equilibrium fields for a root K.

    Returns the state and the equilibrium human population N_h*.  The
    mosquito profiles carry the equilibrium infection pressure c2*K as an
    extra exponential discount, matching the discrete fixed point of the
    transport step.
    """
    kernels = build_reduced_kernels(params, grid)
    kb = k_bar(kernels)
    if not (0.0 < k_root <= kb * (1 + 1e-12)):
        raise ValueError(f"K = {k_root:g} outside (0, K_bar]")
    d = grid.delta
    i_norm = k_root * kernels.c1                       # per-capita infected density
    n_star = params.lambda_h / (kernels.mu_h + float(np.sum(kernels.nu_tau * i_norm)) * d)
    r_norm = float(np.sum(kernels.gamma_tau * i_norm)) * d * kernels.immunity_decay
    s_norm = 1.0 - float(np.sum(i_norm)) * d - float(np.sum(r_norm)) * d
    if s_norm <= 0.0:
        raise ValueError(f"invalid root: susceptible share {s_norm:g} <= 0")

    sur = build_survival(params, grid)
    lam_hm_rate = kernels.c2 * k_root                  # per-mosquito infection rate
    s_m = params.lambda_m * sur.pi_m * np.exp(-lam_hm_rate * grid.ages_m)
    d_im = offset_cumulative(params, grid, "i_m")
    i_m = np.zeros((grid.n_am, grid.n_tm))
    for j in range(grid.n_tm):
        rows = np.arange(j, grid.n_am)
        i_m[rows, j] = lam_hm_rate * s_m[rows - j] * np.exp(-d_im[rows - j, j])

    state = StateFields("reduced", 0.0, s_norm * n_star, i_norm * n_star,
                        r_norm * n_star, s_m, i_m)
    return state, n_star


# ---------------------------------------------------------------------------
# general-model endemic residual


def lift_reduced_equilibrium(k_root: float, params: ModelParams,
                             grid: Grid) -> np.ndarray:
    """Normalized 2D infected density i*(a, tau) generating a reduced root.

    Marches the equilibrium age profile of normalized susceptibles with the
    same discrete shift/decay/source conventions as the transport step, then
    spreads the infection-age profile along it.
    """
    kernels = build_reduced_kernels(params, grid)
    state, n_star = reconstruct_equilibrium(k_root, params, grid)
    sur = build_survival(params, grid)
    d = grid.delta
    n_a, n_t, n_e = grid.n_ah, grid.n_th, grid.n_eta
    d_ih = offset_cumulative(params, grid, "i_h")      # edge offsets
    d_rh = offset_cumulative(params, grid, "r_h")
    gamma = kernels.gamma_tau
    k_eta = np.asarray(eval_rate(params.k_h, 0.0, grid.etas))
    lam_rate = k_root / (state.s_h / n_star)           # per-susceptible-human rate

    ih_surv = np.exp(-d_ih)                            # [offset, tau]
    rh_surv = np.exp(-d_rh)
    s = np.zeros(n_a)
    rb = np.zeros(n_a)                                 # recovery inflow at each age
    s[0] = (params.lambda_h / n_star) * sur.decay_h_entry[0] * np.exp(-0.5 * d * lam_rate)
    for i in range(n_a):
        if i > 0:
            js = np.arange(min(i, n_t))
            i_row_prev = lam_rate * s[i - 1 - js] * ih_surv[i - 1 - js, js]
            rb[i - 1] = float(np.sum(gamma[: len(js)] * i_row_prev)) * d
            ls = np.arange(min(i, n_e))
            r_row_prev = rb[i - 1 - ls] * rh_surv[i - 1 - ls, ls]
            src = float(np.sum(k_eta[: len(ls)] * r_row_prev)) * d
            s[i] = (s[i - 1] + d * src) * sur.decay_h_step[i] * np.exp(-d * lam_rate)
    i_star = np.zeros((n_a, n_t))
    for j in range(n_t):
        rows = np.arange(j, n_a)
        i_star[rows, j] = lam_rate * s[rows - j] * ih_surv[rows - j, j]
    return i_star


def general_endemic_residual(i_h_star: np.ndarray, params: ModelParams,
                             grid: Grid) -> float:
    """Evaluate the full-model endemic existence condition at a candidate
    normalized infected density; the value 1 certifies an equilibrium.

    The candidate enters through three functionals: the extra-mortality
    correction to the population profile, the transmission pressure on
    mosquitoes (which discounts the mosquito kernel by the age lag), and
    the susceptible-depletion bracket.  With a zero candidate the value
    reduces exactly to the threshold value lambda0.
    """
    if i_h_star.shape != (grid.n_ah, grid.n_th):
        raise ValueError("candidate must be sampled on the (human age, infection age) grid")
    if np.any(i_h_star < 0):
        raise ValueError("candidate density must be non-negative")
    d = grid.delta
    sur = build_survival(params, grid)
    sk = spectral_kernels(params, grid)
    ages, taus, etas = grid.ages_h, grid.taus_h, grid.etas
    n_a = grid.n_ah

    tg = np.broadcast_to(taus[None, :], (n_a, grid.n_th))
    nu_grid = np.asarray(eval_rate(params.nu_h, ages[:, None], tg))
    gamma_grid = np.asarray(eval_rate(params.gamma_h, ages[:, None], tg))
    nh_loss = np.sum(nu_grid * i_h_star, axis=1) * d         # int nu i* dtau, per age
    rec_in = np.sum(gamma_grid * i_h_star, axis=1) * d       # int gamma i* dtau, per age

    # population correction: iint (int nu i*) exp(-int_s^a mu) ds da
    mh_c = sur.cum_h
    inner = np.exp(-mh_c) * np.cumsum(nh_loss * np.exp(mh_c)) * d
    koef = float(np.sum(inner)) * d

    pressure = params.theta * float(np.sum(
        np.asarray(eval_rate(params.beta_h, ages[:, None], tg)) * i_h_star)) * d * d

    damped = float(np.sum(sk.mosq_kernel
                          * np.exp(-pressure * sk.xis_m)[:, None])) * d * d
    mass = sk.mosquito_factor(0.0)
    r0_sq = lambda0_closed_form(params, grid)
    first = r0_sq * (1.0 + koef) ** 2 * (damped / mass)

    # bracket(alpha) on edge-aligned age offsets alpha = x * delta
    mh_edge = np.concatenate(([0.0], np.cumsum(
        np.asarray(eval_rate(params.mu_h, ages, 0.0)) * d)))
    row_mass = np.sum(i_h_star, axis=1) * d                  # int i*(a, s) ds at centers
    # int_0^alpha i*(alpha, s) ds: i* at the edge age is the mean of the rows around it
    b1 = np.concatenate(([0.0], 0.5 * (row_mass[:-1] + row_mass[1:]), [row_mass[-1]]))

    cum_loss = np.concatenate(([0.0], np.cumsum(nh_loss * np.exp(mh_c)) * d))
    b2 = np.exp(-mh_edge) * cum_loss                          # int nh_loss e^{-int mu}

    d_rh_centers = characteristic_cumulative(
        lambda a, e: eval_rate(params.mu_h, a, e) + eval_rate(params.k_h, a, e),
        ages, etas, d)                                        # center offsets
    rh_surv_c = np.exp(-d_rh_centers)
    b3 = np.zeros(n_a + 1)
    n_e = grid.n_eta
    for x in range(1, n_a + 1):
        ls = np.arange(min(x, n_e))
        b3[x] = float(np.sum(rec_in[x - 1 - ls] * rh_surv_c[x - 1 - ls, ls])) * d
    bracket = b1 + b2 + b3

    d_ih = offset_cumulative(params, grid, "i_h")            # [edge offset, tau]
    bh_off = np.asarray(eval_rate(
        params.beta_h,
        (np.arange(n_a) * d)[:, None] + taus[None, :],
        np.broadcast_to(taus[None, :], (n_a, grid.n_th))))
    idx = np.add.outer(np.arange(n_a), np.arange(grid.n_th))
    valid = idx < n_a                                        # age = offset + tau on the grid
    inner_tau = np.sum(np.where(valid, bh_off * np.exp(-d_ih), 0.0), axis=1) * d
    bigint = params.theta * float(np.sum(inner_tau * bracket[:n_a])) * d

    second = (params.theta * damped) * params.lambda_m \
        * ((1.0 + koef) / (params.lambda_h * sk.int_pi_h)) * bigint
    return first - second
