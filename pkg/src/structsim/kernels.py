"""Generation kernels on (offset, structure-age) grids.

The next-generation analysis needs double integrals of the form

    iint  beta(tau + xi, tau) * exp(-int_0^tau removal(sigma + xi, sigma))
          * pi(xi)  dxi dtau

where ``xi = age - tau`` is constant along a transport characteristic.
This module materializes those kernels once per (params, grid) pair and
exposes the weighted masses every downstream computation shares, so that
closed-form evaluation, power iteration, and the characteristic equation
all reduce to sums over identical arrays (cross-method agreement is then
limited only by floating-point rounding).

When every human rate is age-independent, the human kernel factorizes into
(integral of pi_h) x (infection-age profile); the human age axis used for
that integral is extended well past the working grid (survival < 1e-17 at
the far end) so the factorized path agrees with the analytic value of
int pi_h for constant mortality to ~1e-10 relative.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .grids import Grid, characteristic_cumulative, cumulative_to_centers
from .params import ModelParams
from .rates import eval_rate

# survival tail kept below exp(-40) on the spectral human-age axis
_SPECTRAL_FOLDS = 40.0
_SPECTRAL_MAX_CELLS = 8_000_000


@dataclass(frozen=True)
class SpectralKernels:
    """Shared grids and kernel tables for reproduction-number work."""

    delta: float
    eligible: bool
    # human side
    ages_h: np.ndarray            # spectral age axis (factorized path) or grid axis
    pi_h: np.ndarray
    int_pi_h: float
    taus_h: np.ndarray
    c1: np.ndarray | None         # exp(-int (mu_h+nu_h+gamma_h)) on taus_h, eligible only
    beta_h_tau: np.ndarray | None
    human_kernel: np.ndarray | None        # [n_xi_h, n_th], pi_h(xi) included; general path
    human_kernel_nopi: np.ndarray | None   # same without the pi_h(xi) factor
    # mosquito side
    xis_m: np.ndarray
    taus_m: np.ndarray
    pi_m: np.ndarray
    int_pi_m: float
    mosq_kernel: np.ndarray       # [n_xi_m, n_tm], pi_m(xi) included

    # -- weighted masses -----------------------------------------------------

    def human_factor(self, lam: float = 0.0) -> float:
        """iint beta_h e^{-removal} pi_h(xi) e^{-lam tau} dxi dtau."""
        w = np.exp(-lam * self.taus_h)
        if self.eligible:
            return self.int_pi_h * float(np.sum(self.beta_h_tau * self.c1 * w)) * self.delta
        return float(np.sum(self.human_kernel * w[None, :])) * self.delta ** 2

    def mosquito_factor(self, lam: float = 0.0) -> float:
        """iint beta_m e^{-removal} pi_m(xi) e^{-lam tau} dxi dtau."""
        w = np.exp(-lam * self.taus_m)
        return float(np.sum(self.mosq_kernel * w[None, :])) * self.delta ** 2

    def human_kernel_action(self, b: np.ndarray) -> float:
        """Contraction of the (pi_h-free) human kernel against an age density b."""
        if self.eligible:
            return float(np.sum(self.beta_h_tau * self.c1)) * self.delta \
                * float(np.sum(b)) * self.delta
        return float(np.sum(self.human_kernel_nopi * b[:, None])) * self.delta ** 2


def _survival_on(mu_spec, ages: np.ndarray, delta: float) -> np.ndarray:
    r = np.asarray(eval_rate(mu_spec, ages, 0.0), dtype=float)
    if r.ndim == 0:
        r = np.full_like(ages, float(r))
    return np.exp(-cumulative_to_centers(r, delta))


@functools.lru_cache(maxsize=8)
def spectral_kernels(params: ModelParams, grid: Grid) -> SpectralKernels:
    d = grid.delta
    taus_h, taus_m = grid.taus_h, grid.taus_m

    # --- human side
    eligible = params.reduced_mode_eligible
    if eligible:
        mu = params.mu_h_value()
        extent_cells = min(int(np.ceil(_SPECTRAL_FOLDS / max(mu, 1e-12) / d)),
                           _SPECTRAL_MAX_CELLS)
        extent_cells = max(extent_cells, grid.n_ah)
        ages_h = (np.arange(extent_cells) + 0.5) * d
        pi_h = np.exp(-mu * ages_h)
        c1_rate = mu + np.asarray(eval_rate(params.nu_h, 0.0, taus_h)) \
            + np.asarray(eval_rate(params.gamma_h, 0.0, taus_h))
        c1 = np.exp(-cumulative_to_centers(np.broadcast_to(c1_rate, taus_h.shape), d))
        beta_h_tau = np.asarray(eval_rate(params.beta_h, 0.0, taus_h))
        human_kernel = human_kernel_nopi = None
    else:
        ages_h = grid.ages_h
        pi_h = _survival_on(params.mu_h, ages_h, d)
        c1 = beta_h_tau = None
        cum = characteristic_cumulative(
            lambda a, t: (eval_rate(params.mu_h, a, t) + eval_rate(params.nu_h, a, t)
                          + eval_rate(params.gamma_h, a, t)),
            ages_h, taus_h, d)
        bh = np.asarray(eval_rate(params.beta_h, ages_h[:, None] + taus_h[None, :],
                                  np.broadcast_to(taus_h[None, :],
                                                  (len(ages_h), len(taus_h)))))
        human_kernel_nopi = bh * np.exp(-cum)
        human_kernel = human_kernel_nopi * pi_h[:, None]
    int_pi_h = float(np.sum(pi_h)) * d

    # --- mosquito side: kernel on (xi, tau) with the age extent of the grid
    xis_m = grid.ages_m
    pi_m = _survival_on(params.mu_m, xis_m, d)
    cum_m = characteristic_cumulative(
        lambda a, t: eval_rate(params.mu_m, a, t) + eval_rate(params.nu_m, a, t),
        xis_m, taus_m, d)
    bm = np.asarray(eval_rate(params.beta_m, xis_m[:, None] + taus_m[None, :],
                              np.broadcast_to(taus_m[None, :],
                                              (len(xis_m), len(taus_m)))))
    mosq_kernel = bm * np.exp(-cum_m) * pi_m[:, None]
    # keep age + infection age within the truncated mosquito age span
    idx = np.add.outer(np.arange(len(xis_m)), np.arange(len(taus_m)))
    mosq_kernel = np.where(idx + 1 <= grid.n_am, mosq_kernel, 0.0)
    int_pi_m = float(np.sum(pi_m)) * d

    return SpectralKernels(delta=d, eligible=eligible, ages_h=ages_h, pi_h=pi_h,
                           int_pi_h=int_pi_h, taus_h=taus_h, c1=c1,
                           beta_h_tau=beta_h_tau, human_kernel=human_kernel,
                           human_kernel_nopi=human_kernel_nopi,
                           xis_m=xis_m, taus_m=taus_m, pi_m=pi_m,
                           int_pi_m=int_pi_m, mosq_kernel=mosq_kernel)
