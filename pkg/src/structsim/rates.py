"""Closed family of rate functions used by the transmission model.

Every demographic or epidemiological rate is one of five forms:

  constant(c)                          value c everywhere
  piecewise(threshold, low, high)      low for x <= threshold, high after
  gauss(amplitude, center, width)      (A / sqrt(2*pi)) * exp(-((x-c)/w)^2 / 2)
  gauss_exp(amplitude, center, width, decay)
                                       gauss(tau) * exp(-decay*(a-tau)),
                                       and exactly 0 whenever a <= tau
  table(x[], y[])                      piecewise-linear interpolation, clamped

Keeping the family closed (instead of parsing arbitrary expressions) keeps
evaluation allocation-free inside solver loops; ``table`` is the escape
hatch for anything else.

Arity records which structural variables a rate reads: chronological age
``a``, infection age ``tau``, recovery age ``eta``, or a pair.  For the
scalar forms the active variable is ``a`` for AGE arity and the second
variable otherwise; ``gauss_exp`` is the one genuinely two-variable form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)


class RateKind(enum.Enum):
    CONSTANT = "constant"
    PIECEWISE_CONSTANT = "piecewise"
    GAUSSIAN_BUMP = "gauss"
    GAUSSIAN_EXP_INDICATOR = "gauss_exp"
    TABLE = "table"


class Arity(enum.Enum):
    AGE = "age"             # f(a)
    AGE_TAU = "age_tau"     # f(a, tau)
    AGE_ETA = "age_eta"     # f(a, eta)
    TAU_ONLY = "tau"        # f(tau)
    ETA_ONLY = "eta"        # f(eta)


_SECOND_VAR_ARITIES = (Arity.AGE_TAU, Arity.AGE_ETA, Arity.TAU_ONLY, Arity.ETA_ONLY)


@dataclass(frozen=True)
class RateSpec:
    """Immutable symbolic description of one rate function.

    ``params`` is interpreted per ``kind``:
      CONSTANT: (c,)
      PIECEWISE_CONSTANT: (threshold, low, high)
      GAUSSIAN_BUMP: (amplitude, center, width)
      GAUSSIAN_EXP_INDICATOR: (amplitude, center, width, decay)
      TABLE: unused; ``table_x``/``table_y`` hold the samples
    """

    kind: RateKind
    arity: Arity
    params: tuple[float, ...] = ()
    table_x: tuple[float, ...] = field(default=(), repr=False)
    table_y: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        expected = {
            RateKind.CONSTANT: 1,
            RateKind.PIECEWISE_CONSTANT: 3,
            RateKind.GAUSSIAN_BUMP: 3,
            RateKind.GAUSSIAN_EXP_INDICATOR: 4,
            RateKind.TABLE: 0,
        }[self.kind]
        if len(self.params) != expected:
            raise ValueError(
                f"{self.kind.value} takes {expected} parameters, got {len(self.params)}"
            )
        for p in self.params:
            if not math.isfinite(p):
                raise ValueError(f"{self.kind.value} parameter {p!r} is not finite")
            if p < 0:
                raise ValueError(f"negative parameter {p!r} in {self.kind.value}")
        if self.kind in (RateKind.GAUSSIAN_BUMP, RateKind.GAUSSIAN_EXP_INDICATOR):
            if self.params[2] <= 0:
                raise ValueError("gaussian width must be > 0")
        if self.kind is RateKind.GAUSSIAN_EXP_INDICATOR and self.arity is not Arity.AGE_TAU:
            raise ValueError("gauss_exp is only meaningful with (a, tau) arity")
        if self.kind is RateKind.TABLE:
            if len(self.table_x) < 2 or len(self.table_x) != len(self.table_y):
                raise ValueError("table rate needs >= 2 (x, y) samples")
            if any(b <= a for a, b in zip(self.table_x, self.table_x[1:])):
                raise ValueError("table abscissae must be strictly increasing")
            if any(not math.isfinite(v) or v < 0 for v in self.table_y):
                raise ValueError("table values must be finite and non-negative")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def constant(c: float, arity: Arity = Arity.AGE) -> "RateSpec":
        return RateSpec(RateKind.CONSTANT, arity, (float(c),))

    @staticmethod
    def piecewise(threshold: float, low: float, high: float,
                  arity: Arity = Arity.TAU_ONLY) -> "RateSpec":
        return RateSpec(RateKind.PIECEWISE_CONSTANT, arity,
                        (float(threshold), float(low), float(high)))

    @staticmethod
    def gauss(amplitude: float, center: float, width: float,
              arity: Arity = Arity.TAU_ONLY) -> "RateSpec":
        return RateSpec(RateKind.GAUSSIAN_BUMP, arity,
                        (float(amplitude), float(center), float(width)))

    @staticmethod
    def gauss_exp(amplitude: float, center: float, width: float, decay: float) -> "RateSpec":
        return RateSpec(RateKind.GAUSSIAN_EXP_INDICATOR, Arity.AGE_TAU,
                        (float(amplitude), float(center), float(width), float(decay)))

    @staticmethod
    def table(xs, ys, arity: Arity = Arity.AGE) -> "RateSpec":
        return RateSpec(RateKind.TABLE, arity, (),
                        tuple(float(x) for x in xs), tuple(float(y) for y in ys))

    # -- queries -----------------------------------------------------------

    @property
    def depends_on_age(self) -> bool:
        """True if the value can vary with chronological age ``a``."""
        if self.kind is RateKind.CONSTANT:
            return False
        if self.kind is RateKind.GAUSSIAN_EXP_INDICATOR:
            return True
        if self.arity in (Arity.TAU_ONLY, Arity.ETA_ONLY):
            return False
        return True

    def __call__(self, a, second=0.0):
        return eval_rate(self, a, second)


def eval_rate(spec: RateSpec, a, second=0.0):
    """Pointwise value of ``spec`` at age ``a`` and second variable ``second``.

    Accepts scalars or numpy arrays (broadcast together); pure and total on
    the non-negative domain.
    """
    a = np.asarray(a, dtype=float)
    s = np.asarray(second, dtype=float)
    if spec.kind is RateKind.CONSTANT:
        (c,) = spec.params
        return np.broadcast_to(np.float64(c), np.broadcast_shapes(a.shape, s.shape)).copy() \
            if a.shape or s.shape else float(c)
    x = a if spec.arity is Arity.AGE else s
    if spec.kind is RateKind.PIECEWISE_CONSTANT:
        threshold, low, high = spec.params
        out = np.where(x <= threshold, low, high)
        return out if out.shape else float(out)
    if spec.kind is RateKind.GAUSSIAN_BUMP:
        amp, center, width = spec.params
        out = amp / SQRT_2PI * np.exp(-0.5 * ((x - center) / width) ** 2)
        return out if out.shape else float(out)
    if spec.kind is RateKind.GAUSSIAN_EXP_INDICATOR:
        amp, center, width, decay = spec.params
        tau = s
        bump = amp / SQRT_2PI * np.exp(-0.5 * ((tau - center) / width) ** 2)
        out = np.where(a <= tau, 0.0, bump * np.exp(-decay * np.maximum(a - tau, 0.0)))
        return out if out.shape else float(out)
    # TABLE: linear interpolation, clamped at the ends
    out = np.interp(x, spec.table_x, spec.table_y)
    return out if np.asarray(out).shape else float(out)
