"""Market coefficients and admissibility checks.

Coefficients are deterministic, piecewise-constant functions of time. They
are evaluated left-continuously (the value at a breakpoint belongs to the
piece ending there), matching the caglad convention used for strategies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidConfiguration, InvalidInput


@dataclass(frozen=True)
class PiecewiseConstant:
    """A step function on [0, inf) with ``values[i]`` on ``(breaks[i-1], breaks[i]]``."""

    values: tuple[float, ...]
    breaks: tuple[float, ...] = ()

    # cumulative integral at the start of each piece
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in np.atleast_1d(self.values))
        breaks = tuple(float(b) for b in np.atleast_1d(self.breaks)) if len(np.atleast_1d(self.breaks)) else ()
        if len(values) != len(breaks) + 1:
            raise InvalidConfiguration(
                f"piecewise function needs len(values) == len(breaks) + 1, got {len(values)} and {len(breaks)}"
            )
        if any(b <= 0 for b in breaks) or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise InvalidConfiguration(f"breakpoints must be positive and strictly increasing: {breaks}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "breaks", breaks)
        starts = np.array((0.0,) + breaks)
        widths = np.diff(starts)
        cum = np.concatenate(([0.0], np.cumsum(np.array(values[:-1]) * widths)))
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((float(value),))

    @property
    def is_constant(self) -> bool:
        return len(self.values) == 1

    def __call__(self, t):
        """Left-continuous evaluation."""
        if self.is_constant:
            return np.full(np.shape(t), self.values[0]) if np.ndim(t) else self.values[0]
        idx = np.searchsorted(self.breaks, t, side="left")
        out = np.asarray(self.values)[idx]
        return out if np.ndim(t) else float(out)

    def right(self, t):
        """Right-continuous evaluation (value on the interval starting at t)."""
        if self.is_constant:
            return np.full(np.shape(t), self.values[0]) if np.ndim(t) else self.values[0]
        idx = np.searchsorted(self.breaks, t, side="right")
        out = np.asarray(self.values)[idx]
        return out if np.ndim(t) else float(out)

    def antiderivative(self, t):
        """Integral from 0 to t."""
        if self.is_constant:
            return self.values[0] * np.asarray(t, dtype=float) if np.ndim(t) else self.values[0] * float(t)
        idx = np.searchsorted(self.breaks, t, side="right")
        out = self._cum[idx] + np.asarray(self.values)[idx] * (np.asarray(t, dtype=float) - self._starts[idx])
        return out if np.ndim(t) else float(out)

    def integral(self, s, t):
        """Exact integral over [s, t] (vectorized, s <= t assumed)."""
        if self.is_constant:
            return self.values[0] * (np.asarray(t, dtype=float) - np.asarray(s, dtype=float)) \
                if (np.ndim(s) or np.ndim(t)) else self.values[0] * (float(t) - float(s))
        return self.antiderivative(t) - self.antiderivative(s)

    def inverse_antiderivative(self, y):
        """Smallest t with antiderivative(t) = y, for strictly positive values."""
        if self.is_constant:
            return np.asarray(y, dtype=float) / self.values[0] if np.ndim(y) else float(y) / self.values[0]
        idx = np.searchsorted(self._cum, y, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        out = self._starts[idx] + (np.asarray(y, dtype=float) - self._cum[idx]) / np.asarray(self.values)[idx]
        return out if np.ndim(y) else float(out)

    def is_constant_on(self, s: float, t: float) -> bool:
        if self.is_constant:
            return True
        first = int(np.searchsorted(self.breaks, s, side="right"))
        last = int(np.searchsorted(self.breaks, t, side="left"))
        return len(set(self.values[first:last + 1])) == 1


def _as_piecewise(value) -> PiecewiseConstant:
    if isinstance(value, PiecewiseConstant):
        return value
    return PiecewiseConstant.constant(value)


@dataclass(frozen=True)
class MarketCoefficients:
    """Bond rate, drift, volatility, jump size and jump intensity on [0, horizon]."""

    rho: PiecewiseConstant
    mu: PiecewiseConstant
    sigma: PiecewiseConstant
    theta: PiecewiseConstant
    lam: PiecewiseConstant
    horizon: float

    def __post_init__(self):
        for name in ("rho", "mu", "sigma", "theta", "lam"):
            object.__setattr__(self, name, _as_piecewise(getattr(self, name)))
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def constant(cls, rho=0.0, mu=0.0, sigma=0.0, theta=1.0, lam=1.0, horizon=1.0) -> "MarketCoefficients":
        return cls(rho, mu, sigma, theta, lam, horizon)

    def coefficients(self):
        return {"rho": self.rho, "mu": self.mu, "sigma": self.sigma, "theta": self.theta, "lam": self.lam}

    def breakpoints(self) -> np.ndarray:
        """All coefficient breakpoints inside (0, horizon)."""
        pts = sorted({b for f in self.coefficients().values() for b in f.breaks if 0.0 < b < self.horizon})
        return np.array(pts)

    @property
    def pure_jump(self) -> bool:
        return all(v == 0.0 for v in self.sigma.values)

    def excess_return(self, t):
        return self.mu(t) - self.rho(t)


class Violation(NamedTuple):
    condition: str
    time: float


def validate_coefficients(coeffs: MarketCoefficients, n_check: int = 101) -> list[Violation]:
    """Check positivity of the intensity, hyp1 (theta > -1) and hyp4 on a uniform grid.

    hyp4, (mu - rho)/theta < 0, is only enforced where the asset has no
    diffusion part; with sigma != 0 the quadratic penalty already bounds the
    log-utility value.
    """
    if not coeffs.horizon > 0 or not np.isfinite(coeffs.horizon):
        raise InvalidConfiguration(f"horizon must be a positive finite number, got {coeffs.horizon}")
    if n_check < 2:
        raise InvalidInput("n_check must be at least 2")
    t = np.linspace(0.0, coeffs.horizon, int(n_check))
    rho, mu, sigma, theta, lam = (f(t) for f in coeffs.coefficients().values())

    checks = {
        "finite": ~(np.isfinite(rho) & np.isfinite(mu) & np.isfinite(sigma) & np.isfinite(theta) & np.isfinite(lam)),
        "lambda_positive": ~(lam > 0),
        "hyp1": ~(theta > -1),
    }
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (mu - rho) / theta
    checks["hyp4"] = (theta != 0) & (sigma == 0) & ~(ratio < 0)

    report = []
    for name, bad in checks.items():
        hits = np.flatnonzero(bad)
        if hits.size:
            report.append(Violation(name, float(t[hits[0]])))
    return report


@dataclass(frozen=True)
class AdmissibilityConfig:
    epsilon_adm: float = 1e-6
    foc_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.epsilon_adm > 0 or not self.foc_tolerance > 0:
            raise InvalidConfiguration("epsilon_adm and foc_tolerance must be positive")


class AdmissibilityResult(NamedTuple):
    admissible: bool
    first_violation: int | None


def check_strategy_admissible(
    strategy_values: Sequence[float],
    theta_values: Sequence[float],
    config: AdmissibilityConfig = AdmissibilityConfig(),
) -> AdmissibilityResult:
    """True iff 1 + pi*theta >= epsilon_adm at every grid point."""
    pi = np.asarray(strategy_values, dtype=float)
    theta = np.asarray(theta_values, dtype=float)
    if pi.shape != theta.shape:
        raise InvalidInput(f"strategy and theta series differ in length: {pi.shape} vs {theta.shape}")
    bad = np.flatnonzero(~(1.0 + pi * theta >= config.epsilon_adm))
    if bad.size:
        return AdmissibilityResult(False, int(bad[0]))
    return AdmissibilityResult(True, None)
