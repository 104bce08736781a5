"""Optimal log-utility strategies and path-wise wealth evolution.

The formula helpers work on coefficient values so they broadcast over whole
batches; the public functions take ``(coeffs, t)`` and evaluate the
coefficients left-continuously at t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, NamedTuple

import numpy as np

from .errors import InvalidInput, InvalidRegime, WealthRuin
from .market import MarketCoefficients
from .paths import PathBatch, SamplePath, row_total

STRATEGY_KINDS = ("merton", "pure_jump_uninformed", "pure_jump_informed",
                  "mixed_uninformed", "mixed_informed", "constant", "custom")
INFORMED_KINDS = ("pure_jump_informed", "mixed_informed")


class CoefValues(NamedTuple):
    rho: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    theta: np.ndarray
    lam: np.ndarray


def coef_values(coeffs: MarketCoefficients, t, right: bool = False) -> CoefValues:
    """Coefficients at t; ``right`` selects the value on the interval starting at t."""
    def f(g):
        # constant coefficients stay scalars and broadcast lazily
        if g.is_constant:
            return np.float64(g.values[0])
        return np.asarray(g.right(t) if right else g(t), dtype=float)

    return CoefValues(f(coeffs.rho), f(coeffs.mu), f(coeffs.sigma), f(coeffs.theta), f(coeffs.lam))


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# --- formulas on coefficient values ----------------------------------------

def merton_values(v: CoefValues):
    if np.any(v.sigma == 0):
        raise InvalidRegime("Merton strategy needs sigma != 0")
    return _scalar((v.mu - v.rho) / v.sigma**2)


def _check_pure_jump(v: CoefValues):
    if np.any(v.sigma != 0):
        raise InvalidRegime("pure-jump strategy needs sigma = 0")
    if np.any(v.theta == 0):
        raise InvalidRegime("pure-jump strategy needs theta != 0")
    excess = v.mu - v.rho
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(~(excess / v.theta < 0) & (excess != 0)):
            raise InvalidRegime("hyp4 fails: (mu - rho)/theta must be negative")
    if np.any(v.lam * v.theta - excess == 0):
        raise InvalidRegime("lambda*theta equals mu - rho")


def pure_jump_uninformed_values(v: CoefValues):
    _check_pure_jump(v)
    excess = v.mu - v.rho
    return _scalar(excess / (v.lam * v.theta**2 - v.theta * excess))


def pure_jump_informed_values(v: CoefValues, gamma):
    _check_pure_jump(v)
    excess = v.mu - v.rho
    return _scalar(excess / (v.lam * v.theta**2 - v.theta * excess) + v.lam * gamma / (v.lam * v.theta - excess))


def mixed_informed_values(v: CoefValues, alpha, gamma):
    """Admissible root of sigma^2 theta pi^2 + (sigma^2 - theta d) pi - (d + theta c) = 0.

    d = mu - rho + alpha sigma - lambda theta and c = lambda (1 + gamma). The
    root (-b + sqrt(disc)) / (2 sigma^2 theta) is the one with 1 + pi theta >= 0
    for either sign of theta; it is evaluated in the cancellation-free form.
    """
    if np.any(v.sigma == 0) or np.any(v.theta == 0):
        raise InvalidRegime("mixed strategy needs sigma != 0 and theta != 0")
    sig2 = v.sigma**2
    d = v.mu - v.rho + np.asarray(alpha, dtype=float) * v.sigma - v.lam * v.theta
    c = v.lam * (1.0 + np.asarray(gamma, dtype=float))
    a_, b_, c_ = sig2 * v.theta, sig2 - v.theta * d, -(d + v.theta * c)
    # b^2 - 4ac rewritten as a sum of squares
    root = np.sqrt((sig2 + v.theta * d) ** 2 + 4.0 * sig2 * v.theta**2 * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        naive = (root - b_) / (2.0 * a_)
        conj = 2.0 * c_ / (-b_ - root)
    return _scalar(np.where(b_ > 0, conj, naive))


def foc_residual(v: CoefValues, pi, alpha=0.0, gamma=0.0):
    """mu - rho + alpha sigma - pi sigma^2 + lambda (1+gamma) theta/(1 + pi theta) - lambda theta."""
    pi = np.asarray(pi, dtype=float)
    return _scalar(v.mu - v.rho + alpha * v.sigma - pi * v.sigma**2
                   + v.lam * (1.0 + gamma) * v.theta / (1.0 + pi * v.theta) - v.lam * v.theta)


def objective(v: CoefValues, pi, alpha=0.0, gamma=0.0):
    """Pointwise log-growth rate of the strategy pi under the (possibly informed) dynamics."""
    pi = np.asarray(pi, dtype=float)
    return _scalar(v.rho + pi * (v.mu - v.rho + alpha * v.sigma) - 0.5 * pi**2 * v.sigma**2
                   + v.lam * (1.0 + gamma) * np.log1p(pi * v.theta) - v.lam * pi * v.theta)


# --- public API --------------------------------------------------------------

def merton_strategy(coeffs: MarketCoefficients, t):
    return merton_values(coef_values(coeffs, t))


def pure_jump_uninformed(coeffs: MarketCoefficients, t):
    return pure_jump_uninformed_values(coef_values(coeffs, t))


def pure_jump_informed(coeffs: MarketCoefficients, t, gamma):
    if np.any(np.asarray(gamma) < -1):
        raise InvalidInput("gamma must be >= -1")
    return pure_jump_informed_values(coef_values(coeffs, t), gamma)


def mixed_informed(coeffs: MarketCoefficients, t, alpha, gamma):
    if np.any(np.asarray(gamma) < -1):
        raise InvalidInput("gamma must be >= -1")
    return mixed_informed_values(coef_values(coeffs, t), alpha, gamma)


def mixed_uninformed(coeffs: MarketCoefficients, t):
    return mixed_informed_values(coef_values(coeffs, t), 0.0, 0.0)


def strategy_values(kind: str, v: CoefValues, alpha=0.0, gamma=0.0, constant: float | None = None):
    """Dispatch on the strategy kind; ``alpha``/``gamma`` are used by informed kinds only."""
    if kind == "constant":
        if constant is None:
            raise InvalidInput("constant strategy needs a value")
        return np.broadcast_to(float(constant), np.shape(v.rho)).astype(float)
    if kind == "merton":
        return merton_values(v)
    if kind == "pure_jump_uninformed":
        return pure_jump_uninformed_values(v)
    if kind == "pure_jump_informed":
        return pure_jump_informed_values(v, gamma)
    if kind == "mixed_uninformed":
        return mixed_informed_values(v, 0.0, 0.0)
    if kind == "mixed_informed":
        return mixed_informed_values(v, alpha, gamma)
    raise InvalidInput(f"unknown strategy kind {kind!r}")


# --- series and wealth -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StrategySeries:
    """Strategy on a path's time points.

    ``pi`` is the caglad value at each point (what a jump there is charged
    with). ``pi_right`` is the value held on the interval starting at the
    point, after the state has absorbed any jump there; it defaults to ``pi``.
    """

    times: np.ndarray
    pi: np.ndarray
    kind: str = "custom"
    pi_right: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise InvalidInput(f"unknown strategy kind {self.kind!r}")
        if np.shape(self.pi) != np.shape(self.times):
            raise InvalidInput("strategy values and times differ in length")

    @property
    def held(self) -> np.ndarray:
        return self.pi if self.pi_right is None else self.pi_right


@dataclass(frozen=True, eq=False)
class WealthSeries:
    times: np.ndarray
    log_x: np.ndarray


def _log_increments(coeffs, times, w, is_jump, pi, held):
    """Per-interval dt and Brownian parts plus the jump contribution at each point."""
    dt = np.diff(times, axis=-1)
    dw = np.diff(w, axis=-1)
    v = coef_values(coeffs, times[..., :-1], right=True)
    h = held[..., :-1]
    cont = (v.rho + h * (v.mu - v.rho) - 0.5 * h**2 * v.sigma**2 - v.lam * h * v.theta) * dt + h * v.sigma * dw
    theta_jump = np.asarray(coeffs.theta(times), dtype=float)
    lever = np.where(is_jump, 1.0 + pi * theta_jump, 1.0)
    if np.any(lever <= 0):
        raise WealthRuin("a jump fired while 1 + pi*theta <= 0")
    return cont, np.log(lever)


def evolve_log_wealth(coeffs: MarketCoefficients, path: SamplePath, strategy: StrategySeries) -> WealthSeries:
    """ln(X_t / x0) along the path.

    Left-point quadrature of the dt part and the Ito integral; the jump term
    ln(1 + pi theta) enters exactly at each jump with the pre-jump value.
    """
    if len(strategy.times) != len(path.times) or np.any(strategy.times != path.times):
        raise InvalidInput("strategy must be tabulated on the path's time points")
    cont, jumps = _log_increments(coeffs, path.times, path.w, path.is_jump,
                                  np.asarray(strategy.pi, float), np.asarray(strategy.held, float))
    log_x = np.concatenate(([0.0], np.cumsum(cont))) + np.cumsum(jumps)
    return WealthSeries(path.times, log_x)


def terminal_log_wealth_batch(coeffs: MarketCoefficients, batch: PathBatch, pi, held) -> np.ndarray:
    """ln(X_T / x0) for every row of a batch; ``pi`` and ``held`` are (n_paths, width) arrays."""
    cont, jumps = _log_increments(coeffs, batch.times, batch.w, batch.is_jump, pi, held)
    return row_total(cont) + row_total(jumps)


STRATEGY_COLUMNS = ("time", "pi", "one_plus_pi_theta")
WEALTH_COLUMNS = ("time", "log_x")


def write_strategy_csv(coeffs: MarketCoefficients, strategy: StrategySeries, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(STRATEGY_COLUMNS)
    theta = np.asarray(coeffs.theta(strategy.times), dtype=float)
    for t, p, th in zip(strategy.times, strategy.pi, theta):
        writer.writerow([repr(float(t)), repr(float(p)), repr(float(1.0 + p * th))])


def write_wealth_csv(wealth: WealthSeries, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(WEALTH_COLUMNS)
    for t, x in zip(wealth.times, wealth.log_x):
        writer.writerow([repr(float(t)), repr(float(x))])
