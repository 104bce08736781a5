"""Binary insider signals and their information drifts.

For a binary signal G with q_t = P(G = 1 | F_t) and Clark-Ocone integrands
(phi_w, phi_n) = (E[D_t G | F_t], E[D_{t,1} G | F_t]) the drifts are

    alpha_t = phi_w * (G - q_t) / (q_t (1 - q_t)),
    gamma_t = phi_n * (G - q_t) / (q_t (1 - q_t)).

Each signal kind supplies q_t and the integrands in closed form from the
path state (t, W_t, N_t, Ntilde_t, M_t, J_t). Everything is vectorized over
arrays of states so whole batches are evaluated at once.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import condlaw
from .condlaw import RunMaxTables
from .errors import InconsistentOutcome, InvalidConfiguration, InvalidInput, MissingTable
from .market import MarketCoefficients
from .paths import PathBatch, SamplePath, row_total

log = logging.getLogger(__name__)

SATURATION_FLOOR = 1e-300
DEGENERACY_TOL = 1e-12


class State(NamedTuple):
    """Observable state at time t; fields are broadcastable arrays."""

    t: np.ndarray
    w: np.ndarray
    n: np.ndarray
    ntilde: np.ndarray
    m: np.ndarray
    j: np.ndarray


def initial_state() -> State:
    z = np.zeros(())
    return State(z, z, np.zeros((), dtype=np.int64), z, z, z)


class InfoSpec(ABC):
    """A binary signal about the path of (W, N)."""

    pure_jump: bool = False
    needs_tables: bool = False

    @abstractmethod
    def outcome(self, w_T, n_T, m_T, j_T) -> np.ndarray:
        """Realized G from terminal values."""

    @abstractmethod
    def cond_prob(self, coeffs: MarketCoefficients, s: State, tables=None):
        """P(G = 1 | F_t)."""

    @abstractmethod
    def integrands(self, coeffs: MarketCoefficients, s: State, tables=None):
        """(E[D_t G | F_t], E[D_{t,1} G | F_t])."""

    def prob(self, coeffs: MarketCoefficients, tables=None) -> float:
        return float(self.cond_prob(coeffs, initial_state(), tables))

    def check_nondegenerate(self, coeffs: MarketCoefficients, tables=None) -> float:
        p = self.prob(coeffs, tables)
        if not DEGENERACY_TOL < p < 1.0 - DEGENERACY_TOL:
            raise InvalidConfiguration(f"{self!r} is degenerate: P(G=1) = {p!r}")
        return p

    def _tables(self, tables):
        if tables is None:
            raise MissingTable(f"{type(self).__name__} needs running-maximum tables")
        return tables


def _tau(coeffs, s: State):
    return coeffs.horizon - np.asarray(s.t, dtype=float)


@dataclass(frozen=True)
class PoissonUpper(InfoSpec):
    """G = 1{N_T <= b}."""

    b: int
    pure_jump = True

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 0:
            raise InvalidConfiguration(f"b must be a natural number, got {self.b}")

    def outcome(self, w_T, n_T, m_T, j_T):
        return (np.asarray(n_T) <= self.b).astype(np.int8)

    def cond_prob(self, coeffs, s, tables=None):
        return condlaw.poisson_cdf_cond(coeffs, s.t, s.n, self.b)

    def integrands(self, coeffs, s, tables=None):
        phi_n = -condlaw.poisson_pmf_cond(coeffs, s.t, s.n, self.b)
        return np.zeros_like(phi_n), phi_n


@dataclass(frozen=True)
class PoissonInterval(InfoSpec):
    """G = 1{b1 <= N_T <= b2}."""

    b1: int
    b2: int
    pure_jump = True

    def __post_init__(self):
        if int(self.b1) != self.b1 or int(self.b2) != self.b2 or not 0 <= self.b1 <= self.b2:
            raise InvalidConfiguration(f"need naturals b1 <= b2, got {self.b1}, {self.b2}")

    def outcome(self, w_T, n_T, m_T, j_T):
        n_T = np.asarray(n_T)
        return ((n_T >= self.b1) & (n_T <= self.b2)).astype(np.int8)

    def cond_prob(self, coeffs, s, tables=None):
        return (condlaw.poisson_cdf_cond(coeffs, s.t, s.n, self.b2)
                - condlaw.poisson_cdf_cond(coeffs, s.t, s.n, self.b1 - 1))

    def integrands(self, coeffs, s, tables=None):
        # a count of b1 - 1 < 0 is impossible and contributes 0
        phi_n = (condlaw.poisson_pmf_cond(coeffs, s.t, s.n, self.b1 - 1)
                 - condlaw.poisson_pmf_cond(coeffs, s.t, s.n, self.b2))
        return np.zeros_like(phi_n), phi_n


@dataclass(frozen=True)
class RectangleTerminal(InfoSpec):
    """G = 1{W_T <= a} 1{N_T <= b}."""

    a: float
    b: int

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 0:
            raise InvalidConfiguration(f"b must be a natural number, got {self.b}")

    def outcome(self, w_T, n_T, m_T, j_T):
        return ((np.asarray(w_T) <= self.a) & (np.asarray(n_T) <= self.b)).astype(np.int8)

    def _factors(self, coeffs, s):
        q_w = condlaw.gaussian_transition_cdf(s.t, coeffs.horizon, s.w, self.a)
        q_n = condlaw.poisson_cdf_cond(coeffs, s.t, s.n, self.b)
        return q_w, q_n

    def cond_prob(self, coeffs, s, tables=None):
        q_w, q_n = self._factors(coeffs, s)
        return q_w * q_n

    def integrands(self, coeffs, s, tables=None):
        q_w, q_n = self._factors(coeffs, s)
        # d/dw P(W_T <= a | W_t = w) = -density of W_T at a
        phi_w = -condlaw.gaussian_transition_pdf(s.t, coeffs.horizon, s.w, self.a) * q_n
        phi_n = -q_w * condlaw.poisson_pmf_cond(coeffs, s.t, s.n, self.b)
        return phi_w, phi_n


@dataclass(frozen=True)
class RectangleRunMax(InfoSpec):
    """G = 1{a1 < M_T <= a2} 1{b1 < J_T <= b2} for the running maxima of W and Ntilde."""

    a1: float
    a2: float
    b1: float
    b2: float
    needs_tables = True

    def __post_init__(self):
        if not self.a1 < self.a2 or not self.b1 < self.b2:
            raise InvalidConfiguration(f"need a1 < a2 and b1 < b2, got {self}")

    def outcome(self, w_T, n_T, m_T, j_T):
        m_T, j_T = np.asarray(m_T), np.asarray(j_T)
        return ((m_T > self.a1) & (m_T <= self.a2) & (j_T > self.b1) & (j_T <= self.b2)).astype(np.int8)

    def _brownian(self, coeffs, s):
        tau = _tau(coeffs, s)

        def below(a):
            # P(M_T <= a | F_t) = 1{M_t <= a} P(sup of a fresh BM over tau <= a - W_t)
            y = np.maximum(a - np.asarray(s.w, dtype=float), 0.0)
            return np.where(np.asarray(s.m) <= a, 1.0 - condlaw.bm_runmax_survival(tau, y), 0.0)

        def edge(a):
            return np.where(np.asarray(s.m) <= a, condlaw.bm_runmax_density(s.t, coeffs.horizon, s.w, a), 0.0)

        return below(self.a2) - below(self.a1), edge(self.a1) - edge(self.a2)

    def _poisson(self, coeffs, s, tables, shift=0.0):
        tables = self._tables(tables)
        nt = np.asarray(s.ntilde, dtype=float) + shift

        def below(b):
            return np.where(np.asarray(s.j) <= b, tables.cdf(s.t, b - nt), 0.0)

        return below(self.b2) - below(self.b1)

    def cond_prob(self, coeffs, s, tables=None):
        q_w, _ = self._brownian(coeffs, s)
        return q_w * self._poisson(coeffs, s, tables)

    def integrands(self, coeffs, s, tables=None):
        q_w, d_w = self._brownian(coeffs, s)
        q_n = self._poisson(coeffs, s, tables)
        q_n_shifted = self._poisson(coeffs, s, tables, shift=1.0)
        return d_w * q_n, q_w * (q_n_shifted - q_n)


@dataclass(frozen=True)
class NullSignal(InfoSpec):
    """A signal carrying no information: both drifts vanish identically."""

    def outcome(self, w_T, n_T, m_T, j_T):
        return np.zeros(np.shape(n_T), dtype=np.int8)

    def cond_prob(self, coeffs, s, tables=None):
        return np.full(np.broadcast(s.t, s.n).shape, 0.5)

    def integrands(self, coeffs, s, tables=None):
        z = np.zeros(np.broadcast(s.t, s.n).shape)
        return z, z


def drift_from(q, phi_w, phi_n, g, strict: bool = True):
    """(alpha, gamma) from the conditional probability, the integrands and the realized g.

    When q(1 - q) has underflowed the realized value is already determined;
    gamma is then -1 if the signs of phi_n and g - q force that limit and 0
    otherwise, and alpha is 0. With ``strict`` an outcome of conditional
    probability zero raises; otherwise it is saturated the same way.
    """
    q, phi_w, phi_n, g = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(phi_w, dtype=float),
                                             np.asarray(phi_n, dtype=float), np.asarray(g))
    g1 = g == 1
    saturated = q * (1.0 - q) < SATURATION_FLOOR
    impossible = (g1 & (q <= 0.0)) | (~g1 & (q >= 1.0))
    if strict and np.any(impossible):
        raise InconsistentOutcome("realized signal value has zero conditional probability")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        factor = np.where(g1, 1.0 / q, -1.0 / (1.0 - q))
        alpha = phi_w * factor
        # gamma >= -1 holds exactly; clip rounding below it
        gamma = np.maximum(phi_n * factor, -1.0)
    if np.any(saturated):
        limit = np.where(phi_n * (g - q) < 0, -1.0, 0.0)
        gamma = np.where(saturated, limit, gamma)
        alpha = np.where(saturated, 0.0, alpha)
    if alpha.ndim == 0:
        return float(alpha), float(gamma)
    return alpha, gamma


# --- single-path interface -------------------------------------------------

def _check_time(coeffs, t):
    if not 0.0 <= t < coeffs.horizon:
        raise InvalidInput(f"t={t} must lie in [0, {coeffs.horizon})")


def _locate(path: SamplePath, t: float) -> tuple[int, bool]:
    """Index of the last path time <= t and whether t is that path time."""
    tol = 1e-12 * max(path.horizon, 1.0)
    i = int(np.searchsorted(path.times, t + tol, side="right")) - 1
    return i, abs(path.times[i] - t) <= tol


def state_at(coeffs: MarketCoefficients, path: SamplePath, t: float, predictable: bool = False) -> State:
    """State observed at t (after any jump at t), or just before t when ``predictable``.

    Between path times the state of the last earlier path time is used.
    """
    i, exact = _locate(path, t)
    n = int(path.n_pre[i]) if (predictable and exact) else int(path.n[i])
    j = path.j[i]
    if predictable and exact and path.n_pre[i] != path.n[i]:
        j = path.j[i - 1]
    ntilde = n - coeffs.lam.antiderivative(t)
    return State(np.float64(t), np.float64(path.w[i]), np.int64(n), np.float64(ntilde),
                 np.float64(path.m[i]), np.float64(j))


def realized_outcome(spec: InfoSpec, path: SamplePath) -> int:
    return int(spec.outcome(path.w[-1], path.n[-1], path.m[-1], path.j[-1]))


def cond_prob_G(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, t: float, tables=None) -> float:
    _check_time(coeffs, t)
    return float(spec.cond_prob(coeffs, state_at(coeffs, path, t), tables))


def density_process(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, t: float, g: int,
                    tables=None) -> float:
    """p_t^g = P(G = g | F_t) / P(G = g)."""
    _check_time(coeffs, t)
    p1 = spec.check_nondegenerate(coeffs, tables)
    q = float(spec.cond_prob(coeffs, state_at(coeffs, path, t), tables))
    return q / p1 if g == 1 else (1.0 - q) / (1.0 - p1)


def clark_ocone_integrands(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, t: float,
                           tables=None) -> tuple[float, float]:
    _check_time(coeffs, t)
    phi_w, phi_n = spec.integrands(coeffs, state_at(coeffs, path, t, predictable=True), tables)
    return float(phi_w), float(phi_n)


def drift_mixed(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, t: float, g: int,
                tables=None) -> tuple[float, float]:
    """(alpha_t^G, gamma_t^G) on the event {G = g}."""
    _check_time(coeffs, t)
    s = state_at(coeffs, path, t, predictable=True)
    q = spec.cond_prob(coeffs, s, tables)
    phi_w, phi_n = spec.integrands(coeffs, s, tables)
    return drift_from(q, phi_w, phi_n, g)


def gamma_pure(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, t: float, g: int) -> float:
    """gamma_t^g for a signal on the jump counts only: phi_n / (g - P(G = 0 | F_t))."""
    if not spec.pure_jump:
        raise InvalidInput(f"{type(spec).__name__} is not a pure-jump signal")
    _check_time(coeffs, t)
    s = state_at(coeffs, path, t, predictable=True)
    q = float(spec.cond_prob(coeffs, s, None))
    _, phi_n = spec.integrands(coeffs, s, None)
    phi_n = float(phi_n)
    denom = g - (1.0 - q)
    if denom == 0.0:
        raise InconsistentOutcome(f"G={g} has zero conditional probability at t={t}")
    if q * (1.0 - q) < SATURATION_FLOOR:
        return -1.0 if phi_n * denom < 0 else 0.0
    return phi_n / denom


@dataclass(frozen=True, eq=False)
class DriftSeries:
    """Density process and drifts along one path.

    ``p`` is observed at each time (after a jump there); ``alpha`` and
    ``gamma`` are the predictable values in force at that time.
    """

    times: np.ndarray
    g_realized: int
    p: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray


def drift_series(spec: InfoSpec, coeffs: MarketCoefficients, path: SamplePath, times=None,
                 tables=None) -> DriftSeries:
    if times is None:
        times = path.times[path.times < coeffs.horizon]
    times = np.asarray(times, dtype=float)
    g = realized_outcome(spec, path)
    p1 = spec.check_nondegenerate(coeffs, tables)
    obs = [state_at(coeffs, path, t) for t in times]
    pred = [state_at(coeffs, path, t, predictable=True) for t in times]
    stack = lambda states: State(*(np.array(v) for v in zip(*states)))  # noqa: E731
    q_obs = spec.cond_prob(coeffs, stack(obs), tables)
    p = q_obs / p1 if g == 1 else (1.0 - q_obs) / (1.0 - p1)
    sp = stack(pred)
    alpha, gamma = drift_from(spec.cond_prob(coeffs, sp, tables), *spec.integrands(coeffs, sp, tables), g)
    return DriftSeries(times, g, np.asarray(p), np.atleast_1d(alpha), np.atleast_1d(gamma))


# --- batch interface -------------------------------------------------------

def batch_state(coeffs: MarketCoefficients, batch: PathBatch, predictable: bool) -> State:
    """States at every column of the batch; inactive columns (t >= T) are mapped to t = 0."""
    t = np.where(batch.times < coeffs.horizon, batch.times, 0.0)
    if predictable:
        jump = batch.is_jump
        j_prev = np.concatenate((batch.j[:, :1], batch.j[:, :-1]), axis=1)
        n = batch.n_pre
        j = np.where(jump, j_prev, batch.j)
    else:
        n, j = batch.n, batch.j
    ntilde = n - coeffs.lam.antiderivative(t)
    return State(t, batch.w, n, ntilde, batch.m, j)


def batch_outcome(spec: InfoSpec, batch: PathBatch) -> np.ndarray:
    return spec.outcome(batch.w[:, -1], batch.n[:, -1], batch.m[:, -1], batch.j[:, -1])


def batch_drift(spec: InfoSpec, coeffs: MarketCoefficients, state: State, g, active, tables=None,
                strict: bool = False):
    """(alpha, gamma) on an array of states; zero where ``active`` is False."""
    q = spec.cond_prob(coeffs, state, tables)
    phi_w, phi_n = spec.integrands(coeffs, state, tables)
    g = np.broadcast_to(np.asarray(g).reshape(np.shape(g) + (1,) * (np.ndim(q) - np.ndim(g))), np.shape(q))
    if not strict:
        impossible = active & (((g == 1) & (q <= 0.0)) | ((g != 1) & (q >= 1.0)))
        if np.any(impossible):
            log.warning("%d states give the realized signal zero probability; saturating", int(impossible.sum()))
    alpha, gamma = drift_from(q, phi_w, phi_n, g, strict=False)
    return np.where(active, alpha, 0.0), np.where(active, gamma, 0.0)


def grid_state(coeffs: MarketCoefficients, batch: PathBatch) -> tuple[State, np.ndarray]:
    """States observed at the uniform grid times before T, and the step lengths."""
    cols = batch.grid_cols[:, :-1]
    t = batch.grid.times()
    n = np.take_along_axis(batch.n, cols, axis=1)
    s = State(np.broadcast_to(t[:-1], n.shape), np.take_along_axis(batch.w, cols, axis=1), n,
              n - coeffs.lam.antiderivative(t[:-1]), np.take_along_axis(batch.m, cols, axis=1),
              np.take_along_axis(batch.j, cols, axis=1))
    return s, np.diff(t)


def clark_ocone_residuals(spec: InfoSpec, coeffs: MarketCoefficients, batch: PathBatch, tables=None) -> np.ndarray:
    """G - P(G=1) minus the Ito left-point sums of the Clark-Ocone integrands on the uniform grid.

    Each integrand is observed at the left end t_i of a step and multiplies the
    increments of W and of the compensated count over the step, so every term
    has mean zero and only the variance carries discretization error.
    """
    s, _ = grid_state(coeffs, batch)
    phi_w, phi_n = spec.integrands(coeffs, s, tables)
    t = batch.grid.times()
    w = batch.on_grid(batch.w)
    ntilde = batch.on_grid(batch.n) - coeffs.lam.antiderivative(t)
    integral = row_total(phi_w * np.diff(w, axis=1)) + row_total(phi_n * np.diff(ntilde, axis=1))
    return batch_outcome(spec, batch) - spec.prob(coeffs, tables) - integral
