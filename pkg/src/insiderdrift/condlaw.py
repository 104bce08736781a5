"""Conditional laws behind the information drifts.

Poisson transition probabilities, Gaussian transition density and
distribution, the law of the Brownian running maximum, and an empirical
table for the running supremum of the compensated Poisson process.
All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import csv
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .errors import InvalidInput, MissingTable, UnsupportedConfiguration
from .market import MarketCoefficients

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

# below this many remaining jumps the pmf is evaluated directly
_DIRECT_PMF_MAX = 20
_FACTORIALS = special.factorial(np.arange(_DIRECT_PMF_MAX + 1), exact=False)


def norm_cdf(x):
    """Standard normal distribution function via erfc (accurate in both tails)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / _SQRT2)


def _remaining_intensity(coeffs: MarketCoefficients, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > coeffs.horizon):
        raise InvalidInput(f"t must lie in [0, {coeffs.horizon}]")
    return coeffs.lam.integral(t, coeffs.horizon)


def poisson_pmf(k, mean):
    """P(Poisson(mean) = k), zero for k < 0."""
    k = np.asarray(k)
    mean = np.asarray(mean, dtype=float)
    kk = np.maximum(k, 0)
    small = kk <= _DIRECT_PMF_MAX
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp(-mean) * mean ** kk / _FACTORIALS[np.minimum(kk, _DIRECT_PMF_MAX)]
        if not np.all(small):
            logged = np.exp(special.xlogy(kk, mean) - mean - special.gammaln(kk + 1.0))
            out = np.where(small, out, logged)
    out = np.where(k < 0, 0.0, out)
    return out if out.ndim else float(out)


def poisson_cdf(k, mean):
    """P(Poisson(mean) <= k), zero for k < 0."""
    k = np.asarray(k)
    out = np.where(k < 0, 0.0, special.pdtr(np.maximum(k, 0), np.asarray(mean, dtype=float)))
    return out if out.ndim else float(out)


def poisson_pmf_cond(coeffs: MarketCoefficients, t, n_t, b):
    """P(N_T = b | N_t = n_t)."""
    return poisson_pmf(np.asarray(b) - np.asarray(n_t), _remaining_intensity(coeffs, t))


def poisson_cdf_cond(coeffs: MarketCoefficients, t, n_t, b):
    """P(N_T <= b | N_t = n_t)."""
    return poisson_cdf(np.asarray(b) - np.asarray(n_t), _remaining_intensity(coeffs, t))


def _time_left(t, T):
    tau = np.asarray(T, dtype=float) - np.asarray(t, dtype=float)
    if np.any(tau <= 0):
        raise InvalidInput("conditional Gaussian laws need t < T")
    return tau


def gaussian_transition_pdf(t, T, w_t, x):
    """Density of W_T at x given W_t = w_t."""
    tau = _time_left(t, T)
    z = (np.asarray(x, dtype=float) - w_t) / np.sqrt(tau)
    return np.exp(-0.5 * z * z) / (_SQRT2PI * np.sqrt(tau))


def gaussian_transition_cdf(t, T, w_t, a):
    """P(W_T <= a | W_t = w_t)."""
    tau = _time_left(t, T)
    return norm_cdf((np.asarray(a, dtype=float) - w_t) / np.sqrt(tau))


def bm_runmax_density(t, T, w_t, m):
    """Density of max_{t<=u<=T} W_u given W_t = w_t: twice the Gaussian transition density on m >= w_t."""
    tau = _time_left(t, T)
    m = np.asarray(m, dtype=float)
    z = (m - w_t) / np.sqrt(tau)
    return np.where(m >= w_t, 2.0 * np.exp(-0.5 * z * z) / (_SQRT2PI * np.sqrt(tau)), 0.0)


def bm_runmax_survival(t_len, y):
    """P(max_{0<=u<=t_len} W_u > y) by the reflection principle."""
    t_len = np.asarray(t_len, dtype=float)
    if np.any(t_len <= 0):
        raise InvalidInput("bm_runmax_survival needs a positive window length")
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = special.erfc(y / np.sqrt(2.0 * t_len))
    out = np.where(y <= 0, 1.0, tail)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class RunMaxTable:
    """Sorted i.i.d. samples of J_tau = sup_{u <= tau} Ntilde_u for a constant intensity."""

    tau: float
    lambda_const: float
    sorted_samples: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.sorted_samples.size)

    def cdf(self, x):
        return cpois_runmax_cdf(self, x)

    def save(self, path) -> None:
        """CSV: a header row ``tau,lambda,n_samples``, its values, then one sample per line."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tau", "lambda", "n_samples"])
            writer.writerow([repr(self.tau), repr(self.lambda_const), self.n_samples])
            writer.writerows([repr(float(v))] for v in self.sorted_samples)

    @classmethod
    def load(cls, path) -> "RunMaxTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            tau, lam, n = next(reader)
            samples = np.array([float(r[0]) for r in reader])
        if samples.size != int(n):
            raise ValueError(f"{path}: header says {n} samples, found {samples.size}")
        return cls(float(tau), float(lam), samples)


MIN_TABLE_SAMPLES = 10_000


def sample_cpois_runmax(lam: float, tau: float, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact samples of the running supremum of N_u - lam*u over [0, tau].

    The supremum is attained at 0 or just after a jump, so only the jump
    epochs matter. Given the jump count, the epochs are sorted uniforms.
    """
    counts = rng.poisson(lam * tau, size=n_samples)
    out = np.zeros(n_samples)
    for k in np.unique(counts):
        if k == 0:
            continue
        rows = np.flatnonzero(counts == k)
        epochs = np.sort(rng.uniform(0.0, tau, size=(rows.size, k)), axis=1)
        heights = np.arange(1, k + 1) - lam * epochs
        out[rows] = np.maximum(heights.max(axis=1), 0.0)
    return out


def build_runmax_table(coeffs: MarketCoefficients, tau: float, n_samples: int, seed: int) -> RunMaxTable:
    """Empirical table for the window of length ``tau`` ending at the horizon."""
    if n_samples < MIN_TABLE_SAMPLES:
        raise InvalidInput(f"a running-maximum table needs at least {MIN_TABLE_SAMPLES} samples")
    if not 0 < tau <= coeffs.horizon:
        raise InvalidInput(f"tau must lie in (0, {coeffs.horizon}]")
    start = coeffs.horizon - tau
    if not coeffs.lam.is_constant_on(start, coeffs.horizon):
        raise UnsupportedConfiguration(f"intensity is not constant on [{start}, {coeffs.horizon}]")
    lam = float(coeffs.lam.right(start)) if start < coeffs.horizon else float(coeffs.lam(start))
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    samples = np.sort(sample_cpois_runmax(lam, float(tau), int(n_samples), rng))
    return RunMaxTable(float(tau), lam, samples)


def cpois_runmax_cdf(table: RunMaxTable, x):
    """Right-continuous empirical CDF of the table at x."""
    x = np.asarray(x, dtype=float)
    out = np.searchsorted(table.sorted_samples, x, side="right") / table.n_samples
    out = np.where(x < 0, 0.0, out)
    return out if out.ndim else float(out)


class RunMaxTables:
    """Tables keyed by the grid time t, each for the window [t, T].

    Lookups at an off-grid time use the table of the closest grid time at or
    before it. Reads are lock-free; insertion is serialized.
    """

    def __init__(self, coeffs: MarketCoefficients, grid_times, n_samples: int = 200_000,
                 seed: int = 0, cache_dir: str | os.PathLike | None = None, auto_build: bool = True):
        self.coeffs = coeffs
        self.grid_times = np.asarray(grid_times, dtype=float)
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.auto_build = auto_build
        self._tables: dict[int, RunMaxTable] = {}
        self._lock = threading.Lock()
        self.built = 0

    def _index(self, t: float) -> int:
        i = int(np.searchsorted(self.grid_times, t, side="right")) - 1
        return min(max(i, 0), len(self.grid_times) - 1)

    def _cache_file(self, tau: float, lam: float) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"runmax_lam{lam!r}_tau{tau!r}_n{self.n_samples}_s{self.seed}.csv"

    def table_for(self, t: float) -> RunMaxTable:
        i = self._index(t)
        table = self._tables.get(i)
        if table is not None:
            return table
        with self._lock:
            table = self._tables.get(i)
            if table is None:
                table = self._load_or_build(i)
                self._tables[i] = table
        return table

    def _load_or_build(self, i: int) -> RunMaxTable:
        t = float(self.grid_times[i])
        tau = self.coeffs.horizon - t
        if tau <= 0:
            raise MissingTable("no running-maximum table at the horizon itself")
        lam = float(self.coeffs.lam.right(t))
        path = self._cache_file(tau, lam)
        if path is not None and path.exists():
            return RunMaxTable.load(path)
        if not self.auto_build:
            raise MissingTable(f"no running-maximum table for tau={tau}")
        table = build_runmax_table(self.coeffs, tau, self.n_samples, seed=(self.seed + 7919 * i) % 2**64)
        self.built += 1
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            table.save(path)
        return table

    def prebuild(self) -> None:
        for t in self.grid_times[:-1] if self.grid_times[-1] >= self.coeffs.horizon else self.grid_times:
            self.table_for(float(t))

    def cdf(self, t, x):
        """F^N_{T-t}(x) evaluated elementwise; t and x broadcast together."""
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        out = np.empty(t.shape)
        idx = np.searchsorted(self.grid_times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.grid_times) - 1)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = cpois_runmax_cdf(self.table_for(float(self.grid_times[i])), x[sel])
        return out
