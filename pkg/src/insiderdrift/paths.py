"""Seeded simulation of the Brownian motion, the Poisson process and their running maxima.

Every path lives on the union of a uniform grid and its own jump epochs.
Random numbers come from counter-based Philox streams addressed by
``(seed, stream, path index)``, so a path never depends on which batch or
worker produced it, and the jump stream is untouched by grid refinement.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import InvalidConfiguration, InvalidInput
from .market import MarketCoefficients

STREAM_JUMPS = 0
STREAM_GAUSS = 1
STREAM_BRIDGE = 2
STREAM_MAX = 3

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class GridSpec:
    n_steps: int
    horizon: float

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidConfiguration(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.horizon > 0:
            raise InvalidConfiguration(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realization on the union of the uniform grid and the jump epochs.

    ``n`` is right-continuous (includes a jump at its own epoch), ``n_pre``
    holds the left limits.
    """

    times: np.ndarray
    w: np.ndarray
    n: np.ndarray
    n_pre: np.ndarray
    ntilde: np.ndarray
    m: np.ndarray
    j: np.ndarray
    jump_times: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def is_jump(self) -> np.ndarray:
        return self.n != self.n_pre

    def __len__(self):
        return len(self.times)


def _check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= int(seed) < _SEED_LIMIT:
        raise InvalidInput(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


def rng_stream(seed: int, index: int, stream: int) -> np.random.Generator:
    """Independent generator for one (seed, path index, stream) triple."""
    return np.random.Generator(np.random.Philox(key=_check_seed(seed), counter=[0, stream, int(index), 0]))


class _Streams:
    """Re-seats a single Philox generator on (index, stream) counters.

    Produces exactly the draws of :func:`rng_stream` without constructing a
    bit generator per path.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.Philox(key=_check_seed(seed))
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state
        self._counter = np.zeros(4, dtype=np.uint64)

    def __call__(self, index: int, stream: int) -> np.random.Generator:
        self._counter[1] = stream
        self._counter[2] = index
        self._state["state"]["counter"] = self._counter
        self._bitgen.state = self._state
        return self._gen


def cumulative_intensity(coeffs: MarketCoefficients, s, t):
    """Integrated intensity over [s, t]."""
    if np.any(np.asarray(s) > np.asarray(t)):
        raise InvalidInput(f"cumulative_intensity needs s <= t, got s={s}, t={t}")
    if np.any(np.asarray(s) < 0) or np.any(np.asarray(t) > coeffs.horizon):
        raise InvalidInput(f"[{s}, {t}] is not inside [0, {coeffs.horizon}]")
    return coeffs.lam.integral(s, t)


def _jump_times(lam, total: float, rng: np.random.Generator) -> np.ndarray:
    """Jump epochs as Lambda^{-1} of unit-exponential arrival levels below Lambda(0, T)."""
    block = max(8, int(total + 4.0 * np.sqrt(total)) + 1)
    s = np.cumsum(rng.standard_exponential(block))
    while s[-1] < total:
        s = np.concatenate((s, s[-1] + np.cumsum(rng.standard_exponential(block))))
    return np.asarray(lam.inverse_antiderivative(s[s < total]), dtype=float)


class _RowSimulator:
    def __init__(self, coeffs: MarketCoefficients, grid: GridSpec, seed: int):
        if abs(grid.horizon - coeffs.horizon) > 1e-12 * coeffs.horizon:
            raise InvalidConfiguration(f"grid horizon {grid.horizon} differs from market horizon {coeffs.horizon}")
        self.lam = coeffs.lam
        self.total = float(coeffs.lam.antiderivative(coeffs.horizon))
        self.n_steps = grid.n_steps
        self.t_grid = grid.times()
        self.sqrt_dt = np.sqrt(np.diff(self.t_grid))
        self.offsets = np.arange(grid.n_steps + 1)
        self.lam_grid = coeffs.lam.antiderivative(self.t_grid)
        self.streams = _Streams(seed)

    def __call__(self, index: int):
        """Arrays of one path plus the union-grid position of each uniform grid point."""
        jumps = _jump_times(self.lam, self.total, self.streams(index, STREAM_JUMPS))
        z = self.streams(index, STREAM_GAUSS).standard_normal(self.n_steps)
        w_grid = np.empty(self.n_steps + 1)
        w_grid[0] = 0.0
        np.cumsum(self.sqrt_dt * z, out=w_grid[1:])

        if not jumps.size:
            n = np.zeros(self.n_steps + 1, dtype=np.int64)
            m = self._running_max(index, self.t_grid, w_grid)
            return (self.t_grid.copy(), w_grid, n, n.copy(), -self.lam_grid,
                    m, np.zeros(self.n_steps + 1), jumps, self.offsets)

        times = np.concatenate((self.t_grid, jumps))
        order = np.argsort(times, kind="stable")
        times = times[order]
        is_jump = order > self.n_steps
        grid_pos = self.offsets + np.searchsorted(jumps, self.t_grid, side="left")

        w = np.empty_like(times)
        w[grid_pos] = w_grid
        # Brownian bridge between the last sampled value and the next grid value
        bridge = self.streams(index, STREAM_BRIDGE).standard_normal(jumps.size)
        jump_pos = np.flatnonzero(is_jump)
        rights = grid_pos[np.searchsorted(grid_pos, jump_pos)]
        for k in range(jump_pos.size):
            pos, right = jump_pos[k], rights[k]
            t_l, t_r, t_j = times[pos - 1], times[right], times[pos]
            w_l = w[pos - 1]
            span = t_r - t_l
            frac = (t_j - t_l) / span if span > 0 else 0.0
            w[pos] = w_l + frac * (w[right] - w_l) + np.sqrt(max(frac * (t_r - t_j), 0.0)) * bridge[k]

        n = np.searchsorted(jumps, times, side="right")
        n_pre = n - is_jump
        ntilde = n - self.lam.antiderivative(times)
        m = self._running_max(index, times, w)
        j = np.maximum.accumulate(np.where(is_jump, ntilde, 0.0))
        return times, w, n, n_pre, ntilde, m, j, jumps, grid_pos

    def _running_max(self, index, times, w):
        """Running maximum of the continuous path, exact given the sampled points.

        On each interval the bridge maximum is drawn from its law
        (a + b + sqrt((b - a)^2 - 2 dt ln U)) / 2.
        """
        u = self.streams(index, STREAM_MAX).random(len(times) - 1)
        a, b = w[:-1], w[1:]
        peak = 0.5 * (a + b + np.sqrt((b - a) ** 2 - 2.0 * np.diff(times) * np.log1p(-u)))
        m = np.empty_like(w)
        m[0] = w[0]
        np.maximum.accumulate(peak, out=m[1:])
        return np.maximum(m, w[0])


def simulate_path(coeffs: MarketCoefficients, grid: GridSpec, seed: int, index: int = 0) -> SamplePath:
    """Simulate one path; identical inputs give bit-identical output."""
    times, w, n, n_pre, ntilde, m, j, jumps, _ = _RowSimulator(coeffs, grid, seed)(index)
    return SamplePath(times, w, n, n_pre, ntilde, m, j, jumps)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Rectangular stack of paths.

    Rows are padded on the right with copies of the terminal state at time T,
    so padded intervals have zero length and column -1 is always terminal.
    ``grid_cols[i, k]`` is the column of uniform grid point k in row i.
    """

    times: np.ndarray
    w: np.ndarray
    n: np.ndarray
    n_pre: np.ndarray
    ntilde: np.ndarray
    m: np.ndarray
    j: np.ndarray
    grid_cols: np.ndarray
    n_valid: np.ndarray
    grid: GridSpec
    seed: int
    start: int

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    @property
    def is_jump(self) -> np.ndarray:
        return self.n != self.n_pre

    def on_grid(self, values: np.ndarray) -> np.ndarray:
        """Restrict a (n_paths, width) array to the uniform grid columns."""
        return np.take_along_axis(values, self.grid_cols, axis=1)

    def row(self, i: int) -> SamplePath:
        k = int(self.n_valid[i])
        jumps = self.times[i, :k][self.is_jump[i, :k]]
        return SamplePath(*(a[i, :k].copy() for a in (self.times, self.w, self.n, self.n_pre,
                                                       self.ntilde, self.m, self.j)), jumps)


def row_total(x: np.ndarray) -> np.ndarray:
    """Left-to-right row sums; unlike ``sum`` the result ignores zero padding exactly."""
    return np.cumsum(x, axis=1)[:, -1]


def simulate_batch(coeffs: MarketCoefficients, grid: GridSpec, seed: int, n_paths: int, start: int = 0) -> PathBatch:
    """Paths ``start .. start + n_paths - 1`` of the stream family keyed by ``seed``."""
    simulate_row = _RowSimulator(coeffs, grid, seed)
    rows = [simulate_row(start + i) for i in range(n_paths)]
    width = max(len(r[0]) for r in rows)
    n_valid = np.array([len(r[0]) for r in rows])

    def stack(k, dtype):
        out = np.empty((n_paths, width), dtype=dtype)
        for i, r in enumerate(rows):
            a = r[k]
            out[i, : a.size] = a
            out[i, a.size:] = a[-1]
        return out

    times = stack(0, float)
    n = stack(2, np.int64)
    n_pre = stack(3, np.int64)
    # padded columns carry no jump
    pad = np.arange(width)[None, :] >= n_valid[:, None]
    n_pre[pad] = n[pad]
    return PathBatch(
        times=times, w=stack(1, float), n=n, n_pre=n_pre, ntilde=stack(4, float),
        m=stack(5, float), j=stack(6, float),
        grid_cols=np.stack([r[8] for r in rows]), n_valid=n_valid,
        grid=grid, seed=int(seed), start=int(start),
    )


def running_max_at(path: SamplePath, t: float) -> tuple[float, float]:
    """Running maxima (M_t, J_t) at the last path time not after t."""
    if not 0.0 <= t <= path.horizon:
        raise InvalidInput(f"t={t} outside [0, {path.horizon}]")
    i = int(np.searchsorted(path.times, t, side="right")) - 1
    return float(path.m[i]), float(path.j[i])


PATH_COLUMNS = ("time", "w", "n", "ntilde", "m", "j")


def write_path_csv(path: SamplePath, fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(PATH_COLUMNS)
    for row in zip(path.times, path.w, path.n, path.ntilde, path.m, path.j):
        writer.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2]),
                         repr(float(row[3])), repr(float(row[4])), repr(float(row[5]))])
