"""Monte Carlo value of information.

Paths are simulated in fixed-size chunks addressed by path index, so every
estimator sees the same paths (common random numbers) and the results do not
depend on chunking or on the number of worker processes.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from . import infodrift as idr
from .condlaw import RunMaxTables
from .errors import InvalidConfiguration, InvalidInput, InvalidRegime
from .infodrift import InfoSpec
from .market import MarketCoefficients
from .paths import GridSpec, PathBatch, SamplePath, row_total, simulate_batch
from .strategy import (INFORMED_KINDS, StrategySeries, coef_values, strategy_values,
                       terminal_log_wealth_batch)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    master_seed: int
    grid: GridSpec
    confidence_multiplier: float = 4.0
    chunk_size: int = 2048
    workers: int = 1
    table_samples: int = 200_000
    table_cache: str | None = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 100:
            raise InvalidConfiguration(f"n_paths must be an integer >= 100, got {self.n_paths}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise InvalidConfiguration(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if not self.confidence_multiplier > 0:
            raise InvalidConfiguration("confidence_multiplier must be positive")
        if self.chunk_size < 1 or self.workers < 1:
            raise InvalidConfiguration("chunk_size and workers must be positive")


class Estimate(NamedTuple):
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            raise InvalidInput("an estimate needs at least two samples")
        return cls(float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size)), int(x.size))

    def within(self, target: float, k: float) -> bool:
        return abs(self.mean - target) <= k * self.stderr


# --- regimes -----------------------------------------------------------------

def market_regime(coeffs: MarketCoefficients) -> str:
    """'pure_jump' when sigma vanishes everywhere, 'mixed' when it never does."""
    sig = coeffs.sigma.values
    if all(s == 0 for s in sig):
        return "pure_jump"
    if all(s != 0 for s in sig):
        return "mixed"
    raise InvalidConfiguration("sigma vanishes on part of the horizon only; no strategy family covers that market")


def optimal_kinds(coeffs: MarketCoefficients) -> tuple[str, str]:
    """(uninformed, informed) optimal strategy kinds for the market."""
    if market_regime(coeffs) == "pure_jump":
        return "pure_jump_uninformed", "pure_jump_informed"
    return "mixed_uninformed", "mixed_informed"


def _pieces(coeffs: MarketCoefficients):
    edges = np.concatenate(([0.0], coeffs.breakpoints(), [coeffs.horizon]))
    for a, b in zip(edges[:-1], edges[1:]):
        yield a, b, coef_values(coeffs, a, right=True)


def v_f_closed_pure_jump(coeffs: MarketCoefficients) -> float:
    """Optimal uninformed expected log-wealth in the pure-jump market, integrated piece by piece."""
    total = 0.0
    for a, b, v in _pieces(coeffs):
        if v.sigma != 0 or v.theta == 0:
            raise InvalidRegime("closed form needs sigma = 0 and theta != 0")
        r = (v.mu - v.rho) / v.theta
        if r > 0 or (r == 0 and v.mu != v.rho):
            raise InvalidRegime(f"hyp4 fails on [{a}, {b}]")
        rate = v.rho - r + v.lam * np.log(v.lam / (v.lam - r))
        total += float(rate) * (b - a)
    return total


# --- chunk evaluation --------------------------------------------------------

def make_tables(coeffs: MarketCoefficients, spec: InfoSpec | None, mc: MCConfig) -> RunMaxTables | None:
    """Running-maximum tables for the grid, shared by all chunks evaluated in this process."""
    if spec is None or not spec.needs_tables:
        return None
    cache = mc.table_cache or os.environ.get("INSIDERDRIFT_TABLE_CACHE")
    return _tables(coeffs, mc.grid, mc.table_samples, (mc.master_seed + 1) % 2**64, cache)


@functools.lru_cache(maxsize=8)
def _tables(coeffs, grid, n_samples, seed, cache):
    return RunMaxTables(coeffs, grid.times(), n_samples=n_samples, seed=seed, cache_dir=cache)


class _Drifts(NamedTuple):
    alpha_pre: np.ndarray
    gamma_pre: np.ndarray
    alpha_post: np.ndarray
    gamma_post: np.ndarray


def _batch_drifts(coeffs, spec, batch, tables) -> _Drifts:
    active = batch.times < coeffs.horizon
    g = idr.batch_outcome(spec, batch)[:, None]
    pre = idr.batch_drift(spec, coeffs, idr.batch_state(coeffs, batch, True), g, active, tables)
    post = idr.batch_drift(spec, coeffs, idr.batch_state(coeffs, batch, False), g, active, tables)
    return _Drifts(*pre, *post)


def batch_strategy(coeffs, batch: PathBatch, kind: str, drifts: _Drifts | None = None,
                   constant: float | None = None):
    """(pi, held) arrays for a batch: caglad values and values held on the following interval."""
    active = batch.times < coeffs.horizon
    if kind in INFORMED_KINDS:
        if drifts is None:
            raise InvalidInput(f"{kind} needs information drifts")
        a0, g0, a1, g1 = drifts
    else:
        a0 = g0 = a1 = g1 = 0.0
    pi = strategy_values(kind, coef_values(coeffs, batch.times), a0, g0, constant)
    held = strategy_values(kind, coef_values(coeffs, batch.times, right=True), a1, g1, constant)
    return np.where(active, pi, 0.0), np.where(active, held, 0.0)


def _delta_v_integrands(coeffs, spec, batch, tables):
    """Per-path left-point integrals of both forms of the value-of-information integrand."""
    s, dt = idr.grid_state(coeffs, batch)
    g = idr.batch_outcome(spec, batch)[:, None]
    active = np.ones(s.n.shape, dtype=bool)
    _, gamma = idr.batch_drift(spec, coeffs, s, g, active, tables)
    lam = np.asarray(coeffs.lam.right(batch.grid.times()[:-1]), dtype=float)
    c = lam * (1.0 + gamma)
    h = special.xlogy(c, c) - special.xlogy(lam, lam)
    h_alt = lam * gamma + lam * special.xlogy(1.0 + gamma, 1.0 + gamma)
    return row_total(h * dt), row_total(h_alt * dt)


@dataclass(frozen=True)
class _Task:
    name: str
    kind: str = ""
    constant: float | None = None


def _run_chunk(coeffs: MarketCoefficients, spec: InfoSpec | None, mc: MCConfig, tasks: tuple[_Task, ...],
               start: int, count: int) -> dict[str, np.ndarray]:
    batch = simulate_batch(coeffs, mc.grid, mc.master_seed, count, start=start)
    tables = make_tables(coeffs, spec, mc)
    drifts = None
    out = {}
    for task in tasks:
        if task.name == "delta_v":
            out["delta_v"], out["delta_v_alt"] = _delta_v_integrands(coeffs, spec, batch, tables)
            continue
        if task.kind in INFORMED_KINDS and drifts is None:
            drifts = _batch_drifts(coeffs, spec, batch, tables)
        pi, held = batch_strategy(coeffs, batch, task.kind, drifts, task.constant)
        out[task.name] = terminal_log_wealth_batch(coeffs, batch, pi, held)
    return out


def _run(coeffs, spec, mc: MCConfig, tasks: tuple[_Task, ...]) -> dict[str, np.ndarray]:
    """Evaluate all tasks on the same paths; per-path results in path-index order."""
    starts = list(range(0, mc.n_paths, mc.chunk_size))
    counts = [min(mc.chunk_size, mc.n_paths - s) for s in starts]
    args = [(coeffs, spec, mc, tasks, s, c) for s, c in zip(starts, counts)]
    if mc.workers > 1 and len(args) > 1:
        tables = make_tables(coeffs, spec, mc)
        if tables is not None and tables.cache_dir is not None:
            tables.prebuild()
        with ProcessPoolExecutor(max_workers=mc.workers) as pool:
            parts = list(pool.map(_run_chunk_star, args))
    else:
        parts = [_run_chunk(*a) for a in args]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _run_chunk_star(a):
    return _run_chunk(*a)


def _check_spec(coeffs, spec, kind, mc):
    if kind in INFORMED_KINDS:
        if spec is None:
            raise InvalidInput(f"{kind} needs an information spec")
        spec.check_nondegenerate(coeffs, make_tables(coeffs, spec, mc))


# --- public estimators ---------------------------------------------------------

def mc_log_wealth_samples(coeffs: MarketCoefficients, spec: InfoSpec | None, strategy_kind: str, mc: MCConfig,
                          constant: float | None = None) -> np.ndarray:
    _check_spec(coeffs, spec, strategy_kind, mc)
    return _run(coeffs, spec, mc, (_Task("x", strategy_kind, constant),))["x"]


def mc_expected_log_wealth(coeffs: MarketCoefficients, spec: InfoSpec | None, strategy_kind: str, mc: MCConfig,
                           constant: float | None = None) -> Estimate:
    """Sample mean and standard error of ln(X_T / x0) under the given strategy."""
    return Estimate.from_samples(mc_log_wealth_samples(coeffs, spec, strategy_kind, mc, constant))


def _require_pure_jump(coeffs):
    if market_regime(coeffs) != "pure_jump":
        raise InvalidRegime("the value-of-information integral needs sigma = 0")


def delta_v_theoretical(coeffs: MarketCoefficients, spec: InfoSpec, mc: MCConfig) -> Estimate:
    """E of the integral of lambda(1+gamma)ln(lambda(1+gamma)) - lambda ln lambda, per path then averaged."""
    _require_pure_jump(coeffs)
    _check_spec(coeffs, spec, "pure_jump_informed", mc)
    return Estimate.from_samples(_run(coeffs, spec, mc, (_Task("delta_v"),))["delta_v"])


def delta_v_alternative(coeffs: MarketCoefficients, spec: InfoSpec, mc: MCConfig) -> Estimate:
    """Same value from the integrand lambda gamma + lambda(1+gamma)ln(1+gamma)."""
    _require_pure_jump(coeffs)
    _check_spec(coeffs, spec, "pure_jump_informed", mc)
    return Estimate.from_samples(_run(coeffs, spec, mc, (_Task("delta_v"),))["delta_v_alt"])


def h_gain(x, y):
    """-xy + x(1+y)ln(1+y), the pointwise value-of-information integrand; nonnegative for x > 0, y >= -1."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return -x * y + x * special.xlogy(1.0 + y, 1.0 + y)


@dataclass(frozen=True)
class ValueReport:
    regime: str
    signal: str
    uninformed_kind: str
    informed_kind: str
    v_f_closed: float | None
    v_f_mc: Estimate
    v_g_mc: Estimate
    delta_v_theoretical: Estimate | None
    delta_v_alternative: Estimate | None
    delta_v_empirical: Estimate
    confidence_multiplier: float
    comparison_pass: bool | None
    nonnegative: bool
    n_paths: int
    master_seed: int
    n_steps: int
    notes: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return self.comparison_pass is not False and self.nonnegative

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            est = getattr(self, k)
            if isinstance(est, Estimate):
                v = est._asdict()
            elif k in ("delta_v_theoretical", "delta_v_alternative") and v is None:
                v = "not-applicable"
            elif k == "notes":
                v = list(v)
            out[k] = v
        out["passed"] = self.passed
        return out

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    CSV_FIELDS = ("signal", "regime", "n_paths", "master_seed", "n_steps", "v_f_closed",
                  "v_f_mc_mean", "v_f_mc_stderr", "v_g_mc_mean", "v_g_mc_stderr",
                  "delta_v_empirical_mean", "delta_v_empirical_stderr",
                  "delta_v_theoretical_mean", "delta_v_theoretical_stderr", "comparison_pass", "passed")

    def csv_row(self) -> dict:
        def est(e, part):
            return "" if e is None else repr(getattr(e, part))
        return {
            "signal": self.signal, "regime": self.regime, "n_paths": self.n_paths,
            "master_seed": self.master_seed, "n_steps": self.n_steps,
            "v_f_closed": "" if self.v_f_closed is None else repr(self.v_f_closed),
            "v_f_mc_mean": est(self.v_f_mc, "mean"), "v_f_mc_stderr": est(self.v_f_mc, "stderr"),
            "v_g_mc_mean": est(self.v_g_mc, "mean"), "v_g_mc_stderr": est(self.v_g_mc, "stderr"),
            "delta_v_empirical_mean": est(self.delta_v_empirical, "mean"),
            "delta_v_empirical_stderr": est(self.delta_v_empirical, "stderr"),
            "delta_v_theoretical_mean": est(self.delta_v_theoretical, "mean"),
            "delta_v_theoretical_stderr": est(self.delta_v_theoretical, "stderr"),
            "comparison_pass": "" if self.comparison_pass is None else str(self.comparison_pass).lower(),
            "passed": str(self.passed).lower(),
        }

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerow(self.csv_row())
        return buf.getvalue()


def value_report(coeffs: MarketCoefficients, spec: InfoSpec, mc: MCConfig) -> ValueReport:
    """Uninformed and informed optimal values on common random numbers, and the theoretical gain."""
    regime = market_regime(coeffs)
    kind_f, kind_g = optimal_kinds(coeffs)
    _check_spec(coeffs, spec, kind_g, mc)
    tasks = [_Task("v_f", kind_f), _Task("v_g", kind_g)]
    notes = []
    if regime == "pure_jump":
        tasks.append(_Task("delta_v"))
        v_f_closed = v_f_closed_pure_jump(coeffs)
    else:
        v_f_closed = None
        notes.append("mixed market: no closed-form gain, theoretical slot not applicable")
    res = _run(coeffs, spec, mc, tuple(tasks))
    k = mc.confidence_multiplier
    emp = Estimate.from_samples(res["v_g"] - res["v_f"])
    theo = alt = None
    comparison = None
    if "delta_v" in res:
        theo = Estimate.from_samples(res["delta_v"])
        alt = Estimate.from_samples(res["delta_v_alt"])
        comparison = abs(emp.mean - theo.mean) <= k * np.hypot(emp.stderr, theo.stderr)
    nonneg = emp.mean >= -k * emp.stderr and (theo is None or theo.mean >= -k * theo.stderr)
    return ValueReport(
        regime=regime, signal=repr(spec), uninformed_kind=kind_f, informed_kind=kind_g,
        v_f_closed=v_f_closed, v_f_mc=Estimate.from_samples(res["v_f"]), v_g_mc=Estimate.from_samples(res["v_g"]),
        delta_v_theoretical=theo, delta_v_alternative=alt, delta_v_empirical=emp,
        confidence_multiplier=k, comparison_pass=None if comparison is None else bool(comparison),
        nonnegative=bool(nonneg), n_paths=mc.n_paths, master_seed=mc.master_seed, n_steps=mc.grid.n_steps,
        notes=tuple(notes),
    )


# --- single-path helpers -------------------------------------------------------

def path_strategy(coeffs: MarketCoefficients, path: SamplePath, kind: str, spec: InfoSpec | None = None,
                  tables=None, constant: float | None = None) -> StrategySeries:
    """The strategy of the given kind on one path's time points."""
    batch = PathBatch(
        times=path.times[None], w=path.w[None], n=path.n[None], n_pre=path.n_pre[None],
        ntilde=path.ntilde[None], m=path.m[None], j=path.j[None], grid_cols=np.zeros((1, 1), dtype=np.int64),
        n_valid=np.array([len(path.times)]), grid=GridSpec(1, path.horizon), seed=0, start=0,
    )
    drifts = _batch_drifts(coeffs, spec, batch, tables) if kind in INFORMED_KINDS else None
    pi, held = batch_strategy(coeffs, batch, kind, drifts, constant)
    return StrategySeries(path.times, pi[0], kind, held[0])
