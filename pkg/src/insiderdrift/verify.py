"""Property suite behind the ``verify`` subcommand.

Each check returns a :class:`PropertyResult` carrying the measured statistic,
so a failing run shows how far off it was. ``force_fail`` flips the sign
of every nonzero tolerance, so all tolerance-based checks must fail; it
exists to prove the harness can report failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import condlaw, infodrift as idr
from .condlaw import RunMaxTables
from .infodrift import InfoSpec, State
from .market import MarketCoefficients
from .paths import GridSpec, simulate_batch
from .strategy import (CoefValues, foc_residual, merton_values, mixed_informed_values, objective,
                       pure_jump_informed_values, pure_jump_uninformed_values)
from .valueinfo import Estimate, MCConfig, h_gain


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    statistic: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.statistic}"


class _Tol:
    """Tolerances, scaled by -1 to force failures."""

    def __init__(self, force_fail: bool):
        self.sign = -1.0 if force_fail else 1.0

    def __call__(self, value: float) -> float:
        return self.sign * value


# --- strategies ------------------------------------------------------------------

def _draw_pure_jump(rng, n):
    theta = rng.choice([-1.0, 1.0], n) * rng.uniform(0.05, 0.9, n)
    excess = -np.sign(theta) * rng.uniform(0.0, 0.5, n)
    rho = rng.uniform(0.0, 0.05, n)
    return CoefValues(rho, rho + excess, np.zeros(n), theta, rng.uniform(0.1, 5.0, n))


def _draw_mixed(rng, n):
    theta = rng.choice([-1.0, 1.0], n) * rng.uniform(0.05, 3.0, n)
    theta = np.maximum(theta, -0.9)
    rho = rng.uniform(0.0, 0.05, n)
    return CoefValues(rho, rho + rng.uniform(-0.3, 0.3, n), rng.uniform(0.05, 1.0, n), theta,
                      rng.uniform(0.1, 5.0, n))


def unit_jump_closed_form(v: CoefValues):
    """Uninformed mixed optimum for theta = 1 in its own closed form."""
    e, s2 = v.mu - v.rho, v.sigma**2
    k = e - s2 - v.lam
    return (k + np.sqrt(k * k + 4.0 * s2 * e)) / (2.0 * s2)


def strategy_properties(n_draws: int = 1000, seed: int = 0, force_fail: bool = False) -> list[PropertyResult]:
    tol = _Tol(force_fail)
    rng = np.random.default_rng(seed)
    out = []

    v = _draw_mixed(rng, n_draws)
    alpha, gamma = rng.normal(0.0, 1.0, n_draws), rng.uniform(-0.99, 5.0, n_draws)
    pi = mixed_informed_values(v, alpha, gamma)
    res = np.max(np.abs(foc_residual(v, pi, alpha, gamma)))
    out.append(PropertyResult("mixed FOC residual", res <= tol(1e-10), f"max |FOC| = {res:.3e}"))

    # the other root of the quadratic
    d = v.mu - v.rho + alpha * v.sigma - v.lam * v.theta
    a_, b_ = v.sigma**2 * v.theta, v.sigma**2 - v.theta * d
    other = -b_ / a_ - pi
    lever, lever_other = 1.0 + pi * v.theta, 1.0 + other * v.theta
    ok = np.all(lever > tol(0.0)) and np.all(lever_other < -tol(0.0))
    out.append(PropertyResult("root selection", bool(ok),
                              f"min 1+pi*theta = {lever.min():.3e}, max rejected = {lever_other.max():.3e}"))

    f0 = objective(v, pi, alpha, gamma)
    gap = np.minimum(f0 - objective(v, pi + 1e-4, alpha, gamma), f0 - objective(v, pi - 1e-4, alpha, gamma))
    out.append(PropertyResult("mixed perturbation", gap.min() > tol(0.0), f"min objective drop = {gap.min():.3e}"))

    w = _draw_pure_jump(rng, n_draws)
    gamma_j = rng.uniform(-0.99, 5.0, n_draws)
    pj = pure_jump_informed_values(w, gamma_j)
    res_j = np.max(np.abs(foc_residual(w, pj, 0.0, gamma_j)))
    out.append(PropertyResult("pure-jump FOC residual", res_j <= tol(1e-12), f"max |FOC| = {res_j:.3e}"))
    f0 = objective(w, pj, 0.0, gamma_j)
    gap_j = np.minimum(f0 - objective(w, pj + 1e-4, 0.0, gamma_j), f0 - objective(w, pj - 1e-4, 0.0, gamma_j))
    out.append(PropertyResult("pure-jump perturbation", gap_j.min() > tol(0.0),
                              f"min objective drop = {gap_j.min():.3e}"))

    jump_gap = np.max(np.abs(pure_jump_informed_values(w, 0.0) - pure_jump_uninformed_values(w)))
    small = v._replace(theta=np.full(n_draws, 1e-6))
    merton_gap = np.max(np.abs(mixed_informed_values(small, 0.0, 0.0) - merton_values(small)) / np.maximum(
        1.0, np.abs(merton_values(small))))
    unit = v._replace(theta=np.ones(n_draws))
    unit_gap = np.max(np.abs(mixed_informed_values(unit, 0.0, 0.0) - unit_jump_closed_form(unit)))
    ok = jump_gap <= tol(1e-12) and merton_gap <= tol(1e-4) and unit_gap <= tol(1e-12)
    out.append(PropertyResult("consistency ladder", bool(ok),
                              f"gamma=0 reduction {jump_gap:.1e}, Merton limit {merton_gap:.1e}, "
                              f"theta=1 cross-check {unit_gap:.1e}"))
    return out


# --- conditional laws -------------------------------------------------------

def condlaw_properties(n_paths: int = 100_000, seed: int = 0, force_fail: bool = False) -> list[PropertyResult]:
    """Closed-form identities plus two sampling checks run at ``n_paths`` (at least 10^5)."""
    tol = _Tol(force_fail)
    n_paths = max(n_paths, 100_000)
    out = []
    means = np.array([0.01, 0.5, 1.0, 3.0, 10.0, 40.0])
    ks = np.arange(0, 80)
    pmf = condlaw.poisson_pmf(ks[:, None], means[None, :])
    cdf = condlaw.poisson_cdf(ks[:, None], means[None, :])
    err = max(np.max(np.abs(np.cumsum(pmf, axis=0) - cdf)),
              np.max(np.abs(pmf[1:] - pmf[:-1] * means / ks[1:, None])))
    out.append(PropertyResult("Poisson pmf/cdf identities", err <= tol(1e-12), f"max error = {err:.2e}"))

    gerr = 0.0
    for w_t, a, tau in [(0.0, 0.0, 1.0), (0.3, -0.4, 0.25), (-1.0, 1.5, 2.0)]:
        quad, _ = integrate.quad(lambda x: condlaw.gaussian_transition_pdf(0.0, tau, w_t, x), -np.inf, a,
                                 epsabs=1e-13, epsrel=1e-13)
        gerr = max(gerr, abs(quad - condlaw.gaussian_transition_cdf(0.0, tau, w_t, a)))
    out.append(PropertyResult("Gaussian cdf/pdf quadrature", gerr <= tol(1e-8), f"max error = {gerr:.2e}"))

    surv = condlaw.bm_runmax_survival(1.0, 1.959964)
    out.append(PropertyResult("reflection survival at 1.959964", abs(surv - 0.05) <= tol(1e-6), f"{surv:.9f}"))

    coeffs = MarketCoefficients.constant(sigma=1.0)
    batch = simulate_batch(coeffs, GridSpec(50, 1.0), seed, n_paths)
    freq = Estimate.from_samples((batch.m[:, -1] > 1.96).astype(float))
    z = abs(freq.mean - condlaw.bm_runmax_survival(1.0, 1.96)) / freq.stderr
    out.append(PropertyResult("Brownian maximum MC frequency", z <= tol(4.0),
                              f"freq = {freq.mean:.5f}, |z| = {z:.2f}"))

    table = condlaw.build_runmax_table(coeffs, 1.0, n_paths, seed=seed + 17)
    j = simulate_batch(coeffs, GridSpec(4, 1.0), seed + 29, n_paths).j[:, -1]
    dist = stats.ks_2samp(table.sorted_samples, j).statistic
    out.append(PropertyResult("running-max table KS distance", dist <= tol(0.01), f"D = {dist:.5f}"))
    return out


def gain_nonnegativity(n: int = 100_000, seed: int = 0, force_fail: bool = False) -> PropertyResult:
    rng = np.random.default_rng(seed)
    x = rng.exponential(2.0, n)
    y = np.concatenate(([-1.0, 0.0], -1.0 + rng.exponential(1.5, n - 2)))
    h = h_gain(x, y)
    return PropertyResult("gain integrand h(x,y) >= 0", h.min() >= _Tol(force_fail)(0.0) and not np.any(np.isnan(h)),
                          f"min h = {h.min():.3e} over {n} pairs")


# --- information drifts -----------------------------------------------------

EVAL_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _columns(grid: GridSpec):
    return [int(round(f * grid.n_steps)) for f in EVAL_FRACTIONS]


def grid_samples(coeffs: MarketCoefficients, grid: GridSpec, seed: int, n_paths: int, cols,
                 chunk: int = 10_000) -> tuple[State, tuple[np.ndarray, ...]]:
    """Observed states at the given uniform-grid columns and terminal (W, N, M, J), chunk by chunk."""
    states, terminal = [], []
    for start in range(0, n_paths, chunk):
        batch = simulate_batch(coeffs, grid, seed, min(chunk, n_paths - start), start=start)
        s, _ = idr.grid_state(coeffs, batch)
        states.append(State(*(np.asarray(x)[:, cols] for x in s)))
        terminal.append(tuple(a[:, -1] for a in (batch.w, batch.n, batch.m, batch.j)))
    state = State(*(np.concatenate(parts) for parts in zip(*states)))
    return state, tuple(np.concatenate(parts) for parts in zip(*terminal))


def orthogonality_moments(spec: InfoSpec, coeffs: MarketCoefficients, state: State, terminal, tables=None):
    """Per-path samples of the moments that must vanish, keyed by name; columns are evaluation times."""
    g = spec.outcome(*terminal)[:, None]
    alpha, gamma = idr.batch_drift(spec, coeffs, state, g, np.ones(state.n.shape, dtype=bool), tables)
    moments = {"gamma": gamma, "gamma*N": gamma * state.n, "gamma*W": gamma * state.w}
    if not spec.pure_jump:
        moments.update({"alpha": alpha, "alpha*W": alpha * state.w})
    return moments


def max_abs_z(samples, target: float = 0.0) -> float:
    """Largest |mean - target| / stderr over the columns of a (paths, times) array."""
    worst = 0.0
    for i in range(samples.shape[1]):
        e = Estimate.from_samples(samples[:, i])
        if e.stderr > 0:
            worst = max(worst, abs(e.mean - target) / e.stderr)
        elif e.mean != target:
            worst = np.inf
    return worst


def drift_properties(coeffs: MarketCoefficients, spec: InfoSpec, mc: MCConfig, tables=None,
                     force_fail: bool = False) -> list[PropertyResult]:
    """Orthogonality, density martingale, drift bound and Bayes consistency."""
    tol = _Tol(force_fail)
    k = mc.confidence_multiplier
    p1 = spec.check_nondegenerate(coeffs, tables)
    cols = _columns(mc.grid)
    state, terminal = grid_samples(coeffs, mc.grid, mc.master_seed, mc.n_paths, cols)
    moments = orthogonality_moments(spec, coeffs, state, terminal, tables)
    out = []

    worst = max(max_abs_z(x) for x in moments.values())
    out.append(PropertyResult(f"orthogonality {spec!r}", worst <= tol(k),
                              f"max |z| = {worst:.2f} over {len(moments)} moments x {len(cols)} times"))

    q = spec.cond_prob(coeffs, state, tables)
    worst = max(max_abs_z(q / p1, 1.0), max_abs_z((1.0 - q) / (1.0 - p1), 1.0))
    out.append(PropertyResult(f"density martingale {spec!r}", worst <= tol(k), f"max |z| = {worst:.2f}"))

    gmin = moments["gamma"].min()
    out.append(PropertyResult(f"gamma >= -1 {spec!r}", gmin >= -1.0 - tol(0.0), f"min gamma = {gmin:.6f}"))

    berr = 0.0
    small = simulate_batch(coeffs, mc.grid, mc.master_seed, 20)
    for i in range(small.n_paths):
        path = small.row(i)
        for t in mc.grid.times()[cols]:
            p_1 = idr.density_process(spec, coeffs, path, t, 1, tables)
            berr = max(berr, abs(p_1 * p1 - idr.cond_prob_G(spec, coeffs, path, t, tables)))
    out.append(PropertyResult(f"Bayes consistency {spec!r}", berr <= tol(1e-12), f"max error = {berr:.1e}"))
    return out


def clark_ocone_samples(coeffs: MarketCoefficients, spec: InfoSpec, grid: GridSpec, seed: int, n_paths: int,
                        tables=None, chunk: int = 5_000) -> np.ndarray:
    parts = []
    for start in range(0, n_paths, chunk):
        batch = simulate_batch(coeffs, grid, seed, min(chunk, n_paths - start), start=start)
        parts.append(idr.clark_ocone_residuals(spec, coeffs, batch, tables))
    return np.concatenate(parts)


def clark_ocone_property(coeffs: MarketCoefficients, spec: InfoSpec, mc: MCConfig, levels=None,
                         force_fail: bool = False) -> PropertyResult:
    """Residual variance decreases under grid refinement and its mean is zero within the band."""
    tol = _Tol(force_fail)
    levels = levels or (mc.grid.n_steps, 2 * mc.grid.n_steps, 4 * mc.grid.n_steps)
    variances, worst = [], 0.0
    for n in levels:
        grid = GridSpec(n, coeffs.horizon)
        tables = RunMaxTables(coeffs, grid.times(), mc.table_samples, seed=mc.master_seed + 1) \
            if spec.needs_tables else None
        r = clark_ocone_samples(coeffs, spec, grid, mc.master_seed, mc.n_paths, tables)
        e = Estimate.from_samples(r)
        variances.append(float(np.var(r, ddof=1)))
        worst = max(worst, abs(e.mean) / e.stderr)
    decreasing = all(b < a for a, b in zip(variances, variances[1:]))
    ok = decreasing and worst <= tol(mc.confidence_multiplier)
    shown = ", ".join(f"n={n}: {v:.4e}" for n, v in zip(levels, variances))
    return PropertyResult(f"Clark-Ocone residual {spec!r}", bool(ok), f"variances {shown}; max |z| = {worst:.2f}")


def determinism_property(coeffs: MarketCoefficients, mc: MCConfig, force_fail: bool = False) -> PropertyResult:
    a = simulate_batch(coeffs, mc.grid, mc.master_seed, 50)
    b = simulate_batch(coeffs, mc.grid, mc.master_seed, 50)
    same = all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("times", "w", "n", "m", "j"))
    return PropertyResult("seed determinism", same and not force_fail, "bit-identical batches" if same else "differ")


def run_suite(coeffs: MarketCoefficients, spec: InfoSpec | None, mc: MCConfig,
              force_fail: bool = False) -> list[PropertyResult]:
    results = strategy_properties(force_fail=force_fail, seed=mc.master_seed)
    results += condlaw_properties(n_paths=mc.n_paths, seed=mc.master_seed, force_fail=force_fail)
    results.append(gain_nonnegativity(seed=mc.master_seed, force_fail=force_fail))
    if spec is not None:
        tables = RunMaxTables(coeffs, mc.grid.times(), mc.table_samples, seed=mc.master_seed + 1) \
            if spec.needs_tables else None
        results += drift_properties(coeffs, spec, mc, tables, force_fail)
        results.append(clark_ocone_property(coeffs, spec, mc, force_fail=force_fail))
    results.append(determinism_property(coeffs, mc, force_fail))
    return results
