"""Command line: ``insiderdrift {simulate,drift,value,verify} --config FILE``.

The configuration is an INI file with sections ``[market]``, ``[signal]``,
``[mc]`` and ``[output]``; see the README for every key. Exit codes: 0
success, 1 configuration or validation error, 2 failed comparison or
property, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import infodrift as idr
from .condlaw import RunMaxTables
from .errors import (InconsistentOutcome, InvalidConfiguration, InvalidInput, InvalidRegime, MissingTable,
                     UnsupportedConfiguration, WealthRuin)
from .market import MarketCoefficients, PiecewiseConstant, validate_coefficients
from .paths import GridSpec, simulate_path, write_path_csv
from .valueinfo import MCConfig, value_report
from .verify import run_suite

log = logging.getLogger("insiderdrift")

EXIT_OK, EXIT_CONFIG, EXIT_FAILED, EXIT_IO = 0, 1, 2, 3
TABLE_CACHE_ENV = "INSIDERDRIFT_TABLE_CACHE"

_COEFFICIENTS = {"rho": 0.0, "mu": 0.0, "sigma": 0.0, "theta": 1.0, "lambda": 1.0}
_SIGNALS = {
    "PoissonUpper": (idr.PoissonUpper, ("b",)),
    "PoissonInterval": (idr.PoissonInterval, ("b1", "b2")),
    "RectangleTerminal": (idr.RectangleTerminal, ("a", "b")),
    "RectangleRunMax": (idr.RectangleRunMax, ("a1", "a2", "b1", "b2")),
}
_INTEGER_FIELDS = {"PoissonUpper": {"b"}, "PoissonInterval": {"b1", "b2"}, "RectangleTerminal": {"b"}}


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketCoefficients
    signal: idr.InfoSpec | None
    n_paths: int
    seed: int
    n_steps: int
    confidence_multiplier: float
    chunk_size: int
    workers: int
    table_samples: int
    out_dir: Path
    format: str

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n_steps, self.market.horizon)

    def mc(self) -> MCConfig:
        return MCConfig(self.n_paths, self.seed, self.grid, self.confidence_multiplier,
                        chunk_size=self.chunk_size, workers=self.workers, table_samples=self.table_samples,
                        table_cache=str(table_cache_dir(self)))


def _field_error(section: str, key: str, raw: str, why: str) -> InvalidConfiguration:
    return InvalidConfiguration(f"[{section}] {key} = {raw!r}: {why}")


def _number(section, key, raw, kind=float):
    try:
        value = kind(raw)
    except ValueError:
        raise _field_error(section, key, raw, f"not a valid {kind.__name__}") from None
    if kind is float and not np.isfinite(value):
        raise _field_error(section, key, raw, "must be finite")
    return value


def _list(section, key, raw):
    return [_number(section, key, part.strip()) for part in raw.split(",") if part.strip()]


def _market(cp: configparser.ConfigParser) -> MarketCoefficients:
    sec = cp["market"] if cp.has_section("market") else {}
    known = set(_COEFFICIENTS) | {f"{k}_breaks" for k in _COEFFICIENTS} | {"horizon"}
    for key in sec:
        if key not in known:
            raise _field_error("market", key, sec[key], "unknown key")
    coefs = {}
    for name, default in _COEFFICIENTS.items():
        values = _list("market", name, sec.get(name, repr(default)))
        breaks = _list("market", f"{name}_breaks", sec.get(f"{name}_breaks", ""))
        try:
            coefs[name] = PiecewiseConstant(tuple(values), tuple(breaks))
        except InvalidConfiguration as exc:
            raise _field_error("market", name, sec.get(name, ""), str(exc)) from None
    horizon = _number("market", "horizon", sec.get("horizon", "1.0"))
    return MarketCoefficients(coefs["rho"], coefs["mu"], coefs["sigma"], coefs["theta"], coefs["lambda"], horizon)


def _signal(cp: configparser.ConfigParser) -> idr.InfoSpec | None:
    if not cp.has_section("signal"):
        return None
    sec = cp["signal"]
    kind = sec.get("kind", "none").strip()
    if kind.lower() == "none":
        return None
    if kind not in _SIGNALS:
        raise _field_error("signal", "kind", kind, f"expected one of {', '.join(_SIGNALS)} or none")
    cls, fields = _SIGNALS[kind]
    args = {}
    for f in fields:
        if f not in sec:
            raise _field_error("signal", f, "", f"required for {kind}")
        as_int = f in _INTEGER_FIELDS.get(kind, ())
        args[f] = _number("signal", f, sec[f], int if as_int else float)
    for key in sec:
        if key not in fields and key != "kind":
            raise _field_error("signal", key, sec[key], f"not a field of {kind}")
    try:
        return cls(**args)
    except InvalidConfiguration as exc:
        raise InvalidConfiguration(f"[signal] {exc}") from None


def load_config(path: str | os.PathLike, overrides: argparse.Namespace | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise InvalidConfiguration(f"{path}: {exc}") from None
    for section in cp.sections():
        if section not in ("market", "signal", "mc", "output"):
            raise InvalidConfiguration(f"{path}: unknown section [{section}]")
    mc = cp["mc"] if cp.has_section("mc") else {}
    out = cp["output"] if cp.has_section("output") else {}
    n_paths = _number("mc", "n_paths", mc.get("n_paths", "1000"), int)
    seed = _number("mc", "seed", mc.get("seed", "0"), int)
    n_steps = _number("mc", "n_steps", mc.get("n_steps", "200"), int)
    out_dir = Path(out.get("dir", "out"))
    if overrides is not None:
        n_paths = overrides.paths if overrides.paths is not None else n_paths
        seed = overrides.seed if overrides.seed is not None else seed
        n_steps = overrides.steps if overrides.steps is not None else n_steps
        out_dir = Path(overrides.out) if overrides.out is not None else out_dir
    if n_paths < 1:
        raise _field_error("mc", "n_paths", str(n_paths), "must be positive")
    if not 0 <= seed < 2**64:
        raise _field_error("mc", "seed", str(seed), "must be an unsigned 64-bit integer")
    fmt = out.get("format", "structured-text").strip()
    if fmt not in ("structured-text", "csv"):
        raise _field_error("output", "format", fmt, "expected structured-text or csv")
    return ExperimentConfig(
        market=_market(cp), signal=_signal(cp), n_paths=n_paths, seed=seed, n_steps=n_steps,
        confidence_multiplier=_number("mc", "confidence_multiplier", mc.get("confidence_multiplier", "4")),
        chunk_size=_number("mc", "chunk_size", mc.get("chunk_size", "2048"), int),
        workers=_number("mc", "workers", mc.get("workers", "1"), int),
        table_samples=_number("mc", "table_samples", mc.get("table_samples", "200000"), int),
        out_dir=out_dir, format=fmt,
    )


def table_cache_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(TABLE_CACHE_ENV) or cfg.out_dir / "tables")


def _validated_market(cfg: ExperimentConfig) -> MarketCoefficients:
    violations = validate_coefficients(cfg.market)
    if violations:
        detail = "; ".join(f"{v.condition} fails at t={v.time}" for v in violations)
        raise InvalidConfiguration(f"market rejected: {detail}")
    return cfg.market


def _require_signal(cfg: ExperimentConfig) -> idr.InfoSpec:
    if cfg.signal is None:
        raise InvalidConfiguration("[signal] kind is required for this subcommand")
    return cfg.signal


def _out_dir(cfg: ExperimentConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _tables(cfg: ExperimentConfig, spec: idr.InfoSpec) -> RunMaxTables | None:
    if not spec.needs_tables:
        return None
    tables = RunMaxTables(cfg.market, cfg.grid.times(), cfg.table_samples, seed=(cfg.seed + 1) % 2**64,
                          cache_dir=table_cache_dir(cfg))
    log.info("preparing running-maximum tables in %s", tables.cache_dir)
    tables.prebuild()
    log.info("built %d tables", tables.built)
    return tables


# --- subcommands -------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig) -> int:
    coeffs = _validated_market(cfg)
    out = _out_dir(cfg)
    files = []
    for i in range(cfg.n_paths):
        name = f"path_{i:05d}.csv"
        with open(out / name, "w", newline="") as fh:
            write_path_csv(simulate_path(coeffs, cfg.grid, cfg.seed, index=i), fh)
        files.append(name)
    manifest = {"seed": cfg.seed, "n_steps": cfg.n_steps, "horizon": coeffs.horizon,
                "paths": [{"index": i, "file": f} for i, f in enumerate(files)]}
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %d paths to %s", len(files), out)
    return EXIT_OK


def cmd_drift(cfg: ExperimentConfig) -> int:
    coeffs = _validated_market(cfg)
    spec = _require_signal(cfg)
    out = _out_dir(cfg)
    tables = _tables(cfg, spec)
    spec.check_nondegenerate(coeffs, tables)
    times = cfg.grid.times()[:-1]
    lines = ["path,time,g,p,alpha,gamma"]
    for i in range(cfg.n_paths):
        d = idr.drift_series(spec, coeffs, simulate_path(coeffs, cfg.grid, cfg.seed, index=i), times, tables)
        for row in zip(d.times, d.p, d.alpha, d.gamma):
            t, p, a, g = (repr(float(x)) for x in row)
            lines.append(f"{i},{t},{d.g_realized},{p},{a},{g}")
    _write(out / "drift.csv", "\n".join(lines) + "\n")
    log.info("wrote drift series for %d paths to %s", cfg.n_paths, out / "drift.csv")
    return EXIT_OK


def cmd_value(cfg: ExperimentConfig) -> int:
    coeffs = _validated_market(cfg)
    spec = _require_signal(cfg)
    report = value_report(coeffs, spec, cfg.mc())
    out = _out_dir(cfg)
    if cfg.format == "csv":
        text, name = report.to_csv(), "value_report.csv"
    else:
        text, name = report.to_text(), "value_report.json"
    _write(out / name, text)
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_verify(cfg: ExperimentConfig, force_fail: bool = False) -> int:
    coeffs = _validated_market(cfg)
    results = run_suite(coeffs, cfg.signal, cfg.mc(), force_fail=force_fail)
    text = "".join(r.line() + "\n" for r in results)
    failed = sum(not r.passed for r in results)
    text += f"{len(results) - failed}/{len(results)} properties passed\n"
    _write(_out_dir(cfg) / "verify.txt", text)
    sys.stdout.write(text)
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="insiderdrift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("simulate", "write sample paths as CSV"),
                            ("drift", "tabulate density process and information drifts"),
                            ("value", "value-of-information report"),
                            ("verify", "run the property suite")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--seed", type=int, help="master seed, overrides [mc] seed")
        p.add_argument("--paths", type=int, help="number of paths, overrides [mc] n_paths")
        p.add_argument("--steps", type=int, help="grid steps, overrides [mc] n_steps")
        p.add_argument("--out", help="output directory, overrides [output] dir")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name == "verify":
            p.add_argument("--force-fail", action="store_true", help="corrupt every tolerance (harness self-test)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "drift":
            return cmd_drift(cfg)
        if args.command == "value":
            return cmd_value(cfg)
        return cmd_verify(cfg, force_fail=args.force_fail)
    except (InvalidConfiguration, InvalidInput, InvalidRegime, UnsupportedConfiguration, MissingTable,
            InconsistentOutcome, WealthRuin) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
