"""Command-line interface: quote ingestion, run configuration, CSV exports.

Subcommands map one-to-one onto library operations:

* ``fit``        - least-squares skew from quotes
* ``pdf``        - implied density/CDF curve for a skew
* ``posterior``  - posterior grid and its 1-D/2-D marginals
* ``fuzzy``      - strike-by-vol probability raster
* ``avg-pdf``    - posterior-averaged implied density
* ``check``      - skew plausibility scan
* ``gen-quotes`` - synthetic fixed-seed quote sets (reproducible fixtures)

All artifacts are CSV plus a flat key=value run manifest. Outputs are
byte-identical for identical config, inputs, and seed.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bayes import (
    QuoteSet,
    build_posterior,
    least_squares_fit,
    marginal_1d,
    marginal_2d,
)
from .ensemble import averaged_pdf, fuzzy_smile
from .implied import density_curve
from .pricing import MarketEnv, OptionQuote
from .skewmodel import SkewParams, plausibility_check


class ConfigError(ValueError):
    """Bad or unknown run configuration."""


class QuoteParseError(ValueError):
    """A quote file failed to parse or validate."""


@dataclass(frozen=True)
class GridConfig:
    x_min: float = 0.5
    x_max: float = 1.5
    n: int = 201


@dataclass(frozen=True)
class PosteriorConfig:
    na: int = 41
    nb: int = 41
    nc: int = 41
    bounds: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class FuzzyConfig:
    vol_bins: int = 101
    vol_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class RunConfig:
    market: MarketEnv
    grid: GridConfig
    posterior: PosteriorConfig
    fuzzy: FuzzyConfig
    seed: int = 42


# Example market per the docs: 10% rate, 2% dividend yield, one year.
DEFAULT_MARKET = dict(rate=0.10, div_yield=0.02, expiry=1.0, spot=1.0)


def _check_keys(section: dict, allowed: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def load_config(path: Path | None) -> RunConfig:
    """Load a JSON run config; unknown keys anywhere are an error."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config root must be an object")
    _check_keys(raw, {"market", "grid", "posterior", "fuzzy", "seed"}, "config root")

    market = dict(DEFAULT_MARKET, **raw.get("market", {}))
    _check_keys(market, set(DEFAULT_MARKET), "'market'")

    grid_raw = raw.get("grid", {})
    _check_keys(grid_raw, {"x_min", "x_max", "n"}, "'grid'")

    post_raw = dict(raw.get("posterior", {}))
    _check_keys(post_raw, {"na", "nb", "nc", "bounds"}, "'posterior'")
    bounds = post_raw.pop("bounds", None)
    if bounds is not None:
        _check_keys(bounds, {"a", "b", "c"}, "'posterior.bounds'")
        if set(bounds) != {"a", "b", "c"}:
            raise ConfigError("'posterior.bounds' must give all of a, b, c")
        bounds = tuple((float(bounds[k][0]), float(bounds[k][1])) for k in ("a", "b", "c"))

    fuzzy_raw = dict(raw.get("fuzzy", {}))
    _check_keys(fuzzy_raw, {"vol_bins", "vol_range"}, "'fuzzy'")
    vol_range = fuzzy_raw.pop("vol_range", None)
    if vol_range is not None:
        vol_range = (float(vol_range[0]), float(vol_range[1]))

    try:
        return RunConfig(
            market=MarketEnv(**market),
            grid=GridConfig(**grid_raw),
            posterior=PosteriorConfig(bounds=bounds, **post_raw),
            fuzzy=FuzzyConfig(vol_range=vol_range, **fuzzy_raw),
            seed=int(raw.get("seed", 42)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


# ---------------------------------------------------------------------------
# Quote files: header-optional CSV "moneyness,vol", '#' comments, UTF-8, LF.
# ---------------------------------------------------------------------------


def load_quotes(path) -> QuoteSet:
    quotes = []
    header_allowed = True  # only the first content line may be a header
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise QuoteParseError(f"{path}: cannot read quotes ({exc})") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise QuoteParseError(
                    f"{path}:{lineno}: expected 'moneyness,vol', got {line!r}"
                )
            try:
                x, v = float(parts[0]), float(parts[1])
            except ValueError:
                if header_allowed:
                    header_allowed = False
                    continue
                raise QuoteParseError(f"{path}:{lineno}: not numeric: {line!r}") from None
            header_allowed = False
            try:
                quotes.append(OptionQuote(x, v))
            except ValueError as exc:
                raise QuoteParseError(f"{path}:{lineno}: {exc}") from None
    if not quotes:
        raise QuoteParseError(f"{path}: no quotes found")
    return QuoteSet(tuple(quotes))


def save_quotes(quotes: QuoteSet, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("moneyness,vol\n")
        for q in quotes.quotes:
            fh.write(f"{_fmt(q.moneyness)},{_fmt(q.vol)}\n")


def _fmt(value) -> str:
    # repr() of a Python float is the shortest round-trip form, which keeps
    # artifacts bit-stable and load(save(x)) exact.
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: Path, entries: dict):
    lines = [f"{k}={v}" for k, v in entries.items()]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _flat_config(cfg: RunConfig) -> dict:
    out = {}
    for name, value in (
        ("market.rate", cfg.market.rate),
        ("market.div_yield", cfg.market.div_yield),
        ("market.expiry", cfg.market.expiry),
        ("market.spot", cfg.market.spot),
        ("grid.x_min", cfg.grid.x_min),
        ("grid.x_max", cfg.grid.x_max),
        ("grid.n", cfg.grid.n),
        ("posterior.na", cfg.posterior.na),
        ("posterior.nb", cfg.posterior.nb),
        ("posterior.nc", cfg.posterior.nc),
        ("posterior.bounds", cfg.posterior.bounds),
        ("fuzzy.vol_bins", cfg.fuzzy.vol_bins),
        ("fuzzy.vol_range", cfg.fuzzy.vol_range),
        ("seed", cfg.seed),
    ):
        out[f"config.{name}"] = value
    return out


def _parse_skew(text: str) -> SkewParams:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--skew expects 'a,b,c', got {text!r}")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--skew expects three numbers, got {text!r}") from None
    return SkewParams(a, b, c)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _resolve_skew(args, cfg: RunConfig) -> SkewParams:
    if args.skew is not None:
        return _parse_skew(args.skew)
    if args.quotes is not None:
        return least_squares_fit(load_quotes(args.quotes))
    raise ConfigError("either --skew or --quotes is required")


def _posterior_from_args(args, cfg: RunConfig):
    quotes = load_quotes(args.quotes)
    res = (cfg.posterior.na, cfg.posterior.nb, cfg.posterior.nc)
    return quotes, build_posterior(quotes, bounds=cfg.posterior.bounds, resolution=res)


def cmd_fit(args, cfg: RunConfig, out: Path) -> dict:
    fit = least_squares_fit(load_quotes(args.quotes))
    print(f"a={fit.a!r} b={fit.b!r} c={fit.c!r}")
    _write_csv(out / "fit.csv", "a,b,c", [(fit.a, fit.b, fit.c)])
    return {"fit.a": _fmt(fit.a), "fit.b": _fmt(fit.b), "fit.c": _fmt(fit.c),
            "output.fit": "fit.csv"}


def cmd_pdf(args, cfg: RunConfig, out: Path) -> dict:
    skew = _resolve_skew(args, cfg)
    curve = density_curve(
        cfg.market, skew, cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n, method=args.method
    )
    rows = [
        (x, p, cdf, "ok" if ok else "invalid_vol")
        for x, p, cdf, ok in zip(curve.xs, curve.pdf, curve.cdf, curve.valid)
    ]
    _write_csv(out / "curve.csv", "x,pdf,cdf,flag", rows)
    return {"skew": f"{skew.a!r},{skew.b!r},{skew.c!r}", "method": args.method,
            "output.curve": "curve.csv"}


def cmd_posterior(args, cfg: RunConfig, out: Path) -> dict:
    _, grid = _posterior_from_args(args, cfg)
    axes = {"a": grid.a_axis, "b": grid.b_axis, "c": grid.c_axis}
    for name, axis in axes.items():
        table = marginal_1d(grid, name)
        _write_csv(out / f"marginal_{name}.csv", f"{name},weight", zip(axis, table))
    for pair in (("a", "b"), ("a", "c"), ("b", "c")):
        table = marginal_2d(grid, pair)
        rows = [
            (axes[pair[0]][i], axes[pair[1]][j], table[i, j])
            for i in range(table.shape[0])
            for j in range(table.shape[1])
        ]
        _write_csv(out / f"marginal_{pair[0]}{pair[1]}.csv", f"{pair[0]},{pair[1]},weight", rows)
    mode = grid.mode_params()
    return {
        "posterior.mode": f"{mode[0]!r},{mode[1]!r},{mode[2]!r}",
        "posterior.log_norm": _fmt(grid.log_norm),
        "output.marginals": "marginal_{a,b,c,ab,ac,bc}.csv",
    }


def cmd_fuzzy(args, cfg: RunConfig, out: Path) -> dict:
    _, grid = _posterior_from_args(args, cfg)
    x_axis = np.linspace(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n)
    fuzzy = fuzzy_smile(grid, x_axis, cfg.fuzzy.vol_bins, vol_range=cfg.fuzzy.vol_range)
    rows = [
        (fuzzy.x_axis[j], fuzzy.vol_edges[i], fuzzy.vol_edges[i + 1], fuzzy.mass[i, j])
        for j in range(len(fuzzy.x_axis))
        for i in range(fuzzy.mass.shape[0])
    ]
    _write_csv(out / "fuzzy.csv", "x,vol_bin_low,vol_bin_high,mass", rows)
    return {
        "fuzzy.clamped_total": _fmt(float(np.sum(fuzzy.clamped))),
        "output.fuzzy": "fuzzy.csv",
    }


def cmd_avg_pdf(args, cfg: RunConfig, out: Path) -> dict:
    _, grid = _posterior_from_args(args, cfg)
    x_axis = np.linspace(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n)
    avg = averaged_pdf(cfg.market, grid, x_axis)
    rows = zip(avg.curve.xs, avg.curve.pdf, avg.curve.cdf, avg.skipped_mass)
    _write_csv(out / "avg_pdf.csv", "x,pdf,cdf,skipped_mass", rows)
    return {
        "avg_pdf.max_skipped": _fmt(float(np.max(avg.skipped_mass))),
        "output.avg_pdf": "avg_pdf.csv",
    }


def cmd_check(args, cfg: RunConfig, out: Path) -> dict:
    skew = _parse_skew(args.skew)
    violations = plausibility_check(
        cfg.market, skew, (cfg.grid.x_min, cfg.grid.x_max), cfg.grid.n
    )
    _write_csv(out / "check.csv", "x,kind", [(v.x, v.kind) for v in violations])
    for v in violations:
        print(f"violation at x={v.x!r}: {v.kind}", file=sys.stderr)
    if violations:
        raise ValueError(f"skew failed plausibility: {len(violations)} violation(s)")
    print("skew is plausible on the sampled range")
    return {"check.violations": "0", "output.check": "check.csv"}


def cmd_gen_quotes(args, cfg: RunConfig, out: Path) -> dict:
    skew = _parse_skew(args.skew)
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng(seed)
    xs = np.linspace(args.x_min, args.x_max, args.n)
    t = xs - 1.0
    vols = skew.a + skew.b * t + skew.c * t * t + rng.normal(0.0, args.noise_sd, args.n)
    quotes = QuoteSet.from_pairs(zip(xs, vols))
    save_quotes(quotes, out / "quotes.csv")
    print(out / "quotes.csv")
    return {"gen.n": str(args.n), "gen.seed": str(seed),
            "gen.noise_sd": _fmt(args.noise_sd), "output.quotes": "quotes.csv"}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "fit": cmd_fit,
    "pdf": cmd_pdf,
    "posterior": cmd_posterior,
    "fuzzy": cmd_fuzzy,
    "avg-pdf": cmd_avg_pdf,
    "check": cmd_check,
    "gen-quotes": cmd_gen_quotes,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewdist",
        description="Implied distributions from volatility skews and Bayesian skew estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="seed override for synthetic data")

    p = sub.add_parser("fit", help="least-squares quadratic skew from quotes")
    common(p)
    p.add_argument("--quotes", required=True, help="quote CSV (moneyness,vol)")

    p = sub.add_parser("pdf", help="implied pdf/cdf curve for a skew")
    common(p)
    p.add_argument("--skew", help="skew coefficients 'a,b,c'")
    p.add_argument("--quotes", help="fit the skew from this quote CSV instead")
    p.add_argument("--method", choices=("analytic", "fd"), default="analytic")

    for name, help_text in (
        ("posterior", "posterior grid and marginals from quotes"),
        ("fuzzy", "strike-by-vol probability raster from quotes"),
        ("avg-pdf", "posterior-averaged implied density from quotes"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--quotes", required=True, help="quote CSV (moneyness,vol)")

    p = sub.add_parser("check", help="plausibility scan of a skew")
    common(p)
    p.add_argument("--skew", required=True, help="skew coefficients 'a,b,c'")

    p = sub.add_parser("gen-quotes", help="synthetic quotes from a true skew plus noise")
    common(p)
    p.add_argument("--skew", required=True, help="true skew 'a,b,c'")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--x-min", type=float, default=0.7, dest="x_min")
    p.add_argument("--x-max", type=float, default=1.3, dest="x_max")
    p.add_argument("--noise-sd", type=float, default=0.005, dest="noise_sd")

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits itself; fold usage errors into 1
        return 0 if exc.code in (0, None) else 1
    started = time.perf_counter()
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        entries = {
            "command": args.command,
            "skewdist_version": __version__,
            "python_version": platform.python_version(),
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
        }
        entries.update(_flat_config(cfg))
        entries.update(_COMMANDS[args.command](args, cfg, out))
        entries["timing.total_s"] = f"{time.perf_counter() - started:.3f}"
        _write_manifest(out, entries)
    # LinAlgError subclasses ValueError, so numerical failures go first
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
