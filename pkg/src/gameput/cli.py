"""Command-line surface: pricing runs, boundary extraction, convergence
studies and figure-data reproduction, all emitting deterministic CSV.

Config files are flat key=value text with units spelled out in key names
(rate_per_year, maturity_years, ...); command-line flags override file
values.  Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .american import american_put, beta_cutoff, delta_star, gamma_cutoff
from .analysis import error_study, extract_holder_boundary, fit_lipschitz_in_horizon
from .game import price_dynkin, price_p1, price_p2
from .lattice import RegionFlag, level_logprices, make_lattice, make_psi_exercise, optimal_stopping_backward
from .model import ModelSpec, make_model
from .pde import game_reference

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_KEYS = {
    "strike": float,
    "rate_per_year": float,
    "volatility_per_sqrt_year": float,
    "maturity_years": float,
    "penalty": float,
    "steps": int,
    "spot": float,
    "logprice": float,
    "variant": str,
    "cutoff": str,
    "ns": str,
    "out": str,
    "oracle_nx": int,
    "oracle_nt": int,
}

FIGURE1_PARAMS = dict(strike=20.0, rate_per_year=0.02, volatility_per_sqrt_year=0.15,
                      maturity_years=0.5, penalty=0.15)
FIGURE2_PARAMS = dict(strike=20.0, rate_per_year=0.02, volatility_per_sqrt_year=0.15,
                      maturity_years=10.0)
FIGURE3_PENALTIES = (0.15, 0.3, 0.5)
FIGURE2_PENALTIES = (1.0, 1.5)
FIGURE_STEPS = 2000


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    model: ModelSpec
    steps: int
    x0: Optional[float]
    spot: Optional[float]
    variant: str
    cutoff: str
    ns: tuple
    out: Optional[str]
    oracle_nx: int
    oracle_nt: int

    @property
    def logprice(self) -> float:
        return math.log(self.spot) if self.spot is not None else self.x0

    def as_header_pairs(self) -> list:
        pairs = [
            ("strike", self.model.K),
            ("rate_per_year", self.model.r),
            ("volatility_per_sqrt_year", self.model.kappa),
            ("maturity_years", self.model.T),
            ("penalty", self.model.delta),
            ("steps", self.steps),
            ("logprice", self.logprice),
            ("variant", self.variant),
            ("cutoff", self.cutoff),
        ]
        if self.spot is not None:
            pairs.insert(6, ("spot", self.spot))
        if self.ns:
            pairs.append(("ns", ",".join(str(n) for n in self.ns)))
            pairs.append(("oracle_nx", self.oracle_nx))
            pairs.append(("oracle_nt", self.oracle_nt))
        return pairs


def _parse_config_file(path: str) -> dict:
    raw = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            raw[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return raw


def _parse_ns(text: str) -> tuple:
    try:
        ns = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad ns list {text!r}: {exc}") from exc
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"ns must be strictly increasing, got {text!r}")
    return ns


def _resolve_config(args: argparse.Namespace, need_ns: bool = False) -> RunConfig:
    raw = {}
    if args.config:
        raw.update(_parse_config_file(args.config))
    overrides = {
        "strike": args.strike, "rate_per_year": args.rate,
        "volatility_per_sqrt_year": args.vol, "maturity_years": args.maturity,
        "penalty": args.penalty, "steps": args.steps, "variant": args.variant,
        "cutoff": args.cutoff, "out": args.out,
        "ns": getattr(args, "ns", None),
        "oracle_nx": getattr(args, "oracle_nx", None),
        "oracle_nt": getattr(args, "oracle_nt", None),
    }
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    # A spot/logprice flag replaces any file-level position entirely.
    if args.spot is not None or args.logprice is not None:
        raw.pop("spot", None)
        raw.pop("logprice", None)
        if args.spot is not None:
            raw["spot"] = args.spot
        if args.logprice is not None:
            raw["logprice"] = args.logprice

    for key in ("strike", "rate_per_year", "volatility_per_sqrt_year", "maturity_years", "penalty"):
        if key not in raw:
            raise ConfigError(f"missing required parameter {key}")
    if ("spot" in raw) == ("logprice" in raw):
        raise ConfigError("exactly one of spot/logprice is required")
    if "spot" in raw and raw["spot"] <= 0.0:
        raise ConfigError(f"spot must be positive, got {raw['spot']}")

    try:
        model = make_model(raw["strike"], raw["rate_per_year"], raw["volatility_per_sqrt_year"],
                           raw["maturity_years"], raw["penalty"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    variant = str(raw.get("variant", "p2")).lower()
    if variant not in ("p1", "p2", "dynkin", "american"):
        raise ConfigError(f"variant must be one of p1/p2/dynkin/american, got {variant!r}")
    cutoff = str(raw.get("cutoff", "beta")).lower()
    if cutoff not in ("beta", "gamma"):
        raise ConfigError(f"cutoff must be beta or gamma, got {cutoff!r}")
    steps = int(raw.get("steps", 2000))
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    ns = _parse_ns(raw["ns"]) if "ns" in raw else ()
    if need_ns and not ns:
        raise ConfigError("a study needs --ns (comma-separated step counts)")

    return RunConfig(
        model=model, steps=steps,
        x0=raw.get("logprice"), spot=raw.get("spot"),
        variant=variant, cutoff=cutoff, ns=ns, out=raw.get("out"),
        oracle_nx=int(raw.get("oracle_nx", 641)), oracle_nt=int(raw.get("oracle_nt", 1281)),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(out: Optional[str], header_pairs: list, columns: list, rows: list,
               trailer_pairs: list = ()) -> None:
    lines = [f"# {k}={_fmt(v)}" for k, v in header_pairs]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join("" if v is None else _fmt(v) for v in row))
    lines.extend(f"# {k}={_fmt(v)}" for k, v in trailer_pairs)
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cutoff_time(config: RunConfig) -> float:
    cut = beta_cutoff(config.model, config.steps) if config.cutoff == "beta" \
        else gamma_cutoff(config.model, config.steps)
    return cut.time


def cmd_price(config: RunConfig) -> None:
    model = config.model
    x0 = config.logprice
    d_star = delta_star(model)
    regime = "AMERICAN_FALLBACK" if model.delta >= d_star else "GAME"
    beta_or_gamma = None
    if config.variant == "american":
        value = american_put(model, config.steps, x0)
    elif config.variant == "dynkin":
        value = price_dynkin(model, config.steps, x0, keep_surface=False).value
    else:
        s = _cutoff_time(config)
        beta_or_gamma = s
        pricer = price_p1 if config.variant == "p1" else price_p2
        value = pricer(model, config.steps, x0, s, keep_surface=False).value
    spot = config.spot if config.spot is not None else math.exp(x0)
    _write_csv(
        config.out, config.as_header_pairs(),
        ["variant", "n", "spot", "x0", "beta_or_gamma", "value", "delta_star", "regime"],
        [[config.variant, config.steps, spot, x0, beta_or_gamma, value, d_star, regime]],
    )


def cmd_boundary(config: RunConfig) -> None:
    model = config.model
    n = config.steps
    x0 = config.logprice
    lattice = make_lattice(model, n, x0)
    game = price_dynkin(model, n, x0)
    american = optimal_stopping_backward(lattice, make_psi_exercise(lattice))
    b_game = extract_holder_boundary(game.surface)
    b_amer = extract_holder_boundary(american)
    g_by_level = {round(t / lattice.h): math.exp(s) for t, s in zip(b_game.times, b_game.levels)}
    a_by_level = {round(t / lattice.h): math.exp(s) for t, s in zip(b_amer.times, b_amer.levels)}
    rows = []
    for j in range(n + 1):
        writer = int(np.any(game.surface.flags[j] == RegionFlag.WRITER_CANCEL)) if j < n else 0
        rows.append([j * lattice.h, g_by_level.get(j), a_by_level.get(j), writer])
    _write_csv(config.out, config.as_header_pairs(),
               ["t", "b_game", "b_american", "writer_flag"], rows)


def cmd_study(config: RunConfig) -> None:
    model = config.model
    x0 = config.logprice
    if config.variant not in ("p1", "p2"):
        raise ConfigError("studies need variant p1 or p2")
    reference = game_reference(model, x0, config.oracle_nx, config.oracle_nt)
    report = error_study(model, x0, config.variant.upper(), config.ns, reference,
                         cutoff_mode=config.cutoff)
    lipschitz = fit_lipschitz_in_horizon(model, min(config.ns), x0, config.variant,
                                         report.cutoff_times[0])
    rows = [[int(n), float(bt), float(v), float(e)]
            for n, bt, v, e in zip(report.ns, report.cutoff_times, report.values, report.errors)]
    verdict = "PASS" if report.corridor_violations == 0 else "FAIL"
    trailer = [
        ("reference", report.reference),
        ("mesh_error", report.mesh_error),
        ("fitted_rate", report.fitted_rate),
        ("fitted_constant", report.fitted_constant),
        ("fit_points", report.n_fit_points),
        ("corridor_exponents", f"{report.corridor[0]}:{report.corridor[1]}"),
        ("corridor_violations", report.corridor_violations),
        ("corridor_verdict", verdict),
        ("lipschitz_estimate", lipschitz),
    ]
    _write_csv(config.out, config.as_header_pairs(),
               ["n", "beta_n", "value", "signed_error"], rows, trailer_pairs=trailer)


def _figure_model(params: dict, penalty: float) -> ModelSpec:
    return make_model(params["strike"], params["rate_per_year"],
                      params["volatility_per_sqrt_year"], params["maturity_years"], penalty)


def _figure_header(params: dict, penalties, n: int) -> list:
    pairs = [(k, v) for k, v in params.items()]
    pairs.append(("penalties", ",".join(repr(d) for d in penalties)))
    pairs.append(("steps", n))
    return pairs


def _boundary_prices_by_level(surface, lattice) -> dict:
    curve = extract_holder_boundary(surface)
    return {round(t / lattice.h): math.exp(s) for t, s in zip(curve.times, curve.levels)}


def cmd_figures(figure: int, out_dir: str) -> list:
    """Reproduce the plot data behind the three standard figures at n=2000.
    Returns the written paths."""
    n = FIGURE_STEPS
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if figure == 1:
        model = _figure_model(FIGURE1_PARAMS, FIGURE1_PARAMS["penalty"])
        x0 = model.log_strike
        lattice = make_lattice(model, n, x0)
        game = price_dynkin(model, n, x0)
        american = optimal_stopping_backward(lattice, make_psi_exercise(lattice))
        g_lv = _boundary_prices_by_level(game.surface, lattice)
        a_lv = _boundary_prices_by_level(american, lattice)
        rows = []
        for j in range(n + 1):
            lo = hi = None
            if j < n:
                hits = np.nonzero(game.surface.flags[j] == RegionFlag.WRITER_CANCEL)[0]
                if len(hits):
                    xs = level_logprices(lattice, j)[hits]
                    lo, hi = math.exp(xs.min()), math.exp(xs.max())
            rows.append([j * lattice.h, g_lv.get(j), a_lv.get(j), lo, hi])
        path = out / "fig1_boundaries.csv"
        _write_csv(str(path), _figure_header(FIGURE1_PARAMS, [FIGURE1_PARAMS["penalty"]], n),
                   ["t", "b_holder_game", "b_holder_american", "writer_band_low", "writer_band_high"],
                   rows)
        written.append(path)

    elif figure == 2:
        models = [_figure_model(FIGURE2_PARAMS, d) for d in FIGURE2_PENALTIES]
        cuts = [beta_cutoff(md, n).time for md in models]
        spots = np.arange(10.0, 30.0 + 1e-9, 0.5)
        rows = []
        for spot in spots:
            x0 = math.log(spot)
            amer = american_put(models[0], n, x0)
            games = [price_p2(md, n, x0, s, keep_surface=False).value
                     for md, s in zip(models, cuts)]
            rows.append([float(spot), amer] + games)
        path = out / "fig2_values.csv"
        _write_csv(str(path), _figure_header(FIGURE2_PARAMS, FIGURE2_PENALTIES, n),
                   ["spot", "american"] + [f"game_penalty_{repr(d)}" for d in FIGURE2_PENALTIES],
                   rows)
        written.append(path)

    elif figure == 3:
        base = dict(FIGURE1_PARAMS)
        base.pop("penalty")
        models = [_figure_model(base, d) for d in FIGURE3_PENALTIES]
        x0 = models[0].log_strike
        lattice = make_lattice(models[0], n, x0)
        american = optimal_stopping_backward(lattice, make_psi_exercise(lattice))
        a_lv = _boundary_prices_by_level(american, lattice)
        g_lvs = []
        for md in models:
            game = price_dynkin(md, n, x0)
            g_lvs.append(_boundary_prices_by_level(game.surface, make_lattice(md, n, x0)))
        rows = []
        for j in range(n + 1):
            rows.append([j * lattice.h, a_lv.get(j)] + [lv.get(j) for lv in g_lvs])
        path = out / "fig3_boundaries.csv"
        _write_csv(str(path), _figure_header(base, FIGURE3_PENALTIES, n),
                   ["t", "b_american"] + [f"b_game_penalty_{repr(d)}" for d in FIGURE3_PENALTIES],
                   rows)
        written.append(path)
    else:
        raise ConfigError(f"figure must be 1, 2 or 3, got {figure}")
    return written


def _add_common_args(p: argparse.ArgumentParser, with_ns: bool = False) -> None:
    p.add_argument("--strike", type=float)
    p.add_argument("--rate", type=float, help="interest rate per year")
    p.add_argument("--vol", type=float, help="volatility per sqrt-year")
    p.add_argument("--maturity", type=float, help="maturity in years")
    p.add_argument("--penalty", type=float, help="cancellation penalty")
    p.add_argument("--steps", type=int)
    p.add_argument("--spot", type=float)
    p.add_argument("--logprice", type=float)
    p.add_argument("--variant", choices=["p1", "p2", "dynkin", "american"])
    p.add_argument("--cutoff", choices=["beta", "gamma"])
    p.add_argument("--out", type=str)
    p.add_argument("--config", type=str, help="flat key=value config file")
    if with_ns:
        p.add_argument("--ns", type=str, help="comma-separated step counts")
        p.add_argument("--oracle-nx", dest="oracle_nx", type=int)
        p.add_argument("--oracle-nt", dest="oracle_nt", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gameput",
                                     description="Game (Israeli) put option pricing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common_args(sub.add_parser("price", help="price one contract"))
    _add_common_args(sub.add_parser("boundary", help="extract exercise/cancellation boundaries"))
    _add_common_args(sub.add_parser("study", help="convergence-rate study"), with_ns=True)
    fig = sub.add_parser("figures", help="reproduce standard figure data")
    fig.add_argument("--figure", type=int, required=True, choices=[1, 2, 3])
    fig.add_argument("--out", type=str, default=".")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figures":
            for path in cmd_figures(args.figure, args.out):
                print(path)
        else:
            config = _resolve_config(args, need_ns=args.command == "study")
            if args.command == "price":
                cmd_price(config)
            elif args.command == "boundary":
                cmd_boundary(config)
            elif args.command == "study":
                cmd_study(config)
        return EXIT_OK
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, FloatingPointError) as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
