"""Batch orchestration: TOML experiment configs, CSV/JSON/SVG reports.

Subcommands: theta, sweep, integral, case, affine, circle.  Exit codes:
0 success, 2 config error, 3 numerical failure.  All output files are written
atomically (temp file then rename) inside the configured output directory,
and contain no timestamps, so a rerun with the same config and seed is
byte-identical.  Numbers are serialized with 17 significant digits and exact
rationals as "numerator/denominator" strings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import caseplan, montecarlo, weights
from .core import AdmissibleSet, FlowParam, LatticeReductionError, admissible_sets
from .caseplan import CasePlanError
from .montecarlo import (
    AffineBumpObservable,
    AffineConstantObservable,
    CharacterObservable,
    ConstantObservable,
    Estimate,
    SiegelObservable,
    SweepResult,
    SweepRow,
    TrigPolyObservable,
)
from .rational_lp import LPError
from .testfns import BumpSpec, TrigPoly

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

MC_CSV_HEADER = "experiment_id,delta,gap,stderr,n,seed,t_vectors,max_sample"
THETA_CSV_HEADER = "m,n,I1,I2,theta_star,witness_s,witness_t,weight_i,weight_j,side"

STOCHASTIC_KINDS = ("sweep", "integral", "affine")
ALL_KINDS = ("theta", "sweep", "integral", "case", "affine", "circle")


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def fmt_frac(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def fmt_set(members: Sequence[int]) -> str:
    return ";".join(str(i) for i in members)


def atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    kind: str
    m: int
    n: int
    seed: int | None
    n_samples: int | None
    out_dir: str
    raw: dict

    def out_path(self, suffix: str) -> str:
        return os.path.join(self.out_dir, f"{self.id}.{suffix}")


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc

    kind = raw.get("kind")
    if kind not in ALL_KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {ALL_KINDS}")
    ident = raw.get("id")
    if not isinstance(ident, str) or not ident:
        raise ConfigError("config needs a nonempty string id")
    try:
        m = int(raw["m"])
        n = int(raw["n"])
    except KeyError as exc:
        raise ConfigError(f"config needs dimensions m and n: missing {exc}") from exc
    if m < 1 or n < 1:
        raise ConfigError("dimensions must be positive")

    seed = raw.get("seed")
    n_samples = raw.get("n_samples")
    if kind in STOCHASTIC_KINDS:
        if seed is None:
            raise ConfigError(f"kind {kind!r} requires an explicit seed (no wall-clock seeding)")
        seed = int(seed)
        if n_samples is None:
            raise ConfigError(f"kind {kind!r} requires n_samples")
        n_samples = int(n_samples)
        if n_samples < 2:
            raise ConfigError("n_samples must be at least 2")

    out = raw.get("output", {})
    out_dir = out.get("dir", ".")
    return ExperimentConfig(ident, kind, m, n, seed, n_samples, out_dir, raw)


def _parse_observable(spec: dict, m: int, n: int):
    kind = spec.get("type")
    if kind == "siegel":
        bump = BumpSpec(
            dim=m + n,
            radius=float(spec.get("radius", 2.0)),
            power=int(spec.get("power", 2)),
            amplitude=float(spec.get("amplitude", 1.0)),
        )
        return SiegelObservable(bump, m, n, offset=float(spec.get("offset", 0.0)))
    if kind == "constant":
        return ConstantObservable(float(spec.get("value", 1.0)), m, n)
    if kind == "character":
        if "k" not in spec:
            raise ConfigError("character observable needs a frequency k")
        return CharacterObservable(spec["k"], m, n)
    if kind == "trigpoly":
        return TrigPolyObservable(_parse_trigpoly(spec, m, n))
    raise ConfigError(f"unknown observable type {kind!r}")


def _parse_trigpoly(spec: dict, m: int, n: int) -> TrigPoly:
    coeffs = {}
    for row in spec.get("coeffs", []):
        if len(row) != m * n + 2:
            raise ConfigError("trigpoly coefficient rows must be [k..., re, im]")
        key = tuple(int(x) for x in row[: m * n])
        coeffs[key] = coeffs.get(key, 0) + complex(float(row[-2]), float(row[-1]))
    return TrigPoly(m, n, coeffs)


def _parse_observables(cfg: ExperimentConfig, expected: int | None = None):
    specs = cfg.raw.get("observables", [])
    if not specs:
        raise ConfigError("config needs at least one [[observables]] entry")
    obs = [_parse_observable(s, cfg.m, cfg.n) for s in specs]
    if expected is not None and len(obs) != expected:
        raise ConfigError(f"kind {cfg.kind!r} needs exactly {expected} observables")
    return obs


def _parse_flow(cfg: ExperimentConfig, values, name: str) -> FlowParam:
    try:
        return FlowParam(cfg.m, cfg.n, tuple(float(x) for x in values))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid flow parameter {name}: {exc}") from exc


def _parse_admissible(cfg: ExperimentConfig, members, name: str) -> AdmissibleSet:
    try:
        return AdmissibleSet(cfg.m, cfg.n, tuple(int(i) for i in members))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid admissible set {name}: {exc}") from exc


# ---------------------------------------------------------------------------
# JSON serialization with round-trip guarantees
# ---------------------------------------------------------------------------

def to_jsonable(x):
    if isinstance(x, Estimate):
        d = {
            "type": "estimate",
            "mean": _num(x.mean),
            "stderr": x.stderr,
            "n_samples": x.n_samples,
            "seed": x.seed,
            "max_sample": x.max_sample,
            "label": x.label,
        }
        if x.t_horizon is not None:
            d["t_horizon"] = x.t_horizon
        return d
    if isinstance(x, SweepRow):
        return {
            "type": "sweep_row",
            "delta": x.delta,
            "gap": x.gap,
            "stderr": x.stderr,
            "n_samples": x.n_samples,
            "seed": x.seed,
            "ts": [list(t) for t in x.ts],
            "max_sample": x.max_sample,
        }
    if isinstance(x, SweepResult):
        return {
            "type": "sweep",
            "rows": [to_jsonable(r) for r in x.rows],
            "fitted_eta": _num(x.fitted_eta),
            "fit_stderr": _num(x.fit_stderr),
            "fit_available": x.fit_available,
            "n_fit_rows": x.n_fit_rows,
        }
    raise TypeError(f"no JSON form for {type(x)!r}")


def from_jsonable(d):
    kind = d.get("type")
    if kind == "estimate":
        return Estimate(
            mean=_unnum(d["mean"]),
            stderr=d["stderr"],
            n_samples=d["n_samples"],
            seed=d["seed"],
            max_sample=d["max_sample"],
            label=d.get("label", ""),
            t_horizon=d.get("t_horizon"),
        )
    if kind == "sweep_row":
        return SweepRow(
            delta=d["delta"],
            gap=d["gap"],
            stderr=d["stderr"],
            n_samples=d["n_samples"],
            seed=d["seed"],
            ts=tuple(tuple(t) for t in d["ts"]),
            max_sample=d["max_sample"],
        )
    if kind == "sweep":
        return SweepResult(
            rows=tuple(from_jsonable(r) for r in d["rows"]),
            fitted_eta=_unnum(d["fitted_eta"]),
            fit_stderr=_unnum(d["fit_stderr"]),
            fit_available=d["fit_available"],
            n_fit_rows=d["n_fit_rows"],
        )
    raise TypeError(f"cannot rebuild object of type {kind!r}")


def _num(x):
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def _unnum(x):
    if isinstance(x, dict):
        return complex(x["re"], x["im"])
    if x == "nan":
        return float("nan")
    return x


def emit_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# CSV and SVG emission
# ---------------------------------------------------------------------------

def _mc_csv(rows: list[dict]) -> str:
    if not rows:
        raise ValueError("no rows to emit")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MC_CSV_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [
                r["experiment_id"],
                fmt(r["delta"]),
                fmt(r["gap"]),
                fmt(r["stderr"]),
                r["n"],
                r["seed"],
                json.dumps(r["t_vectors"]),
                fmt(r["max_sample"]),
            ]
        )
    return buf.getvalue()


def _sweep_rows(cfg_id: str, sweep: SweepResult) -> list[dict]:
    return [
        {
            "experiment_id": cfg_id,
            "delta": r.delta,
            "gap": r.gap,
            "stderr": r.stderr,
            "n": r.n_samples,
            "seed": r.seed,
            "t_vectors": [list(t) for t in r.ts],
            "max_sample": r.max_sample,
        }
        for r in sweep.rows
    ]


def sweep_svg(sweep: SweepResult) -> str:
    """Log-linear plot of |gap| against the spread, whiskers at 3 standard errors."""
    width, height = 640, 440
    ml, mr, mt, mb = 70, 20, 20, 50
    rows = sweep.rows
    xs = [r.delta for r in rows]
    floor = 1e-300
    mags = [max(abs(r.gap), floor) for r in rows]
    los = [max(abs(r.gap) - 3 * r.stderr, floor) for r in rows]
    his = [max(abs(r.gap) + 3 * r.stderr, floor) for r in rows]
    ymin = math.log10(min(min(los), min(mags)))
    ymax = math.log10(max(max(his), max(mags)))
    ymin = max(ymin, ymax - 12.0)  # keep a readable span even with zero gaps
    if ymax <= ymin:
        ymax = ymin + 1.0
    xmin, xmax = min(xs), max(xs)
    if xmax <= xmin:
        xmax = xmin + 1.0

    def X(x):
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr)

    def Y(logy):
        return height - mb - (logy - ymin) / (ymax - ymin) * (height - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
        f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">spread</text>',
        f'<text x="18" y="{(mt + height - mb) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(mt + height - mb) / 2:.1f})">|gap| (log scale)</text>',
    ]
    for x in sorted(set(xs)):
        parts.append(
            f'<text x="{X(x):.1f}" y="{height - mb + 18}" text-anchor="middle" '
            f'font-size="11">{x:g}</text>'
        )
    k = int(math.floor(ymin))
    while k <= math.ceil(ymax):
        if ymin <= k <= ymax:
            parts.append(
                f'<text x="{ml - 8}" y="{Y(k) + 4:.1f}" text-anchor="end" '
                f'font-size="11">1e{k}</text>'
            )
            parts.append(
                f'<line x1="{ml}" y1="{Y(k):.1f}" x2="{width - mr}" y2="{Y(k):.1f}" '
                f'stroke="#dddddd"/>'
            )
        k += 1
    for x, lo, hi in zip(xs, los, his):
        parts.append(
            f'<line class="whisker" x1="{X(x):.1f}" y1="{Y(math.log10(lo)):.1f}" '
            f'x2="{X(x):.1f}" y2="{Y(math.log10(hi)):.1f}" stroke="#888888"/>'
        )
    for x, mag in zip(xs, mags):
        parts.append(
            f'<circle class="point" cx="{X(x):.1f}" cy="{Y(math.log10(mag)):.1f}" r="4" '
            f'fill="#1f60a8"/>'
        )
    if sweep.fit_available:
        usable = [r for r in rows if abs(r.gap) > 3 * r.stderr and r.gap != 0.0]
        x0, x1 = min(r.delta for r in usable), max(r.delta for r in usable)
        # intercept from the least-squares fit through the usable rows
        xbar = sum(r.delta for r in usable) / len(usable)
        ybar = sum(math.log(abs(r.gap)) for r in usable) / len(usable)
        ln10 = math.log(10.0)

        def fit_log10(x):
            return (ybar - sweep.fitted_eta * (x - xbar)) / ln10

        parts.append(
            f'<line class="fit" x1="{X(x0):.1f}" y1="{Y(fit_log10(x0)):.1f}" '
            f'x2="{X(x1):.1f}" y2="{Y(fit_log10(x1)):.1f}" stroke="#c23b22" '
            f'stroke-width="2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(results, fmt_name: str, path: str, experiment_id: str = "experiment") -> None:
    """Write a result object in one of the supported formats, atomically."""
    if fmt_name == "json":
        atomic_write(path, emit_json(results))
    elif fmt_name == "csv":
        if not isinstance(results, SweepResult):
            raise ValueError("csv reports are defined for sweep results")
        atomic_write(path, _mc_csv(_sweep_rows(experiment_id, results)))
    elif fmt_name == "svg":
        if not isinstance(results, SweepResult):
            raise ValueError("svg reports are only defined for sweep results")
        atomic_write(path, sweep_svg(results))
    else:
        raise ValueError(f"unknown format {fmt_name!r}")


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def theta_table(m: int, n: int, mode: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(THETA_CSV_HEADER.split(","))
    sets = admissible_sets(m, n)
    if len(sets) < 2:
        raise ValueError(f"no distinct admissible pair exists at (m, n) = ({m}, {n})")
    for I1 in sets:
        for I2 in sets:
            if I1.members == I2.members:
                continue
            cert = weights.optimal_theta(m, n, I1, I2, mode=mode)
            writer.writerow(
                [
                    m,
                    n,
                    fmt_set(I1.members),
                    fmt_set(I2.members),
                    fmt_frac(cert.theta_star),
                    ";".join(fmt_frac(v) for v in cert.witness_s),
                    ";".join(fmt_frac(v) for v in cert.witness_t),
                    cert.achieving_weight.i,
                    cert.achieving_weight.j,
                    cert.achieving_side,
                ]
            )
    return buf.getvalue()


def _run_theta(args) -> int:
    mode = args.mode
    table = theta_table(args.m, args.n, mode)
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        atomic_write(args.out, table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def _run_sweep(cfg: ExperimentConfig) -> int:
    obs = _parse_observables(cfg)
    section = cfg.raw.get("sweep", {})
    base = _parse_flow(cfg, section.get("base_t", [0.0] * (cfg.m + cfg.n)), "base_t")
    direction = _parse_flow(cfg, section.get("direction"), "direction")
    deltas = section.get("deltas")
    if not deltas:
        raise ConfigError("sweep needs a nonempty deltas grid")
    result = montecarlo.decay_sweep(
        obs, base, direction, [float(d) for d in deltas], cfg.n_samples, cfg.seed
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write(cfg.out_path("csv"), _mc_csv(_sweep_rows(cfg.id, result)))
    atomic_write(cfg.out_path("json"), emit_json(result))
    atomic_write(cfg.out_path("svg"), sweep_svg(result))
    return EXIT_OK


def _run_integral(cfg: ExperimentConfig) -> int:
    obs = _parse_observables(cfg, expected=1)[0]
    section = cfg.raw.get("integral", {})
    if "I" in section:
        I = _parse_admissible(cfg, section["I"], "I")
        T = float(section.get("T", 8.0))
        est = montecarlo.estimate_muI_integral(obs, I, T, cfg.n_samples, cfg.seed)
        t = montecarlo.balanced_support_param(I, T)
    else:
        t = _parse_flow(cfg, section.get("t"), "t")
        est = montecarlo.estimate_nu_integral(obs, t, cfg.n_samples, cfg.seed)
    row = {
        "experiment_id": cfg.id,
        "delta": 0.0,
        "gap": float(est.mean.real if isinstance(est.mean, complex) else est.mean),
        "stderr": est.stderr,
        "n": est.n_samples,
        "seed": est.seed,
        "t_vectors": [list(t.coords)],
        "max_sample": est.max_sample,
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write(cfg.out_path("csv"), _mc_csv([row]))
    atomic_write(cfg.out_path("json"), emit_json(est))
    return EXIT_OK


def _run_case(cfg: ExperimentConfig) -> int:
    section = cfg.raw.get("case", {})
    tuple_file = section.get("tuple_file")
    if not tuple_file:
        raise ConfigError("case needs case.tuple_file (JSON list of coordinate vectors)")
    try:
        with open(tuple_file, "r", encoding="utf-8") as fh:
            vectors = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"tuple file not found: {tuple_file}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed tuple file: {exc}") from exc
    if not isinstance(vectors, list) or not vectors:
        raise ConfigError("tuple file must hold a nonempty JSON list of vectors")
    ts = [_parse_flow(cfg, v, f"tuple[{i}]") for i, v in enumerate(vectors)]
    constants = caseplan.recursion_constants(
        cfg.m,
        cfg.n,
        len(ts),
        ell=int(section.get("ell", 1)),
        delta=float(section.get("delta", 1.0)),
        slack=float(section.get("slack", 1.1)),
    )
    trace = caseplan.classify_case(ts, constants)
    out_format = section.get("format", "text")
    if out_format == "json":
        text = json.dumps(trace.to_dict(), indent=2, sort_keys=True) + "\n"
    elif out_format == "text":
        text = format_trace(trace)
    else:
        raise ConfigError("case.format must be 'text' or 'json'")
    sys.stdout.write(text)
    if cfg.raw.get("output", {}).get("dir"):
        os.makedirs(cfg.out_dir, exist_ok=True)
        suffix = "json" if out_format == "json" else "txt"
        atomic_write(cfg.out_path(suffix), text)
    return EXIT_OK


def format_trace(trace: caseplan.CaseTrace) -> str:
    lines = [f"spread = {fmt(trace.delta)}"]
    for s in trace.steps:
        lines.append(f"level {s.level}  case {s.tag}  (restart {s.restart}, multiplier {fmt(s.multiplier)})")
        for idx, members in zip(s.live, s.sets):
            lines.append(f"    factor {idx}: I = {{{', '.join(map(str, members))}}}")
        if s.J is not None:
            for idx, members in zip(s.live, s.J):
                if members:
                    lines.append(f"    factor {idx}: enlarge by {{{', '.join(map(str, members))}}}")
        if s.absorbed is not None:
            lines.append(f"    absorb factor {s.absorbed}")
    lines.append(f"terminal: {trace.terminal} at level {trace.terminal_level}")
    return "\n".join(lines) + "\n"


def _run_affine(cfg: ExperimentConfig) -> int:
    section = cfg.raw.get("affine", {})
    specs = cfg.raw.get("observables", [])
    if len(specs) != 2:
        raise ConfigError("affine needs exactly two observables")
    obs = []
    for s in specs:
        if s.get("type") == "siegel":
            obs.append(
                AffineBumpObservable(
                    BumpSpec(
                        dim=2,
                        radius=float(s.get("radius", 2.0)),
                        power=int(s.get("power", 2)),
                        amplitude=float(s.get("amplitude", 1.0)),
                    )
                )
            )
        elif s.get("type") == "constant":
            obs.append(AffineConstantObservable(float(s.get("value", 1.0))))
        else:
            raise ConfigError("affine observables must be siegel bumps or constants")
    if (cfg.m, cfg.n) != (1, 1):
        raise ConfigError("affine experiments are 2-dimensional: m = n = 1")
    w = section.get("w")
    if not w or len(w) != 2:
        raise ConfigError("affine needs a direction w with two components")
    L = float(section.get("L", 1.0))
    T = float(section.get("T", 4.0))
    result = montecarlo.affine_mean_decorrelation(
        obs[0],
        obs[1],
        [float(x) for x in w],
        L,
        T,
        cfg.n_samples,
        cfg.seed,
        n_fiber=int(section.get("n_fiber", 64)),
        grid_points=int(section.get("grid_points", 64)),
    )
    wnorm = max(abs(float(x)) for x in w)
    rows = [
        {
            "experiment_id": cfg.id,
            "delta": L * wnorm,
            "gap": float(result.gap.mean),
            "stderr": result.gap.stderr,
            "n": result.gap.n_samples,
            "seed": result.gap.seed,
            "t_vectors": [[T, T]],
            "max_sample": max(result.correlated.max_sample, result.main_term.max_sample),
        }
    ]
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write(cfg.out_path("csv"), _mc_csv(rows))
    payload = {
        "correlated": to_jsonable(result.correlated),
        "main_term": to_jsonable(result.main_term),
        "gap": to_jsonable(result.gap),
    }
    atomic_write(cfg.out_path("json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _run_circle(cfg: ExperimentConfig) -> int:
    section = cfg.raw.get("circle", {})
    specs = cfg.raw.get("observables", [])
    if len(specs) != 2:
        raise ConfigError("circle needs exactly two trigpoly observables")
    polys = [_parse_trigpoly(s, 1, 1) for s in specs]
    Ls = section.get("L")
    if Ls is None:
        raise ConfigError("circle needs one or more window lengths L")
    if not isinstance(Ls, list):
        Ls = [Ls]
    rows = []
    payload = []
    for L in Ls:
        res = montecarlo.circle_mean_decorrelation(polys[0], polys[1], float(L))
        rows.append(
            {
                "experiment_id": cfg.id,
                "delta": float(L),
                "gap": res.gap.real,
                "stderr": 0.0,
                "n": 0,
                "seed": 0,
                "t_vectors": [],
                "max_sample": abs(res.value),
            }
        )
        payload.append(
            {
                "L": float(L),
                "value": _num(res.value),
                "main_term": _num(res.main_term),
                "gap": _num(res.gap),
            }
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    atomic_write(cfg.out_path("csv"), _mc_csv(rows))
    atomic_write(cfg.out_path("json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def run_experiment(config_path: str) -> int:
    """Load a config and run it; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        runner = {
            "sweep": _run_sweep,
            "integral": _run_integral,
            "case": _run_case,
            "affine": _run_affine,
            "circle": _run_circle,
        }.get(cfg.kind)
        if runner is None:
            raise ConfigError(f"kind {cfg.kind!r} is not driven by a config file")
        return runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LPError, CasePlanError, LatticeReductionError, OverflowError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # domain errors from validated inputs are config mistakes
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="latflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_theta = sub.add_parser("theta", help="exact separation-constant table")
    p_theta.add_argument("--m", type=int, required=True)
    p_theta.add_argument("--n", type=int, required=True)
    p_theta.add_argument("--mode", choices=["balanced", "unbalanced"], default="balanced")
    p_theta.add_argument("--out", default=None, help="CSV path (default: stdout)")

    for kind in ("sweep", "integral", "case", "affine", "circle"):
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a TOML config")
        p.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.command == "theta":
        try:
            return _run_theta(args)
        except (LPError, OverflowError) as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return run_experiment(args.config)


if __name__ == "__main__":
    sys.exit(main())
