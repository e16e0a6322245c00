"""Command-line entry point: ``validate``, ``analyze`` and ``simulate``.

Every output file is written deterministically: no timestamps, sorted JSON
keys, numbers rounded to 12 significant digits, dates as ``YYYY-MM``.
"""

from __future__ import annotations

import argparse
import collections
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import r2_ranking, scree_data
from .engine import DEFAULT_RMAX, PENALTIES, decompose, estimate_factors, select_num_factors
from .panel import (
    PanelError,
    format_month,
    load_kred_metadata,
    parse_month,
    parse_panel_csv,
    read_metadata,
    standardize,
    write_panel_csv,
)
from .pipeline import DEFAULT_DROP, DEFAULT_END, DEFAULT_START, AnalysisResult, analyze, choose_r
from .synth import SynthSpec, generate, subspace_fit

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


def _num(x: float) -> float | str | None:
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


def _cell(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "" if math.isnan(x) else f"{x:.12g}"
    return str(x)


def _write_json(path: Path, payload: Any) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def _write_table(out: Path, stem: str, fmt: str, header: list[str], rows: list[list[Any]],
                 extra: dict[str, Any] | None = None) -> str:
    """Write ``rows`` as ``stem.csv`` or ``stem.json``; returns the file name."""
    if fmt == "csv":
        name = f"{stem}.csv"
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        return name
    name = f"{stem}.json"
    records = [
        {h: (_num(v) if isinstance(v, (float, np.floating)) else v) for h, v in zip(header, row)}
        for row in rows
    ]
    payload: dict[str, Any] = {"columns": header, "rows": records}
    if extra:
        payload.update(extra)
    _write_json(out / name, payload)
    return name


# --------------------------------------------------------------------------- #
# config
# --------------------------------------------------------------------------- #


def _split_list(text: str | None) -> list[str]:
    if text is None:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _penalties(text: str | None) -> list[str]:
    names = _split_list(text) if text is not None else list(PENALTIES)
    bad = [n for n in names if n not in PENALTIES]
    if bad:
        raise ConfigError(f"unknown penalty {', '.join(bad)}; choose from {', '.join(PENALTIES)}")
    return [p for p in PENALTIES if p in names]


def _load_metadata(args: argparse.Namespace):
    if args.meta:
        return read_metadata(args.meta)
    return load_kred_metadata()


def _read_input(args: argparse.Namespace):
    if not args.input:
        raise ConfigError("--input is required")
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    return parse_panel_csv(path.read_text(encoding="utf-8"), _load_metadata(args))


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #


def cmd_validate(args: argparse.Namespace) -> int:
    panel = _read_input(args)
    hist = collections.Counter(m.tcode for m in panel.meta)
    report = {
        "input": args.input,
        "q": panel.q,
        "T": panel.T,
        "first_date": format_month(panel.dates[0]),
        "last_date": format_month(panel.dates[-1]),
        "missing_counts": panel.missing_counts(),
        "tcode_histogram": {str(c): hist.get(c, 0) for c in sorted(hist)},
        "groups": {str(g): n for g, n in sorted(collections.Counter(m.group for m in panel.meta).items())},
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def _analysis_config(args: argparse.Namespace) -> dict[str, Any]:
    start = parse_month(args.start) if args.start else DEFAULT_START
    end = parse_month(args.end) if args.end else DEFAULT_END
    if start > end:
        raise ConfigError(f"window start {format_month(start)} is after end {format_month(end)}")
    drop = _split_list(args.drop) if args.drop is not None else list(DEFAULT_DROP)
    if args.rmax < 1:
        raise ConfigError("--rmax must be at least 1")
    if args.r is not None and args.r < 1:
        raise ConfigError("--r must be at least 1")
    penalties = _penalties(args.penalty)
    if args.r is None and not penalties:
        raise ConfigError("at least one penalty is required unless --r is given")
    return {
        "input": args.input,
        "meta": args.meta,
        "start": start,
        "end": end,
        "drop": drop,
        "rmax": args.rmax,
        "penalties": penalties,
        "r": args.r,
        "format": args.format,
    }


def _emit_analysis(res: AnalysisResult, out: Path, fmt: str) -> list[str]:
    r = res.r
    dates = [format_month(d) for d in res.z.dates]
    files = []
    fac_cols = [f"F{k}" for k in range(1, r + 1)]

    files.append(_write_table(
        out, "factors", fmt, ["date", *fac_cols],
        [[d, *res.model.factors[:, t]] for t, d in enumerate(dates)],
    ))
    files.append(_write_table(
        out, "loadings", fmt, ["mnemonic", "group", *[f"L{k}" for k in range(1, r + 1)]],
        [[m.mnemonic, m.group, *res.model.loadings[i]] for i, m in enumerate(res.z.meta)],
    ))
    files.append(_write_table(
        out, "scree", fmt, ["rank", "eigenvalue", "share", "cumulative"],
        [list(row) for row in scree_data(res.eig)],
    ))
    if res.ic is not None:
        names = list(res.ic.curves)
        files.append(_write_table(
            out, "ic_report", fmt, ["r", "ssr", *names],
            [[k, res.ic.ssr[k - 1], *(res.ic.curves[n][k - 1] for n in names)]
             for k in range(1, res.ic.rmax + 1)],
            extra={"rmax": res.ic.rmax, "selected": dict(res.ic.selected)},
        ))
    t = res.table
    files.append(_write_table(
        out, "mr2_table", fmt,
        ["mnemonic", "group", *[f"R2_{k}" for k in range(1, r + 1)],
         *[f"mR2_{k}" for k in range(1, r + 1)]],
        [[name, g, *t.r2[i], *t.mr2[i]] for i, (name, g) in enumerate(zip(t.mnemonics, t.groups))],
        extra={"average_mr2": [_num(v) for v in t.average_mr2], "total": _num(t.total)},
    ))
    ranking, over_half = r2_ranking(t)
    files.append(_write_table(
        out, "r2_ranking", fmt, ["rank", "mnemonic", "group", "R2"],
        [[j, s.mnemonic, s.group, s.value] for j, s in enumerate(ranking, start=1)],
        extra={"count_r2_over_0.5": over_half},
    ))
    di = res.diffusion.values
    files.append(_write_table(
        out, "diffusion", fmt, ["date", *[f"DI{k}" for k in range(1, r + 1)]],
        [[d, *di[:, j]] for j, d in enumerate(dates)],
    ))
    return files


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _analysis_config(args)
    if not args.out:
        raise ConfigError("--out is required")
    raw = _read_input(args)
    res = analyze(raw, cfg["start"], cfg["end"], cfg["drop"], cfg["rmax"], cfg["penalties"], cfg["r"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _emit_analysis(res, out, cfg["format"])
    ssr = res.model.ssr
    _, over_half = r2_ranking(res.table)
    manifest = {
        "command": "analyze",
        "version": __version__,
        "config": {
            **cfg,
            "start": format_month(cfg["start"]),
            "end": format_month(cfg["end"]),
            "effective_rmax": res.ic.rmax if res.ic else None,
        },
        "q": res.z.q,
        "T": res.z.T,
        "first_date": format_month(res.z.dates[0]),
        "last_date": format_month(res.z.dates[-1]),
        "selected": dict(res.ic.selected) if res.ic else None,
        "r": res.r,
        "r_source": res.r_source,
        "variance_explained": _num(res.variance_explained),
        "total_r2": _num(res.table.total),
        "average_mr2": [_num(v) for v in res.table.average_mr2],
        "count_r2_over_0.5": over_half,
        "residual_ssr": _num(ssr),
        "residual_rms": _num(math.sqrt(ssr / (res.z.q * res.z.T))),
        "series": list(res.z.mnemonics),
        "files": sorted(files),
    }
    _write_json(out / "manifest.json", manifest)
    print(f"q={res.z.q} T={res.z.T} r={res.r} ({res.r_source}) "
          f"variance explained={res.variance_explained:.4f}")
    if res.ic:
        print("selected: " + ", ".join(f"{k}={v}" for k, v in res.ic.selected.items()))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    penalties = _penalties(args.penalty)
    if not penalties:
        raise ConfigError("at least one penalty is required")
    if args.n_seeds < 1:
        raise ConfigError("--n-seeds must be at least 1")
    if args.rmax < 1:
        raise ConfigError("--rmax must be at least 1")
    try:
        specs = [SynthSpec(args.q, args.t, args.r_true, args.noise_sd, args.seed + k)
                 for k in range(args.n_seeds)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not args.out:
        raise ConfigError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rmax = min(args.rmax, args.q, args.t)

    rows = []
    for spec in specs:
        draw = generate(spec)
        z = standardize(draw.panel)
        eig = decompose(z)
        ic = select_num_factors(z, rmax, penalties, eig=eig)
        model = estimate_factors(z, spec.r_true, eig=eig)
        fit = subspace_fit(draw.factors, model.factors)
        rows.append([spec.seed, *(ic.selected[p] for p in penalties), fit])
        if len(specs) == 1:
            write_panel_csv(draw.panel, out / "panel.csv")

    files = [_write_table(out, "recovery", args.format,
                          ["seed", *[f"rhat_{p}" for p in penalties], "subspace_fit"], rows)]
    if len(specs) == 1:
        files.append("panel.csv")
    fits = np.array([row[-1] for row in rows])
    summary = {}
    for j, p in enumerate(penalties, start=1):
        picks = collections.Counter(row[j] for row in rows)
        summary[p] = {
            "recovery_rate": _num(picks.get(args.r_true, 0) / len(rows)),
            "distribution": {str(k): picks[k] for k in sorted(picks)},
        }
    manifest = {
        "command": "simulate",
        "version": __version__,
        "config": {
            "q": args.q, "T": args.t, "r_true": args.r_true, "noise_sd": args.noise_sd,
            "seed": args.seed, "n_seeds": args.n_seeds, "rmax": args.rmax,
            "effective_rmax": rmax, "penalties": penalties, "format": args.format,
        },
        "generator": "numpy PCG64, SeedSequence(seed); draws: loadings, factors, noise",
        "recovery": summary,
        "subspace_fit_mean": _num(fits.mean()),
        "subspace_fit_min": _num(fits.min()),
        "files": sorted(files),
    }
    _write_json(out / "manifest.json", manifest)
    for p in penalties:
        print(f"{p}: recovered r={args.r_true} in {summary[p]['distribution'].get(str(args.r_true), 0)}"
              f"/{len(rows)} runs")
    print(f"mean subspace fit {fits.mean():.6f}")
    return EXIT_OK


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kredfactor",
        description="Principal-component factor analysis of FRED-MD style monthly panels.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    v = sub.add_parser("validate", help="parse a panel and report its shape and gaps")
    v.add_argument("--input", required=True)
    v.add_argument("--meta", help="series metadata CSV (default: bundled KRED list)")
    v.add_argument("--out", help="also write validate.json here")
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("analyze", help="estimate factors and write tables")
    a.add_argument("--input", required=True)
    a.add_argument("--meta", help="series metadata CSV (default: bundled KRED list)")
    a.add_argument("--start", help=f"YYYY-MM (default {format_month(DEFAULT_START)})")
    a.add_argument("--end", help=f"YYYY-MM (default {format_month(DEFAULT_END)})")
    a.add_argument("--drop", help="comma-separated mnemonics to exclude; '' for none "
                                  f"(default {','.join(DEFAULT_DROP)})")
    a.add_argument("--rmax", type=int, default=DEFAULT_RMAX)
    a.add_argument("--penalty", help="comma-separated subset of g1,g2,g3 (default all)")
    a.add_argument("--r", type=int, help="fix the number of factors, skipping the criteria")
    common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="planted-factor recovery experiment")
    s.add_argument("--q", type=int, default=80)
    s.add_argument("--t", "--T", dest="t", type=int, default=184)
    s.add_argument("--r-true", type=int, default=4)
    s.add_argument("--noise-sd", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-seeds", type=int, default=1)
    s.add_argument("--rmax", type=int, default=DEFAULT_RMAX)
    s.add_argument("--penalty", help="comma-separated subset of g1,g2,g3 (default all)")
    common(s)
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PanelError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
