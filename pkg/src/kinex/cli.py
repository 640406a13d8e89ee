"""``kinex`` command line: correlate, map, regress, simulate, gini-curve.

Every command writes plot-ready JSON/CSV plus a ``manifest.json`` into
``--out``. Errors are printed to stderr as ``<CODE>: <message>`` and the
exit status is non-zero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from kinex import __version__
from kinex.comove import DistanceMatrix, classical_mds, correlation_matrix, distance_matrix, mst
from kinex.errors import KinexError, UsageError
from kinex.kem import (
    GammaLaw,
    SimConfig,
    gini_curve,
    histogram,
    n_of_lambda,
    sample_gini,
    simulate,
)
from kinex.panel import (
    CleaningPolicy,
    IndicatorKind,
    clean_panel,
    format_number,
    parse_code_list,
    read_panel,
)
from kinex.regress import cross_indicator_correlation, cross_section, ols_fit


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite_or_none(obj.item())
    return obj


def dump_json(obj) -> str:
    return json.dumps(_finite_or_none(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _digest(path: str) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, params: dict, inputs: list[str], **extra) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "inputs": {p: _digest(p) for p in inputs},
        "tool_version": f"kinex {__version__}",
    }
    manifest.update(extra)
    _write(out / "manifest.json", dump_json(manifest))


def _policy(args, indicator: IndicatorKind) -> CleaningPolicy:
    overrides = {"min_overlap": args.min_overlap}
    if args.drop_negative is not None:
        overrides["drop_negative"] = args.drop_negative
    return CleaningPolicy.default_for(indicator, **overrides)


def _load_panel(args):
    indicator = IndicatorKind(args.indicator)
    policy = _policy(args, indicator)
    panel = read_panel(args.panel, indicator)
    countries = parse_code_list(args.countries.split(",")) if args.countries else None
    panel = panel.select(countries, args.first_year, args.last_year)
    return clean_panel(panel, policy), policy


def _correlate(panel, policy):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        corr = correlation_matrix(panel, policy)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return corr


def _panel_params(args) -> dict:
    return {
        "panel": args.panel,
        "indicator": args.indicator,
        "min_overlap": args.min_overlap,
        "drop_negative": args.drop_negative,
        "countries": args.countries,
        "first_year": args.first_year,
        "last_year": args.last_year,
    }


def cmd_correlate(args) -> None:
    panel, policy = _load_panel(args)
    corr = _correlate(panel, policy)
    dist = distance_matrix(corr)
    out = args.out
    _write(out / "correlation.json", dump_json(corr.to_json()))
    _write(out / "distance.json", dump_json(dist.to_json()))
    _write(out / "dropped.json", dump_json({"dropped": corr.dropped}))
    _write_manifest(out, "correlate", _panel_params(args), [args.panel])


def cmd_map(args) -> None:
    if (args.panel is None) == (args.distances is None):
        raise UsageError("give exactly one of a panel CSV or --distances JSON")
    if args.distances is not None:
        dist = DistanceMatrix.from_json(json.loads(Path(args.distances).read_text(encoding="utf-8")))
        inputs = [args.distances]
    else:
        panel, policy = _load_panel(args)
        dist = distance_matrix(_correlate(panel, policy))
        inputs = [args.panel]

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        emb = classical_mds(dist, args.mds_dims)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write(args.out / "embedding.json", dump_json(emb.to_json()))
    if args.mst:
        _write(args.out / "tree.json", dump_json(mst(dist).to_json()))
    params = _panel_params(args) | {"distances": args.distances, "mds_dims": args.mds_dims, "mst": args.mst}
    _write_manifest(args.out, "map", params, inputs)


def cmd_regress(args) -> None:
    gini_policy = CleaningPolicy.default_for(IndicatorKind.GINI, min_overlap=args.min_overlap)
    gds_policy = CleaningPolicy.default_for(IndicatorKind.GDS, min_overlap=args.min_overlap)
    gini = clean_panel(read_panel(args.gini, IndicatorKind.GINI), gini_policy)
    gds = clean_panel(read_panel(args.gds, IndicatorKind.GDS), gds_policy)

    codes, x, y = cross_section(gini, gds, args.year)
    result = ols_fit(x, y)
    fitted = result.predict(x)
    report = {"year": args.year, "countries": list(codes), "x": "gds", "y": "gini", **result.to_json()}
    if args.within:
        report["within_country_correlation"] = {
            code: cross_indicator_correlation(gini, gds, code, gini_policy) for code in args.within
        }
    _write(args.out / "regression.json", dump_json(report))
    rows = [(c, float(a), float(b), float(f)) for c, a, b, f in zip(codes, x, y, fitted)]
    _write(args.out / "scatter.csv", _csv_text(["country", "x", "y", "fitted"], rows))
    params = {"gini": args.gini, "gds": args.gds, "year": args.year,
              "min_overlap": args.min_overlap, "within": args.within}
    _write_manifest(args.out, "regress", params, [args.gini, args.gds])


def _sim_config(args, lam: float = 0.0) -> SimConfig:
    return SimConfig(
        n_agents=args.agents,
        lam=lam,
        sweeps=args.sweeps,
        thermalization=args.thermalization,
        seed=args.seed,
        initial_wealth=args.initial_wealth,
        snapshot_every=args.snapshot_every,
    )


def cmd_simulate(args) -> None:
    config = _sim_config(args, args.lam)
    result = simulate(config)
    ginis = result.snapshot_ginis()
    out = args.out
    meta = result.metadata()
    meta["final_sample_gini"] = sample_gini(result.state.wealths)
    meta["mean_snapshot_gini"] = float(ginis.mean()) if ginis.size else None
    _write(out / "metadata.json", dump_json(meta))
    _write(
        out / "snapshots.csv",
        _csv_text(["snapshot", "sweep", "gini"],
                  [(k, s, float(g)) for k, (s, g) in enumerate(zip(result.snapshot_sweeps, ginis))]),
    )
    _write(out / "final_wealth.csv",
           _csv_text(["agent", "wealth"], [(k, float(w)) for k, w in enumerate(result.state.wealths)]))
    if args.bins > 0 and result.snapshots.size:
        h = histogram(result.snapshots, GammaLaw(n_of_lambda(config.lam), config.initial_wealth), args.bins)
        cols = ["left", "right", "count", "empirical_density", "analytic_density"]
        rows = [
            (float(a), float(b), int(c), float(e), float(d))
            for a, b, c, e, d in zip(*(h[k] for k in cols))
        ]
        _write(out / "histogram.csv", _csv_text(cols, rows))
    diagnostics = {
        "relative_drift": result.drift,
        "total_wealth_initial": meta["total_wealth_initial"],
        "total_wealth_final": meta["total_wealth_final"],
    }
    params = {**meta["config"], "bins": args.bins}
    _write_manifest(out, "simulate", params, [], diagnostics=diagnostics)


def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    if ":" in text:
        try:
            start, step, stop = (float(p) for p in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}: expected start:step:stop") from None
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def cmd_gini_curve(args) -> None:
    config = _sim_config(args)
    curve = gini_curve(args.lambda_grid, config, threads=args.threads)
    rows = [
        (p.lam, n_of_lambda(p.lam), p.gini_analytic, p.gini_monte_carlo, p.mc_std_error)
        for p in curve.points
    ]
    _write(args.out / "gini_curve.csv",
           _csv_text(["lambda", "n", "gini_analytic", "gini_monte_carlo", "mc_std_error"], rows))
    params = {"lambda_grid": args.lambda_grid, **{k: v for k, v in asdict(config).items() if k != "lam"}}
    _write_manifest(args.out, "gini-curve", params, [])


def _add_panel_flags(p: argparse.ArgumentParser, panel_optional: bool = False) -> None:
    if panel_optional:
        p.add_argument("panel", nargs="?", help="wide CSV panel: country,<year>,...")
    else:
        p.add_argument("panel", help="wide CSV panel: country,<year>,...")
    p.add_argument("--indicator", choices=[k.value for k in IndicatorKind], default="gini")
    p.add_argument("--min-overlap", type=int, default=8,
                   help="minimum common non-missing years per country pair")
    neg = p.add_mutually_exclusive_group()
    neg.add_argument("--drop-negative", dest="drop_negative", action="store_true", default=None,
                     help="treat negative values as missing (default for gds)")
    neg.add_argument("--keep-negative", dest="drop_negative", action="store_false",
                     help="keep negative values (default for gini)")
    p.add_argument("--countries", help="comma-separated country codes to keep")
    p.add_argument("--first-year", type=int)
    p.add_argument("--last-year", type=int)


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--agents", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=5000, help="measurement sweeps")
    p.add_argument("--thermalization", type=int, default=1000, help="discarded warm-up sweeps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-wealth", type=float, default=1.0)
    p.add_argument("--snapshot-every", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kinex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("correlate", cmd_correlate, "correlation and distance matrices of a panel")
    _add_panel_flags(p)

    p = add("map", cmd_map, "MDS embedding and optional minimum spanning tree")
    _add_panel_flags(p, panel_optional=True)
    p.add_argument("--distances", help="distance matrix JSON {labels, rows} instead of a panel")
    p.add_argument("--mds-dims", type=int, default=2)
    p.add_argument("--mst", action="store_true", help="also write the minimum spanning tree")

    p = add("regress", cmd_regress, "cross-country OLS of Gini on savings for one year")
    p.add_argument("gini", help="Gini panel CSV")
    p.add_argument("gds", help="Gross Domestic Savings panel CSV")
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--within", action="append", type=str.upper, metavar="CODE",
                   help="also report the Gini/savings time-series correlation for this country")
    p.add_argument("--min-overlap", type=int, default=8)

    p = add("simulate", cmd_simulate, "run the saving-propensity exchange model")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="saving propensity in [0, 1)")
    _add_sim_flags(p)
    p.add_argument("--bins", type=int, default=50, help="histogram bins (0 disables)")

    p = add("gini-curve", cmd_gini_curve, "analytic vs Monte Carlo Gini across saving propensities")
    p.add_argument("--lambda-grid", type=parse_grid, default=parse_grid("0:0.1:0.9"),
                   help="start:step:stop or comma list (default 0:0.1:0.9)")
    _add_sim_flags(p)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: KINEX_THREADS, 0 = auto)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        args.func(args)
    except KinexError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"E_INVALID: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
