"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 fit non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contingency import ContingencyTable
from .inference import g2_test, mi_permutation_pvalue, mutual_information, smooth_g2_test
from .io import InputError, file_digest, read_columns_csv, read_pairs_csv, read_table_csv, save_model
from .logistic import feature_matrix, ls_plot_coordinates
from .loglinear import biplot_coordinates, to_loglinear
from .maxent import FitError, smooth_cells
from .pipeline import FitConfig, fit_pairs, fit_table

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 1, 2


def _config(args) -> FitConfig:
    return FitConfig(penalty=args.penalty, max_order=args.max_order, marginals=args.marginals,
                     tol=args.tol)


def _load(args):
    """Returns ``(table or None, pairs or None)``."""
    if args.format == "table":
        return read_table_csv(args.data), None
    _, pairs = read_pairs_csv(args.data)
    return None, pairs


def _fit(args):
    table, pairs = _load(args)
    cfg = _config(args)
    model = fit_table(table, cfg) if table is not None else fit_pairs(pairs[:, 0], pairs[:, 1], cfg)
    return table, pairs, model


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(args) -> dict:
    return {"input": str(args.data), "input_sha256": file_digest(args.data),
            "config": _config(args).to_dict(), "seed": args.seed, "version": __version__}


def cmd_fit(args) -> int:
    _, _, model = _fit(args)
    path = _outdir(args) / "model.json"
    save_model(model, path, _provenance(args))
    print(model.display())
    print(f"selected {len(model.indices)} constraint(s); MI = {mutual_information(model):.6f}; "
          f"iterations = {model.fit_report.iterations}")
    print(f"model written to {path}")
    return EXIT_OK


def cmd_test(args) -> int:
    table, pairs = _load(args)
    cfg = _config(args)
    if args.method == "g2":
        t = table if table is not None else ContingencyTable.from_pairs(pairs[:, 0], pairs[:, 1])
        report = g2_test(t)
    elif args.method == "smooth-g2":
        t = table if table is not None else ContingencyTable.from_pairs(pairs[:, 0], pairs[:, 1])
        report = smooth_g2_test(t, cfg)
    else:
        obs = pairs if pairs is not None else table.to_pairs()
        report = mi_permutation_pvalue(obs, cfg, B=args.perms, seed=args.seed)
    path = _outdir(args) / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{report.method}: statistic = {report.statistic:.4f}, df = {report.df}, "
          f"p = {report.p_value:.4g} (n = {report.n})")
    return EXIT_OK


def _names(marginal, table, axis):
    if table is not None and marginal.kind != "parametric":
        return table.row_names if axis == 0 else table.col_names
    return tuple(str(int(a)) if float(a).is_integer() else repr(float(a)) for a in marginal.atoms)


def _write_matrix(path, corner, row_names, col_names, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([corner, *col_names])
        for name, row in zip(row_names, values):
            w.writerow([name, *(repr(float(v)) for v in row)])


def cmd_smooth(args) -> int:
    table, _, model = _fit(args)
    probs = smooth_cells(model, table)
    path = _outdir(args) / "smoothed.csv"
    _write_matrix(path, "x\\y", _names(model.bx.marginal, table, 0),
                  _names(model.by.marginal, table, 1), probs)
    print(f"smoothed table ({probs.shape[0]}x{probs.shape[1]}, total {probs.sum():.12f}) "
          f"written to {path}")
    return EXIT_OK


def cmd_biplot(args) -> int:
    table, _, model = _fit(args)
    ll = to_loglinear(model)
    rows, cols = biplot_coordinates(ll)
    path = _outdir(args) / "biplot.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "label", "dim1", "dim2"])
        for name, (a, b) in zip(_names(model.bx.marginal, table, 0), rows):
            w.writerow(["row", name, repr(float(a)), repr(float(b))])
        for name, (a, b) in zip(_names(model.by.marginal, table, 1), cols):
            w.writerow(["column", name, repr(float(a)), repr(float(b))])
    mus = ", ".join(f"{m:.4f}" for m in ll.mu)
    print(f"intrinsic association mu = ({mus}); mu0 = {ll.mu0:.4f}")
    print(f"biplot with {len(rows)} row and {len(cols)} column points written to {path}")
    return EXIT_OK


def cmd_grid(args) -> int:
    _, _, model = _fit(args)
    mids, values = model.grid(args.resolution)
    path = _outdir(args) / "grid.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "density"])
        for a, u in enumerate(mids):
            for b, v in enumerate(mids):
                w.writerow([repr(float(u)), repr(float(v)), repr(float(values[a, b]))])
    print(f"{args.resolution}x{args.resolution} grid written to {path}")
    return EXIT_OK


def cmd_features(args) -> int:
    names, arr = read_columns_csv(args.data)
    keep = [i for i, n in enumerate(names) if n != args.response]
    fm = feature_matrix([arr[:, i] for i in keep], max_order=args.max_order,
                        names=[names[i] for i in keep])
    out = _outdir(args)
    fm.write(out / "features.csv", out / "features.schema.json")
    print(f"{fm.values.shape[1]} LP feature columns for {len(fm.bases)} variable(s) written to {out}")
    if args.coef_file:
        try:
            raw = json.loads(Path(args.coef_file).read_text(encoding="utf-8"))
            coefs = {v: {int(k): float(c) for k, c in d.items()} for v, d in raw.items()}
        except (OSError, ValueError, AttributeError) as exc:
            raise InputError(args.coef_file, f"bad coefficient file ({exc})") from None
        pts = ls_plot_coordinates(coefs)
        with open(out / "ls_plot.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "location", "scale"])
            for v, (a, b) in pts.items():
                w.writerow([v, repr(a), repr(b)])
        print(f"LS-plot coordinates for {len(pts)} variable(s) written to {out / 'ls_plot.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpcop", description="Maximum-entropy LP-copula modelling")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fitting=True):
        p.add_argument("--data", required=True,
                       help="input CSV path, or builtin:hellman|draft_lottery|shunter")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        if fitting:
            p.add_argument("--format", choices=("pairs", "table"), default="pairs")
            p.add_argument("--penalty", choices=("aic", "bic", "none"), default="aic")
            p.add_argument("--marginals", choices=("empirical", "negbin"), default="empirical")
            p.add_argument("--tol", type=float, default=1e-8)
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-order", type=int, default=4)

    p = sub.add_parser("fit", help="fit a MaxEnt copula and write model.json")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="independence test report")
    common(p)
    p.add_argument("--method", choices=("g2", "smooth-g2", "mi-perm"), default="smooth-g2")
    p.add_argument("--perms", type=int, default=999)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("smooth", help="copula-smoothed cell probabilities")
    common(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("biplot", help="logratio biplot coordinates")
    common(p)
    p.set_defaults(func=cmd_biplot)

    p = sub.add_parser("grid", help="copula density on a regular u-v grid")
    common(p)
    p.add_argument("--resolution", type=int, default=50)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("features", help="LP feature matrix for additive logistic models")
    common(p, fitting=False)
    p.add_argument("--response", default=None, help="column to exclude from the features")
    p.add_argument("--coef-file", default=None,
                   help='JSON {"var": {"1": a1, "2": a2}} of fitted coefficients for the LS-plot')
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
