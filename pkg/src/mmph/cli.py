"""Command-line front end.

Subcommands: ``fit``, ``evaluate``, ``premium``, ``simulate``, ``flip`` and
``ingest-summary``. Models are fitted on the standardized scale
``y - shift``; raw-scale outputs add the shift back here and nowhere else.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .dataio import Dataset, ModelDocument, ingest, write_atomic
from .errors import ConditioningError, ConventionError, DomainError, IngestionError, MMPHError
from .estimate import (
    FitConfig,
    aic,
    em_fit,
    fit_independent,
    independent_param_count,
    joint_param_count,
)
from .jointmodel import (
    conditional_cdf,
    conditional_density,
    conditional_mean,
    conditional_rep,
    joint_cdf,
    joint_density,
    marginal_n,
    mgf,
    mixed_moment_report,
)
from .phasetype import dph_mean, dph_pmf, ph_cdf, ph_density, ph_mean
from .simulate import simulate

log = logging.getLogger("mmph")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands (pure functions returning values; main() handles files)


def ingest_summary(dataset):
    """Count, mean, sd, min and max of raw ``y`` for each count and overall."""
    rows = []
    groups = [(str(int(k)), dataset.n == k) for k in np.unique(dataset.n)]
    groups.append(("all", np.ones(len(dataset), dtype=bool)))
    for name, mask in groups:
        y = dataset.y_raw[mask]
        sd = float(np.std(y, ddof=1)) if y.size > 1 else float("nan")
        rows.append([name, int(y.size), float(y.mean()), sd, float(y.min()), float(y.max())])
    return rows


@dataclass
class FitReport:
    joint_loglik: float
    independent_loglik: float
    independent_loglik_y: float
    independent_loglik_n: float
    joint_aic: float
    independent_aic: float
    restart_index: int
    iterations_used: int
    shift: float
    notes: list


def cmd_fit(dataset, p, eplus_size, iters=15000, restarts=5, seed=None,
            ll_tol=1e-9, tail_tol=1e-12, q_dim=None):
    """Joint EM fit plus the independent PH/DPH baseline.

    Returns ``(document, report, trace_rows)``.
    """
    q_dim = eplus_size if q_dim is None else q_dim
    config = FitConfig(p, eplus_size, max_iters=iters, restarts=restarts, seed=seed,
                       ll_rel_tol=ll_tol, tail_tol=tail_tol)
    data = dataset.standardized()
    joint = em_fit(data, config)
    indep = fit_independent(data, p, q_dim, config)
    report = FitReport(
        joint_loglik=joint.final_loglik,
        independent_loglik=indep.loglik,
        independent_loglik_y=indep.loglik_y,
        independent_loglik_n=indep.loglik_n,
        joint_aic=aic(joint.final_loglik, joint_param_count(p, eplus_size)),
        independent_aic=aic(indep.loglik, independent_param_count(p, q_dim)),
        restart_index=joint.restart_index,
        iterations_used=joint.iterations_used,
        shift=dataset.shift,
        notes=joint.notes,
    )
    meta = {
        "loglik": joint.final_loglik,
        "iterations": joint.iterations_used,
        "seed": seed,
        "restarts": restarts,
        "max_iters": iters,
        "independent_loglik": indep.loglik,
        "q_dim": q_dim,
        "label": dataset.label,
    }
    doc = ModelDocument.from_model(joint.model, dataset.shift, meta, (indep.ph, indep.dph))
    trace_rows = []
    for r, trace in enumerate(joint.all_traces):
        trace_rows += [["joint", r, i, ll] for i, ll in enumerate(trace)]
    trace_rows += [["independent_y", 0, i, ll] for i, ll in enumerate(indep.trace_y)]
    trace_rows += [["independent_n", 0, i, ll] for i, ll in enumerate(indep.trace_n)]
    return doc, report, trace_rows


@dataclass
class PremiumReport:
    joint_estimate: float
    independent_estimate: float
    empirical_mean: float
    empirical_ci: tuple
    size: int
    truncation: int
    tail_prob: float


def _check_convention(doc, dataset):
    if doc.shift is None:
        return dataset.shift
    if not math.isclose(doc.shift, dataset.shift, rel_tol=1e-9, abs_tol=1e-9):
        raise ConventionError(
            f"model shift {doc.shift!r} differs from dataset shift {dataset.shift!r}"
        )
    return doc.shift


def cmd_premium(doc, dataset, tail_tol=1e-12):
    """Joint, independent and empirical pure premium ``E[Y N]`` on the raw scale."""
    shift = _check_convention(doc, dataset)
    model = doc.model()
    rep = mixed_moment_report(model, tail_tol)
    mean_n = dph_mean(marginal_n(model))
    joint = rep.value + shift * mean_n
    pair = doc.independent_model()
    if pair is not None:
        ey, en = ph_mean(pair[0]), dph_mean(pair[1])
    else:
        ey, en = ph_mean(model.ph), mean_n
    independent = (ey + shift) * en
    prod = dataset.y_raw * dataset.n
    m = prod.size
    mean = float(prod.mean())
    half = 1.96 * float(np.std(prod, ddof=1)) / math.sqrt(m) if m > 1 else 0.0
    return PremiumReport(joint, independent, mean, (mean - half, mean + half), m,
                         rep.terms, rep.tail_prob)


def _ks(model, y, n, rep=None):
    """Kolmogorov-Smirnov distance between sample ``y`` and ``F(y | N = n)``."""
    ys = np.sort(y)
    f = conditional_cdf(model, ys, n, rep)
    m = ys.size
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(m) / m
    return float(max(upper.max(), lower.max()))


def cmd_evaluate(doc, dataset=None, y_max=None, y_points=50, n_max=None):
    """Tables of joint, conditional and marginal quantities (standardized scale)."""
    model = doc.model()
    mn = marginal_n(model)
    if n_max is None:
        n_max = int(dataset.n.max()) if dataset is not None else 3
    if y_max is None:
        y_max = 4.0 * ph_mean(model.ph)
    grid = np.linspace(0.0, y_max, y_points)
    tables = {}

    rows = []
    for n in range(1, n_max + 1):
        dens = joint_density(model, grid, n)
        for y, d in zip(grid, dens):
            rows.append([n, float(y), float(d), joint_cdf(model, float(y), n + 1)])
    tables["joint"] = (["n", "y", "density", "cdf_le_n"], rows)

    rows = []
    for n in range(1, n_max + 1):
        try:
            rep = conditional_rep(model, n)
        except ConditioningError as exc:
            rows += [[n, float(y), float("nan"), float("nan"), f"no mass: {exc}"] for y in grid]
            continue
        dens = conditional_density(model, grid, n, rep)
        cdf = conditional_cdf(model, grid, n, rep)
        rows += [[n, float(y), float(d), float(c), ""] for y, d, c in zip(grid, dens, cdf)]
    tables["conditional"] = (["n", "y", "density", "cdf", "flag"], rows)

    tables["marginal_y"] = (
        ["y", "density", "cdf"],
        [[float(y), float(d), float(c)]
         for y, d, c in zip(grid, ph_density(model.ph, grid), ph_cdf(model.ph, grid))],
    )
    tables["marginal_n"] = (["n", "pmf"], [[n, dph_pmf(mn, n)] for n in range(1, n_max + 1)])

    mm = mixed_moment_report(model)
    moments = [
        ["H(0,0)", mgf(model, 0.0, 0.0)],
        ["E[Y]", ph_mean(model.ph)],
        ["E[N]", dph_mean(mn)],
        ["E[YN]", mm.value],
        ["E[YN] truncation", mm.terms],
        ["E[YN] tail probability", mm.tail_prob],
    ]
    for n in range(1, n_max + 1):
        try:
            moments.append([f"E[Y|N={n}]", conditional_mean(model, n)])
        except ConditioningError:
            moments.append([f"E[Y|N={n}]", float("nan")])
    tables["moments"] = (["quantity", "value"], moments)

    if dataset is not None:
        _check_convention(doc, dataset)
        rows = []
        y = dataset.y
        for n in np.unique(dataset.n):
            sel = y[dataset.n == n]
            try:
                rows.append([int(n), sel.size, _ks(model, sel, int(n))])
            except ConditioningError:
                rows.append([int(n), sel.size, float("nan")])
        tables["ks"] = (["n", "count", "ks_distance"], rows)
    return tables


def cmd_simulate(doc, count, seed=None, raw=False):
    model = doc.model()
    data = simulate(model, count, seed)
    shift = doc.shift if (raw and doc.shift is not None) else 0.0
    return _csv_text(["y", "n"], [[float(y + shift), int(n)] for y, n in zip(data.y, data.n)])


def cmd_flip(dataset):
    """Reverse a two-valued count: ``n -> 3 - n``."""
    if np.any((dataset.n != 1) & (dataset.n != 2)):
        raise DomainError("flip needs every count in {1, 2}")
    return Dataset(dataset.y_raw, 3 - dataset.n, dataset.shift, dataset.label + " (flipped)",
                   dataset.y_name, dataset.n_name)


def dataset_csv(dataset):
    return _csv_text([dataset.y_name, dataset.n_name],
                     [[float(y), int(n)] for y, n in zip(dataset.y_raw, dataset.n)])


# ---------------------------------------------------------------------------
# argument handling


def _add_data_args(p):
    p.add_argument("--y-col", default="y", help="column holding the claim amount")
    p.add_argument("--n-col", default="n", help="column holding the claim count")
    p.add_argument("--delim", default=",", help="field delimiter")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmph", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest-summary", help="per-count summary of a dataset")
    s.add_argument("data")
    _add_data_args(s)
    s.add_argument("--out")

    s = sub.add_parser("fit", help="fit joint and independent models")
    s.add_argument("data")
    _add_data_args(s)
    s.add_argument("--p", type=int, required=True, help="number of phases")
    s.add_argument("--eplus", type=int, required=True, help="number of counting phases")
    s.add_argument("--q-dim", type=int, help="DPH dimension of the baseline (default: --eplus)")
    s.add_argument("--iters", type=int, default=15000)
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("--seed", type=int)
    s.add_argument("--ll-tol", type=float, default=1e-9)
    s.add_argument("--tail-tol", type=float, default=1e-12)
    s.add_argument("--out", required=True, help="model JSON path (trace and report written alongside)")

    s = sub.add_parser("evaluate", help="write evaluation tables as CSV")
    s.add_argument("model")
    s.add_argument("--data", help="dataset for KS distances")
    _add_data_args(s)
    s.add_argument("--y-max", type=float)
    s.add_argument("--y-points", type=int, default=50)
    s.add_argument("--n-max", type=int)
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("premium", help="pure premium E[YN] on the raw scale")
    s.add_argument("model")
    s.add_argument("data")
    _add_data_args(s)
    s.add_argument("--tail-tol", type=float, default=1e-12)
    s.add_argument("--out")

    s = sub.add_parser("simulate", help="draw (y, n) samples from a model")
    s.add_argument("model")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--raw", action="store_true", help="add the model's shift back to y")
    s.add_argument("--out")

    s = sub.add_parser("flip", help="map n to 3 - n")
    s.add_argument("data")
    _add_data_args(s)
    s.add_argument("--out")
    return parser


def _emit(text, out):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _load_data(args, path=None):
    return ingest(path or args.data, args.y_col, args.n_col, args.delim)


def _run(args):
    if args.command == "ingest-summary":
        ds = _load_data(args)
        text = _csv_text(["n", "count", "mean", "sd", "min", "max"], ingest_summary(ds))
        _emit(text + f"# shift,{ds.shift!r}\n", args.out)
    elif args.command == "fit":
        ds = _load_data(args)
        doc, report, trace = cmd_fit(ds, args.p, args.eplus, args.iters, args.restarts,
                                     args.seed, args.ll_tol, args.tail_tol, args.q_dim)
        stem = os.path.splitext(args.out)[0]
        doc.save(args.out)
        write_atomic(stem + "_trace.csv", _csv_text(["model", "restart", "iteration", "loglik"], trace))
        text = json.dumps(asdict(report), indent=2) + "\n"
        write_atomic(stem + "_report.json", text)
        sys.stdout.write(text)
    elif args.command == "evaluate":
        doc = ModelDocument.load(args.model)
        ds = _load_data(args, args.data) if args.data else None
        tables = cmd_evaluate(doc, ds, args.y_max, args.y_points, args.n_max)
        os.makedirs(args.out, exist_ok=True)
        for name, (header, rows) in tables.items():
            write_atomic(os.path.join(args.out, f"{name}.csv"), _csv_text(header, rows))
        sys.stdout.write(_csv_text(*tables["moments"]))
    elif args.command == "premium":
        doc = ModelDocument.load(args.model)
        rep = cmd_premium(doc, _load_data(args), args.tail_tol)
        _emit(json.dumps(asdict(rep), indent=2) + "\n", args.out)
    elif args.command == "simulate":
        doc = ModelDocument.load(args.model)
        _emit(cmd_simulate(doc, args.count, args.seed, args.raw), args.out)
    elif args.command == "flip":
        _emit(dataset_csv(cmd_flip(_load_data(args))), args.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (IngestionError, ConventionError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (MMPHError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
