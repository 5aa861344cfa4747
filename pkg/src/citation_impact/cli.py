"""Command-line entry point.

Every command reads a dataset (except ``simulate``), writes CSV files with a
header row into ``--out`` and exits with 0 on success, 1 on input errors and 2
on numerical failures. Errors are also reported as one JSON object on stderr.
Floats are written with 6 significant digits.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import math
import sys
from collections import OrderedDict
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import IfWindow, aggregate_journal, weighted_ks
from .core import (
    DAYS_PER_YEAR,
    CitationHistory,
    GlobalConstants,
    WsbParams,
    collapse_dispersion,
    impact_time,
    observation_grid,
    phi,
    rescale,
    ultimate_impact,
)
from .exceptions import (
    CitationImpactError,
    NonConvergence,
    UndefinedSigma,
)
from .fitting import MODEL_KINDS, fit_model, get_model
from .forecast import cohort_accuracy, predict, z_score
from .generator import generate_cohort, uniform_sampler
from .io import FORMATS, Dataset, RunConfig, load_dataset, save_dataset
from .svg import line_chart

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
_NUMERIC_ERRORS = (NonConvergence, UndefinedSigma, FloatingPointError)


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if v == 0:
            return "0"
        return format(v, ".6g")
    return str(value)


class Writer:
    """Single writer per output file; fixed column order."""

    def __init__(self, path: Path, columns):
        self.path = path
        self.columns = list(columns)
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(self.columns) + "\n")

    def row(self, **values):
        self._fh.write(",".join(fmt(values.get(c, "")) for c in self.columns) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Failures:
    def __init__(self):
        self.items = []

    def add(self, paper_id, exc):
        self.items.append({"paper_id": paper_id, "error": type(exc).__name__, "message": str(exc)})
        return type(exc).__name__

    @property
    def exit_code(self):
        if not self.items:
            return EXIT_OK
        numeric = {c.__name__ for c in _NUMERIC_ERRORS}
        return EXIT_NUMERIC if any(i["error"] in numeric for i in self.items) else EXIT_INPUT


def _error_json(kind, message, code, failures=None):
    doc = OrderedDict(error=kind, message=message, exit_code=code)
    if failures:
        doc["failures"] = failures
    sys.stderr.write(json.dumps(doc) + "\n")


def _fit_kwargs(cfg: RunConfig, kind: str):
    return cfg.fit_options()


def _load(args, cfg):
    if not args.dataset:
        raise CitationImpactError("this command needs a dataset path")
    return load_dataset(args.dataset, args.format, as_of=getattr(args, "as_of", None))


def cmd_fit(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    kind = cfg.model
    failures = Failures()
    names = list(get_model(kind).param_names)
    cols = ["paper_id", "model"] + names
    if kind == "wsb":
        cols += ["c_inf", "t_star_days"]
    else:
        cols += ["saturation"]
    cols += [f"se_{n}" for n in names] + ["residual_norm", "n_obs", "converged", "status"]
    with Writer(out / f"fit_{kind}.csv", cols) as w:
        for h in ds:
            try:
                r = fit_model(kind, h, g, **_fit_kwargs(cfg, kind))
            except CitationImpactError as exc:
                status = failures.add(h.paper_id, exc)
                res = getattr(exc, "result", None)
                if res is None:
                    w.row(paper_id=h.paper_id, model=kind, status=status)
                    continue
                r = res
            else:
                status = "ok"
            vals = dict(zip(names, r.params))
            vals.update({f"se_{n}": s for n, s in zip(names, r.std_errors)})
            if kind == "wsb":
                vals.update(c_inf=ultimate_impact(r.params[0], g.m), t_star_days=impact_time(r.params[1]))
            else:
                vals.update(saturation=r.model.saturation(r.params, g.m))
            w.row(paper_id=h.paper_id, model=kind, residual_norm=r.residual_norm, n_obs=r.n_obs,
                  converged=r.converged, status=status, **vals)
    return failures


def cmd_simulate(args, cfg, out: Path):
    g = GlobalConstants(cfg.m)
    sampler = uniform_sampler(
        lam=tuple(cfg.lambda_range),
        mu=tuple(math.log(d) for d in cfg.mu_range_days),
        sigma=tuple(cfg.sigma_range),
    )
    histories, params = generate_cohort(
        cfg.n_papers, sampler, globals=g, horizon=cfg.horizon_years * DAYS_PER_YEAR,
        mode=args.mode, seed=cfg.seed, return_params=True,
    )
    pub = dt.date(2000, 1, 1)
    papers = []
    for h in histories:
        if h.is_yearly:
            papers.append(CitationHistory(h.paper_id, yearly_counts=h.yearly_counts, publication_time=pub))
        elif args.format == "events-csv":
            # events-csv resolves whole days only
            papers.append(CitationHistory(h.paper_id, events=np.floor(h.events),
                                          horizon=math.floor(h.horizon), publication_time=pub))
        else:
            papers.append(CitationHistory(h.paper_id, events=h.events, horizon=h.horizon,
                                          publication_time=pub))
    fmt_out = args.format or "json"
    ext = "json" if fmt_out == "json" else "csv"
    ds = Dataset(papers)
    if fmt_out == "yearly-csv":
        ds = Dataset([p.to_yearly() for p in papers])
    save_dataset(ds, out / f"simulated.{ext}", fmt_out)
    with Writer(out / "simulated_params.csv",
                ["paper_id", "lam", "mu", "sigma", "c_inf", "t_star_days", "n_citations"]) as w:
        for h, p in zip(papers, params):
            w.row(paper_id=h.paper_id, lam=p.lam, mu=p.mu, sigma=p.sigma,
                  c_inf=ultimate_impact(p.lam, g.m), t_star_days=impact_time(p.mu),
                  n_citations=h.total)
    return Failures()


def cmd_predict(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    failures = Failures()
    eval_t = np.arange(1, int(math.floor(cfg.horizon_years)) + 1) * DAYS_PER_YEAR
    eval_t = np.union1d(eval_t, [cfg.horizon_years * DAYS_PER_YEAR])
    reports = []
    env_cols = ["paper_id", "model", "train_years", "t_years", "most_likely", "band_low",
                "band_high", "sigma_log"]
    z_cols = ["paper_id", "model", "train_years", "horizon_years", "z", "within_2", "observed",
              "most_likely", "signed_error"]
    with Writer(out / f"envelopes_{cfg.model}.csv", env_cols) as we, \
            Writer(out / f"zscores_{cfg.model}.csv", z_cols) as wz:
        for h in ds:
            try:
                env = predict(h.truncate(cfg.train_years * DAYS_PER_YEAR), g, eval_t,
                              model=cfg.model, **_fit_kwargs(cfg, cfg.model))
            except CitationImpactError as exc:
                failures.add(h.paper_id, exc)
                continue
            for i, t in enumerate(env.eval_times):
                we.row(paper_id=h.paper_id, model=cfg.model, train_years=cfg.train_years,
                       t_years=t / DAYS_PER_YEAR, most_likely=env.most_likely[i],
                       band_low=env.band_low[i], band_high=env.band_high[i],
                       sigma_log=env.sigma_log[i])
            if h.horizon + 1e-9 >= cfg.horizon_years * DAYS_PER_YEAR:
                try:
                    rep = z_score(env, h, cfg.horizon_years)
                except CitationImpactError as exc:
                    failures.add(h.paper_id, exc)
                    continue
                reports.append(rep)
                i = env.index_of(cfg.horizon_years * DAYS_PER_YEAR)
                wz.row(paper_id=h.paper_id, model=cfg.model, train_years=cfg.train_years,
                       horizon_years=cfg.horizon_years, z=rep.z_at_horizon, within_2=rep.within_2,
                       observed=rep.signed_error + env.most_likely[i],
                       most_likely=env.most_likely[i], signed_error=rep.signed_error)
    return failures


def _wsb_fits(ds, g, cfg, failures):
    fits = OrderedDict()
    for h in ds:
        try:
            fits[h.paper_id] = fit_model("wsb", h, g, **_fit_kwargs(cfg, "wsb"))
        except CitationImpactError as exc:
            failures.add(h.paper_id, exc)
    return fits


def cmd_collapse(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    failures = Failures()
    fits = _wsb_fits(ds, g, cfg, failures)
    points = []
    with Writer(out / "collapse_points.csv", ["paper_id", "t_tilde", "c_tilde"]) as w:
        for h in ds:
            if h.paper_id not in fits:
                continue
            tt, ct = rescale(h, fits[h.paper_id].wsb, g)
            points.append((tt, ct))
            for a, b in zip(tt, ct):
                w.row(paper_id=h.paper_id, t_tilde=a, c_tilde=b)
    with open(out / "collapse_summary.csv", "w") as fh:
        fh.write("n_papers,n_points,dispersion\n")
        n_pts = sum(p[0].size for p in points)
        disp = collapse_dispersion(points) if n_pts else float("nan")
        # dispersion is an absolute RMS on [0, 1]; fixed decimals keep exact collapses at 0.000000
        fh.write(f"{len(points)},{n_pts},{disp:.6f}\n")
    return failures


def cmd_journal(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    failures = Failures()
    window = IfWindow(math.log(cfg.if_window_years[0] * DAYS_PER_YEAR),
                      math.log(cfg.if_window_years[1] * DAYS_PER_YEAR))
    groups = OrderedDict()
    for h in ds:
        journal = h.tags.get("journal", "all")
        year = h.publication_time.year if h.publication_time else None
        groups.setdefault((journal, year), []).append(h)
    cols = ["journal_id", "cohort_year", "Lambda", "M", "Sigma", "C_infinity", "T_star_days",
            "T_star_years", "predicted_IF", "n_papers", "status"]
    with Writer(out / "journals.csv", cols) as w:
        for (journal, year), members in groups.items():
            fits = []
            for h in members:
                try:
                    fits.append(fit_model("wsb", h, g, **_fit_kwargs(cfg, "wsb")))
                except CitationImpactError:
                    fits.append(None)
            try:
                prof = aggregate_journal(members, g, fits=fits, journal_id=journal,
                                         cohort_year=year, window=window)
            except CitationImpactError as exc:
                status = failures.add(f"{journal}/{year}", exc)
                w.row(journal_id=journal, cohort_year=year if year is not None else "",
                      n_papers=len(members), status=status)
                continue
            w.row(journal_id=journal, cohort_year=year if year is not None else "",
                  Lambda=prof.Lambda, M=prof.M, Sigma=prof.Sigma, C_infinity=prof.C_infinity,
                  T_star_days=prof.T_star, T_star_years=prof.T_star / DAYS_PER_YEAR,
                  predicted_IF=prof.predicted_IF, n_papers=prof.n_papers, status="ok")
    return failures


def cmd_compare(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    failures = Failures()
    horizon_t = cfg.horizon_years * DAYS_PER_YEAR
    eval_t = np.array([horizon_t])
    summary = OrderedDict()
    z_grid = np.round(np.arange(0, 10.01, 0.25), 2)
    with Writer(out / "compare_ks.csv", ["paper_id", "model", "weighted_ks", "status"]) as wk:
        for kind in MODEL_KINDS:
            ks_vals, reports, signed, excluded = [], [], [], 0
            for h in ds:
                try:
                    fit = fit_model(kind, h, g, **_fit_kwargs(cfg, kind))
                    ks = weighted_ks(h, fit, g)
                    ks_vals.append(ks)
                    wk.row(paper_id=h.paper_id, model=kind, weighted_ks=ks, status="ok")
                except CitationImpactError as exc:
                    wk.row(paper_id=h.paper_id, model=kind, status=type(exc).__name__)
                if h.horizon + 1e-9 < horizon_t:
                    continue
                try:
                    env = predict(h.truncate(cfg.train_years * DAYS_PER_YEAR), g, eval_t,
                                  model=kind, **_fit_kwargs(cfg, kind))
                    rep = z_score(env, h, cfg.horizon_years)
                except CitationImpactError:
                    excluded += 1
                    continue
                reports.append(rep)
                signed.append(rep.signed_error)
            acc = cohort_accuracy(reports, z_grid, excluded) if reports else None
            summary[kind] = (ks_vals, acc, signed)
    cols = ["model", "n_ks", "median_weighted_ks", "n_z", "n_excluded", "frac_within_1",
            "frac_within_2", "median_signed_error"]
    with Writer(out / "compare_summary.csv", cols) as w:
        for kind, (ks_vals, acc, signed) in summary.items():
            w.row(model=kind, n_ks=len(ks_vals),
                  median_weighted_ks=float(np.median(ks_vals)) if ks_vals else float("nan"),
                  n_z=acc.n if acc else 0, n_excluded=acc.n_excluded if acc else 0,
                  frac_within_1=acc.frac_within_1 if acc else float("nan"),
                  frac_within_2=acc.frac_within_2 if acc else float("nan"),
                  median_signed_error=float(np.median(signed)) if signed else float("nan"))
    with Writer(out / "z_survival.csv", ["z"] + list(MODEL_KINDS)) as w:
        for j, z in enumerate(z_grid):
            vals = {k: (acc.survival[j] if acc else float("nan"))
                    for k, (_, acc, _) in summary.items()}
            w.row(z=float(z), **vals)
    return failures


def cmd_report(args, cfg, out: Path):
    ds = _load(args, cfg)
    g = GlobalConstants(cfg.m)
    failures = Failures()
    fits = _wsb_fits(ds, g, cfg, failures)
    curves = Writer(out / "report_curves.csv", ["paper_id", "t_years", "observed", "fitted"])
    points = []
    svg_series = []
    with curves:
        for h in ds:
            if h.paper_id not in fits:
                continue
            fit = fits[h.paper_id]
            t, c = observation_grid(h, grid="yearly" if cfg.grid == "yearly" else "auto")
            model_c = fit.predict(t)
            for a, b, d in zip(t, c, model_c):
                curves.row(paper_id=h.paper_id, t_years=a / DAYS_PER_YEAR, observed=b, fitted=d)
            points.append(rescale(h, fit.wsb, g))
            if len(svg_series) < 6:
                svg_series.append((f"{h.paper_id} observed", t / DAYS_PER_YEAR, c))
                svg_series.append((f"{h.paper_id} fitted", t / DAYS_PER_YEAR, model_c))
    params = np.array([f.params for f in fits.values()]) if fits else np.empty((0, 3))
    lines = [f"citation-impact {__version__} report", f"papers: {len(ds)}",
             f"fitted: {len(fits)}", f"failed: {len(failures.items)}", f"m: {fmt(cfg.m)}"]
    if len(params):
        for j, name in enumerate(("lam", "mu", "sigma")):
            q = np.quantile(params[:, j], [0.25, 0.5, 0.75])
            lines.append(f"{name}: median {fmt(q[1])} (IQR {fmt(q[0])} to {fmt(q[2])})")
        lines.append(f"median c_inf: {fmt(float(np.median(ultimate_impact(params[:, 0], g.m))))}")
        lines.append(f"median T* (days): {fmt(float(np.median(impact_time(params[:, 1]))))}")
        lines.append(f"collapse dispersion: {collapse_dispersion(points):.6f}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    if args.svg:
        (out / "report_curves.svg").write_text(
            line_chart(svg_series, "Cumulative citations", "years since publication", "citations"))
        if points:
            tt = np.concatenate([p[0] for p in points])
            ct = np.concatenate([p[1] for p in points])
            grid = np.linspace(max(tt.min(), -6), min(tt.max(), 6), 200)
            (out / "report_collapse.svg").write_text(line_chart(
                [("rescaled papers", tt, ct), ("Phi", grid, phi(grid))],
                "Rescaled citation histories", "t~", "c~", markers=False))
    return failures


COMMANDS = OrderedDict(
    fit=cmd_fit, simulate=cmd_simulate, predict=cmd_predict, collapse=cmd_collapse,
    journal=cmd_journal, compare=cmd_compare, report=cmd_report,
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration ($CITATION_IMPACT_CONFIG)")
    common.add_argument("--format", choices=FORMATS, help="dataset format (inferred if omitted)")
    common.add_argument("--m", type=float, help="average references per paper")
    common.add_argument("--train-years", type=float, dest="train_years")
    common.add_argument("--horizon-years", type=float, dest="horizon_years")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--model", choices=MODEL_KINDS)
    common.add_argument("--as-of", dest="as_of", help="observation end date for events-csv")

    parser = argparse.ArgumentParser(prog="citation-impact", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name != "simulate":
            p.add_argument("dataset", help="dataset file")
        else:
            p.add_argument("--n", type=int, dest="n_papers", help="number of papers")
            p.add_argument("--mode", choices=("stochastic", "deterministic"), default="stochastic")
        if name == "report":
            p.add_argument("--svg", action="store_true", help="also write SVG line charts")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(
            args.config, m=args.m, train_years=args.train_years, horizon_years=args.horizon_years,
            seed=args.seed, out=args.out, model=args.model,
            n_papers=getattr(args, "n_papers", None),
        )
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with np.errstate(over="ignore", under="ignore"):
            failures = COMMANDS[args.command](args, cfg, out)
    except _NUMERIC_ERRORS as exc:
        _error_json(type(exc).__name__, str(exc), EXIT_NUMERIC)
        return EXIT_NUMERIC
    except (CitationImpactError, ValueError, OSError) as exc:
        _error_json(type(exc).__name__, str(exc), EXIT_INPUT)
        return EXIT_INPUT
    code = failures.exit_code
    if code:
        _error_json("PaperFailures", f"{len(failures.items)} paper(s) failed", code, failures.items)
    return code


if __name__ == "__main__":
    sys.exit(main())
