"""Command-line entry point.

::

    finmix simulate    --config exp.yaml [--seed N] [--out DIR] [--threads K]
    finmix estimate    --config exp.yaml --data sample.csv [--project]
    finmix diagnose    --config exp.yaml [--detect-j]
    finmix montecarlo  --config exp.yaml [--threads K] [--project]

Exit status is 0 on success, 2 for configuration errors, 3 for numeric
degeneracies and 4 for file errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .. import __version__, dgp
from .. import estimators as est
from .. import identification as idn
from ..errors import ConfigError, FinmixError, NotIdentified, NumericalError, SeriesBudget
from . import figures, reporting
from .config import load_config
from .montecarlo import replication_rows, run_montecarlo


def _out(cfg, name):
    return os.path.join(reporting.ensure_dir(cfg.out_dir), name)


def _point_text(p):
    return ";".join(reporting.fmt(v) for v in np.atleast_1d(p))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg, args) -> list:
    """One CSV per sample size; a single size keeps the configured seed."""
    written = []
    single = len(cfg.n_grid) == 1
    for i, n in enumerate(cfg.n_grid):
        seed = cfg.seed if single else dgp.derive_seed(cfg.seed, i)
        design = dgp.SimulationDesign(n, cfg.covariate_law, seed=seed, record_labels=cfg.record_labels)
        data = dgp.simulate(cfg.model, design, threads=args.threads)
        path = _out(cfg, "sample.csv" if single else f"sample_n{n}.csv")
        data.to_csv(path)
        written.append(path)
    return written


def cmd_estimate(cfg, args) -> list:
    if not args.data:
        raise ConfigError("estimate needs --data")
    data = dgp.Dataset.from_csv(args.data)
    if data.k != cfg.model.k:
        raise ConfigError(f"data has {data.k} covariates but model.covariate_dim is {cfg.model.k}")
    tuning = cfg.tuning.schedule(data.x, data.z)
    fit_kw = dict(z_grid=cfg.z_grid, project=args.project, strict=False)
    series_error = None
    try:
        fit = est.fit_mixture(data.label_free(), cfg.x0, cfg.x1, tuning, **fit_kw)
    except SeriesBudget as exc:
        # keep the scalar estimates; the exit status still reports the failure
        series_error = exc
        fit = est.fit_mixture(data.label_free(), cfg.x0, cfg.x1, tuning, with_cdfs=False, **fit_kw)
        fit.warnings.append(f"F grids not computed: {exc}")
    tun_rows = [(f"tuning_{k}", v) for k, v in tuning.as_dict().items()]
    scalars = fit.scalars() + [(k, reporting.fmt(v)) for k, v in tun_rows] + [("n", str(data.n))]
    written = [
        reporting.write_text(_out(cfg, "fit_scalars.csv"), reporting.csv_text(["name", "value"], scalars)),
        reporting.write_text(_out(cfg, "fit_grid.csv"), fit.grid_csv()),
    ]
    if cfg.figures and fit.F1 is not None:
        cols = {"F1": fit.F1.values, "F2": fit.F2.values}
        written.append(figures.cdf_figure(_out(cfg, "fit_cdfs.png"), fit.F2.z, cols))
    if series_error is not None:
        for path in written:
            print(path)
        raise series_error
    return written


def _diagnose_two(cfg, model, report, written):
    d = cfg.diagnose
    verdicts = idn.check_all(model, cfg.x1, cfg.x0, d.tol, d.T, d.S, d.a)
    summary, evidence = reporting.verdict_tables(verdicts)
    written.append(reporting.write_text(_out(cfg, "verdicts.csv"), summary))
    written.append(reporting.write_text(_out(cfg, "evidence.csv"), evidence))
    for v in verdicts:
        report.append((f"{v.condition_id}", v.outcome))
    if not d.recover:
        return None
    try:
        rec = idn.recover_two_component(model, cfg.x1, cfg.x0, t_grid=d.t_grid, tol=d.tol, T=d.T, S=d.S, a=d.a)
    except (NotIdentified, NumericalError) as exc:
        report.append(("recovery", f"not recovered: {type(exc).__name__}: {exc}"))
        return None
    report.append(("recovery", "ok"))
    report += list(rec.scalars().items())
    cols = {"M1": rec.M1} if rec.M2 is None else {"M1": rec.M1, "M2": rec.M2}
    return rec.t_grid, cols, rec.skipped_t


def _diagnose_fe(cfg, model, report, written):
    d = cfg.diagnose
    v = idn.check_condition4(model, cfg.x1, cfg.x0, d.tol, d.T)
    summary, evidence = reporting.verdict_tables([v])
    written.append(reporting.write_text(_out(cfg, "verdicts.csv"), summary))
    written.append(reporting.write_text(_out(cfg, "evidence.csv"), evidence))
    report.append((v.condition_id, v.outcome))
    if not d.recover:
        return None
    try:
        rec = idn.fe_recover_lambda(model, cfg.x1, cfg.x0, d.T, d.t_grid)
    except NumericalError as exc:
        report.append(("recovery", f"not recovered: {type(exc).__name__}: {exc}"))
        return None
    report.append(("recovery", "ok"))
    report += list(rec.scalars().items())
    return rec.t_grid, {"M1": rec.M1, "M2": rec.M2}, rec.skipped_t


def _diagnose_j(cfg, model, report, written):
    d = cfg.diagnose
    J, ev = idn.detect_J(model, cfg.x1, cfg.x0, j_max=d.j_max)
    rows = [("J_detected", J)] + sorted(ev.items())
    written.append(reporting.write_text(_out(cfg, "j_detection.csv"), reporting.csv_text(["key", "value"], rows)))
    report.append(("J_detected", J))
    if not d.recover or J < 2 or not model.constant_weights:
        return None
    if len(cfg.X) < J - 1:
        report.append(("recovery", f"skipped: points.X lists {len(cfg.X)} points, {J - 1} needed"))
        return None
    try:
        rec = idn.recover_J_parameters(model, cfg.x0, cfg.X[: J - 1], t_grid=d.t_grid, J=J)
    except NumericalError as exc:
        report.append(("recovery", f"not recovered: {type(exc).__name__}: {exc}"))
        return None
    report.append(("recovery", "ok"))
    report += list(rec.scalars().items())
    cols = {f"M{j + 1}": rec.mgf_tables[:, j] for j in range(rec.mgf_tables.shape[1])}
    return rec.t_grid, cols, rec.skipped_t


def cmd_diagnose(cfg, args) -> list:
    """Condition verdicts, evidence tables and, where possible, the recovered parameters."""
    model = cfg.model
    written = []
    report = [("model", model.name), ("J_model", model.J), ("x0", _point_text(cfg.x0)), ("x1", _point_text(cfg.x1))]
    if args.detect_j or model.J >= 3:
        mgf = _diagnose_j(cfg, model, report, written)
    elif not model.constant_weights:
        mgf = _diagnose_fe(cfg, model, report, written)
    else:
        mgf = _diagnose_two(cfg, model, report, written)
    if mgf is not None:
        t_grid, cols, skipped = mgf
        written.append(reporting.write_text(_out(cfg, "mgf_table.csv"), reporting.mgf_table_csv(t_grid, cols, skipped)))
        if cfg.figures:
            written.append(figures.mgf_figure(_out(cfg, "mgf.png"), t_grid, cols))
    written.append(reporting.write_text(_out(cfg, "report.txt"), reporting.kv_text(report)))
    if cfg.figures:
        d = cfg.diagnose
        written.append(figures.slope_probe_figure(_out(cfg, "slope_probes.png"), model, cfg.x1, cfg.x0, d.T, d.S, d.a))
    return written


def cmd_montecarlo(cfg, args) -> list:
    if cfg.model.J != 2:
        raise ConfigError("montecarlo needs a two-component model")
    rep = run_montecarlo(cfg, threads=args.threads, project=args.project)
    header, rows = replication_rows(rep)
    written = [
        reporting.write_text(_out(cfg, "replications.csv"), reporting.csv_text(header, rows)),
        reporting.write_text(_out(cfg, "rates.csv"), reporting.csv_text(["estimand", "n", "statistic", "value"],
                                                                         rep.rates)),
    ]
    if cfg.figures:
        rmse, med = rep.series("rmse"), rep.series("median_abs")
        series = {e: {"rmse": rmse[e], "median_abs": med[e]} for e in rep.estimands}
        written.append(figures.rate_figure(_out(cfg, "rates.png"), series, rep.n_grid))
    return written


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "diagnose": cmd_diagnose,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finmix", description="Finite mixture regression: identification and estimation.")
    p.add_argument("--version", action="version", version=f"finmix {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", required=True, help="YAML experiment file")
        sp.add_argument("--seed", type=int, help="override design.seed")
        sp.add_argument("--out", help="override output.dir")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        sp.add_argument("--project", action="store_true", help="monotone [0,1] projection of the CDF grids")
        sp.add_argument("--detect-j", action="store_true", help="count components before recovery")
        if name == "estimate":
            sp.add_argument("--data", help="CSV with header x1,...,xk,z[,label]")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config).with_overrides(seed=args.seed, out_dir=args.out)
        for path in COMMANDS[args.command](cfg, args):
            print(path)
    except FinmixError as exc:
        print(f"finmix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
