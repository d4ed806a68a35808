"""Monte Carlo runner for the kernel estimator.

Replication ``r`` at grid index ``i`` draws its sample from
``derive_seed(seed, i, r)``, so its result does not depend on which worker
runs it or in what order.  Workers only fill slots in a preallocated list;
aggregation happens afterwards in the calling thread.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import dgp
from .. import estimators as est
from .. import model_core as mc
from ..errors import DomainError, FinmixError, SeriesBudget

ESTIMANDS = ("delta", "nabla", "lambda", "m1_x0", "m2_x0")
CDF_ESTIMANDS = ("F1_sup", "F2_sup")
STATISTICS = ("bias", "median_abs", "rmse")
DOMINANCE_T = 30.0


@dataclass(frozen=True)
class Truth:
    """Population targets with component 1 the upper-MGF-dominant one."""

    order: tuple
    values: dict
    F1: Optional[np.ndarray] = None
    F2: Optional[np.ndarray] = None


def true_targets(model, x0, x1, z_grid=None) -> Truth:
    """Targets of :func:`fit_mixture` read off the model parameters.

    The estimator labels as component 1 the line whose increment dominates
    ``R(t)`` for large positive ``t``: the largest
    ``log w_j(x1) + t m_j(x1) + log M_j(t)`` at a large ``t`` inside every
    MGF domain.
    """
    if model.J != 2:
        raise ValueError("Monte Carlo targets need a two-component model")
    x0, x1 = mc.as_point(x0, model.k), mc.as_point(x1, model.k)
    t = DOMINANCE_T
    for c in model.components:
        t = min(t, 0.5 * c.error.mgf_domain[1])
    w1 = model.weights_at(x1)
    scores = []
    for j, c in enumerate(model.components):
        try:
            lm = float(c.error.log_mgf(t))
        except DomainError:
            lm = math.inf
        scores.append(math.log(w1[j]) + t * float(c.regression(x1)) + lm)
    order = tuple(sorted(range(2), key=lambda j: -scores[j]))
    a, b = (model.components[j] for j in order)
    w0 = model.weights_at(x0)
    vals = {
        "delta": float(a.regression(x1)) - float(a.regression(x0)),
        "nabla": float(b.regression(x1)) - float(b.regression(x0)),
        "lambda": float(w0[order[0]]),
        "m1_x0": float(a.regression(x0)),
        "m2_x0": float(b.regression(x0)),
    }
    F1 = F2 = None
    if z_grid is not None:
        F1 = np.asarray(a.error.cdf(np.asarray(z_grid, float)), dtype=float)
        F2 = np.asarray(b.error.cdf(np.asarray(z_grid, float)), dtype=float)
    return Truth(order, vals, F1, F2)


@dataclass
class Replication:
    n: int
    index: int
    seed: int
    status: str
    message: str = ""
    estimates: dict = field(default_factory=dict)
    warnings: int = 0


@dataclass
class RateReport:
    """Per-replication records and their aggregates.

    ``rates`` holds ``(estimand, n, statistic, value)`` rows; the log-log
    RMSE slope rows carry an empty ``n``.
    """

    n_grid: tuple
    replications: int
    estimands: tuple
    records: list
    rates: list

    def series(self, statistic: str) -> dict:
        """``{estimand: [value per n]}`` for one statistic."""
        out = {e: [math.nan] * len(self.n_grid) for e in self.estimands}
        pos = {n: i for i, n in enumerate(self.n_grid)}
        for e, n, s, v in self.rates:
            if s == statistic and n != "":
                out[e][pos[n]] = v
        return out

    def slope(self, estimand: str) -> float:
        for e, n, s, v in self.rates:
            if e == estimand and s == "rmse_loglog_slope":
                return v
        return math.nan


def run_replication(model, cfg, i_n: int, n: int, r: int, truth: Truth, project: bool = False) -> Replication:
    """One simulated sample and its fit.

    A failure confined to the CDF series keeps the scalar estimates and is
    recorded with status ``partial``; any other estimator failure leaves the
    replication without estimates.
    """
    seed = dgp.derive_seed(cfg.seed, i_n, r)
    data = dgp.simulate(model, dgp.SimulationDesign(n, cfg.covariate_law, seed=seed, record_labels=False))
    status, message = "ok", ""
    try:
        tuning = cfg.tuning.schedule(data.x, data.z)
        fit_kw = dict(z_grid=cfg.z_grid, project=project, strict=cfg.mc_strict)
        try:
            fit = est.fit_mixture(data, cfg.x0, cfg.x1, tuning, with_cdfs=cfg.mc_cdfs, **fit_kw)
        except SeriesBudget as exc:
            if not cfg.mc_cdfs:
                raise
            status, message = "partial", f"{type(exc).__name__}: {exc}"
            fit = est.fit_mixture(data, cfg.x0, cfg.x1, tuning, with_cdfs=False, **fit_kw)
    except FinmixError as exc:
        return Replication(n, r, seed, type(exc).__name__, str(exc))
    e = {
        "delta": fit.delta_hat,
        "nabla": fit.nabla_hat,
        "lambda": fit.lambda_hat,
        "m1_x0": fit.m1_hat_x0,
        "m2_x0": math.nan if fit.m2_hat_x0 is None else fit.m2_hat_x0,
    }
    if cfg.mc_cdfs:
        e["F1_sup"] = math.nan if fit.F1 is None else float(np.max(np.abs(fit.F1.values - truth.F1)))
        e["F2_sup"] = math.nan if fit.F2 is None else float(np.max(np.abs(fit.F2.values - truth.F2)))
    return Replication(n, r, seed, status, message, e, len(fit.warnings))


def _loglog_slope(n_grid, rmse) -> float:
    n = np.asarray(n_grid, dtype=float)
    y = np.asarray(rmse, dtype=float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(n[ok]), np.log(y[ok]), 1)[0])


def aggregate(records, n_grid, replications: int, truth: Truth, estimands) -> list:
    """Tidy ``(estimand, n, statistic, value)`` rows in a fixed order.

    ``F*_sup`` entries are already errors, so their bias is the mean sup
    error and their target is zero.
    """
    rows = []
    rmse_by = {e: [] for e in estimands}
    for n in n_grid:
        recs = [r for r in records if r.n == n]
        ok = [r for r in recs if r.estimates]
        for e in estimands:
            target = 0.0 if e in CDF_ESTIMANDS else truth.values[e]
            err = np.array([r.estimates[e] - target for r in ok], dtype=float)
            err = err[np.isfinite(err)]
            rows.append((e, n, "replications", replications))
            rows.append((e, n, "succeeded", int(err.size)))
            rows.append((e, n, "failed", replications - int(err.size)))
            if err.size:
                stats = (float(np.mean(err)), float(np.median(np.abs(err))), float(np.sqrt(np.mean(err**2))))
            else:
                stats = (math.nan,) * 3
            rows += [(e, n, s, v) for s, v in zip(STATISTICS, stats)]
            rmse_by[e].append(stats[2])
    for e in estimands:
        rows.append((e, "", "rmse_loglog_slope", _loglog_slope(n_grid, rmse_by[e])))
    return rows


def run_montecarlo(cfg, threads: int = 1, project: bool = False) -> RateReport:
    """All replications over the sample-size grid, then the rate table."""
    model = cfg.model
    truth = true_targets(model, cfg.x0, cfg.x1, cfg.z_grid if cfg.mc_cdfs else None)
    tasks = [(i, n, r) for i, n in enumerate(cfg.n_grid) for r in range(cfg.replications)]
    results = [None] * len(tasks)

    def work(k):
        i, n, r = tasks[k]
        results[k] = run_replication(model, cfg, i, n, r, truth, project)

    with warnings.catch_warnings():
        # notes are kept in each fit; the warning copies would only interleave
        warnings.simplefilter("ignore", est.EstimatorWarning)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, range(len(tasks))))
        else:
            for k in range(len(tasks)):
                work(k)
    estimands = ESTIMANDS + (CDF_ESTIMANDS if cfg.mc_cdfs else ())
    rates = aggregate(results, cfg.n_grid, cfg.replications, truth, estimands)
    return RateReport(tuple(cfg.n_grid), cfg.replications, estimands, results, rates)


def replication_rows(report: RateReport):
    header = ["n", "replication", "seed", "status", "message", *report.estimands, "warnings"]
    rows = []
    for r in report.records:
        vals = [r.estimates.get(e) for e in report.estimands]
        rows.append([r.n, r.index, r.seed, r.status, r.message, *vals, r.warnings])
    return header, rows
