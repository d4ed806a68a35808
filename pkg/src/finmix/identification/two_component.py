"""Constructive recovery of a two-component mixture from exact observables.

Two routes are available.  The ``cond1`` route reads the component slopes
off the two MGF directions; the ``cond3`` route pairs the upper MGF
direction with the CF slope.  Both then share the weight formula, the
second-moment level solve and the 2x2 MGF system on a grid of ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from .. import estimators as est
from .. import model_core as mc
from ..errors import ConfigError, NotIdentified, ParallelSlopes, SingularSystem
from .conditions import (
    DEFAULT_C_SEQ,
    DEFAULT_TOL,
    check_condition1,
    check_condition3,
    mean_increment,
)
from .limits import slope_limit_cf, slope_limits_mgf

DET_FLOOR = 1e-10
MGF_DPS = 50
DEFAULT_T_GRID = tuple(np.linspace(0.1, 5.0, 50))


@dataclass
class TwoComponentRecovery:
    """Recovered parameters; ``m2_x0`` and ``M2`` are None for a one-line model."""

    route: str
    lam: float
    delta_m1: float
    delta_m2: Optional[float]
    m1_x0: float
    m2_x0: Optional[float]
    t_grid: np.ndarray
    M1: np.ndarray
    M2: Optional[np.ndarray]
    skipped_t: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    F2: Optional[est.FTable] = None
    F1: Optional[est.FTable] = None

    @property
    def degenerate(self) -> bool:
        return self.m2_x0 is None

    def scalars(self) -> dict:
        return {
            "route": self.route,
            "lambda": self.lam,
            "delta_m1": self.delta_m1,
            "delta_m2": self.delta_m2,
            "m1_x0": self.m1_x0,
            "m2_x0": self.m2_x0,
            "skipped_t": len(self.skipped_t),
        }


def relative_det(A, ctx):
    """Determinant after scaling columns, then rows, to unit norm (Hadamard ratio).

    Column scaling only rescales the unknowns, so exponential column spreads
    in ``t`` are not mistaken for singularity.
    """
    B = A.copy()
    for c in range(B.cols):
        n = ctx.norm(B[:, c], 2)
        if n == 0:
            return ctx.mpf(0)
        for r in range(B.rows):
            B[r, c] /= n
    for r in range(B.rows):
        n = ctx.norm(B[r, :], 2)
        if n == 0:
            return ctx.mpf(0)
        for c in range(B.cols):
            B[r, c] /= n
    return abs(ctx.det(B))


def solve_mgf_system(rows_fn, t_grid, det_floor: float = DET_FLOOR, dps: int = MGF_DPS):
    """Solve a JxJ linear system for component MGFs at each ``t``.

    ``rows_fn(t, ctx)`` returns ``(A, b)`` as nested lists of ``ctx``
    numbers with ``A @ M = b``.  The solve runs at ``dps`` digits because a
    component with a thin MGF tail contributes far below double precision
    at moderate ``t``.  Points whose scaled determinant (see
    :func:`relative_det`) falls below ``det_floor`` are skipped and filled
    by log-linear interpolation.  Returns ``(table, skipped, min_rel_det)``.
    """
    ctx = mpmath.mp.clone()
    ctx.dps = dps
    t_grid = np.asarray(t_grid, dtype=float)
    sols, good, skipped = [], [], []
    min_rel = math.inf
    for i, t in enumerate(t_grid):
        A, b = rows_fn(ctx.mpf(float(t)), ctx)
        A, b = ctx.matrix(A), ctx.matrix(b)
        rel = float(relative_det(A, ctx))
        min_rel = min(min_rel, rel)
        if not rel > det_floor:
            skipped.append(float(t))
            continue
        x = ctx.lu_solve(A, b)
        sols.append([x[j] for j in range(A.rows)])
        good.append(i)
    if not good:
        raise SingularSystem("every grid point of the MGF system is singular", min_rel)
    J = len(sols[0])
    table = np.empty((t_grid.size, J))
    gi = np.array(good)
    for j in range(J):
        logv = np.array([float(ctx.log(max(v[j], ctx.mpf(1e-300)))) for v in sols])
        table[:, j] = np.exp(np.interp(t_grid, t_grid[gi], logv))
    return table, skipped, min_rel


def _levels(model, x, x0, lam, d1, d2):
    obs = est.PopulationObservables(model)
    slopes = est.SlopeEstimate(d1, d2 if d2 is not None else 0.0, True, 0.0, {})
    m1, m2, _ = est.estimate_levels(obs, x0, x, slopes, lam)
    return m1, m2


def _population_cdfs(model, x, x0, lam, d1, d2, m1, m2, z_grid, p):
    obs = est.PopulationObservables(model)
    slopes = est.SlopeEstimate(d1, d2, True, 0.0, {})
    tuning = est.TuningSchedule.population(p=p)
    f2 = est.estimate_F2(obs, x0, x, slopes, lam, m1, m2, z_grid, tuning)
    f1 = est.estimate_F1(obs, x0, x0, x, slopes, lam, m1, m2, z_grid, tuning)
    return f1, f2


def recover_two_component(
    model,
    x,
    x0,
    route: Optional[str] = None,
    t_grid=DEFAULT_T_GRID,
    tol: float = DEFAULT_TOL,
    T: float = 10.0,
    S: float = 15.0,
    a: float = 0.1,
    c_seq=DEFAULT_C_SEQ,
    z_grid=None,
    p: int = 200,
) -> TwoComponentRecovery:
    """Recover weight, slopes, levels at ``x0`` and component MGFs.

    Parameters
    ----------
    route : {"cond1", "cond3"}, optional
        Forces a route; by default the first condition that holds is used.
    z_grid : array, optional
        When given, ``F1`` and ``F2`` are also recovered on it from the
        population CDF series truncated at ``p`` terms.

    Raises
    ------
    NotIdentified
        Neither condition holds (or the forced one does not).
    ParallelSlopes
        Equal recovered slopes.
    """
    if model.J > 2 or not model.constant_weights:
        raise ConfigError("two-component recovery needs at most two components with constant weights")
    verdicts = []
    if route in (None, "cond1"):
        verdicts.append(check_condition1(model, x, x0, tol, T, c_seq))
        if verdicts[-1].holds:
            route = "cond1"
    if route in (None, "cond3"):
        verdicts.append(check_condition3(model, x, x0, tol, T, S, a, c_seq))
        if verdicts[-1].holds:
            route = "cond3"
    if route is None or not verdicts[-1].holds:
        summary = ", ".join(f"{v.condition_id} {v.outcome}" for v in verdicts)
        raise NotIdentified(f"no usable identification condition ({summary})")
    winner = verdicts[-1]

    if route == "cond1":
        up, down = slope_limits_mgf(model, x, x0, T)
        d1, d2 = up.limit, down.limit
    else:
        (up,) = slope_limits_mgf(model, x, x0, T, sides=("+",))
        d1, d2 = up.limit, slope_limit_cf(model, x, x0, a, S).limit
    e_diff = mean_increment(model, x, x0)

    if "tends to 1" in winner.clause:
        lam = 1.0
        m1, _ = _levels(model, x, x0, 1.0, d1, None)
        M1, skipped, _ = solve_mgf_system(
            lambda t, ctx: ([[ctx.exp(t * m1)]], [mc.pop_cond_mgf_mp(model, t, list(mc.as_point(x0, model.k)), ctx)]), t_grid
        )
        return TwoComponentRecovery(route, 1.0, d1, None, m1, None, np.asarray(t_grid, float), M1[:, 0], None,
                                    skipped, verdicts)

    if not abs(d1 - d2) > est.SEPARATION_FLOOR:
        raise ParallelSlopes(f"recovered slopes {d1:.6g} and {d2:.6g} coincide")
    # distinct slopes make the weight formula well defined at c = 0
    lam = (e_diff - d2) / (d1 - d2)
    m1, m2 = _levels(model, x, x0, lam, d1, d2)
    m1x, m2x = m1 + d1, m2 + d2

    x0p, xp = list(mc.as_point(x0, model.k)), list(mc.as_point(x, model.k))

    def rows(t, ctx):
        A = [
            [lam * ctx.exp(t * m1), (1 - lam) * ctx.exp(t * m2)],
            [lam * ctx.exp(t * m1x), (1 - lam) * ctx.exp(t * m2x)],
        ]
        b = [mc.pop_cond_mgf_mp(model, t, x0p, ctx), mc.pop_cond_mgf_mp(model, t, xp, ctx)]
        return A, b

    table, skipped, _ = solve_mgf_system(rows, t_grid)
    out = TwoComponentRecovery(route, lam, d1, d2, m1, m2, np.asarray(t_grid, float), table[:, 0], table[:, 1],
                               skipped, verdicts)
    if z_grid is not None:
        out.F1, out.F2 = _population_cdfs(model, x, x0, lam, d1, d2, m1, m2, z_grid, p)
    return out
