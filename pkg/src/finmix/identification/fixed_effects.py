"""Mixtures whose weight ``lambda(x)`` moves with the covariate.

The ``K`` functions strip the exponential drift off ``R(t,x)``:
``K_{+,t}(x) = R(t,x) exp(-t L_+)`` with ``L_+`` the upper slope limit, and
likewise for the lower direction.  Their limits are ratios of weights, which
pin down ``lambda(x)`` and ``lambda(x0)`` jointly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import model_core as mc
from ..errors import ConfigError, DomainError, SingularSystem
from .conditions import DEFAULT_TOL, ConditionVerdict
from .limits import LimitProbe, slope_limits_mgf
from .two_component import DEFAULT_T_GRID, TwoComponentRecovery, recover_two_component, solve_mgf_system

K_UNIT_TOL = 1e-12


@dataclass
class KFunctions:
    """Drift-free ratios in both directions and their large-``|t|`` limits."""

    slope_pos: LimitProbe
    slope_neg: LimitProbe
    t_pos: tuple
    k_pos: tuple
    t_neg: tuple
    k_neg: tuple

    @property
    def k_pos_limit(self) -> float:
        return self.k_pos[-1]

    @property
    def k_neg_limit(self) -> float:
        return self.k_neg[-1]

    def evidence(self) -> dict:
        ev = {**self.slope_pos.evidence("mgf_slope_pos"), **self.slope_neg.evidence("mgf_slope_neg")}
        for t, k in zip(self.t_pos, self.k_pos):
            ev[f"K_pos_at_{format(t, 'g')}"] = k
        for t, k in zip(self.t_neg, self.k_neg):
            ev[f"K_neg_at_{format(t, 'g')}"] = k
        ev["K_pos_limit"] = self.k_pos_limit
        ev["K_neg_limit"] = self.k_neg_limit
        return ev


def k_value(model, t: float, x, x0, slope: float) -> float:
    """``R(t,x) exp(-t slope)``."""
    return math.exp(mc.pop_log_R(model, t, x, x0) - t * slope)


def fe_K_functions(model, x, x0, T: float = 10.0, t_values=None) -> KFunctions:
    """``K`` in both directions on ``t_values`` (default ``T, 2T, 4T``).

    The limit is the value at the largest ``|t|``; the approach is
    exponential in ``t`` so no extrapolation is applied.
    """
    up, down = slope_limits_mgf(model, x, x0, T)
    ts = tuple(float(t) for t in (t_values if t_values is not None else (T, 2 * T, 4 * T)))
    ts = tuple(sorted(abs(t) for t in ts))
    kp = tuple(k_value(model, t, x, x0, up.limit) for t in ts)
    kn = tuple(k_value(model, -t, x, x0, down.limit) for t in ts)
    return KFunctions(up, down, ts, kp, tuple(-t for t in ts), kn)


def check_condition4(model, x, x0, tol: float = DEFAULT_TOL, T: float = 10.0) -> ConditionVerdict:
    """Two-sided slope limits differ, or ``K_{+,t}(x) = 1`` for every probed ``t``.

    The second clause is tested on ``t`` in ``{0.5, 1, T, 2T, 4T}`` and their
    negatives, to within ``1e-12``.
    """
    cid = "Cond4-FE"
    try:
        kf = fe_K_functions(model, x, x0, T)
    except DomainError as exc:
        return ConditionVerdict(cid, None, {"error": str(exc)}, tol, "MGF domain does not cover the probes")
    ev = kf.evidence()
    up, down = kf.slope_pos, kf.slope_neg
    if not (up.stable(tol) and down.stable(tol)):
        return ConditionVerdict(cid, None, ev, tol, "MGF slope probes unstable")
    if abs(up.limit - down.limit) > tol * max(1.0, abs(up.limit), abs(down.limit)):
        return ConditionVerdict(cid, True, ev, tol, "two-sided limits differ")
    grid = [s * t for t in (0.5, 1.0, T, 2 * T, 4 * T) for s in (1.0, -1.0)]
    dev = max(abs(k_value(model, t, x, x0, up.limit) - 1.0) for t in grid)
    ev["K_pos_max_unit_deviation"] = dev
    if dev <= K_UNIT_TOL:
        return ConditionVerdict(cid, True, ev, tol, "K is identically 1")
    return ConditionVerdict(cid, False, ev, tol, "limits agree and K is not identically 1")


@dataclass
class FERecovery:
    """Weights at both points, slopes, levels at ``x0`` and component MGFs."""

    lam_x: float
    lam_x0: float
    case: str
    delta_m1: Optional[float] = None
    delta_m2: Optional[float] = None
    m1_x0: Optional[float] = None
    m2_x0: Optional[float] = None
    t_grid: Optional[np.ndarray] = None
    M1: Optional[np.ndarray] = None
    M2: Optional[np.ndarray] = None
    skipped_t: list = field(default_factory=list)
    k: Optional[KFunctions] = None
    fallback: Optional[TwoComponentRecovery] = None

    def scalars(self) -> dict:
        return {
            "case": self.case,
            "lambda_x": self.lam_x,
            "lambda_x0": self.lam_x0,
            "delta_m1": self.delta_m1,
            "delta_m2": self.delta_m2,
            "m1_x0": self.m1_x0,
            "m2_x0": self.m2_x0,
        }


def solve_weight_pair(k_pos: float, k_neg: float, tol: float = 1e-9):
    """Solve ``K_+ = l / l0`` and ``K_- = (1 - l) / (1 - l0)`` for ``(l, l0)``.

    Returns ``(l, l0, case)``.  When the pair solution leaves ``(0, 1]`` and
    ``K_+ + K_- = 1``, the base point carries a single component:
    ``l0 = 1`` and ``K_+ = l``, ``K_- = 1 - l``.
    """
    if abs(k_pos - k_neg) <= tol:
        if abs(k_pos - 1.0) <= tol:
            return None, None, "constant weight"
        raise SingularSystem(
            f"K limits coincide at {k_pos:.12g}; the weight pair is not determined", k_pos - k_neg
        )
    lam0 = (1.0 - k_neg) / (k_pos - k_neg)
    lam = k_pos * lam0
    if 0.0 < lam0 <= 1.0 + tol and 0.0 < lam <= 1.0 + tol:
        return min(lam, 1.0), min(lam0, 1.0), "interior"
    if abs(k_pos + k_neg - 1.0) <= 1e-6:
        return k_pos, 1.0, "unit weight at base point"
    raise SingularSystem(f"K limits ({k_pos:.6g}, {k_neg:.6g}) admit no weight pair in (0, 1]", k_pos - k_neg)


def fe_recover_lambda(model, x, x0, T: float = 10.0, t_grid=DEFAULT_T_GRID, with_mgf: bool = True) -> FERecovery:
    """Recover ``lambda(x)``, ``lambda(x0)``, both slopes, levels at ``x0`` and the component MGFs.

    A flat weight (both ``K`` limits one) falls back to the fixed-weight
    recovery.  Equal ``K`` limits other than one raise SingularSystem: the
    pair is then not determined by the ``K`` limits.
    """
    if model.J != 2:
        raise ConfigError("fixed-effects recovery needs two components")
    kf = fe_K_functions(model, x, x0, T)
    lam, lam0, case = solve_weight_pair(kf.k_pos_limit, kf.k_neg_limit)
    if case == "constant weight":
        if model.constant_weights:
            fb = recover_two_component(model, x, x0, t_grid=t_grid)
        else:
            # flat weight near x0: freeze it at x0 and reuse the fixed-weight route
            w = model.weights_at(x0)
            frozen = mc.MixtureModel(model.components, weights=list(w), k=model.k, name=model.name + "-frozen")
            fb = recover_two_component(frozen, x, x0, t_grid=t_grid)
        return FERecovery(fb.lam, fb.lam, case, fb.delta_m1, fb.delta_m2, fb.m1_x0, fb.m2_x0, fb.t_grid, fb.M1,
                          fb.M2, fb.skipped_t, kf, fb)

    d1, d2 = kf.slope_pos.limit, kf.slope_neg.limit
    if case == "unit weight at base point":
        # the base point has m1(x0) = m2(x0) = E[z|x0]; M1 = M2 recovered at x0
        m0 = mc.pop_cond_mean(model, x0)
        out = FERecovery(lam, lam0, case, d1, d2, m0, m0, k=kf)
        if with_mgf:
            x0p = list(mc.as_point(x0, model.k))
            table, skipped, _ = solve_mgf_system(
                lambda t, ctx: ([[ctx.exp(t * m0)]], [_mgf_mp(model, t, x0p, ctx)]), t_grid
            )
            out.t_grid, out.M1, out.M2, out.skipped_t = np.asarray(t_grid, float), table[:, 0], table[:, 0], skipped
        return out

    # levels: c = m1(x0) - m2(x0) from the mean increment, then a unit-determinant solve
    e_diff = mc.pop_cond_mean(model, x) - mc.pop_cond_mean(model, x0)
    c = (e_diff - lam * (d1 - d2) - d2) / (lam - lam0)
    e0 = mc.pop_cond_mean(model, x0)
    m2_0 = e0 - lam0 * c
    m1_0 = c + m2_0
    out = FERecovery(lam, lam0, case, d1, d2, m1_0, m2_0, k=kf)
    if with_mgf:
        x0p, xp = list(mc.as_point(x0, model.k)), list(mc.as_point(x, model.k))
        m1x, m2x = m1_0 + d1, m2_0 + d2

        def rows(t, ctx):
            A = [
                [lam0 * ctx.exp(t * m1_0), (1 - lam0) * ctx.exp(t * m2_0)],
                [lam * ctx.exp(t * m1x), (1 - lam) * ctx.exp(t * m2x)],
            ]
            return A, [_mgf_mp(model, t, x0p, ctx), _mgf_mp(model, t, xp, ctx)]

        table, skipped, _ = solve_mgf_system(rows, t_grid)
        out.t_grid, out.M1, out.M2, out.skipped_t = np.asarray(t_grid, float), table[:, 0], table[:, 1], skipped
    return out


def _mgf_mp(model, t, x, ctx):
    """``M(t|x)`` at working precision, covariate-dependent weights allowed."""
    w = model.weights_at(np.asarray(x, dtype=float))
    total = 0
    for wj, c in zip(w, model.components):
        if wj > 0:
            total += ctx.mpf(float(wj)) * ctx.exp(t * c.regression(x) + c.error.log_mgf_mp(t, ctx))
    return total
