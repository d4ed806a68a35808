"""Observable identification conditions for two-component mixtures.

Each checker returns a :class:`ConditionVerdict` whose ``holds`` is True,
False or None (indeterminate).  Indeterminate is an ordinary outcome: it is
returned when the probes do not stabilize or when a branch or CF-floor
problem makes the probed quantity meaningless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import model_core as mc
from ..errors import BranchAmbiguity, DegenerateDenominator, DomainError
from .limits import (
    GRID_SCALES,
    WeightLimit,
    cf_modulus_probe,
    slope_limit_cf,
    slope_limits_mgf,
    weight_limit,
)

DEFAULT_TOL = 1e-3
DEFAULT_C_SEQ = (1e-2, 1e-3, 1e-4)
# log-modulus gap that counts as "diverging" in the component CF cross-check
DIVERGENCE_GAP = 50.0


@dataclass
class ConditionVerdict:
    """Evidence-backed outcome of one condition check.

    Attributes
    ----------
    condition_id : str
        ``Cond1``, ``Cond2``, ``Cond3`` or ``Cond4-FE``.
    holds : bool or None
        None means indeterminate.
    evidence : dict
        Named probe values, limits and residuals.
    tolerance : float
    clause : str
        Which branch decided the verdict.
    cross_check : dict, optional
        Independent check against component-level quantities (Condition 2).
    """

    condition_id: str
    holds: Optional[bool]
    evidence: dict
    tolerance: float
    clause: str = ""
    cross_check: Optional[dict] = None

    @property
    def outcome(self) -> str:
        return {True: "holds", False: "fails", None: "indeterminate"}[self.holds]

    def rows(self):
        """``(condition, key, value)`` triples for a tidy evidence table."""
        out = [
            (self.condition_id, "outcome", self.outcome),
            (self.condition_id, "clause", self.clause),
            (self.condition_id, "tolerance", self.tolerance),
        ]
        out += [(self.condition_id, k, v) for k, v in self.evidence.items()]
        if self.cross_check:
            out += [(self.condition_id, f"cross_check_{k}", v) for k, v in self.cross_check.items()]
        return out


def _differ(a: float, b: float, tol: float) -> bool:
    return abs(a - b) > tol * max(1.0, abs(a), abs(b))


def _weight_clause(cid, wl: WeightLimit, evidence, tol, prefix) -> ConditionVerdict:
    evidence.update(wl.evidence(prefix))
    if wl.diverging:
        return ConditionVerdict(cid, False, evidence, tol, f"{prefix} diverges")
    if abs(wl.limit - 1.0) <= tol and wl.residual <= tol:
        return ConditionVerdict(cid, True, evidence, tol, f"{prefix} tends to 1")
    return ConditionVerdict(cid, None, evidence, tol, f"{prefix} settles away from 1")


def mean_increment(model, x, x0) -> float:
    return mc.pop_cond_mean(model, x) - mc.pop_cond_mean(model, x0)


def check_condition1(model, x, x0, tol: float = DEFAULT_TOL, T: float = 10.0, c_seq=DEFAULT_C_SEQ) -> ConditionVerdict:
    """Two-sided MGF slope limits differ, or the weight formula tends to one."""
    cid = "Cond1"
    try:
        up, down = slope_limits_mgf(model, x, x0, T)
    except DomainError as exc:
        return ConditionVerdict(cid, None, {"error": str(exc)}, tol, "MGF domain does not cover the probes")
    ev = {**up.evidence("mgf_slope_pos"), **down.evidence("mgf_slope_neg")}
    if not (up.stable(tol) and down.stable(tol)):
        return ConditionVerdict(cid, None, ev, tol, "MGF slope probes unstable")
    wl = weight_limit(mean_increment(model, x, x0), up.limit, down.limit, c_seq)
    if _differ(up.limit, down.limit, tol):
        ev.update(wl.evidence("lambda_c"))
        return ConditionVerdict(cid, True, ev, tol, "two-sided limits differ")
    return _weight_clause(cid, wl, ev, tol, "lambda_c")


def check_condition3(
    model, x, x0, tol: float = DEFAULT_TOL, T: float = 10.0, S: float = 15.0, a: float = 0.1, c_seq=DEFAULT_C_SEQ
) -> ConditionVerdict:
    """Upper MGF slope limit differs from the CF slope limit, or the weight formula tends to one.

    Only the positive half-line of the MGF is probed, so error laws whose
    MGF is finite only for ``t >= 0`` qualify.
    """
    cid = "Cond3"
    try:
        (up,) = slope_limits_mgf(model, x, x0, T, sides=("+",))
    except DomainError as exc:
        return ConditionVerdict(cid, None, {"error": str(exc)}, tol, "MGF domain does not cover the probes")
    ev = up.evidence("mgf_slope_pos")
    try:
        cf = slope_limit_cf(model, x, x0, a, S)
    except BranchAmbiguity as exc:
        ev["error"] = str(exc)
        return ConditionVerdict(cid, None, ev, tol, "CF slope near the branch cut")
    except DegenerateDenominator as exc:
        ev["error"] = str(exc)
        return ConditionVerdict(cid, None, ev, tol, "CF at the base point vanished")
    ev.update(cf.evidence("cf_slope"))
    if not up.stable(tol):
        return ConditionVerdict(cid, None, ev, tol, "MGF slope probe unstable")
    if not cf.stable(tol):
        return ConditionVerdict(cid, None, ev, tol, "CF slope probe unstable")
    wl = weight_limit(mean_increment(model, x, x0), up.limit, cf.limit, c_seq)
    if _differ(up.limit, cf.limit, tol):
        ev.update(wl.evidence("lambda_delta"))
        return ConditionVerdict(cid, True, ev, tol, "MGF and CF limits differ")
    return _weight_clause(cid, wl, ev, tol, "lambda_delta")


def component_log_modulus_gap(model, s_values) -> Optional[np.ndarray]:
    """``log|phi_1(s)| - log|phi_2(s)|`` from the component error laws (two components only)."""
    if model.J != 2:
        return None
    out = []
    for s in s_values:
        vals = []
        for c in model.components:
            ls, mant = c.error.cf_scaled(np.asarray(s, dtype=float))
            vals.append(float(ls) + math.log(max(abs(complex(mant)), 1e-300)))
        out.append(vals[0] - vals[1])
    return np.asarray(out)


def _cf_gap_cross_check(model, x, x0, S: float) -> Optional[dict]:
    if model.J != 2:
        return None
    m = np.array([model.means_at(x), model.means_at(x0)])
    if abs((m[0, 0] - m[1, 0]) - (m[0, 1] - m[1, 1])) < 1e-12:
        return None
    grid = [S * g for g in GRID_SCALES]
    gap = np.abs(component_log_modulus_gap(model, grid))
    diverges = bool(gap[-1] > DIVERGENCE_GAP and gap[-1] > gap[-2] > gap[0])
    bounded = bool(gap[-1] <= max(gap[0], gap[1]) * 1.5 + 1.0)
    out = {f"log_modulus_gap_at_{format(s, 'g')}": float(v) for s, v in zip(grid, gap)}
    # component CFs with vanishing ratio in either direction
    out["component_ratio_vanishes"] = diverges if (diverges or bounded) else None
    return out


def check_condition2(model, x, x0, tol: float = DEFAULT_TOL, S: float = 15.0, a: float = 0.1) -> ConditionVerdict:
    """``|rho(x,s)| -> 1`` with a stable CF log-increment slope.

    For two components with distinct regression increments, the verdict is
    cross-checked against the component CFs: the condition should hold
    exactly when ``|phi_1 / phi_2|`` tends to zero or infinity.
    """
    cid = "Cond2"
    cross = _cf_gap_cross_check(model, x, x0, S)
    try:
        mod = cf_modulus_probe(model, x, x0, S)
        cf = slope_limit_cf(model, x, x0, a, S, strict=False)
    except DegenerateDenominator as exc:
        return ConditionVerdict(cid, None, {"error": str(exc)}, tol, "CF at the base point vanished", cross)
    ev = {**mod.evidence("cf_modulus"), **cf.evidence("cf_slope")}
    tail = [mod.values[1], mod.values[2], *mod.jitter_values]
    dev = max(abs(v - 1.0) for v in tail)
    ev["cf_modulus_max_deviation"] = dev
    if dev <= tol and cf.stable(tol):
        verdict = ConditionVerdict(cid, True, ev, tol, "modulus tends to 1 with stable slope", cross)
    elif dev > tol:
        verdict = ConditionVerdict(cid, False, ev, tol, "modulus does not tend to 1", cross)
    else:
        verdict = ConditionVerdict(cid, False, ev, tol, "CF slope does not stabilize", cross)
    if cross is not None and cross["component_ratio_vanishes"] is not None:
        cross["agrees"] = cross["component_ratio_vanishes"] == verdict.holds
    return verdict


def check_all(model, x, x0, tol: float = DEFAULT_TOL, T: float = 10.0, S: float = 15.0, a: float = 0.1):
    """Conditions 1, 2 and 3 in order."""
    return [
        check_condition1(model, x, x0, tol, T),
        check_condition2(model, x, x0, tol, S, a),
        check_condition3(model, x, x0, tol, T, S, a),
    ]
