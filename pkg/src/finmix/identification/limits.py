"""Numerical realization of the large-argument limits used for identification.

A limit ``lim v(t)`` is probed on the geometric grid ``T, 2T, 4T``.  The
reported limit is the Richardson extrapolation in ``1/t``,
``2 v(4T) - v(2T)``, which is exact when ``v(t) = L + c/t`` (the slope of
``log R`` carries such a drift when the mixing weight moves with ``x``).
Characteristic-function probes add a few jittered arguments near ``4T`` so an
oscillating sequence is not mistaken for a stable one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import model_core as mc
from ..errors import BranchAmbiguity

GRID_SCALES = (1.0, 2.0, 4.0)
JITTER_SCALES = (4.0 * 1.0137, 4.0 * 1.0311, 4.0 * 0.9871)
BRANCH_MARGIN = 0.1


@dataclass
class LimitProbe:
    """Values of a sequence on a geometric grid and its extrapolated limit.

    Attributes
    ----------
    grid : tuple
        Strictly increasing in magnitude, ``(T, 2T, 4T)``.
    values : tuple
    limit : float
        ``2 v(4T) - v(2T)``.
    residual : float
        ``|v(4T) - v(2T)|``.
    extrapolation_residual : float
        Distance between the extrapolations from the two upper and the two
        lower grid pairs.
    jitter_residual : float
        Largest deviation of the values at jittered arguments from ``v(4T)``;
        zero when no jitter was requested.
    """

    grid: tuple
    values: tuple
    limit: float
    residual: float
    extrapolation_residual: float
    jitter_residual: float = 0.0
    jitter_values: tuple = ()
    modulus_residual: float = 0.0

    def stable(self, tol: float) -> bool:
        scale = max(1.0, abs(self.limit))
        return (
            math.isfinite(self.limit)
            and self.extrapolation_residual <= tol * scale
            and self.jitter_residual <= tol * scale
            and self.modulus_residual <= tol
        )

    def evidence(self, prefix: str) -> dict:
        out = {f"{prefix}_at_{_tag(g)}": v for g, v in zip(self.grid, self.values)}
        out[f"{prefix}_limit"] = self.limit
        out[f"{prefix}_residual"] = self.residual
        out[f"{prefix}_extrapolation_residual"] = self.extrapolation_residual
        if self.jitter_values:
            out[f"{prefix}_jitter_residual"] = self.jitter_residual
            out[f"{prefix}_modulus_residual"] = self.modulus_residual
        return out


def _tag(g) -> str:
    return format(float(g), "g").replace("-", "m").replace(".", "p")


def probe_limit(fn: Callable[[float], float], T: float, jitter: bool = False) -> LimitProbe:
    """Probe ``fn`` at ``T, 2T, 4T`` (``T`` may be negative for ``t -> -inf``)."""
    if T == 0:
        raise ValueError("probe scale must be nonzero")
    grid = tuple(T * s for s in GRID_SCALES)
    v = tuple(float(fn(g)) for g in grid)
    lim = 2.0 * v[2] - v[1]
    lower = 2.0 * v[1] - v[0]
    jit_vals = ()
    jit_res = 0.0
    if jitter:
        jit_vals = tuple(float(fn(T * s)) for s in JITTER_SCALES)
        jit_res = max(abs(j - v[2]) for j in jit_vals)
    return LimitProbe(grid, v, lim, abs(v[2] - v[1]), abs(lim - lower), jit_res, jit_vals)


def mgf_slope_function(model, x, x0) -> Callable[[float], float]:
    """``t -> (1/t) log R(t, x)``."""
    return lambda t: mc.pop_log_R(model, t, x, x0) / t


def slope_limits_mgf(model, x, x0, T: float = 10.0, sides: Sequence[str] = ("+", "-")):
    """Limits of ``(1/t) log R(t,x)`` as ``t -> +inf`` and ``t -> -inf``.

    Returns a tuple of LimitProbe in the order of ``sides``; a one-sided
    call (``sides=("+",)``) needs the MGF only on the positive half-line.
    Raises DomainError when the grid leaves an MGF domain.
    """
    fn = mgf_slope_function(model, x, x0)
    out = []
    for side in sides:
        if side not in ("+", "-"):
            raise ValueError("sides are '+' and '-'")
        out.append(probe_limit(fn, T if side == "+" else -T))
    return tuple(out)


def cf_slope_function(model, x, x0, a: float) -> Callable[[float], float]:
    """``s -> (-i/a) Log(rho(x, s+a) / rho(x, s))``, principal branch."""

    def fn(s):
        q = mc.pop_rho(model, s + a, x, x0) / mc.pop_rho(model, s, x, x0)
        return float(np.angle(q)) / a

    return fn


def cf_log_modulus_function(model, x, x0, a: float) -> Callable[[float], float]:
    """``s -> log|rho(x, s+a) / rho(x, s)| / a``."""

    def fn(s):
        q = mc.pop_rho(model, s + a, x, x0) / mc.pop_rho(model, s, x, x0)
        return math.log(max(abs(q), 1e-300)) / a

    return fn


def slope_limit_cf(model, x, x0, a: float = 0.1, S: float = 15.0, strict: bool = True) -> LimitProbe:
    """Limit of the CF log-increment slope, with jittered oscillation check.

    The log-increment is complex; its real part ``log|ratio| / a`` must
    vanish for the slope limit to exist, and its largest magnitude over the
    upper grid and jitter points is reported as ``modulus_residual``.
    Raises BranchAmbiguity when ``|a * limit|`` comes within 0.1 of pi and
    ``strict`` is set.
    """
    if np.array_equal(mc.as_point(x), mc.as_point(x0)):
        return LimitProbe(tuple(S * s for s in GRID_SCALES), (0.0, 0.0, 0.0), 0.0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0))
    probe = probe_limit(cf_slope_function(model, x, x0, a), S, jitter=True)
    mod = cf_log_modulus_function(model, x, x0, a)
    probe.modulus_residual = max(abs(mod(S * g)) for g in (GRID_SCALES[1], GRID_SCALES[2], *JITTER_SCALES))
    if strict and abs(a * probe.limit) > math.pi - BRANCH_MARGIN:
        raise BranchAmbiguity(f"|a*limit| = {abs(a * probe.limit):.4g} is within {BRANCH_MARGIN} of pi")
    return probe


def cf_modulus_probe(model, x, x0, S: float = 15.0) -> LimitProbe:
    """``|rho(x, s)|`` on the geometric grid with jitter."""
    return probe_limit(lambda s: abs(mc.pop_rho(model, s, x, x0)), S, jitter=True)


@dataclass
class WeightLimit:
    """A weight formula evaluated along a shrinking perturbation sequence."""

    c_seq: tuple
    values: tuple
    limit: float
    residual: float
    diverging: bool

    def evidence(self, prefix: str) -> dict:
        out = {f"{prefix}_at_c{format(c, 'g')}": v for c, v in zip(self.c_seq, self.values)}
        out[f"{prefix}_limit"] = self.limit
        out[f"{prefix}_residual"] = self.residual
        return out


def weight_limit(e_diff: float, upper: float, lower: float, c_seq: Sequence[float]) -> WeightLimit:
    """``(E_diff - (1+c) lower) / (upper - (1+c) lower)`` along ``c_seq``, extrapolated to ``c = 0``.

    The formula is linear-fractional in ``c``, so linear extrapolation from
    the two smallest ``c`` is accurate to ``O(c^2)`` when it converges.  The
    sequence is flagged as diverging when successive differences do not
    shrink.
    """
    c_seq = tuple(float(c) for c in c_seq)
    vals = []
    for c in c_seq:
        den = upper - (1.0 + c) * lower
        vals.append((e_diff - (1.0 + c) * lower) / den if den != 0 else math.inf)
    vals = tuple(vals)
    if len(vals) < 2 or not all(math.isfinite(v) for v in vals):
        return WeightLimit(c_seq, vals, math.nan, math.inf, True)
    c1, c2 = c_seq[-2], c_seq[-1]
    v1, v2 = vals[-2], vals[-1]
    lim = v2 - c2 * (v1 - v2) / (c1 - c2)
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    diverging = diffs[-1] > max(diffs[0], 1e-300) * 0.999 and diffs[-1] > 1e-9 * max(1.0, abs(v2))
    return WeightLimit(c_seq, vals, lim, abs(v2 - v1), diverging)
