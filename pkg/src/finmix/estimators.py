"""Kernel estimators for the two-component switching regression.

The pipeline reads slopes off conditional transforms (the MGF ratio gives the
slope of the heavier-tailed component, the CF ratio the other one), then the
mixing weight from the conditional means, the levels from second moments,
and finally both component CDFs through a telescoping series.

Every stage consumes an :class:`Observables` object.  The sample version
wraps Nadaraya-Watson windows; the population version wraps the exact
functionals of an analytic model, so the same code path can be checked
against closed forms with no statistical error.
"""

from __future__ import annotations

import csv
import io
import math
import warnings as _warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import isotonic_regression

from . import model_core as mc
from .errors import (
    BranchAmbiguity,
    ConfigError,
    DegenerateDenominator,
    OverflowBudget,
    ParallelSlopes,
    SeriesBudget,
)
from .smoothing import QUARTIC_SD, KernelSpec, LocalWindow, rule_of_thumb_bandwidth

LAMBDA_BOUNDS = (0.001, 0.999)
SEPARATION_FLOOR = 1e-3
BRANCH_MARGIN = 0.1
LOG_OVERFLOW = 700.0


class EstimatorWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# tuning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TuningSchedule:
    """Bandwidths and divergence sequences for one sample size.

    Attributes
    ----------
    h_n, b_n, c_n, d_n : float
        Bandwidths of the MGF, CF, CDF and moment regressions.
    t_n : float
        MGF argument.
    s_n, a_n : float
        CF argument and increment.
    p_n : int
        Number of series terms beyond the first.
    c_seq : tuple of float
        Decreasing sequence for the weight limits of the identification module.
    series_slack : float, optional
        How far series arguments may leave the data range; ``None`` means
        ten standard deviations of ``z``.
    """

    h_n: float
    b_n: float
    c_n: float
    d_n: float
    t_n: float
    s_n: float
    a_n: float
    p_n: int
    c_seq: tuple = (1e-2, 1e-3, 1e-4)
    series_slack: Optional[float] = None

    def __post_init__(self):
        for name in ("h_n", "b_n", "c_n", "d_n", "t_n", "s_n", "a_n"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"tuning.{name} must be positive and finite")
        if int(self.p_n) != self.p_n or self.p_n < 0:
            raise ConfigError("tuning.p_n must be a nonnegative integer")
        c = tuple(float(v) for v in self.c_seq)
        if not c or any(v <= 0 for v in c) or any(b >= a for a, b in zip(c, c[1:])):
            raise ConfigError("tuning.c_seq must be positive and strictly decreasing")
        object.__setattr__(self, "c_seq", c)
        object.__setattr__(self, "p_n", int(self.p_n))

    @classmethod
    def default(
        cls,
        x_data,
        z_data,
        c_t: Optional[float] = None,
        c_s: Optional[float] = None,
        eps: float = 0.05,
        beta: float = 0.05,
        a: float = 0.1,
        a_mode: str = "fixed",
        **overrides,
    ) -> "TuningSchedule":
        """Rate-polynomial schedule for a sample.

        ``h = n^(-1/(k+4)+eps)``, ``b = n^(-1/(k+4)+beta)``,
        ``t = c_t (eps log n)^(1/2)``, ``s = c_s (beta log n)^(1/2)`` and
        ``p = ceil(2 log n)``.  ``c_t`` and ``c_s`` default to ``1/sd(z)``.
        With ``a_mode="vanishing"`` the CF increment shrinks like ``a/log n``.
        """
        x_data = np.asarray(x_data, dtype=float)
        if x_data.ndim == 1:
            x_data = x_data[:, None]
        n, k = x_data.shape
        if n < 2:
            raise ConfigError("default tuning needs at least two observations")
        sd_z = float(np.std(z_data, ddof=1))
        if not sd_z > 0:
            raise ConfigError("z has zero spread")
        c_t = 1.0 / sd_z if c_t is None else float(c_t)
        c_s = 1.0 / sd_z if c_s is None else float(c_s)
        rate = -1.0 / (k + 4)
        rot = float(np.max(rule_of_thumb_bandwidth(x_data)))
        if a_mode == "fixed":
            a_n = a
        elif a_mode == "vanishing":
            a_n = a / math.log(n)
        else:
            raise ConfigError(f"unknown a_mode {a_mode!r}")
        values = dict(
            h_n=n ** (rate + eps),
            b_n=n ** (rate + beta),
            c_n=rot / QUARTIC_SD,
            d_n=rot,
            t_n=c_t * math.sqrt(eps * math.log(n)),
            s_n=c_s * math.sqrt(beta * math.log(n)),
            a_n=a_n,
            p_n=math.ceil(2.0 * math.log(n)),
            series_slack=10.0 * sd_z,
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def population(cls, t: float = 10.0, s: float = 15.0, a: float = 0.1, p: int = 200, **kw) -> "TuningSchedule":
        """Arguments for population plug-in runs; bandwidths are unused."""
        return cls(h_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, t_n=t, s_n=s, a_n=a, p_n=p, **kw)

    def as_dict(self) -> dict:
        return {
            "h_n": self.h_n,
            "b_n": self.b_n,
            "c_n": self.c_n,
            "d_n": self.d_n,
            "t_n": self.t_n,
            "s_n": self.s_n,
            "a_n": self.a_n,
            "p_n": self.p_n,
        }


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


class Observables:
    """Conditional functionals of ``z`` given ``x`` consumed by the estimators."""

    z_range: Optional[tuple] = None
    z_sd: Optional[float] = None

    def log_mgf(self, t: float, x) -> float:
        raise NotImplementedError

    def cf_ratio(self, s: float, x1, x0) -> complex:
        raise NotImplementedError

    def cf_noise(self, s: float, x) -> float:
        """Rough standard error of the local CF argument derivative at ``s``."""
        raise NotImplementedError

    def mean(self, x) -> float:
        raise NotImplementedError

    def m2(self, x) -> float:
        raise NotImplementedError

    def cdf(self, z, x):
        raise NotImplementedError


class PopulationObservables(Observables):
    """Exact functionals of an analytic model."""

    def __init__(self, model: mc.MixtureModel):
        self.model = model

    def log_mgf(self, t, x):
        return mc.pop_cond_mgf(self.model, t, x)

    def cf_ratio(self, s, x1, x0):
        return mc.pop_rho(self.model, s, x1, x0)

    def cf_noise(self, s, x):
        return 4.0 * np.finfo(float).eps

    def mean(self, x):
        return mc.pop_cond_mean(self.model, x)

    def m2(self, x):
        return mc.pop_cond_m2(self.model, x)

    def cdf(self, z, x):
        return mc.pop_cond_cdf(self.model, z, x)


class SampleObservables(Observables):
    """Nadaraya-Watson functionals of a dataset under a tuning schedule.

    Windows are cached per (point, role): Gaussian kernels of bandwidth
    ``h_n`` (MGF), ``b_n`` (CF) and ``d_n`` (moments), and a quartic kernel
    of bandwidth ``c_n`` (CDF).
    """

    def __init__(self, data, tuning: TuningSchedule):
        self.data = data
        self.tuning = tuning
        self.kernels = {
            "mgf": KernelSpec("gaussian", tuning.h_n),
            "cf": KernelSpec("gaussian", tuning.b_n),
            "moment": KernelSpec("gaussian", tuning.d_n),
            "cdf": KernelSpec("quartic_compact", tuning.c_n),
        }
        self._windows: dict = {}
        z = data.z
        self.z_range = (float(np.min(z)), float(np.max(z)))
        self.z_sd = float(np.std(z, ddof=1)) if z.size > 1 else 0.0
        self.max_abs_z = float(np.max(np.abs(z)))

    def window(self, x, role: str) -> LocalWindow:
        p = mc.as_point(x, self.data.k)
        key = (tuple(p.tolist()), self.kernels[role])
        w = self._windows.get(key)
        if w is None:
            w = LocalWindow(self.data.x, self.data.z, p, self.kernels[role])
            self._windows[key] = w
        return w

    def log_mgf(self, t, x):
        if abs(t) * self.max_abs_z > LOG_OVERFLOW:
            raise OverflowBudget(f"t*max|z| = {abs(t) * self.max_abs_z:.4g} exceeds {LOG_OVERFLOW:g}")
        return self.window(x, "mgf").log_mgf(t)

    def cf(self, s, x) -> complex:
        return self.window(x, "cf").cf(s)

    def cf_ratio(self, s, x1, x0):
        den = self.cf(s, x0)
        if abs(den) < mc.CF_FLOOR:
            raise DegenerateDenominator(f"estimated CF at x0 has modulus {abs(den):.3g}")
        return self.cf(s, x1) / den

    def cf_noise(self, s, x):
        w = self.window(x, "cf")
        mod = abs(w.cf(s))
        if mod == 0.0:
            return math.inf
        return math.sqrt(max(w.m2(), 0.0) / w.effective_count) / mod

    def mean(self, x):
        return self.window(x, "moment").mean()

    def m2(self, x):
        return self.window(x, "moment").m2()

    def cdf(self, z, x):
        return self.window(x, "cdf").cdf(z)


def as_observables(source, tuning: Optional[TuningSchedule] = None) -> Observables:
    """Accept an Observables, an analytic model or a dataset."""
    if isinstance(source, Observables):
        return source
    if isinstance(source, mc.MixtureModel):
        return PopulationObservables(source)
    if tuning is None:
        tuning = TuningSchedule.default(source.x, source.z)
    return SampleObservables(source, tuning)


# ---------------------------------------------------------------------------
# slopes, weight, levels
# ---------------------------------------------------------------------------


@dataclass
class SlopeEstimate:
    """Slope increments between ``x0`` and ``x1``.

    ``delta_hat`` belongs to component 1 (read from the MGF ratio),
    ``nabla_hat`` to component 2 (read from the CF ratio).  ``noise`` is a
    rough standard error of ``nabla_hat``.
    """

    delta_hat: float
    nabla_hat: float
    branch_ok: bool
    noise: float = 0.0
    denominators: dict = field(default_factory=dict)


def _same_point(x0, x1) -> bool:
    return np.array_equal(mc.as_point(x0), mc.as_point(x1))


def estimate_delta(source, x0, x1, tuning: TuningSchedule) -> float:
    """``(log M(t|x1) - log M(t|x0)) / t`` at ``t = tuning.t_n``."""
    obs = as_observables(source, tuning)
    if _same_point(x0, x1):
        return 0.0
    t = tuning.t_n
    return (obs.log_mgf(t, x1) - obs.log_mgf(t, x0)) / t


def estimate_nabla(source, x0, x1, tuning: TuningSchedule, strict: bool = True):
    """Principal-log slope from the CF ratio increment.

    Returns ``(nabla_hat, branch_ok, noise)``.  Raises BranchAmbiguity when
    ``|a nabla_hat|`` comes within 0.1 of pi, unless ``strict`` is false.
    """
    obs = as_observables(source, tuning)
    if _same_point(x0, x1):
        return 0.0, True, 0.0
    s, a = tuning.s_n, tuning.a_n
    q = obs.cf_ratio(s + a, x1, x0) / obs.cf_ratio(s, x1, x0)
    nabla = float(np.angle(q)) / a
    branch_ok = abs(a * nabla) <= math.pi - BRANCH_MARGIN
    noise = math.hypot(obs.cf_noise(s, x0), obs.cf_noise(s, x1))
    if not branch_ok and strict:
        raise BranchAmbiguity(f"|a*nabla| = {abs(a * nabla):.4g} is within {BRANCH_MARGIN} of pi")
    return nabla, branch_ok, noise


def estimate_slopes(source, x0, x1, tuning: TuningSchedule, strict: bool = True) -> SlopeEstimate:
    obs = as_observables(source, tuning)
    delta = estimate_delta(obs, x0, x1, tuning)
    nabla, ok, noise = estimate_nabla(obs, x0, x1, tuning, strict=strict)
    den = {}
    if isinstance(obs, SampleObservables) and not _same_point(x0, x1):
        for tag, x in (("x0", x0), ("x1", x1)):
            for role in ("mgf", "cf"):
                w = obs.window(x, role)
                den[f"{role}_mass_{tag}"] = w.mass
                den[f"{role}_ess_{tag}"] = w.effective_count
    return SlopeEstimate(delta, nabla, ok, noise, den)


def _check_separation(delta, nabla, floor):
    if not abs(delta - nabla) > floor:
        raise ParallelSlopes(f"|delta - nabla| = {abs(delta - nabla):.3g} is not above {floor:g}")


def estimate_lambda(
    source, x0, x1, slopes: SlopeEstimate, tuning: Optional[TuningSchedule] = None, floor: float = SEPARATION_FLOOR
):
    """Weight of component 1 from the conditional-mean increment.

    Returns ``(lambda_hat, warnings)``; the value is clamped to
    ``[0.001, 0.999]`` with a warning when it falls outside.
    """
    obs = as_observables(source, tuning)
    d, nb = slopes.delta_hat, slopes.nabla_hat
    _check_separation(d, nb, floor)
    lam = (obs.mean(x1) - obs.mean(x0) - nb) / (d - nb)
    return clamp_lambda(lam)


def clamp_lambda(lam: float):
    lo, hi = LAMBDA_BOUNDS
    notes = []
    if not lo <= lam <= hi:
        notes.append(f"lambda_hat {lam:.6g} clamped to [{lo}, {hi}]")
        _warnings.warn(notes[-1], EstimatorWarning, stacklevel=3)
        lam = min(max(lam, lo), hi)
    return float(lam), notes


def solve_levels(delta, nabla, lam, c_value, mean_x0, floor: float = SEPARATION_FLOOR):
    """Solve the second-moment system for ``(m1(x0), m2(x0))``.

    Unknowns are ``lam*m1`` and ``(1-lam)*m2`` with rows ``(-delta, -nabla)``
    and ``(1, 1)``.  With ``lam`` at one the second level is absent (None).
    """
    if 1.0 - lam < 1e-12:
        return float(mean_x0), None
    _check_separation(delta, nabla, floor)
    det = nabla - delta
    y1 = (c_value + nabla * mean_x0) / det
    y2 = (-delta * mean_x0 - c_value) / det
    return y1 / lam, y2 / (1.0 - lam)


def estimate_levels(source, x0, x1, slopes: SlopeEstimate, lambda_hat: float, tuning=None):
    """Returns ``(m1(x0), m2(x0), C)``."""
    obs = as_observables(source, tuning)
    d, nb, lam = slopes.delta_hat, slopes.nabla_hat, lambda_hat
    if 1.0 - lam < 1e-12:
        nb = 0.0
    c_value = 0.5 * (obs.m2(x0) - obs.m2(x1) + lam * d * d + (1.0 - lam) * nb * nb)
    m1, m2 = solve_levels(d, nb, lam, c_value, obs.mean(x0))
    return m1, m2, c_value


# ---------------------------------------------------------------------------
# component CDFs
# ---------------------------------------------------------------------------


@dataclass
class FTable:
    z: np.ndarray
    raw: np.ndarray
    projected: Optional[np.ndarray] = None

    @property
    def values(self) -> np.ndarray:
        return self.raw if self.projected is None else self.projected


def project_monotone(values) -> np.ndarray:
    """Least-squares projection onto nondecreasing sequences in ``[0, 1]``."""
    y = np.asarray(values, dtype=float)
    if y.size == 0:
        return y.copy()
    return np.clip(isotonic_regression(y).x, 0.0, 1.0)


@dataclass(frozen=True)
class SeriesSetup:
    """Base/shifted point pair with ``delta = g(x_shift) - g(x_base) > 0``."""

    x_base: np.ndarray
    x_shift: np.ndarray
    delta: float
    m1_shift: float
    m2_base: float
    g_base: float
    lam: float
    swapped: bool


def series_setup(x0, x1, slopes: SlopeEstimate, lam, m1_x0, m2_x0, floor: float = SEPARATION_FLOOR) -> SeriesSetup:
    d, nb = slopes.delta_hat, slopes.nabla_hat
    gap = d - nb
    if not abs(gap) > floor:
        raise ParallelSlopes(f"|delta - nabla| = {abs(gap):.3g} is not above {floor:g}")
    x0, x1 = mc.as_point(x0), mc.as_point(x1)
    if gap > 0:
        return SeriesSetup(x0, x1, gap, m1_x0 + d, m2_x0, m1_x0 - m2_x0, lam, False)
    # swap so that the increment of g is positive
    m1_x1, m2_x1 = m1_x0 + d, m2_x0 + nb
    return SeriesSetup(x1, x0, -gap, m1_x0, m2_x1, m1_x1 - m2_x1, lam, True)


def series_F2(obs: Observables, setup: SeriesSetup, p: int, slack: Optional[float] = None) -> Callable:
    """Callable ``z -> F2(z)`` from the truncated telescoping series."""
    lam = setup.lam
    if 1.0 - lam <= 0:
        raise ConfigError("the series needs lambda below one")
    shift_a = setup.m1_shift - setup.g_base
    shift_b = setup.m2_base
    steps = np.arange(p + 1) * setup.delta

    if obs.z_range is not None:
        sd = obs.z_sd or 0.0
        allowed = 10.0 * sd if slack is None else slack
        lo, hi = obs.z_range

    def f2(z):
        z = np.asarray(z, dtype=float)
        if obs.z_range is not None and z.size:
            top = float(np.max(z)) + steps[-1] + max(shift_a, shift_b)
            bottom = float(np.min(z)) + min(shift_a, shift_b)
            if top > hi + allowed or bottom < lo - allowed:
                raise SeriesBudget(
                    f"series arguments span [{bottom:.4g}, {top:.4g}], data span [{lo:.4g}, {hi:.4g}] "
                    f"with slack {allowed:.4g}"
                )
        grid = z[..., None] + steps
        first = obs.cdf(grid + shift_a, setup.x_shift)
        second = obs.cdf(grid + shift_b, setup.x_base)
        total = np.sum(np.asarray(first) - np.asarray(second), axis=-1)
        return 1.0 - total / (1.0 - lam)

    return f2


def truncation_error(f2_true: Callable, z, delta: float, p: int) -> float:
    """Sup over ``z`` of ``1 - F2(z + (p+1) delta)``, the series remainder."""
    z = np.asarray(z, dtype=float)
    return float(np.max(1.0 - f2_true(z + (p + 1) * delta)))


def estimate_F2(
    source, x0, x1, slopes: SlopeEstimate, lambda_hat, m1_x0, m2_x0, z_grid, tuning: TuningSchedule,
    project: bool = False,
) -> FTable:
    obs = as_observables(source, tuning)
    setup = series_setup(x0, x1, slopes, lambda_hat, m1_x0, m2_x0)
    f2 = series_F2(obs, setup, tuning.p_n, tuning.series_slack)
    z = np.asarray(z_grid, dtype=float)
    raw = np.asarray(f2(z), dtype=float)
    return FTable(z, raw, project_monotone(raw) if project else None)


def F1_from_F2(obs: Observables, x, f2: Callable, lam, m1_x, m2_x) -> Callable:
    def f1(z):
        z = np.asarray(z, dtype=float)
        return (obs.cdf(z + m1_x, x) - (1.0 - lam) * f2(z + m1_x - m2_x)) / lam

    return f1


def estimate_F1(
    source, x, x0, x1, slopes: SlopeEstimate, lambda_hat, m1_x0, m2_x0, z_grid, tuning: TuningSchedule,
    project: bool = False,
) -> FTable:
    """``F1`` on the grid, evaluated at the covariate point ``x`` (one of ``x0``, ``x1``)."""
    obs = as_observables(source, tuning)
    setup = series_setup(x0, x1, slopes, lambda_hat, m1_x0, m2_x0)
    f2 = series_F2(obs, setup, tuning.p_n, tuning.series_slack)
    if _same_point(x, x0):
        m1_x, m2_x = m1_x0, m2_x0
    elif _same_point(x, x1):
        m1_x, m2_x = m1_x0 + slopes.delta_hat, m2_x0 + slopes.nabla_hat
    else:
        raise ConfigError("F1 is evaluated at x0 or x1")
    f1 = F1_from_F2(obs, x, f2, lambda_hat, m1_x, m2_x)
    z = np.asarray(z_grid, dtype=float)
    raw = np.asarray(f1(z), dtype=float)
    return FTable(z, raw, project_monotone(raw) if project else None)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass
class MixtureFit:
    """Output of :func:`fit_mixture`; component 1 is the MGF-route component."""

    x0: np.ndarray
    x1: np.ndarray
    delta_hat: float
    nabla_hat: float
    branch_ok: bool
    lambda_hat: float
    m1_hat_x0: float
    m2_hat_x0: Optional[float]
    C_hat: float
    F1: Optional[FTable]
    F2: Optional[FTable]
    swapped: bool = False
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def scalars(self) -> list:
        rows = [
            ("x0", ";".join(_fmt(v) for v in self.x0)),
            ("x1", ";".join(_fmt(v) for v in self.x1)),
            ("delta_hat", _fmt(self.delta_hat)),
            ("nabla_hat", _fmt(self.nabla_hat)),
            ("branch_ok", str(bool(self.branch_ok)).lower()),
            ("lambda_hat", _fmt(self.lambda_hat)),
            ("m1_hat_x0", _fmt(self.m1_hat_x0)),
            ("m2_hat_x0", "" if self.m2_hat_x0 is None else _fmt(self.m2_hat_x0)),
            ("C_hat", _fmt(self.C_hat)),
            ("swapped", str(bool(self.swapped)).lower()),
        ]
        for k in sorted(self.diagnostics):
            rows.append((k, _fmt(self.diagnostics[k])))
        for i, w in enumerate(self.warnings):
            rows.append((f"warning_{i + 1}", w))
        return rows

    def scalars_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value"])
        w.writerows(self.scalars())
        return buf.getvalue()

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "F1_raw", "F1_proj", "F2_raw", "F2_proj"])
        if self.F1 is None or self.F2 is None:
            return buf.getvalue()
        for i, z in enumerate(self.F2.z):
            row = [_fmt(z)]
            for tab in (self.F1, self.F2):
                row.append(_fmt(tab.raw[i]))
                row.append("" if tab.projected is None else _fmt(tab.projected[i]))
            w.writerow(row)
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def default_z_grid(n_points: int = 41, low: float = -2.0, high: float = 2.0) -> np.ndarray:
    return np.linspace(low, high, n_points)


def fit_mixture(
    source,
    x0,
    x1,
    tuning: Optional[TuningSchedule] = None,
    z_grid=None,
    project: bool = False,
    strict: bool = True,
    with_cdfs: bool = True,
) -> MixtureFit:
    """Run the full estimator pipeline between covariate points ``x0`` and ``x1``.

    Parameters
    ----------
    source : Dataset, MixtureModel or Observables
        A model gives the population plug-in run.
    tuning : TuningSchedule, optional
        Defaults to :meth:`TuningSchedule.default` for datasets.
    project : bool
        Apply the monotone ``[0, 1]`` projection to both CDF grids.
    strict : bool
        Raise on an ambiguous CF branch rather than recording a warning.
    """
    if _same_point(x0, x1):
        raise ConfigError("x0 and x1 must differ")
    if tuning is None and isinstance(source, mc.MixtureModel):
        tuning = TuningSchedule.population()
    obs = as_observables(source, tuning)
    if tuning is None:
        tuning = obs.tuning
    x0, x1 = mc.as_point(x0), mc.as_point(x1)
    notes = []
    slopes = estimate_slopes(obs, x0, x1, tuning, strict=strict)
    if not slopes.branch_ok:
        notes.append("CF branch ambiguous; nabla_hat untrusted")
    lam, lam_notes = estimate_lambda(obs, x0, x1, slopes, tuning)
    notes += lam_notes
    m1, m2, c_value = estimate_levels(obs, x0, x1, slopes, lam, tuning)
    diag = {"nabla_noise": slopes.noise}
    diag.update(slopes.denominators)
    f1_tab = f2_tab = None
    swapped = slopes.delta_hat - slopes.nabla_hat < 0
    if with_cdfs:
        grid = default_z_grid() if z_grid is None else np.asarray(z_grid, dtype=float)
        setup = series_setup(x0, x1, slopes, lam, m1, m2)
        f2 = series_F2(obs, setup, tuning.p_n, tuning.series_slack)
        f1 = F1_from_F2(obs, x0, f2, lam, m1, m2)
        raw2 = np.asarray(f2(grid), dtype=float)
        raw1 = np.asarray(f1(grid), dtype=float)
        f2_tab = FTable(grid, raw2, project_monotone(raw2) if project else None)
        f1_tab = FTable(grid, raw1, project_monotone(raw1) if project else None)
        if lam <= LAMBDA_BOUNDS[0]:
            notes.append("F1 amplified by 1/lambda_hat at the clamp floor")
    return MixtureFit(
        x0=x0,
        x1=x1,
        delta_hat=slopes.delta_hat,
        nabla_hat=slopes.nabla_hat,
        branch_ok=slopes.branch_ok,
        lambda_hat=lam,
        m1_hat_x0=m1,
        m2_hat_x0=m2,
        C_hat=c_value,
        F1=f1_tab,
        F2=f2_tab,
        swapped=swapped,
        warnings=notes,
        diagnostics=diag,
    )
