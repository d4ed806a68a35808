"""Nadaraya-Watson estimates of conditional transforms at a covariate point.

Every estimate is built from a :class:`LocalWindow`, which holds the log
kernel weights of the sample around one target point.  Building the window
once and reading several transforms from it (MGF, CF, mean, second moment,
CDF) is how the estimators avoid recomputing weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyWindow
from .model_core import as_point

MASS_FLOOR = 1e-12
_LOG_MASS_FLOOR = math.log(MASS_FLOOR)

# standard deviation of the quartic kernel supported on [-1/2, 1/2]
QUARTIC_SD = math.sqrt(1.0 / 28.0)
_LOG_GAUSS_NORM = -0.5 * math.log(2.0 * math.pi)
_LOG_QUARTIC_NORM = math.log(15.0 / 8.0)


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel with per-coordinate bandwidths.

    Parameters
    ----------
    family : {"gaussian", "quartic_compact"}
        ``quartic_compact`` is ``(15/8)(1 - 4u^2)^2`` on ``[-1/2, 1/2]``.
    bandwidth : float or sequence of float
    """

    family: str
    bandwidth: tuple

    def __init__(self, family: str, bandwidth):
        if family not in ("gaussian", "quartic_compact"):
            raise ConfigError(f"unknown kernel family {family!r}")
        bw = tuple(float(b) for b in np.atleast_1d(bandwidth))
        if not bw or any(not (b > 0 and math.isfinite(b)) for b in bw):
            raise ConfigError("kernel bandwidths must be positive and finite")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "bandwidth", bw)

    @property
    def compact(self) -> bool:
        return self.family == "quartic_compact"

    def log_density(self, u: np.ndarray) -> np.ndarray:
        """Log kernel at scaled offsets ``u`` of shape ``(n, k)``; ``-inf`` off support."""
        if self.family == "gaussian":
            return np.sum(_LOG_GAUSS_NORM - 0.5 * u * u, axis=1)
        inside = np.all(np.abs(u) < 0.5, axis=1)
        core = np.clip(1.0 - 4.0 * u * u, 0.0, None)
        with np.errstate(divide="ignore"):
            out = np.sum(_LOG_QUARTIC_NORM + 2.0 * np.log(core), axis=1)
        return np.where(inside, out, -np.inf)


@dataclass(frozen=True)
class NWEstimate:
    """Kernel-weighted estimate with its support diagnostics.

    ``denominator_mass`` is the kernel-weight sum over ``n h^k``;
    ``effective_count`` is the Kish effective sample size of the weights.
    """

    value: object
    denominator_mass: float
    effective_count: float


class LocalWindow:
    """Normalized kernel weights of a sample around one covariate point."""

    def __init__(self, x_data: np.ndarray, z: np.ndarray, x, kernel: KernelSpec):
        x_data = np.asarray(x_data, dtype=float)
        if x_data.ndim == 1:
            x_data = x_data[:, None]
        n, k = x_data.shape
        if n == 0:
            raise EmptyWindow("empty dataset")
        if len(kernel.bandwidth) not in (1, k):
            raise ConfigError(f"kernel has {len(kernel.bandwidth)} bandwidths for {k} covariates")
        bw = np.broadcast_to(np.asarray(kernel.bandwidth), (k,))
        self.point = as_point(x, k)
        self.kernel = kernel
        self.z = np.asarray(z, dtype=float)
        lw = kernel.log_density((x_data - self.point) / bw)
        self.log_weights = lw
        top = np.max(lw)
        if not np.isfinite(top):
            raise EmptyWindow(f"no observations inside the kernel window at x={self.point.tolist()}")
        w = np.exp(lw - top)
        total = np.sum(w)
        self._top = top
        self.log_total = top + math.log(total)
        self.log_mass = self.log_total - math.log(n) - float(np.sum(np.log(bw)))
        if self.log_mass < _LOG_MASS_FLOOR:
            raise EmptyWindow(
                f"kernel mass {math.exp(self.log_mass):.3g} at x={self.point.tolist()} is below {MASS_FLOOR:g}"
            )
        self.weights = w
        self.total = total
        self.effective_count = float(total * total / np.sum(w * w))
        # reference observation for exact constant-data moments
        self._ref = float(self.z[int(np.argmax(w))])
        self._sorted = None

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)

    def _wrap(self, value) -> NWEstimate:
        return NWEstimate(value, self.mass, self.effective_count)

    def log_mgf(self, t):
        """``log M_hat(t|x)`` for scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        # shifted by the top log weight so that t = 0 rebuilds ``total`` bit for bit
        shifted = self.log_weights - self._top
        terms = t[..., None] * self.z + shifted
        peak = np.max(terms, axis=-1, keepdims=True)
        with np.errstate(under="ignore"):
            acc = np.sum(np.exp(terms - peak), axis=-1)
        out = peak[..., 0] + (np.log(acc) - np.log(self.total))
        return float(out) if out.ndim == 0 else out

    def cf(self, s):
        s = np.asarray(s, dtype=float)
        arg = s[..., None] * self.z
        re = np.sum(self.weights * np.cos(arg), axis=-1)
        im = np.sum(self.weights * np.sin(arg), axis=-1)
        # at s = 0 the real sum repeats the denominator sum exactly; dividing the
        # parts separately avoids the rounding of complex-by-real division
        out = re / self.total + 1j * (im / self.total)
        return complex(out) if out.ndim == 0 else out

    def mean(self) -> float:
        r = self._ref
        return r + float(np.sum(self.weights * (self.z - r)) / self.total)

    def m2(self) -> float:
        r2 = self._ref * self._ref
        return r2 + float(np.sum(self.weights * (self.z * self.z - r2)) / self.total)

    def cdf(self, z):
        """Weighted ECDF; exactly 0 below the sample and 1 at or above its maximum."""
        if self._sorted is None:
            order = np.argsort(self.z, kind="stable")
            cum = np.cumsum(self.weights[order])
            self._sorted = (self.z[order], cum)
        zs, cum = self._sorted
        z = np.asarray(z, dtype=float)
        idx = np.searchsorted(zs, z, side="right")
        padded = np.concatenate(([0.0], cum))
        out = np.minimum(padded[idx] / cum[-1], 1.0)
        return float(out) if out.ndim == 0 else out


def local_window(data, x, kernel: KernelSpec) -> LocalWindow:
    return LocalWindow(data.x, data.z, x, kernel)


def nw_cond_mgf(data, x, t, kernel: KernelSpec) -> NWEstimate:
    """NW estimate of the conditional MGF; ``value`` is ``log M_hat(t|x)``.

    The Gaussian and quartic kernels are nonnegative by construction, which
    the log-domain evaluation relies on.
    """
    w = local_window(data, x, kernel)
    return w._wrap(w.log_mgf(t))


def nw_cond_cf(data, x, s, kernel: KernelSpec) -> NWEstimate:
    w = local_window(data, x, kernel)
    return w._wrap(w.cf(s))


def nw_cond_mean(data, x, kernel: KernelSpec) -> NWEstimate:
    w = local_window(data, x, kernel)
    return w._wrap(w.mean())


def nw_cond_m2(data, x, kernel: KernelSpec) -> NWEstimate:
    w = local_window(data, x, kernel)
    return w._wrap(w.m2())


def nw_cond_cdf(data, x, z, kernel: KernelSpec) -> NWEstimate:
    if not kernel.compact:
        raise ConfigError("conditional CDF estimation needs the quartic_compact kernel")
    w = local_window(data, x, kernel)
    return w._wrap(w.cdf(z))


def rule_of_thumb_bandwidth(x_data: np.ndarray) -> np.ndarray:
    """Per-coordinate ``sd(x) * n^(-1/(k+4))``."""
    x_data = np.asarray(x_data, dtype=float)
    if x_data.ndim == 1:
        x_data = x_data[:, None]
    n, k = x_data.shape
    sd = np.std(x_data, axis=0, ddof=1) if n > 1 else np.ones(k)
    sd = np.where(sd > 0, sd, 1.0)
    return sd * n ** (-1.0 / (k + 4))


def default_kernels(x_data) -> dict:
    """Gaussian kernel for transforms and moments, quartic for the CDF.

    The quartic bandwidth is the rule-of-thumb value divided by the quartic
    kernel's standard deviation, so both kernels smooth over a comparable
    spread of covariates.
    """
    rot = rule_of_thumb_bandwidth(x_data)
    return {
        "moment": KernelSpec("gaussian", rot),
        "cdf": KernelSpec("quartic_compact", rot / QUARTIC_SD),
    }
