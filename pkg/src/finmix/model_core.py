"""Analytic mixture specifications and their exact population functionals.

A model is a list of components ``(m_j, F_j)`` plus mixing weights, either a
constant probability vector or a covariate-dependent weight ``lambda(x)`` for
two components.  Every functional here is exact: conditional MGFs are
assembled in the log domain, conditional CFs in a scaled form
``exp(log_scale) * mantissa`` so that ratios survive underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np
from scipy import special, stats

from .errors import ConfigError, DegenerateDenominator, DomainError

CF_FLOOR = 1e-300
_LOG_CF_FLOOR = math.log(CF_FLOOR)


def as_point(x, k: Optional[int] = None) -> np.ndarray:
    """Coerce a covariate point to a 1-d float array of length ``k``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if k is not None and arr.size != k:
        raise ConfigError(f"covariate point has dimension {arr.size}, expected {k}")
    return arr


# ---------------------------------------------------------------------------
# error laws
# ---------------------------------------------------------------------------


class ErrorDistribution:
    """Centered error law with CDF, MGF, CF and a sampler.

    Subclasses implement the ``_log_mgf``, ``_cf_scaled``, ``cdf`` and
    ``sample`` hooks.  ``mgf_domain`` is the open interval on which the MGF
    is finite.
    """

    name = "abstract"
    mean = 0.0
    mgf_domain: tuple = (-math.inf, math.inf)

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def check_domain(self, t) -> None:
        lo, hi = self.mgf_domain
        ta = np.asarray(t, dtype=float)
        if np.any(ta <= lo) or np.any(ta >= hi):
            raise DomainError(f"{self.name}: MGF argument outside domain ({lo}, {hi})")

    def log_mgf(self, t):
        """``log E exp(t eps)``, vectorized; raises DomainError off-domain."""
        self.check_domain(t)
        return self._log_mgf(np.asarray(t, dtype=float))

    def mgf(self, t):
        return np.exp(self.log_mgf(t))

    def cf_scaled(self, s):
        """Return ``(log_scale, mantissa)`` with ``cf = exp(log_scale)*mantissa``."""
        return self._cf_scaled(np.asarray(s, dtype=float))

    def cf(self, s):
        ls, mant = self.cf_scaled(s)
        return np.exp(ls) * mant

    def cdf(self, z):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def log_mgf_mp(self, t, ctx=mpmath.mp):
        """High-precision log-MGF; accepts real or complex ``t``."""
        raise NotImplementedError

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.name}({inner})"


class Gaussian(ErrorDistribution):
    name = "gaussian"

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ConfigError("gaussian sigma must be positive")
        self.sigma = float(sigma)

    @property
    def variance(self):
        return self.sigma**2

    def params(self):
        return {"sigma": self.sigma}

    def _log_mgf(self, t):
        return 0.5 * self.sigma**2 * t * t

    def _cf_scaled(self, s):
        return -0.5 * self.sigma**2 * s * s, np.ones_like(s, dtype=complex)

    def cdf(self, z):
        return special.ndtr(np.asarray(z, dtype=float) / self.sigma)

    def sample(self, rng, size):
        return self.sigma * rng.standard_normal(size)

    def log_mgf_mp(self, t, ctx=mpmath.mp):
        return ctx.mpf(self.sigma) ** 2 * t * t / 2


class SkewNormal(ErrorDistribution):
    """Skew-normal law with shape ``alpha`` and scale ``omega``, shifted to mean zero.

    The MGF is entire, ``2 exp(omega^2 t^2 / 2) Phi(delta omega t) exp(-mu t)``;
    positive ``alpha`` gives the heavier right MGF tail, negative the left.
    """

    name = "skew_normal"

    def __init__(self, alpha: float, omega: float = 1.0):
        if not omega > 0:
            raise ConfigError("skew_normal omega must be positive")
        self.alpha = float(alpha)
        self.omega = float(omega)
        self.delta = self.alpha / math.sqrt(1.0 + self.alpha**2)
        self.mu = self.omega * self.delta * math.sqrt(2.0 / math.pi)

    @property
    def variance(self):
        return self.omega**2 * (1.0 - 2.0 * self.delta**2 / math.pi)

    def params(self):
        return {"alpha": self.alpha, "omega": self.omega}

    def _log_mgf(self, t):
        w = self.omega
        return math.log(2.0) + 0.5 * (w * t) ** 2 + special.log_ndtr(self.delta * w * t) - self.mu * t

    def _cf_scaled(self, s):
        u = self.omega * s
        d = self.delta
        log_scale = -0.5 * (1.0 - d * d) * u * u
        mant = np.exp(-0.5 * d * d * u * u) + 1j * (2.0 / math.sqrt(math.pi)) * special.dawsn(d * u / math.sqrt(2.0))
        return log_scale, mant * np.exp(-1j * self.mu * s)

    def cdf(self, z):
        y = (np.asarray(z, dtype=float) + self.mu) / self.omega
        return np.clip(stats.skewnorm.cdf(y, self.alpha), 0.0, 1.0)

    def sample(self, rng, size):
        u0 = np.abs(rng.standard_normal(size))
        u1 = rng.standard_normal(size)
        y = self.delta * u0 + math.sqrt(1.0 - self.delta**2) * u1
        return self.omega * y - self.mu

    def log_mgf_mp(self, t, ctx=mpmath.mp):
        w = ctx.mpf(self.omega)
        d = ctx.mpf(self.alpha) / ctx.sqrt(1 + ctx.mpf(self.alpha) ** 2)
        mu = w * d * ctx.sqrt(2 / ctx.pi)
        # Phi(x) = erfc(-x/sqrt 2)/2 works for complex arguments
        phi = ctx.erfc(-d * w * t / ctx.sqrt(2)) / 2
        return ctx.log(2) + (w * t) ** 2 / 2 + ctx.log(phi) - mu * t


class Laplace(ErrorDistribution):
    """Laplace law with scale ``b``; MGF finite only on ``|t| < 1/b``."""

    name = "laplace"

    def __init__(self, b: float):
        if not b > 0:
            raise ConfigError("laplace scale must be positive")
        self.b = float(b)
        self.mgf_domain = (-1.0 / self.b, 1.0 / self.b)

    @property
    def variance(self):
        return 2.0 * self.b**2

    def params(self):
        return {"b": self.b}

    def _log_mgf(self, t):
        return -np.log1p(-((self.b * t) ** 2))

    def _cf_scaled(self, s):
        return -np.log1p((self.b * s) ** 2), np.ones_like(s, dtype=complex)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0) / self.b), 1.0 - 0.5 * np.exp(-np.maximum(z, 0) / self.b))

    def sample(self, rng, size):
        return rng.laplace(0.0, self.b, size)

    def log_mgf_mp(self, t, ctx=mpmath.mp):
        return -ctx.log(1 - (ctx.mpf(self.b) * t) ** 2)


ERROR_FAMILIES = {"gaussian": Gaussian, "skew_normal": SkewNormal, "laplace": Laplace}


# ---------------------------------------------------------------------------
# regression functions
# ---------------------------------------------------------------------------


def _coords(x):
    """Split ``x`` (array ``(..., k)`` or a sequence of scalars) into coordinates."""
    if isinstance(x, np.ndarray):
        return [x[..., i] for i in range(x.shape[-1])]
    return list(x)


@dataclass(frozen=True)
class RegressionFunction:
    """Regression function ``m: R^k -> R`` with an optional analytic gradient.

    ``value`` and ``gradient`` take either a float array whose last axis is
    the covariate dimension or a plain sequence of scalars (mpmath numbers
    included).  ``gradient`` returns a list with one entry per coordinate.
    """

    value: Callable
    gradient: Optional[Callable] = None
    k: int = 1
    label: str = "m"
    spec: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.value(x)

    def d1(self, x, order: int = 1, step: float = 1e-4):
        """Derivative in the first coordinate, analytic when available."""
        if order == 1 and self.gradient is not None:
            return self.gradient(x)[0]
        return _fd_first_coord(self.value, x, order, step)

    def check_gradient(self, points, rtol: float = 1e-6) -> bool:
        """Compare the analytic gradient against central differences."""
        if self.gradient is None:
            return True
        for p in points:
            p = as_point(p, self.k)
            g = np.asarray(self.gradient(p), dtype=float)
            for i in range(self.k):
                h = 1e-5 * (1.0 + abs(p[i]))
                up, dn = p.copy(), p.copy()
                up[i] += h
                dn[i] -= h
                fd = (self.value(up) - self.value(dn)) / (2 * h)
                if abs(fd - g[i]) > rtol * max(1.0, abs(g[i])):
                    return False
        return True


def _fd_first_coord(fun, x, order, step):
    xs = list(x) if not isinstance(x, np.ndarray) else list(np.asarray(x, dtype=float))

    def shifted(h):
        y = list(xs)
        y[0] = y[0] + h
        return fun(np.asarray(y, dtype=float)) if isinstance(y[0], float) else fun(y)

    if order == 1:
        return (shifted(step) - shifted(-step)) / (2 * step)
    if order == 2:
        return (shifted(step) - 2 * shifted(0.0) + shifted(-step)) / step**2
    raise ValueError("only first and second derivatives are supported")


def polynomial_terms(terms: Sequence, k: int = 1, label: str = "m") -> RegressionFunction:
    """Polynomial ``sum_c c * prod_i x_i^{p_i}`` from ``(coef, powers)`` pairs."""
    norm = []
    for coef, powers in terms:
        powers = tuple(int(p) for p in powers)
        if len(powers) != k or any(p < 0 for p in powers):
            raise ConfigError(f"polynomial term powers {powers} do not match dimension {k}")
        norm.append((float(coef), powers))

    def value(x):
        cs = _coords(x)
        out = 0
        for coef, powers in norm:
            term = coef
            for c, p in zip(cs, powers):
                if p:
                    term = term * c**p
            out = out + term
        if isinstance(out, (int, float)) and not isinstance(x, np.ndarray):
            return float(out)
        if isinstance(x, np.ndarray) and np.ndim(out) == 0:
            return np.full(x.shape[:-1], float(out)) if x.ndim > 1 else float(out)
        return out

    def gradient(x):
        cs = _coords(x)
        grads = []
        for i in range(k):
            g = 0
            for coef, powers in norm:
                if powers[i] == 0:
                    continue
                term = coef * powers[i]
                for j, (c, p) in enumerate(zip(cs, powers)):
                    e = p - 1 if j == i else p
                    if e:
                        term = term * c**e
                g = g + term
            if isinstance(x, np.ndarray) and np.ndim(g) == 0 and x.ndim > 1:
                g = np.full(x.shape[:-1], float(g))
            grads.append(g)
        return grads

    spec = {"type": "polynomial", "terms": [[c, list(p)] for c, p in norm]}
    return RegressionFunction(value=value, gradient=gradient, k=k, label=label, spec=spec)


def polynomial(coefficients: Sequence[float], label: str = "m") -> RegressionFunction:
    """Scalar-covariate polynomial with ``coefficients[i]`` multiplying ``x^i``."""
    return polynomial_terms([(c, (i,)) for i, c in enumerate(coefficients)], k=1, label=label)


# ---------------------------------------------------------------------------
# mixture model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    regression: RegressionFunction
    error: ErrorDistribution


@dataclass(frozen=True)
class WeightFunction:
    """Covariate-dependent weight ``lambda(x)`` of the first component."""

    fn: Callable
    spec: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.fn(x)


def linear_weight(intercept: float, slope: Sequence[float]) -> WeightFunction:
    slope = [float(s) for s in np.atleast_1d(slope)]

    def fn(x):
        cs = _coords(x)
        out = intercept
        for c, b in zip(cs, slope):
            out = out + b * c
        return out

    return WeightFunction(fn, {"type": "linear", "intercept": intercept, "slope": slope})


def quadratic_weight(peak: float, curvature: float, center: Sequence[float]) -> WeightFunction:
    """``peak - curvature * |x - center|^2``; ``peak = 1`` gives a degenerate point."""
    center = [float(c) for c in np.atleast_1d(center)]

    def fn(x):
        cs = _coords(x)
        out = 0
        for c, m in zip(cs, center):
            out = out + (c - m) ** 2
        return peak - curvature * out

    return WeightFunction(fn, {"type": "quadratic", "peak": peak, "curvature": curvature, "center": center})


class MixtureModel:
    """Finite mixture regression ``z = m_j(x) + eps_j`` with latent ``j``.

    Parameters
    ----------
    components : list of Component
    weights : sequence of float, optional
        Constant mixing probabilities, positive and summing to one.
    weight_function : WeightFunction, optional
        Covariate-dependent weight of component 1 (two components only).
    k : int
        Covariate dimension.
    """

    def __init__(self, components, weights=None, weight_function=None, k: int = 1, name: str = "model"):
        self.components = tuple(components)
        self.J = len(self.components)
        self.k = int(k)
        self.name = name
        if self.J < 1:
            raise ConfigError("model needs at least one component")
        for c in self.components:
            if c.regression.k != self.k:
                raise ConfigError("regression dimension does not match covariate_dim")
        if (weights is None) == (weight_function is None):
            raise ConfigError("give exactly one of weights or weight_function")
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.shape != (self.J,):
                raise ConfigError(f"weights has {w.size} entries for {self.J} components")
            if np.any(w <= 0):
                raise ConfigError("weights must be strictly positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ConfigError(f"weights sum to {w.sum():.12g}, not 1")
            self.weights = tuple(float(v) for v in w)
            self.weight_function = None
        else:
            if self.J != 2:
                raise ConfigError("covariate-dependent weights need exactly two components")
            self.weights = None
            self.weight_function = weight_function

    @property
    def constant_weights(self) -> bool:
        return self.weight_function is None

    def weights_at(self, x) -> np.ndarray:
        """Weights at one point (shape ``(J,)``) or at rows of ``x`` (shape ``(n, J)``)."""
        x = np.asarray(x, dtype=float)
        if self.weight_function is None:
            w = np.asarray(self.weights)
            return w if x.ndim <= 1 else np.broadcast_to(w, (x.shape[0], self.J)).copy()
        lam = np.asarray(self.weight_function(x if x.ndim > 1 else as_point(x, self.k)), dtype=float)
        if np.any(lam <= 0) or np.any(lam > 1):
            raise ConfigError("weight function left (0, 1] at an evaluated point")
        return np.stack([lam, 1.0 - lam], axis=-1)

    def check_weight_function(self, probes) -> None:
        for p in probes:
            self.weights_at(as_point(p, self.k))

    def means_at(self, x) -> np.ndarray:
        x = as_point(x, self.k)
        return np.array([float(c.regression(x)) for c in self.components])

    def permuted(self, order: Sequence[int]) -> "MixtureModel":
        """Same mixture with component indices permuted (constant weights only)."""
        if not self.constant_weights:
            raise ConfigError("permutation is defined for constant weights")
        comps = [self.components[i] for i in order]
        w = [self.weights[i] for i in order]
        return MixtureModel(comps, weights=w, k=self.k, name=self.name + "-perm")

    def __repr__(self):
        return f"MixtureModel(name={self.name!r}, J={self.J}, k={self.k})"


# ---------------------------------------------------------------------------
# population functionals
# ---------------------------------------------------------------------------


def _log_weights(model, x):
    w = model.weights_at(x)
    with np.errstate(divide="ignore"):
        return np.log(w)


def pop_cond_mgf(model: MixtureModel, t, x):
    """``log M(t|x)`` by log-sum-exp over components; vectorized in ``t``."""
    x = as_point(x, model.k)
    t = np.asarray(t, dtype=float)
    lw = _log_weights(model, x)
    terms = []
    for j, c in enumerate(model.components):
        terms.append(lw[j] + t * float(c.regression(x)) + c.error.log_mgf(t))
    terms = np.stack(np.broadcast_arrays(*terms), axis=0)
    out = special.logsumexp(terms, axis=0)
    return float(out) if out.ndim == 0 else out


def pop_cond_cf_scaled(model: MixtureModel, s, x):
    """Scaled conditional CF: ``(log_scale, mantissa)`` with mantissa modulus at most one."""
    x = as_point(x, model.k)
    s = np.asarray(s, dtype=float)
    w = model.weights_at(x)
    scales, mants = [], []
    for j, c in enumerate(model.components):
        ls, mant = c.error.cf_scaled(s)
        ls = np.broadcast_to(ls, s.shape)
        scales.append(ls)
        mants.append(w[j] * np.exp(1j * s * float(c.regression(x))) * mant)
    scales = np.stack(scales)
    top = scales.max(axis=0)
    mant = np.sum(np.stack(mants) * np.exp(scales - top), axis=0)
    return top, mant


def pop_cond_cf(model: MixtureModel, s, x):
    """``phi(s|x)``; underflows to zero for large ``s`` (use the scaled form for ratios)."""
    ls, mant = pop_cond_cf_scaled(model, s, x)
    out = np.exp(ls) * mant
    return complex(out) if np.ndim(out) == 0 else out


def pop_cond_cdf(model: MixtureModel, z, x):
    x = as_point(x, model.k)
    z = np.asarray(z, dtype=float)
    w = model.weights_at(x)
    out = np.zeros_like(z)
    for j, c in enumerate(model.components):
        out = out + w[j] * c.error.cdf(z - float(c.regression(x)))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def pop_cond_mean(model: MixtureModel, x) -> float:
    x = as_point(x, model.k)
    w = model.weights_at(x)
    return float(sum(w[j] * float(c.regression(x)) for j, c in enumerate(model.components)))


def pop_cond_m2(model: MixtureModel, x) -> float:
    x = as_point(x, model.k)
    w = model.weights_at(x)
    return float(sum(w[j] * (float(c.regression(x)) ** 2 + c.error.variance) for j, c in enumerate(model.components)))


def pop_log_R(model: MixtureModel, t, x, x0):
    """``log R(t,x) = log M(t|x) - log M(t|x0)``."""
    return pop_cond_mgf(model, t, x) - pop_cond_mgf(model, t, x0)


def pop_R(model: MixtureModel, t, x, x0):
    return np.exp(pop_log_R(model, t, x, x0))


def pop_rho(model: MixtureModel, s, x, x0):
    """``rho(x,s) = phi(s|x) / phi(s|x0)`` from scaled CFs.

    The floor applies to the mantissa of the denominator, i.e. to its modulus
    relative to the component envelope, so Gaussian underflow alone never
    triggers it.
    """
    ls1, m1 = pop_cond_cf_scaled(model, s, x)
    ls0, m0 = pop_cond_cf_scaled(model, s, x0)
    if np.any(np.abs(m0) < CF_FLOOR):
        raise DegenerateDenominator("conditional CF at the base point vanished")
    out = np.exp(ls1 - ls0) * (m1 / m0)
    return complex(out) if np.ndim(out) == 0 else out


def pop_log_abs_cf(model: MixtureModel, s, x):
    ls, mant = pop_cond_cf_scaled(model, s, x)
    with np.errstate(divide="ignore"):
        return ls + np.log(np.abs(mant))


# high-precision evaluation used by the J-component machinery


def pop_cond_mgf_mp(model: MixtureModel, t, x, ctx=mpmath.mp):
    """``M(t|x)`` itself (not its log) at working precision; ``t`` may be complex."""
    if not model.constant_weights:
        raise ConfigError("high-precision MGF needs constant weights")
    total = 0
    for w, c in zip(model.weights, model.components):
        total += ctx.mpf(w) * ctx.exp(t * c.regression(x) + c.error.log_mgf_mp(t, ctx))
    return total
