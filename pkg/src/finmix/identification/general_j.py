"""Identification of mixtures with J components by successive purging.

Starting from ``Q_1 = M(t|x)``, each step multiplies by an exponential that
freezes the currently dominant component, divides by its polynomial factor
and differentiates in the first covariate coordinate:

    Q_{k+1}(x, t) = D_x [ exp(-t (s_k(x) - s_{k-1}(x))) Q_k(x, t) / R_k^k(t, x) ].

The dominant component of ``Q_k`` is component ``k`` (components are
relabelled by their MGF dominance at ``x_a``), and its slope
``s_k(x) = m_k(x) - m_k(x_b)`` is read off the ``t``-log-derivative of
``Q_k``.  The number of components is the last index with ``Q_j`` not
identically zero.

Everything runs in mpmath at ``dps`` digits.  The ``x``-derivatives of
``Q_k`` are central differences with two Richardson steps, and every value
carries a noise estimate so that vanishing and non-vanishing ``Q_j`` can be
told apart.  The polynomial factors ``R_k^j`` are built from the model's
regression gradients, which the recursion needs in closed form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .. import model_core as mc
from ..errors import ConfigError, IllConditioned, SingularSystem
from .two_component import DET_FLOOR, solve_mgf_system

K_MAX = 4
BASE_DPS = 30
DEFAULT_H0 = 1e-10
DEFAULT_T = 30.0
DEFAULT_DETECT_GRID = (0.5, 1.0, 2.0, 4.0)


class SaturationWarning(UserWarning):
    """Component detection reached its cap without finding a vanishing Q."""


def dominance_order(model, x_a, T: float = DEFAULT_T):
    """Component indices sorted by ``log lambda_j + T m_j(x_a) + log M_j(T)``, largest first."""
    x = mc.as_point(x_a, model.k)
    scores = []
    for w, c in zip(model.weights, model.components):
        scores.append(math.log(w) + T * float(c.regression(x)) + float(c.error.log_mgf(T)))
    order = sorted(range(model.J), key=lambda j: -scores[j])
    return order, [scores[j] for j in order]


def check_ordering(model, x_a, T: float = DEFAULT_T, min_gap: float = 1e-6):
    """Components must have distinct dominance scores and distinct first-coordinate slopes at ``x_a``."""
    _, scores = dominance_order(model, x_a, T)
    gaps = np.diff(scores)
    if np.any(-gaps < min_gap * T):
        raise ConfigError(f"components are not strictly ordered by MGF dominance at x_a (scores {scores})")
    x = mc.as_point(x_a, model.k)
    d = [float(c.regression.d1(x)) for c in model.components]
    for i in range(len(d)):
        for j in range(i):
            if abs(d[i] - d[j]) < 1e-9:
                raise ConfigError(f"components {j + 1} and {i + 1} share the slope {d[i]:.6g} at x_a")


T_CANDIDATES = (2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0)
PURGE_MARGIN = 35.0


def choose_T(model, x_a, margin: float = PURGE_MARGIN) -> float:
    """Smallest candidate ``T`` over which every consecutive dominance gap grows by ``margin`` nats.

    This only tunes the numerics: it decides how far apart successive slope
    reads are placed.
    """
    if model.J == 1:
        return T_CANDIDATES[0]
    for T in T_CANDIDATES:
        _, s1 = dominance_order(model, x_a, T)
        _, s2 = dominance_order(model, x_a, 2 * T)
        if min((s2[i] - s2[i + 1]) - (s1[i] - s1[i + 1]) for i in range(model.J - 1)) >= margin:
            return T
    return T_CANDIDATES[-1]


def working_dps(model, x_a, t_max: float) -> int:
    """Digits needed so the weakest component survives next to the strongest at ``t_max``.

    Each purge subtracts the dominant term from a sum, so the remainder is
    only as accurate as the working precision relative to that term.
    """
    _, scores = dominance_order(model, x_a, t_max)
    spread = scores[0] - scores[-1]
    # each nesting level divides by a step of about 1e-10 times 10^(depth-1)
    return BASE_DPS + 15 * K_MAX + int(math.ceil(spread / math.log(10)))


@dataclass
class QValue:
    value: object
    noise: float


class QRecursion:
    """Memoized evaluation of ``Q_k(y, t)`` and the slopes ``s_k(y)``.

    Parameters
    ----------
    model : MixtureModel
        Constant weights; treated as a source of ``M(t|x)`` except for the
        regression gradients entering ``R_k^j``.
    x_a, x_b : covariate points
        Differentiation point and slope reference point.
    T : float, optional
        Spacing of the slope reads (see :meth:`read_T`); chosen by
        :func:`choose_T` when omitted.
    dps : int, optional
        Working digits; by default enough to resolve the weakest component
        under the strongest at ``2T`` (see :func:`working_dps`).
    h0 : float
        Base step; the derivative producing ``Q_{d+1}`` uses
        ``h0 (1 + |x_a|) / 10^(d-1)``.
    """

    def __init__(self, model, x_a, x_b, T: Optional[float] = None, k_max: int = K_MAX, dps: Optional[int] = None,
                 h0: float = DEFAULT_H0, eta: float = 1e-40):
        if not model.constant_weights:
            raise ConfigError("the purging recursion needs constant weights")
        if not 1 <= k_max <= K_MAX:
            raise ConfigError(f"k_max must lie in 1..{K_MAX}")
        T = choose_T(model, x_a) if T is None else float(T)
        self.order, self.scores = dominance_order(model, x_a, T * k_max)
        self.model = model.permuted(self.order) if model.J > 1 else model
        self.k_max = k_max
        self.ctx = ctx = mpmath.mp.clone()
        ctx.dps = working_dps(model, x_a, T * k_max) if dps is None else int(dps)
        self.eps = float(ctx.mpf(2) ** (-ctx.prec))
        self.T = ctx.mpf(T)
        self.eta = ctx.mpf(eta)
        self.x_a = [ctx.mpf(float(v)) for v in mc.as_point(x_a, model.k)]
        self.x_b = [ctx.mpf(float(v)) for v in mc.as_point(x_b, model.k)]
        self.h0 = ctx.mpf(h0) * (1 + abs(self.x_a[0]))
        self._q = {}
        self._s = {}
        self._r = {}
        self._res = {}

    # -- building blocks ------------------------------------------------

    def _key(self, y):
        # exact binary representation; steps below any printed precision still differ
        return tuple(getattr(v, "_mpf_", None) or getattr(v, "_mpc_", None) or float(v) for v in y)

    def _shift(self, y, h):
        z = list(y)
        z[0] = z[0] + h
        return z

    def step(self, depth: int):
        return self.h0 / self.ctx.mpf(10) ** (depth - 1)

    def mgf(self, y, t):
        return mc.pop_cond_mgf_mp(self.model, t, y, self.ctx)

    def dm(self, j: int, y):
        """First-coordinate derivative of ``m_j`` (0-based ``j``) at ``y``."""
        reg = self.model.components[j].regression
        if reg.gradient is not None:
            return reg.gradient(y)[0]
        return self.ctx.diff(lambda u: reg(self._shift(y, u - y[0])), y[0])

    def R(self, k: int, j: int, t, y):
        """Polynomial factor ``R_k^j(t, y)`` (1-based ``k``, 0-based ``j``); ``R_1 = 1``."""
        if k == 1:
            return self.ctx.mpf(1)
        key = (k, j, self._key([t]), self._key(y))
        if key in self._r:
            return self._r[key]
        if k == 2:
            val = t * (self.dm(j, y) - self.dm(0, y))
        else:
            prev = k - 2  # 0-based index of the component purged at the previous step

            def ratio(u):
                z = self._shift(y, u - y[0])
                return self.R(k - 1, j, t, z) / self.R(k - 1, prev, t, z)

            val = self.ctx.diff(ratio, y[0]) + t * ratio(y[0]) * (self.dm(j, y) - self.dm(prev, y))
        self._r[key] = val
        return val

    def dlog_R(self, k: int, t, y):
        """``d/dt log R_k^k(t, y)`` by complex step."""
        if k == 1:
            return self.ctx.mpf(0)
        v = self.R(k, k - 1, t + 1j * self.eta, y)
        return self.ctx.im(v) / (self.eta * self.ctx.re(v))

    # -- recursion -------------------------------------------------------

    def _integrand(self, k: int, y, t):
        """The function differentiated to obtain ``Q_k``; returns (value, noise)."""
        ctx = self.ctx
        if k == 2:
            s_prev = self.slope(1, y)
            m = self.mgf(y, t)
            f = ctx.exp(-t * s_prev) * m
            return f, self.eps * float(abs(f))
        inner = self.Q(k - 1, y, t)
        factor = ctx.exp(-t * (self.slope(k - 1, y) - self.slope(k - 2, y))) / self.R(k - 1, k - 2, t, y)
        return factor * inner.value, float(abs(factor)) * inner.noise

    def Q(self, k: int, y, t) -> QValue:
        """``Q_k(y, t)`` with its noise estimate; ``Q_1 = M(t|y)``."""
        if k > self.k_max:
            raise ConfigError(f"Q_{k} exceeds k_max = {self.k_max}")
        key = (k, self._key(y), self._key([t]))
        if key in self._q:
            return self._q[key]
        if k == 1:
            m = self.mgf(y, t)
            out = QValue(m, self.eps * float(abs(m)))
            self._q[key] = out
            return out
        h = self.step(k - 1)
        diffs, fmax, nmax = [], 0.0, 0.0
        for hh in (h, h / 2, h / 4):
            fp, np_ = self._integrand(k, self._shift(y, hh), t)
            fm, nm = self._integrand(k, self._shift(y, -hh), t)
            diffs.append((fp - fm) / (2 * hh))
            fmax = max(fmax, float(abs(fp)), float(abs(fm)))
            nmax = max(nmax, np_, nm)
        r1 = (4 * diffs[1] - diffs[0]) / 3
        r2 = (4 * diffs[2] - diffs[1]) / 3
        val = (16 * r2 - r1) / 15
        trunc = float(abs(val - r2))
        tabs = float(abs(t))
        res = self.slope_residual(k - 1)
        hf = float(h) / 4
        # slope errors are smooth in y, varying on the scale 1/T of the purge
        propagated = tabs * (1.0 + float(self.T)) * res * fmax
        noise = trunc + (self.eps * fmax + nmax) / hf + propagated
        out = QValue(val, noise)
        self._q[key] = out
        return out

    def dlog_Q(self, k: int, y, t):
        """``d/dt log Q_k(y, t)`` by complex step."""
        v = self.Q(k, y, t + 1j * self.eta).value
        return self.ctx.im(v) / (self.eta * self.ctx.re(v))

    def read_T(self, k: int):
        """Argument at which ``s_k`` is read: ``T (k_max - k + 1)``.

        A slope read at ``T'`` purges its component only up to
        ``exp(-T' gap)``, which the next stage amplifies by ``exp(t gap)``;
        reading earlier slopes further out keeps that product small.
        """
        return self.T * (self.k_max - k + 1)

    def slope(self, k: int, y, T=None):
        """``s_k(y) = m_k(y) - m_k(x_b)`` read off at ``T`` (default :meth:`read_T`)."""
        T = self.read_T(k) if T is None else T
        key = (k, self._key(y), self._key([T]))
        if key in self._s:
            return self._s[key]
        ctx = self.ctx
        if k == 0:
            val = ctx.mpf(0)
        elif k == 1:
            val = ctx.log(self.mgf(y, T) / self.mgf(self.x_b, T)) / T
        else:
            val = (
                self.slope(k - 1, y)
                + self.dlog_Q(k, y, T)
                - self.dlog_Q(k, self.x_b, T)
                - (self.dlog_R(k, T, y) - self.dlog_R(k, T, self.x_b))
            )
        self._s[key] = val
        return val

    def slope_residual(self, k: int) -> float:
        """``|s_k(x_a)|`` read at ``read_T(k)`` minus the same read half a step ``T`` earlier."""
        if k == 0:
            return 0.0
        if k not in self._res:
            early = self.read_T(k) - self.T / 2
            self._res[k] = float(abs(self.slope(k, self.x_a) - self.slope(k, self.x_a, early)))
        return self._res[k]

    # -- oracle ----------------------------------------------------------

    def representation(self, k: int, t):
        """``sum_{j>=k} lambda_j R_k^j e^{t (m_j(x_a) - s_{k-1}(x_a))} M_j(t)`` with true parameters."""
        ctx = self.ctx
        x = self.x_a
        comps = self.model.components
        if k == 1:
            return self.mgf(x, t)
        km1 = comps[k - 2].regression
        s_prev = km1(x) - km1(self.x_b)
        total = ctx.mpf(0)
        for j in range(k - 1, self.model.J):
            c = comps[j]
            total += (
                ctx.mpf(self.model.weights[j])
                * self.R(k, j, t, x)
                * ctx.exp(t * (c.regression(x) - s_prev) + c.error.log_mgf_mp(t, ctx))
            )
        return total


@dataclass
class QTable:
    """``Q_k(x_a, t)`` on a grid with noise estimates."""

    k: int
    t_grid: tuple
    values: tuple
    noise: tuple

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v in self.values)

    @property
    def max_noise(self) -> float:
        return max(self.noise)


def q_recursion(model, x_a, x_b, k_max: int = 3, t_grid=(10.0,), require: Optional[int] = None, **fd) -> tuple:
    """``Q_1..Q_{k_max}`` at ``x_a`` on ``t_grid``.

    Returns ``(tables, recursion)``.  Raises IllConditioned when some
    ``Q_k`` with ``k <= require`` (default ``k_max``) has noise above its
    magnitude at every grid point.
    """
    rec = QRecursion(model, x_a, x_b, k_max=k_max, **fd)
    require = k_max if require is None else require
    tables = []
    for k in range(1, k_max + 1):
        vals, noise = [], []
        for t in t_grid:
            q = rec.Q(k, rec.x_a, rec.ctx.mpf(float(t)))
            vals.append(float(q.value))
            noise.append(q.noise)
        tab = QTable(k, tuple(float(t) for t in t_grid), tuple(vals), tuple(noise))
        if k <= require and all(abs(v) <= n for v, n in zip(vals, noise)):
            raise IllConditioned(f"Q_{k} is below its noise estimate {max(noise):.3g} on the whole grid")
        tables.append(tab)
    return tables, rec


@dataclass
class SlopeRecovery:
    """Slopes ``m_k(x_a) - m_k(x_b)`` in dominance order with residuals."""

    slopes: tuple
    residuals: tuple
    order: tuple


def slope_recovery_J(model, x_a, x_b, J: int, **fd) -> SlopeRecovery:
    """Telescoped slopes ``m_k(x_a) - m_k(x_b)``, ``k = 1..J``, components in dominance order."""
    if np.array_equal(mc.as_point(x_a, model.k), mc.as_point(x_b, model.k)):
        return SlopeRecovery(tuple(0.0 for _ in range(J)), tuple(0.0 for _ in range(J)),
                             tuple(dominance_order(model, x_a)[0]))
    rec = QRecursion(model, x_a, x_b, k_max=J, **fd)
    slopes = tuple(float(rec.slope(k, rec.x_a)) for k in range(1, J + 1))
    res = tuple(rec.slope_residual(k) for k in range(1, J + 1))
    return SlopeRecovery(slopes, res, tuple(rec.order))


def detect_J(model, x_a, x_b, j_max: int = K_MAX, t_grid=DEFAULT_DETECT_GRID, zero_tol: float = 100.0, **fd):
    """Number of components: the last ``j`` whose ``Q_j`` is not zero within noise.

    ``Q_j`` counts as nonzero when its largest magnitude on ``t_grid``
    exceeds ``zero_tol`` times its largest noise estimate.  The search stops
    at the first vanishing ``Q``; reaching ``j_max`` issues a
    SaturationWarning.  Returns ``(J, evidence)``.
    """
    j_max = min(int(j_max), K_MAX)
    rec = QRecursion(model, x_a, x_b, k_max=j_max, **fd)
    evidence = {}
    for j in range(2, j_max + 1):
        # components beyond the model are never purged, so Q_j only needs R up to j-1
        try:
            vals = [rec.Q(j, rec.x_a, rec.ctx.mpf(float(t))) for t in t_grid]
        except (ZeroDivisionError, ValueError) as exc:
            evidence[f"Q{j}_error"] = str(exc)
            return j - 1, evidence
        mag = max(float(abs(q.value)) for q in vals)
        noise = max(q.noise for q in vals)
        evidence[f"Q{j}_max_abs"] = mag
        evidence[f"Q{j}_max_noise"] = noise
        if not mag > zero_tol * noise:
            return j - 1, evidence
    warnings.warn(f"Q_{j_max} is still nonzero; the count may exceed {j_max}", SaturationWarning, stacklevel=2)
    return j_max, evidence


@dataclass
class JIdentificationResult:
    """Recovered J-component parameters at ``x0`` in dominance order."""

    J_detected: int
    order: tuple
    points: tuple
    slopes: np.ndarray  # (J, len(points)): m_j(X_i) - m_j(x0)
    lambda_vec: np.ndarray
    levels: np.ndarray
    t_grid: np.ndarray
    mgf_tables: np.ndarray  # (len(t_grid), J)
    det_A: float
    det_B: float
    min_det_D: float
    skipped_t: list = field(default_factory=list)
    slope_source: str = "recovered"

    def scalars(self) -> dict:
        out = {"J": self.J_detected, "order": " ".join(str(i + 1) for i in self.order)}
        for j, v in enumerate(self.lambda_vec):
            out[f"lambda_{j + 1}"] = float(v)
        for j, v in enumerate(self.levels):
            out[f"m{j + 1}_x0"] = float(v)
        for j in range(self.slopes.shape[0]):
            for i in range(self.slopes.shape[1]):
                out[f"slope_{j + 1}_point{i + 1}"] = float(self.slopes[j, i])
        out.update(det_A=self.det_A, det_B=self.det_B, min_det_D=self.min_det_D, skipped_t=len(self.skipped_t))
        return out


def _relative_det(A: np.ndarray) -> float:
    norms = np.linalg.norm(A, axis=1)
    return float(abs(np.linalg.det(A)) / np.prod(norms)) if np.all(norms > 0) else 0.0


def recover_J_parameters(
    model,
    x0,
    points: Sequence,
    t_grid=tuple(np.linspace(0.1, 4.0, 40)),
    J: Optional[int] = None,
    slopes: str = "recovered",
    det_floor: float = DET_FLOOR,
    **fd,
) -> JIdentificationResult:
    """Weights, levels at ``x0`` and component MGFs from ``J - 1`` extra points.

    Parameters
    ----------
    points : sequence
        ``J - 1`` covariate points ``X_i`` distinct from ``x0``.
    J : int, optional
        Number of components; detected from ``x0`` and the first point when
        omitted.
    slopes : {"recovered", "model"}
        ``model`` injects the exact increments instead of the purged slopes.

    Raises
    ------
    SingularSystem
        ``A`` (or ``B``) has relative determinant below ``det_floor``.
    """
    if not model.constant_weights:
        raise ConfigError("J-component recovery needs constant weights")
    pts = [mc.as_point(p, model.k) for p in points]
    x0p = mc.as_point(x0, model.k)
    if J is None:
        J, _ = detect_J(model, x0p, pts[0], **fd)
    if len(pts) != J - 1:
        raise ConfigError(f"{J} components need {J - 1} extra points, got {len(pts)}")
    order, _ = dominance_order(model, x0p)
    ordered = model.permuted(order) if model.J > 1 else model
    if J > 1:
        check_ordering(model, x0p)

    # slope matrix: S[j, i] = m_j(X_i) - m_j(x0)
    S = np.zeros((J, len(pts)))
    for i, p in enumerate(pts):
        if slopes == "model":
            S[:, i] = [float(c.regression(p) - c.regression(x0p)) for c in ordered.components[:J]]
        elif slopes == "recovered":
            rec = slope_recovery_J(model, x0p, p, J, **fd)
            S[:, i] = [-v for v in rec.slopes]
        else:
            raise ConfigError("slopes must be 'recovered' or 'model'")

    e0 = mc.pop_cond_mean(model, x0p)
    e2_0 = mc.pop_cond_m2(model, x0p)
    if J == 1:
        lam = np.array([1.0])
        det_a = det_b = 1.0
    else:
        A = np.array([[S[j, i] - S[J - 1, i] for j in range(J - 1)] for i in range(J - 1)])
        rhs = np.array([mc.pop_cond_mean(model, p) - e0 - S[J - 1, i] for i, p in enumerate(pts)])
        det_a = _relative_det(A)
        if not det_a > det_floor:
            raise SingularSystem(f"relative det A = {det_a:.3g} is below {det_floor:g}", det_a)
        head = np.linalg.solve(A, rhs)
        lam = np.append(head, 1.0 - head.sum())

    # levels: rows sum_j lambda_j m_j(x0) S[j, i] = -C_i and sum_j lambda_j m_j(x0) = E[z|x0]
    B = np.vstack([S.T, np.ones(J)]) if J > 1 else np.ones((1, 1))
    c_rows = [
        -0.5 * (e2_0 - mc.pop_cond_m2(model, p) + float(np.sum(lam * S[:, i] ** 2))) for i, p in enumerate(pts)
    ]
    b = np.array(c_rows + [e0])
    det_b = _relative_det(B)
    if not det_b > det_floor:
        raise SingularSystem(f"relative det B = {det_b:.3g} is below {det_floor:g}", det_b)
    levels = np.linalg.solve(B, b) / lam

    all_pts = [x0p] + pts
    means = np.array([[levels[j] + (S[j, i - 1] if i else 0.0) for j in range(J)] for i in range(J)])

    def rows(t, ctx):
        A_ = [[ctx.mpf(float(lam[j])) * ctx.exp(t * float(means[i, j])) for j in range(J)] for i in range(J)]
        b_ = [mc.pop_cond_mgf_mp(model, t, list(p), ctx) for p in all_pts]
        return A_, b_

    table, skipped, min_det = solve_mgf_system(rows, t_grid, det_floor)
    return JIdentificationResult(
        J, tuple(order), tuple(tuple(p.tolist()) for p in pts), S, lam, levels, np.asarray(t_grid, float), table,
        det_a, det_b, min_det, skipped, slopes,
    )
