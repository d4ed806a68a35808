"""PNG figures written next to the CSV reports.

The Agg backend and a blank ``Software`` tag keep the bytes a function of
the plotted data only, so figures obey the same determinism contract as
the tables.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .. import model_core as mc  # noqa: E402
from ..errors import DataIOError, DomainError  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
}


def _save(fig, path):
    try:
        fig.savefig(path, format="png", metadata={"Software": None})
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def rate_figure(path, rates: dict, n_grid) -> str:
    """Log-log RMSE and median absolute error against ``n``.

    ``rates`` maps estimand to ``{"rmse": [...], "median_abs": [...]}``
    aligned with ``n_grid``; NaN entries are dropped.
    """
    n = np.asarray(n_grid, dtype=float)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharex=True)
        for est, stats in rates.items():
            for ax, key in zip(axes, ("rmse", "median_abs")):
                y = np.asarray(stats[key], dtype=float)
                ok = np.isfinite(y) & (y > 0)
                if ok.any():
                    ax.loglog(n[ok], y[ok], marker="o", ms=3, label=est)
        axes[0].set_ylabel("RMSE")
        axes[1].set_ylabel("median |error|")
        for ax in axes:
            ax.set_xlabel("n")
        axes[0].legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def slope_probe_figure(path, model, x, x0, T: float, S: float, a: float) -> str:
    """``(1/t) log R`` in both MGF directions and the CF log-increment slope."""
    t = np.linspace(0.25, 4 * T, 160)
    s = np.linspace(0.5, 4 * S, 240)
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        for sign, label in ((1.0, "t > 0"), (-1.0, "t < 0")):
            try:
                y = mc.pop_log_R(model, sign * t, x, x0) / (sign * t)
            except DomainError:
                continue
            ax1.plot(t, y, label=label)
        ax1.set_xlabel("|t|")
        ax1.set_ylabel("(1/t) log R(t)")
        ax1.legend()
        _, m0 = mc.pop_cond_cf_scaled(model, s, x0)
        _, m1 = mc.pop_cond_cf_scaled(model, s, x)
        _, ma = mc.pop_cond_cf_scaled(model, s + a, x)
        _, mb = mc.pop_cond_cf_scaled(model, s + a, x0)
        # arg rho(s+a) - arg rho(s), from the scaled mantissas
        with np.errstate(all="ignore"):
            inc = np.angle(ma / mb) - np.angle(m1 / m0)
        inc = (inc + np.pi) % (2 * np.pi) - np.pi
        ax2.plot(s, inc / a)
        ax2.set_xlabel("s")
        ax2.set_ylabel("CF slope (arg increment / a)")
        fig.tight_layout()
        return _save(fig, path)


def mgf_figure(path, t_grid, columns: dict) -> str:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, vals in columns.items():
            v = np.asarray(vals, dtype=float)
            ok = v > 0
            ax.semilogy(np.asarray(t_grid)[ok], v[ok], label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("component MGF")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def cdf_figure(path, z, columns: dict) -> str:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, vals in columns.items():
            ax.plot(z, vals, label=name)
        ax.set_xlabel("z")
        ax.set_ylabel("CDF")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)
