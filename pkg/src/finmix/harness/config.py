"""Experiment configuration: a versioned YAML file with a closed schema.

Every mapping in the file is checked against a fixed key set, and a typo
raises ConfigError naming the dotted path of the offending field.

Example::

    version: 1
    model:
      preset: gm1
    design:
      n: [2000, 8000, 32000]
      replications: 100
      seed: 11
      covariate_law: {kind: uniform, low: -3.0, high: 3.5}
    tuning: {eps: 0.12, beta: 0.12, c_t: 0.6667, c_s: 2.0}
    points: {x0: 0.0, x1: 0.5}
    output: {dir: out}
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .. import dgp
from .. import model_core as mc
from ..errors import ConfigError, DataIOError
from ..presets import PRESETS

SCHEMA_VERSION = 1

_TOP_KEYS = {"version", "model", "design", "tuning", "points", "z_grid", "diagnose", "montecarlo", "output"}
_MODEL_KEYS = {"preset", "params", "name", "covariate_dim", "components", "weights", "weight_function"}
_COMPONENT_KEYS = {"regression", "error"}
_REGRESSION_KEYS = {"coefficients", "terms"}
_ERROR_KEYS = {"family", "sigma", "alpha", "omega", "b"}
_WEIGHT_FN_KEYS = {"type", "intercept", "slope", "peak", "curvature", "center"}
_DESIGN_KEYS = {"n", "replications", "seed", "covariate_law", "record_labels"}
_LAW_KEYS = {"kind", "low", "high", "mean", "sd", "points"}
_TUNING_KEYS = {"eps", "beta", "a", "a_mode", "c_t", "c_s", "overrides"}
_OVERRIDE_KEYS = {"h_n", "b_n", "c_n", "d_n", "t_n", "s_n", "a_n", "p_n", "c_seq", "series_slack"}
_POINT_KEYS = {"x0", "x1", "X"}
_ZGRID_KEYS = {"low", "high", "points"}
_DIAG_KEYS = {"tol", "T", "S", "a", "recover", "t_grid", "j_max"}
_MC_KEYS = {"cdfs", "strict"}
_OUTPUT_KEYS = {"dir", "figures"}

_ERROR_FAMILIES = {
    "gaussian": (mc.Gaussian, ("sigma",)),
    "skew_normal": (mc.SkewNormal, ("alpha", "omega")),
    "laplace": (mc.Laplace, ("b",)),
}


def _mapping(obj, path: str, allowed: set) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must be a mapping")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")
    return obj


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path} must be a number")
    return float(v)


def _point(v, path: str, k: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=object))
    vals = np.array([_number(e, path) for e in arr], dtype=float)
    if vals.size != k:
        raise ConfigError(f"{path} has {vals.size} coordinates, model expects {k}")
    return vals


@dataclass(frozen=True)
class TuningSpec:
    """Arguments for :meth:`TuningSchedule.default`; ``overrides`` replace computed values."""

    eps: float = 0.05
    beta: float = 0.05
    a: float = 0.1
    a_mode: str = "fixed"
    c_t: Optional[float] = None
    c_s: Optional[float] = None
    overrides: dict = field(default_factory=dict)

    def schedule(self, x, z):
        from ..estimators import TuningSchedule

        return TuningSchedule.default(
            x, z, c_t=self.c_t, c_s=self.c_s, eps=self.eps, beta=self.beta, a=self.a, a_mode=self.a_mode,
            **self.overrides,
        )


@dataclass(frozen=True)
class DiagnoseSpec:
    tol: float = 1e-3
    T: float = 10.0
    S: float = 15.0
    a: float = 0.1
    recover: bool = True
    t_grid: tuple = tuple(np.linspace(0.1, 4.0, 40))
    j_max: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    Attributes
    ----------
    model : MixtureModel
    n_grid : tuple of int
        Strictly increasing sample sizes.
    replications : int
    seed : int
    covariate_law : CovariateLaw
    x0, x1 : ndarray
        Evaluation points of the estimator and of the two-component checks.
    X : tuple of ndarray
        Extra points for J-component recovery.
    z_grid : ndarray
    out_dir : str
    """

    model: mc.MixtureModel
    n_grid: tuple
    replications: int
    seed: int
    covariate_law: dgp.CovariateLaw
    record_labels: bool
    tuning: TuningSpec
    x0: np.ndarray
    x1: np.ndarray
    X: tuple
    z_grid: np.ndarray
    diagnose: DiagnoseSpec
    mc_cdfs: bool
    mc_strict: bool
    out_dir: str
    figures: bool
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None) -> "ExperimentConfig":
        from dataclasses import replace

        kw = {}
        if seed is not None:
            if not 0 <= int(seed) < 2**64:
                raise ConfigError("--seed must be a 64-bit unsigned integer")
            kw["seed"] = int(seed)
        if out_dir is not None:
            kw["out_dir"] = out_dir
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


def _regression(spec, path: str, k: int, label: str):
    spec = _mapping(spec, path, _REGRESSION_KEYS)
    if ("coefficients" in spec) == ("terms" in spec):
        raise ConfigError(f"{path}: give exactly one of coefficients or terms")
    if "coefficients" in spec:
        if k != 1:
            raise ConfigError(f"{path}.coefficients needs covariate_dim 1; use terms")
        coefs = spec["coefficients"]
        if not isinstance(coefs, list) or not coefs:
            raise ConfigError(f"{path}.coefficients must be a non-empty list")
        return mc.polynomial([_number(c, f"{path}.coefficients") for c in coefs], label)
    terms = spec["terms"]
    if not isinstance(terms, list) or not terms:
        raise ConfigError(f"{path}.terms must be a non-empty list of [coef, powers]")
    parsed = []
    for i, t in enumerate(terms):
        if not (isinstance(t, list) and len(t) == 2 and isinstance(t[1], list)):
            raise ConfigError(f"{path}.terms[{i}] must be [coef, [powers...]]")
        parsed.append((_number(t[0], f"{path}.terms[{i}]"), tuple(int(p) for p in t[1])))
    return mc.polynomial_terms(parsed, k=k, label=label)


def _error(spec, path: str):
    spec = _mapping(spec, path, _ERROR_KEYS)
    family = spec.get("family")
    if family not in _ERROR_FAMILIES:
        raise ConfigError(f"{path}.family must be one of {sorted(_ERROR_FAMILIES)}")
    cls, names = _ERROR_FAMILIES[family]
    extra = set(spec) - {"family", *names}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}: not a parameter of {family}")
    kwargs = {n: _number(spec[n], f"{path}.{n}") for n in names if n in spec}
    try:
        return cls(**kwargs)
    except (TypeError, ConfigError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _weight_function(spec, path: str, k: int):
    spec = _mapping(spec, path, _WEIGHT_FN_KEYS)
    kind = spec.get("type")
    if kind == "linear":
        slope = np.atleast_1d(spec.get("slope", [0.0] * k)).astype(float)
        if slope.size != k:
            raise ConfigError(f"{path}.slope must have {k} entries")
        return mc.linear_weight(_number(spec.get("intercept"), f"{path}.intercept"), slope)
    if kind == "quadratic":
        center = np.atleast_1d(spec.get("center", [0.0] * k)).astype(float)
        if center.size != k:
            raise ConfigError(f"{path}.center must have {k} entries")
        return mc.quadratic_weight(
            _number(spec.get("peak"), f"{path}.peak"), _number(spec.get("curvature"), f"{path}.curvature"), center
        )
    raise ConfigError(f"{path}.type must be 'linear' or 'quadratic'")


def build_model(spec, path: str = "model") -> mc.MixtureModel:
    """Model from a preset name (with optional ``params``) or an explicit component list."""
    spec = _mapping(spec, path, _MODEL_KEYS)
    if not spec:
        raise ConfigError(f"{path} is required")
    if "preset" in spec:
        extra = set(spec) - {"preset", "params"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}: not allowed together with preset")
        name = spec["preset"]
        if name not in PRESETS:
            raise ConfigError(f"{path}.preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
        params = spec.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError(f"{path}.params must be a mapping")
        try:
            return PRESETS[name](**params)
        except TypeError as exc:
            raise ConfigError(f"{path}.params: {exc}") from exc
    if "params" in spec:
        raise ConfigError(f"{path}.params: only valid with preset")
    k = int(spec.get("covariate_dim", 1))
    if k < 1:
        raise ConfigError(f"{path}.covariate_dim must be at least 1")
    comps = spec.get("components")
    if not isinstance(comps, list) or not comps:
        raise ConfigError(f"{path}.components must be a non-empty list")
    built = []
    for i, c in enumerate(comps):
        cpath = f"{path}.components[{i}]"
        c = _mapping(c, cpath, _COMPONENT_KEYS)
        reg = _regression(c.get("regression"), f"{cpath}.regression", k, f"m{i + 1}")
        built.append(mc.Component(reg, _error(c.get("error"), f"{cpath}.error")))
    has_w, has_wf = "weights" in spec, "weight_function" in spec
    if has_w == has_wf:
        raise ConfigError(f"{path}: give exactly one of weights or weight_function")
    name = str(spec.get("name", "custom"))
    if has_w:
        w = spec["weights"]
        if not isinstance(w, list):
            raise ConfigError(f"{path}.weights must be a list")
        w = [_number(v, f"{path}.weights") for v in w]
        if len(w) != len(built):
            raise ConfigError(f"{path}.weights has {len(w)} entries for {len(built)} components")
        if any(v <= 0 for v in w):
            raise ConfigError(f"{path}.weights must be strictly positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ConfigError(f"{path}.weights sum to {sum(w):.12g}, not 1")
        return mc.MixtureModel(built, weights=w, k=k, name=name)
    try:
        return mc.MixtureModel(built, weight_function=_weight_function(spec["weight_function"],
                                                                        f"{path}.weight_function", k), k=k, name=name)
    except ConfigError as exc:
        raise ConfigError(f"{path}.weight_function: {exc}") from exc


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


def _law(spec, path: str, k: int) -> dgp.CovariateLaw:
    spec = _mapping(spec, path, _LAW_KEYS)
    if not spec:
        return dgp.uniform([-3.0] * k, [3.0] * k)
    kind = spec.get("kind")
    params = {key: spec[key] for key in spec if key != "kind"}
    allowed = {"uniform": {"low", "high"}, "gaussian": {"mean", "sd"}, "grid": {"points"}}.get(kind)
    if allowed is None:
        raise ConfigError(f"{path}.kind must be uniform, gaussian or grid")
    if set(params) != allowed:
        raise ConfigError(f"{path}: {kind} law needs exactly {sorted(allowed)}")
    try:
        law = dgp.CovariateLaw(kind, params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if law.dim != k:
        raise ConfigError(f"{path} has dimension {law.dim}, model expects {k}")
    return law


def parse_config(doc: Any) -> ExperimentConfig:
    """Validate a decoded YAML document."""
    doc = _mapping(doc, "config", _TOP_KEYS)
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"config.version must be {SCHEMA_VERSION}")
    model = build_model(doc.get("model"))
    k = model.k

    design = _mapping(doc.get("design"), "design", _DESIGN_KEYS)
    n = design.get("n", [1000])
    n = n if isinstance(n, list) else [n]
    if not n or any(isinstance(v, bool) or not isinstance(v, int) or v < 2 for v in n):
        raise ConfigError("design.n must be an integer or list of integers >= 2")
    if any(b <= a for a, b in zip(n, n[1:])):
        raise ConfigError("design.n must be strictly increasing")
    reps = design.get("replications", 1)
    if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
        raise ConfigError("design.replications must be an integer >= 1")
    seed = design.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("design.seed must be a 64-bit unsigned integer")
    law = _law(design.get("covariate_law"), "design.covariate_law", k)

    tun = _mapping(doc.get("tuning"), "tuning", _TUNING_KEYS)
    ov = dict(_mapping(tun.get("overrides"), "tuning.overrides", _OVERRIDE_KEYS))
    if "c_seq" in ov:
        ov["c_seq"] = tuple(_number(v, "tuning.overrides.c_seq") for v in ov["c_seq"])
    tuning = TuningSpec(
        eps=_number(tun.get("eps", 0.05), "tuning.eps"),
        beta=_number(tun.get("beta", 0.05), "tuning.beta"),
        a=_number(tun.get("a", 0.1), "tuning.a"),
        a_mode=str(tun.get("a_mode", "fixed")),
        c_t=None if tun.get("c_t") is None else _number(tun["c_t"], "tuning.c_t"),
        c_s=None if tun.get("c_s") is None else _number(tun["c_s"], "tuning.c_s"),
        overrides=ov,
    )
    if tuning.a_mode not in ("fixed", "vanishing"):
        raise ConfigError("tuning.a_mode must be 'fixed' or 'vanishing'")

    pts = _mapping(doc.get("points"), "points", _POINT_KEYS)
    x0 = _point(pts.get("x0", 0.0), "points.x0", k)
    x1 = _point(pts.get("x1", 0.5), "points.x1", k)
    if np.array_equal(x0, x1):
        raise ConfigError("points.x1 must differ from points.x0")
    X = pts.get("X", [])
    if not isinstance(X, list):
        raise ConfigError("points.X must be a list of points")
    X = tuple(_point(p, f"points.X[{i}]", k) for i, p in enumerate(X))

    zg = _mapping(doc.get("z_grid"), "z_grid", _ZGRID_KEYS)
    lo, hi = _number(zg.get("low", -2.0), "z_grid.low"), _number(zg.get("high", 2.0), "z_grid.high")
    npts = zg.get("points", 41)
    if not (isinstance(npts, int) and npts >= 2 and hi > lo):
        raise ConfigError("z_grid needs low < high and an integer points >= 2")

    dg = _mapping(doc.get("diagnose"), "diagnose", _DIAG_KEYS)
    tg = dg.get("t_grid")
    if tg is not None:
        tg = _mapping(tg, "diagnose.t_grid", _ZGRID_KEYS)
        tgrid = tuple(np.linspace(_number(tg.get("low", 0.1), "diagnose.t_grid.low"),
                                  _number(tg.get("high", 4.0), "diagnose.t_grid.high"), int(tg.get("points", 40))))
    else:
        tgrid = DiagnoseSpec.t_grid
    diag = DiagnoseSpec(
        tol=_number(dg.get("tol", 1e-3), "diagnose.tol"),
        T=_number(dg.get("T", 10.0), "diagnose.T"),
        S=_number(dg.get("S", 15.0), "diagnose.S"),
        a=_number(dg.get("a", 0.1), "diagnose.a"),
        recover=bool(dg.get("recover", True)),
        t_grid=tgrid,
        j_max=int(dg.get("j_max", 4)),
    )

    mcs = _mapping(doc.get("montecarlo"), "montecarlo", _MC_KEYS)
    out = _mapping(doc.get("output"), "output", _OUTPUT_KEYS)
    return ExperimentConfig(
        model=model,
        n_grid=tuple(n),
        replications=reps,
        seed=seed,
        covariate_law=law,
        record_labels=bool(design.get("record_labels", True)),
        tuning=tuning,
        x0=x0,
        x1=x1,
        X=X,
        z_grid=np.linspace(lo, hi, npts),
        diagnose=diag,
        mc_cdfs=bool(mcs.get("cdfs", False)),
        mc_strict=bool(mcs.get("strict", False)),
        out_dir=str(out.get("dir", "out")),
        figures=bool(out.get("figures", True)),
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{os.fspath(path)}: not valid YAML ({exc})") from exc
    return parse_config(doc)
