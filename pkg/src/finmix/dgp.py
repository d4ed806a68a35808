"""Reproducible simulation of switching-regression datasets.

Rows are generated in fixed-size blocks.  Block ``b`` draws from its own
Philox stream keyed by ``SeedSequence(seed, spawn_key=(b,))``, so the output
depends only on ``(seed, n)`` and never on how blocks are scheduled.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DataIOError
from .model_core import MixtureModel

BLOCK_ROWS = 4096


@dataclass(frozen=True)
class CovariateLaw:
    """One of ``uniform`` (per-coordinate bounds), ``gaussian`` (diagonal) or ``grid``."""

    kind: str
    params: dict

    def __post_init__(self):
        p = self.params
        if self.kind == "uniform":
            lo, hi = np.atleast_1d(p["low"]), np.atleast_1d(p["high"])
            if lo.shape != hi.shape or np.any(lo >= hi):
                raise ConfigError("uniform covariate law needs low < high in every coordinate")
        elif self.kind == "gaussian":
            sd = np.atleast_1d(p["sd"])
            if np.any(sd <= 0) or np.atleast_1d(p["mean"]).shape != sd.shape:
                raise ConfigError("gaussian covariate law needs positive sd matching mean")
        elif self.kind == "grid":
            pts = np.asarray(p["points"], dtype=float)
            if pts.size == 0:
                raise ConfigError("grid covariate law needs at least one point")
        else:
            raise ConfigError(f"unknown covariate law {self.kind!r}")

    @property
    def dim(self) -> int:
        p = self.params
        if self.kind == "uniform":
            return np.atleast_1d(p["low"]).size
        if self.kind == "gaussian":
            return np.atleast_1d(p["mean"]).size
        pts = np.asarray(p["points"], dtype=float)
        return 1 if pts.ndim == 1 else pts.shape[1]

    def draw(self, rng: np.random.Generator, start: int, size: int) -> np.ndarray:
        p = self.params
        k = self.dim
        if self.kind == "uniform":
            lo, hi = np.atleast_1d(p["low"]).astype(float), np.atleast_1d(p["high"]).astype(float)
            return lo + (hi - lo) * rng.random((size, k))
        if self.kind == "gaussian":
            mu, sd = np.atleast_1d(p["mean"]).astype(float), np.atleast_1d(p["sd"]).astype(float)
            return mu + sd * rng.standard_normal((size, k))
        pts = np.asarray(p["points"], dtype=float).reshape(-1, k)
        idx = (start + np.arange(size)) % pts.shape[0]
        return pts[idx]


def uniform(low, high) -> CovariateLaw:
    return CovariateLaw("uniform", {"low": low, "high": high})


@dataclass(frozen=True)
class SimulationDesign:
    n: int
    covariate_law: CovariateLaw
    seed: int = 0
    record_labels: bool = True

    def __post_init__(self):
        if int(self.n) < 1:
            raise ConfigError("design n must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass
class Dataset:
    """Observed ``(x, z)`` rows.  Latent labels live apart and estimators never read them."""

    x: np.ndarray
    z: np.ndarray
    seed: Optional[int] = None
    provenance: dict = field(default_factory=dict)
    _labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.z = np.asarray(self.z, dtype=float).ravel()
        if self.x.shape[0] != self.z.shape[0]:
            raise ConfigError("x and z have different row counts")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.z))):
            raise ConfigError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def latent_labels(self) -> Optional[np.ndarray]:
        """Component labels (1-based); for diagnostics only."""
        return self._labels

    def label_free(self) -> "Dataset":
        return Dataset(self.x, self.z, self.seed, dict(self.provenance))

    def to_csv(self, path=None) -> str:
        """Write ``x1..xk,z[,label]`` with round-trip float formatting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = [f"x{i + 1}" for i in range(self.k)] + ["z"]
        labels = self._labels
        if labels is not None:
            header.append("label")
        w.writerow(header)
        for i in range(self.n):
            row = [repr(float(v)) for v in self.x[i]] + [repr(float(self.z[i]))]
            if labels is not None:
                row.append(str(int(labels[i])))
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            try:
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            except OSError as exc:
                raise DataIOError(f"cannot write {path}: {exc}") from exc
        return text

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        try:
            with open(path, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise DataIOError(f"cannot read {path}: {exc}") from exc
        if not rows:
            raise DataIOError(f"{path} is empty")
        header = [h.strip() for h in rows[0]]
        has_label = header[-1] == "label"
        cols = header[:-1] if has_label else header
        if not cols or cols[-1] != "z" or cols[:-1] != [f"x{i + 1}" for i in range(len(cols) - 1)] or len(cols) < 2:
            raise ConfigError(f"{path}: header must be x1,...,xk,z[,label]")
        k = len(cols) - 1
        try:
            body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
        if body.size == 0:
            raise ConfigError(f"{path}: no data rows")
        labels = body[:, -1].astype(int) if has_label else None
        return cls(body[:, :k], body[:, k], provenance={"source": os.fspath(path)}, _labels=labels)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(block,))))


def _simulate_block(model: MixtureModel, design: SimulationDesign, block: int):
    start = block * BLOCK_ROWS
    size = min(BLOCK_ROWS, design.n - start)
    rng = _block_rng(design.seed, block)
    x = design.covariate_law.draw(rng, start, size)
    u = rng.random(size)
    eps = np.stack([c.error.sample(rng, size) for c in model.components], axis=1)
    w = model.weights_at(x)
    cum = np.cumsum(w, axis=1)
    cum[:, -1] = 1.0
    lab = np.sum(u[:, None] >= cum, axis=1)
    lab = np.minimum(lab, model.J - 1)
    means = np.stack([np.asarray(c.regression(x), dtype=float) * np.ones(size) for c in model.components], axis=1)
    rows = np.arange(size)
    z = means[rows, lab] + eps[rows, lab]
    return x, z, lab + 1


def simulate(model: MixtureModel, design: SimulationDesign, threads: int = 1) -> Dataset:
    """Draw ``design.n`` rows from the switching regression defined by ``model``."""
    if design.covariate_law.dim != model.k:
        raise ConfigError(f"covariate law has dimension {design.covariate_law.dim}, model expects {model.k}")
    nblocks = -(-design.n // BLOCK_ROWS)
    if threads > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _simulate_block(model, design, b), range(nblocks)))
    else:
        parts = [_simulate_block(model, design, b) for b in range(nblocks)]
    x = np.concatenate([p[0] for p in parts])
    z = np.concatenate([p[1] for p in parts])
    lab = np.concatenate([p[2] for p in parts])
    return Dataset(
        x,
        z,
        seed=design.seed,
        provenance={"model": model.name, "n": design.n, "seed": design.seed, "law": design.covariate_law.kind},
        _labels=lab if design.record_labels else None,
    )


def derive_seed(base_seed: int, *key: int) -> int:
    """64-bit seed for a sub-experiment, split from ``base_seed`` by ``key``."""
    state = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
