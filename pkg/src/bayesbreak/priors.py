"""Segment-length cohesion functions, prior normalizers, and count priors.

The boundary prior conditional on ``k`` segments factorizes over segments
as a product of cohesion values ``g(span)``; its normalizer ``C_k`` is
computed by the same forward DP run on cohesion values alone. Everything
is kept in log space; ``-inf`` marks forbidden lengths (hard constraints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError

NEG_INF = -np.inf

_KINDS = ("uniform", "geometric", "geometric-index", "length-proportional", "min-length", "custom")


@dataclass(frozen=True)
class LengthFactor:
    """Log cohesion ``log g`` of a segment, as a function of its span.

    Kinds:

    * ``uniform``: ``g == 1``.
    * ``geometric``: ``log g = (span / unit - 1) * log(1 - rho)``; on a
      unit-spaced grid this is the constant-hazard geometric length law.
    * ``geometric-index``: same decay but in index steps instead of
      physical span.
    * ``length-proportional``: ``g = span``.
    * ``min-length``: ``g = 1`` if ``span >= min_length`` else 0.
    * ``custom``: arbitrary callable mapping span -> log g.
    """

    kind: str = "uniform"
    rho: float | None = None
    unit: float = 1.0
    min_length: float | None = None
    fn: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown length factor kind {self.kind!r}; expected {_KINDS}")
        if self.kind in ("geometric", "geometric-index"):
            if self.rho is None or not 0.0 < self.rho < 1.0:
                raise ConfigError("geometric length factor requires rho in (0, 1)")
            if self.unit <= 0:
                raise ConfigError("geometric unit must be positive")
        if self.kind == "min-length" and (self.min_length is None or self.min_length <= 0):
            raise ConfigError("min-length factor requires a positive min_length")
        if self.kind == "custom" and not callable(self.fn):
            raise ConfigError("custom length factor requires a callable fn")

    def log_eval(self, span, steps=None):
        """Vectorized ``log g`` for spans (and index counts where relevant)."""
        span = np.asarray(span, float)
        if self.kind == "uniform":
            return np.zeros_like(span)
        if self.kind == "geometric":
            return (span / self.unit - 1.0) * np.log1p(-self.rho)
        if self.kind == "geometric-index":
            if steps is None:
                raise ConfigError("geometric-index length factor needs index counts")
            return (np.asarray(steps, float) - 1.0) * np.log1p(-self.rho)
        if self.kind == "length-proportional":
            with np.errstate(divide="ignore"):
                return np.log(span)
        if self.kind == "min-length":
            return np.where(span >= self.min_length, 0.0, NEG_INF)
        return np.vectorize(self.fn, otypes=[float])(span)

    def log_table(self, grid: np.ndarray) -> np.ndarray:
        """Matrix of ``log g(grid[j] - grid[i])`` on the upper triangle, 0 elsewhere."""
        n = len(grid) - 1
        out = np.zeros((n + 1, n + 1))
        iu = np.triu_indices(n + 1, k=1)
        span = grid[iu[1]] - grid[iu[0]]
        out[iu] = self.log_eval(span, steps=iu[1] - iu[0])
        return out

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.rho is not None:
            cfg["rho"] = self.rho
        if self.kind == "geometric":
            cfg["unit"] = self.unit
        if self.min_length is not None:
            cfg["min_length"] = self.min_length
        return cfg

    @classmethod
    def from_config(cls, config: dict | str | None) -> "LengthFactor":
        if config is None:
            return cls()
        if isinstance(config, str):
            return cls(kind=config)
        cfg = dict(config)
        kind = cfg.pop("kind", "uniform")
        try:
            return cls(kind=kind, **cfg)
        except TypeError as e:
            raise ConfigError(f"bad length factor parameters: {e}") from None


UNIFORM_LENGTH = LengthFactor("uniform")


@dataclass(frozen=True)
class PriorNormalizers:
    """Log normalizers ``log C_k`` for k = 1..k_max (index 0 unused)."""

    log_C: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.log_C) - 1

    def log_ck(self, k: int) -> float:
        return float(self.log_C[k])


def compute_normalizers(
    grid: np.ndarray, length_factor: LengthFactor, k_max: int
) -> PriorNormalizers:
    """Exact ``C_k`` via the cohesion-only forward DP on the augmented grid."""
    n = len(grid) - 1
    if not 1 <= k_max <= n:
        raise ConfigError(f"k_max must lie in 1..n (got k_max={k_max}, n={n})")
    log_g = length_factor.log_table(np.asarray(grid, float))
    log_g[np.tril_indices(n + 1)] = NEG_INF
    L = _kernels.forward_pass(log_g, k_max)
    out = np.full(k_max + 1, NEG_INF)
    out[1:] = L[1:, n]
    return PriorNormalizers(log_C=out)


@dataclass(frozen=True)
class CountPrior:
    """Normalized prior ``p(k)`` on segment counts ``1..k_max``."""

    log_p: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.log_p) - 1

    def log_pk(self, k: int) -> float:
        return float(self.log_p[k])

    @classmethod
    def uniform(cls, k_max: int) -> "CountPrior":
        log_p = np.full(k_max + 1, -np.log(k_max))
        log_p[0] = NEG_INF
        return cls(log_p)

    @classmethod
    def geometric(cls, k_max: int, q: float) -> "CountPrior":
        if not 0.0 < q < 1.0:
            raise ConfigError("geometric count prior requires q in (0, 1)")
        ks = np.arange(1, k_max + 1, dtype=float)
        raw = (ks - 1.0) * np.log1p(-q)
        raw -= np.logaddexp.reduce(raw)
        return cls(np.concatenate(([NEG_INF], raw)))

    @classmethod
    def table(cls, weights) -> "CountPrior":
        w = np.asarray(weights, float)
        if np.any(w < 0) or not np.any(w > 0):
            raise ConfigError("count prior table must be nonnegative with positive mass")
        with np.errstate(divide="ignore"):
            raw = np.log(w)
        raw -= np.logaddexp.reduce(raw)
        return cls(np.concatenate(([NEG_INF], raw)))

    @classmethod
    def from_config(cls, config: dict | str | None, k_max: int) -> "CountPrior":
        if config is None:
            return cls.uniform(k_max)
        if isinstance(config, str):
            config = {"kind": config}
        cfg = dict(config)
        kind = cfg.pop("kind", "uniform")
        if kind == "uniform":
            return cls.uniform(k_max)
        if kind == "geometric":
            return cls.geometric(k_max, float(cfg.pop("q", 0.5)))
        if kind == "table":
            return cls.table(cfg.pop("weights"))
        raise ConfigError(f"unknown count prior kind {kind!r}")

    def to_config(self) -> dict:
        return {"kind": "table", "weights": np.exp(self.log_p[1:]).tolist()}


def sample_renewal(
    length_factor: LengthFactor,
    n: int,
    k: int,
    rng,
    grid: np.ndarray | None = None,
) -> np.ndarray:
    """Draw a boundary vector with mass proportional to the cohesion product.

    Exact backward sampling from the cohesion-only forward DP, conditioned
    on the last boundary landing at ``n``.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if grid is None:
        grid = np.arange(n + 1, dtype=float)
    grid = np.asarray(grid, float)
    if len(grid) != n + 1:
        raise ConfigError("grid must have length n + 1 (anchor plus design points)")
    log_g = length_factor.log_table(grid)
    log_g[np.tril_indices(n + 1)] = NEG_INF
    L = _kernels.forward_pass(log_g, k)
    if L[k, n] == NEG_INF:
        raise ConfigError(f"no admissible {k}-segmentation under this length factor")
    bounds = np.empty(k + 1, dtype=np.int64)
    bounds[k] = n
    bounds[0] = 0
    for q in range(k - 1, 0, -1):
        nxt = bounds[q + 1]
        logits = L[q, q:nxt] + log_g[q:nxt, nxt]
        shift = np.max(logits)
        probs = np.exp(logits - shift)
        probs /= probs.sum()
        bounds[q] = q + rng.choice(len(probs), p=probs)
    return bounds
