"""Closed-form block evidences and posterior moments per observation family.

Each family is a frozen dataclass bundling its prior hyperparameters and
implementing the block interface used by the DP layer:

* ``block(y, w)``: integrated log evidence + posterior mean/variance of the
  observation-scale mean parameter for a single candidate block;
* ``tables(y, w)``: the full triangular arrays over all blocks ``(i, j]``
  via prefix sums (constant work per block; BetaObs pays a quadrature-node
  factor);
* ``posterior_params`` / ``with_posterior``: segment-posterior
  hyperparameters for model export and posterior-predictive scoring.

Everything is computed and stored in log space. Zero-weight rows are
placeholders for missing data and contribute exactly zero to every block
statistic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.special import betaln, gammaln

from .data import Sequence, validate_family_values
from .errors import ConfigError, InputError

NEG_INF = -np.inf


@dataclass(frozen=True)
class BlockSummaries:
    """Aggregated block statistics.

    ``S`` is the sufficient-statistic sum (weighted values for Gaussian,
    counts for Poisson, successes for Binomial), ``W`` the weight/exposure/
    trial sum, ``H`` the base-measure log-sum, ``Q`` the Gaussian extra
    ``sum w_t (y_t - nu)^2``. ``n`` counts observed (w > 0) rows.
    """

    n: int
    S: float
    W: float
    H: float
    Q: float = 0.0


@dataclass(frozen=True)
class BlockResult:
    log_evidence: float
    post_mean: float
    post_var: float


@dataclass(frozen=True)
class BlockEvidenceTable:
    """Triangular per-block arrays indexed ``[i, j]`` for blocks ``(i, j]``.

    ``log_a0`` carries the length-prior factor when ``with_prior`` is set;
    the moment arrays never do (the factor cancels in moment ratios).
    Entries with ``i >= j`` hold ``-inf`` / prior moments and are never read
    by the DP.
    """

    grid: np.ndarray  # augmented grid (anchor, x_1..x_n), length n + 1
    log_a0: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray
    with_prior: bool

    @property
    def n(self) -> int:
        return len(self.grid) - 1

    def require_prior_free(self) -> "BlockEvidenceTable":
        if self.with_prior:
            raise ConfigError("operation requires a prior-free block table")
        return self

    def absorb(self, length_factor) -> "BlockEvidenceTable":
        """Return a copy with ``log g(span)`` added to the log evidences."""
        self.require_prior_free()
        log_g = length_factor.log_table(self.grid)
        return replace(self, log_a0=self.log_a0 + log_g, with_prior=True)

    def save(self, path) -> None:
        np.savez_compressed(
            str(path),
            grid=self.grid,
            log_a0=self.log_a0,
            post_mean=self.post_mean,
            post_var=self.post_var,
            with_prior=np.array(self.with_prior),
        )

    @classmethod
    def load(cls, path) -> "BlockEvidenceTable":
        z = np.load(str(path))
        return cls(
            grid=z["grid"],
            log_a0=z["log_a0"],
            post_mean=z["post_mean"],
            post_var=z["post_var"],
            with_prior=bool(z["with_prior"]),
        )


def cache_key(family, seq: Sequence) -> str:
    """Content hash for table caching: family config + data bytes."""
    h = hashlib.sha256()
    h.update(json.dumps(family.to_config(), sort_keys=True).encode())
    for arr in (seq.x, seq.y, seq.w, seq.grid):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _mask_invalid(n: int, log_a0, post_mean, post_var, prior_mean, prior_var):
    lower = np.tril_indices(n + 1)
    log_a0[lower] = NEG_INF
    post_mean[lower] = prior_mean
    post_var[lower] = prior_var
    return log_a0, post_mean, post_var


def _prefix(values: np.ndarray) -> np.ndarray:
    out = np.zeros(len(values) + 1)
    np.cumsum(values, out=out[1:])
    return out


def _outer_diff(prefix: np.ndarray) -> np.ndarray:
    return prefix[None, :] - prefix[:, None]


@dataclass(frozen=True)
class GaussianFamily:
    """Gaussian observations with known variance, heteroscedastic via weights.

    ``y_t | mu ~ N(mu, sigma2 / w_t)`` with ``mu ~ N(nu, rho2)``.
    """

    nu: float = 0.0
    rho2: float = 1.0
    sigma2: float = 1.0
    name: str = "gaussian"

    def __post_init__(self):
        if self.rho2 <= 0 or self.sigma2 <= 0:
            raise ConfigError("gaussian rho2 and sigma2 must be strictly positive")

    def validate(self, y, w) -> None:
        validate_family_values("gaussian", np.asarray(y, float), np.asarray(w, float))

    def summarize(self, y, w) -> BlockSummaries:
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        obs = w > 0
        H = float(np.sum(-0.5 * np.log(2.0 * np.pi * self.sigma2 / w[obs])))
        return BlockSummaries(
            n=int(np.count_nonzero(obs)),
            S=float(np.sum(w * y)),
            W=float(np.sum(w)),
            H=H,
            Q=float(np.sum(w * (y - self.nu) ** 2)),
        )

    def block_from_summaries(self, s: BlockSummaries) -> BlockResult:
        kappa = self.rho2 * s.W + self.sigma2
        log_ev = (
            s.H
            - s.Q / (2.0 * self.sigma2)
            + (s.S - self.nu * s.W) ** 2
            / (2.0 * (self.sigma2 * s.W + self.sigma2**2 / self.rho2))
            - 0.5 * np.log1p(self.rho2 * s.W / self.sigma2)
        )
        return BlockResult(
            log_evidence=float(log_ev),
            post_mean=float((self.rho2 * s.S + self.sigma2 * self.nu) / kappa),
            post_var=float(self.sigma2 * self.rho2 / kappa),
        )

    def block(self, y, w=None) -> BlockResult:
        y = np.asarray(y, float)
        w = np.ones_like(y) if w is None else np.asarray(w, float)
        self.validate(y, w)
        return self.block_from_summaries(self.summarize(y, w))

    def tables(self, y, w):
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        n = len(y)
        base = np.where(w > 0, -0.5 * np.log(2.0 * np.pi * self.sigma2 / np.where(w > 0, w, 1.0)), 0.0)
        W = _outer_diff(_prefix(w))
        S = _outer_diff(_prefix(w * y))
        Q = _outer_diff(_prefix(w * (y - self.nu) ** 2))
        H = _outer_diff(_prefix(base))
        kappa = self.rho2 * W + self.sigma2
        with np.errstate(invalid="ignore", divide="ignore"):
            log_a0 = (
                H
                - Q / (2.0 * self.sigma2)
                + (S - self.nu * W) ** 2
                / (2.0 * (self.sigma2 * W + self.sigma2**2 / self.rho2))
                - 0.5 * np.log1p(self.rho2 * W / self.sigma2)
            )
            post_mean = (self.rho2 * S + self.sigma2 * self.nu) / kappa
            post_var = self.sigma2 * self.rho2 / kappa
        return _mask_invalid(n, log_a0, post_mean, post_var, self.nu, self.rho2)

    def posterior_params(self, y, w=None) -> dict:
        res = self.block(y, np.ones_like(np.asarray(y, float)) if w is None else w)
        return {"nu": res.post_mean, "rho2": res.post_var}

    def with_posterior(self, params: dict) -> "GaussianFamily":
        return replace(self, nu=float(params["nu"]), rho2=float(params["rho2"]))

    def mean_param(self, params: dict) -> float:
        return float(params["nu"])

    def to_config(self) -> dict:
        return {"name": "gaussian", "nu": self.nu, "rho2": self.rho2, "sigma2": self.sigma2}


@dataclass(frozen=True)
class PoissonFamily:
    """Poisson counts with exposure: ``y_t ~ Pois(lambda * w_t)``, Gamma prior."""

    a0: float = 1.0
    b0: float = 1.0
    name: str = "poisson"

    def __post_init__(self):
        if self.a0 <= 0 or self.b0 <= 0:
            raise ConfigError("poisson a0 and b0 must be strictly positive")

    def validate(self, y, w) -> None:
        validate_family_values("poisson", np.asarray(y, float), np.asarray(w, float))

    def summarize(self, y, w) -> BlockSummaries:
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        obs = w > 0
        H = float(np.sum(y[obs] * np.log(w[obs])) - np.sum(gammaln(y[obs] + 1.0)))
        return BlockSummaries(
            n=int(np.count_nonzero(obs)), S=float(np.sum(y)), W=float(np.sum(w)), H=H
        )

    def block_from_summaries(self, s: BlockSummaries) -> BlockResult:
        a, b = self.a0 + s.S, self.b0 + s.W
        log_ev = s.H + self.a0 * np.log(self.b0) + gammaln(a) - gammaln(self.a0) - a * np.log(b)
        return BlockResult(float(log_ev), float(a / b), float(a / b**2))

    def block(self, y, w=None) -> BlockResult:
        y = np.asarray(y, float)
        w = np.ones_like(y) if w is None else np.asarray(w, float)
        self.validate(y, w)
        return self.block_from_summaries(self.summarize(y, w))

    def tables(self, y, w):
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        n = len(y)
        obs = w > 0
        h_pt = np.where(obs, y * np.log(np.where(obs, w, 1.0)) - gammaln(y + 1.0), 0.0)
        C = _outer_diff(_prefix(y))
        W = _outer_diff(_prefix(w))
        H = _outer_diff(_prefix(h_pt))
        a = self.a0 + C
        b = self.b0 + W
        with np.errstate(invalid="ignore", divide="ignore"):
            log_a0 = (
                H + self.a0 * np.log(self.b0) + gammaln(a) - gammaln(self.a0) - a * np.log(b)
            )
            post_mean = a / b
            post_var = a / b**2
        return _mask_invalid(
            n, log_a0, post_mean, post_var, self.a0 / self.b0, self.a0 / self.b0**2
        )

    def posterior_params(self, y, w=None) -> dict:
        y = np.asarray(y, float)
        w = np.ones_like(y) if w is None else np.asarray(w, float)
        s = self.summarize(y, w)
        return {"a": self.a0 + s.S, "b": self.b0 + s.W}

    def with_posterior(self, params: dict) -> "PoissonFamily":
        return replace(self, a0=float(params["a"]), b0=float(params["b"]))

    def mean_param(self, params: dict) -> float:
        return float(params["a"] / params["b"])

    def to_config(self) -> dict:
        return {"name": "poisson", "a0": self.a0, "b0": self.b0}


@dataclass(frozen=True)
class BinomialFamily:
    """Binomial successes out of per-row trials (stored in ``w``), Beta prior."""

    a0: float = 1.0
    b0: float = 1.0
    name: str = "binomial"

    def __post_init__(self):
        if self.a0 <= 0 or self.b0 <= 0:
            raise ConfigError("binomial a0 and b0 must be strictly positive")

    def validate(self, y, w) -> None:
        validate_family_values("binomial", np.asarray(y, float), np.asarray(w, float))

    def summarize(self, y, m) -> BlockSummaries:
        y = np.asarray(y, float)
        m = np.asarray(m, float)
        H = float(np.sum(gammaln(m + 1.0) - gammaln(y + 1.0) - gammaln(m - y + 1.0)))
        return BlockSummaries(
            n=int(np.count_nonzero(m > 0)), S=float(np.sum(y)), W=float(np.sum(m)), H=H
        )

    def block_from_summaries(self, s: BlockSummaries) -> BlockResult:
        a = self.a0 + s.S
        b = self.b0 + s.W - s.S
        log_ev = s.H + betaln(a, b) - betaln(self.a0, self.b0)
        tot = a + b
        return BlockResult(float(log_ev), float(a / tot), float(a * b / (tot**2 * (tot + 1.0))))

    def block(self, y, w) -> BlockResult:
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        self.validate(y, w)
        return self.block_from_summaries(self.summarize(y, w))

    def tables(self, y, w):
        y = np.asarray(y, float)
        m = np.asarray(w, float)
        n = len(y)
        h_pt = gammaln(m + 1.0) - gammaln(y + 1.0) - gammaln(m - y + 1.0)
        C = _outer_diff(_prefix(y))
        M = _outer_diff(_prefix(m))
        H = _outer_diff(_prefix(h_pt))
        a = self.a0 + C
        b = self.b0 + M - C
        tot = a + b
        with np.errstate(invalid="ignore", divide="ignore"):
            log_a0 = H + betaln(a, b) - betaln(self.a0, self.b0)
            post_mean = a / tot
            post_var = a * b / (tot**2 * (tot + 1.0))
        t0 = self.a0 + self.b0
        return _mask_invalid(
            n,
            log_a0,
            post_mean,
            post_var,
            self.a0 / t0,
            self.a0 * self.b0 / (t0**2 * (t0 + 1.0)),
        )

    def posterior_params(self, y, w) -> dict:
        s = self.summarize(np.asarray(y, float), np.asarray(w, float))
        return {"a": self.a0 + s.S, "b": self.b0 + s.W - s.S}

    def with_posterior(self, params: dict) -> "BinomialFamily":
        return replace(self, a0=float(params["a"]), b0=float(params["b"]))

    def mean_param(self, params: dict) -> float:
        return float(params["a"] / (params["a"] + params["b"]))

    def to_config(self) -> dict:
        return {"name": "binomial", "a0": self.a0, "b0": self.b0}


def _log_beta_pdf(y, a, b):
    return (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y) - betaln(a, b)


@dataclass(frozen=True)
class BetaObsFamily:
    """Beta-distributed observations in (0, 1) with fixed precision ``phi``.

    ``y_t | mu ~ Beta(phi * mu, phi * (1 - mu))`` with ``mu ~ Beta(a0, b0)``.
    Not conjugate; the one-dimensional integrals over ``mu`` are computed by
    Gauss-Legendre quadrature on (0, 1) with ``n_nodes`` nodes, accumulated
    in log space with a max shift.
    """

    phi: float = 10.0
    a0: float = 1.0
    b0: float = 1.0
    n_nodes: int = 64
    name: str = "betaobs"

    def __post_init__(self):
        if self.phi <= 0 or self.a0 <= 0 or self.b0 <= 0:
            raise ConfigError("betaobs phi, a0, b0 must be strictly positive")
        if self.n_nodes < 2:
            raise ConfigError("betaobs requires at least 2 quadrature nodes")

    @cached_property
    def _nodes(self) -> tuple[np.ndarray, np.ndarray]:
        z, wt = np.polynomial.legendre.leggauss(self.n_nodes)
        return (z + 1.0) / 2.0, wt / 2.0

    @cached_property
    def _log_node_base(self) -> np.ndarray:
        mu, wt = self._nodes
        return np.log(wt) + _log_beta_pdf(mu, self.a0, self.b0)

    def validate(self, y, w) -> None:
        validate_family_values("betaobs", np.asarray(y, float), np.asarray(w, float))

    def _node_loglik(self, y, w) -> np.ndarray:
        """Per-node block log-likelihood sum over observed rows; shape (G,)."""
        mu, _ = self._nodes
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        obs = w > 0
        if not np.any(obs):
            return np.zeros(self.n_nodes)
        ll = _log_beta_pdf(y[obs][None, :], self.phi * mu[:, None], self.phi * (1.0 - mu[:, None]))
        return ll @ w[obs]

    def _moments_from_lognodes(self, log_v: np.ndarray, axis=0):
        mu, _ = self._nodes
        shift = np.max(log_v, axis=axis, keepdims=True)
        v = np.exp(log_v - shift)
        s0 = np.sum(v, axis=axis)
        log_ev = np.squeeze(shift, axis=axis) + np.log(s0)
        shape = [1] * log_v.ndim
        shape[axis] = self.n_nodes
        mu_b = mu.reshape(shape)
        mean = np.sum(v * mu_b, axis=axis) / s0
        m2 = np.sum(v * mu_b**2, axis=axis) / s0
        var = np.maximum(m2 - mean**2, 0.0)
        return log_ev, mean, var

    def block(self, y, w=None) -> BlockResult:
        y = np.asarray(y, float)
        w = np.ones_like(y) if w is None else np.asarray(w, float)
        self.validate(y, w)
        log_v = self._node_loglik(y, w) + self._log_node_base
        log_ev, mean, var = self._moments_from_lognodes(log_v)
        return BlockResult(float(log_ev), float(mean), float(var))

    def tables(self, y, w):
        y = np.asarray(y, float)
        w = np.asarray(w, float)
        n = len(y)
        mu, _ = self._nodes
        obs = w > 0
        ll_pt = np.zeros((self.n_nodes, n))
        if np.any(obs):
            ll_pt[:, obs] = w[obs][None, :] * _log_beta_pdf(
                y[obs][None, :], self.phi * mu[:, None], self.phi * (1.0 - mu[:, None])
            )
        pref = np.concatenate([np.zeros((self.n_nodes, 1)), np.cumsum(ll_pt, axis=1)], axis=1)
        log_a0 = np.full((n + 1, n + 1), NEG_INF)
        post_mean = np.empty((n + 1, n + 1))
        post_var = np.empty((n + 1, n + 1))
        for i in range(n + 1):
            log_v = pref[:, i:] - pref[:, i : i + 1] + self._log_node_base[:, None]
            ev, mean, var = self._moments_from_lognodes(log_v, axis=0)
            log_a0[i, i:] = ev
            post_mean[i, i:] = mean
            post_var[i, i:] = var
        prior = self.block(np.array([]), np.array([]))
        return _mask_invalid(n, log_a0, post_mean, post_var, prior.post_mean, prior.post_var)

    def posterior_params(self, y, w=None) -> dict:
        """Moment-matched Beta(a, b) summary of the (non-conjugate) posterior."""
        res = self.block(y, w)
        mean, var = res.post_mean, max(res.post_var, 1e-15)
        t = max(mean * (1.0 - mean) / var - 1.0, 1e-8)
        return {"a": mean * t, "b": (1.0 - mean) * t}

    def with_posterior(self, params: dict) -> "BetaObsFamily":
        return replace(self, a0=float(params["a"]), b0=float(params["b"]))

    def mean_param(self, params: dict) -> float:
        return float(params["a"] / (params["a"] + params["b"]))

    def to_config(self) -> dict:
        return {
            "name": "betaobs",
            "phi": self.phi,
            "a0": self.a0,
            "b0": self.b0,
            "n_nodes": self.n_nodes,
        }


Family = GaussianFamily | PoissonFamily | BinomialFamily | BetaObsFamily

_FAMILIES = {
    "gaussian": GaussianFamily,
    "poisson": PoissonFamily,
    "binomial": BinomialFamily,
    "betaobs": BetaObsFamily,
}


def resolve_family(config: dict | str) -> Family:
    """Build a family instance from a name or a config mapping."""
    if isinstance(config, str):
        config = {"name": config}
    cfg = dict(config)
    name = cfg.pop("name", None)
    if name not in _FAMILIES:
        raise ConfigError(f"unknown family {name!r}; expected one of {sorted(_FAMILIES)}")
    try:
        return _FAMILIES[name](**cfg)
    except TypeError as e:
        raise ConfigError(f"bad parameters for family {name!r}: {e}") from None


# Operation-style wrappers over the family methods.


def gaussian_block(summaries: BlockSummaries, hyper: GaussianFamily) -> BlockResult:
    return hyper.block_from_summaries(summaries)


def poisson_block(summaries: BlockSummaries, hyper: PoissonFamily) -> BlockResult:
    if summaries.S > 0 and summaries.W <= 0:
        raise InputError("poisson block with counts requires positive exposure")
    return hyper.block_from_summaries(summaries)


def binomial_block(summaries: BlockSummaries, hyper: BinomialFamily) -> BlockResult:
    return hyper.block_from_summaries(summaries)


def betaobs_block(y_block, hyper: BetaObsFamily, w=None) -> BlockResult:
    return hyper.block(y_block, w)


def precompute_blocks(seq: Sequence, family: Family, length_factor=None) -> BlockEvidenceTable:
    """Fill the triangular block table for a sequence.

    When ``length_factor`` is given, its log cohesion of each block's
    physical span is absorbed into ``log_a0`` (``with_prior=True``); moment
    arrays stay prior-free either way.
    """
    family.validate(seq.y, seq.w)
    log_a0, post_mean, post_var = family.tables(seq.y, seq.w)
    table = BlockEvidenceTable(
        grid=seq.grid, log_a0=log_a0, post_mean=post_mean, post_var=post_var, with_prior=False
    )
    if length_factor is not None:
        table = table.absorb(length_factor)
    return table
