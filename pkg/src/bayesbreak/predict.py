"""Posterior-predictive scoring against exported segmentation models.

An :class:`ExportedModel` stores MAP boundaries in design coordinates plus
per-segment posterior hyperparameters, so scoring new data never needs the
training grid. Points are assigned to segments with the half-open ``(a, b]``
convention (a point exactly on a boundary belongs to the left segment);
queries outside the training domain clamp to the edge segments and are
counted in a warning flag rather than erroring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import PredictionUnit, Sequence
from .engine import forward_backward
from .errors import ConfigError, InputError, NumericalError
from .families import Family, precompute_blocks, resolve_family
from .priors import CountPrior, LengthFactor, compute_normalizers

NEG_INF = -np.inf


@dataclass(frozen=True)
class ExportedModel:
    """A fitted group model ready for out-of-sample scoring."""

    family: dict  # family config mapping
    boundaries_x: np.ndarray  # interior boundaries, ascending, in x units
    boundaries_idx: np.ndarray  # the same boundaries as training-grid indices
    domain: tuple[float, float]
    segments: tuple[dict, ...]  # per-segment posterior hyperparameters
    bayes_grid: dict | None = None  # {"x": ..., "mean": ..., "var": ...}
    label: object = None

    def __post_init__(self):
        bx = np.asarray(self.boundaries_x, float)
        if len(bx) + 1 != len(self.segments):
            raise InputError("exported model needs one more segment than interior boundaries")
        if np.any(np.diff(bx) <= 0):
            raise InputError("exported boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries_x", bx)
        object.__setattr__(
            self, "boundaries_idx", np.asarray(self.boundaries_idx, dtype=np.int64)
        )

    def resolve(self) -> Family:
        return resolve_family(self.family)

    def assign(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Segment index per query plus an out-of-domain clamp flag."""
        x = np.asarray(x, float)
        seg = np.searchsorted(self.boundaries_x, x, side="left")
        clamped = (x < self.domain[0]) | (x > self.domain[1])
        return seg, clamped

    def to_dict(self) -> dict:
        out = {
            "family": dict(self.family),
            "boundaries_x": [float(v) for v in self.boundaries_x],
            "boundaries_idx": [int(v) for v in self.boundaries_idx],
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "segments": [
                {k: float(v) for k, v in seg.items()} for seg in self.segments
            ],
        }
        if self.bayes_grid is not None:
            out["bayes_grid"] = {
                key: [float(v) for v in vals] for key, vals in self.bayes_grid.items()
            }
        if self.label is not None:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExportedModel":
        return cls(
            family=dict(d["family"]),
            boundaries_x=np.asarray(d["boundaries_x"], float),
            boundaries_idx=np.asarray(d.get("boundaries_idx", []), dtype=np.int64),
            domain=(float(d["domain"][0]), float(d["domain"][1])),
            segments=tuple(dict(s) for s in d["segments"]),
            bayes_grid=d.get("bayes_grid"),
            label=d.get("label"),
        )


def build_exported_model(
    x: np.ndarray,
    y_blocks,
    w_blocks,
    family: Family,
    boundaries: np.ndarray,
    bayes_grid: dict | None = None,
    label=None,
) -> ExportedModel:
    """Assemble an exported model from MAP boundaries and raw segment data.

    ``y_blocks`` / ``w_blocks`` give, per MAP segment, the training rows the
    conjugate update should absorb (callers pool subject rows here for
    group models).
    """
    boundaries = np.asarray(boundaries, dtype=np.int64)
    interior = boundaries[1:-1]
    bx = (x[interior - 1] + x[interior]) / 2.0
    segs = tuple(
        family.posterior_params(yb, wb) for yb, wb in zip(y_blocks, w_blocks)
    )
    return ExportedModel(
        family=family.to_config(),
        boundaries_x=bx,
        boundaries_idx=interior,
        domain=(float(x[0]), float(x[-1])),
        segments=segs,
        bayes_grid=bayes_grid,
        label=label,
    )


@dataclass(frozen=True)
class PredictionResult:
    log_liks: np.ndarray  # per-group predictive log-likelihood
    group_posterior: np.ndarray
    labels: tuple
    unit_resp: np.ndarray | None = None
    n_clamped: int = 0

    def to_dict(self) -> dict:
        out = {
            "labels": list(self.labels),
            "log_liks": [float(v) for v in self.log_liks],
            "group_posterior": [float(v) for v in self.group_posterior],
            "n_clamped": int(self.n_clamped),
        }
        if self.unit_resp is not None:
            out["unit_resp"] = [[float(v) for v in row] for row in self.unit_resp]
        return out


def _softmax_log(scores: np.ndarray) -> np.ndarray:
    shift = np.max(scores)
    if shift == NEG_INF:
        raise NumericalError("all groups score -inf on the new data")
    p = np.exp(scores - shift)
    return p / p.sum()


def _log_group_prior(models, pi) -> np.ndarray:
    G = len(models)
    if pi is None:
        return np.full(G, -np.log(G))
    pi = np.asarray(pi, float)
    if len(pi) != G or np.any(pi < 0) or pi.sum() <= 0:
        raise InputError("group prior must be a nonnegative vector matching the model count")
    return np.log(pi / pi.sum())


def segment_predictive(y, w, model: ExportedModel, segment: int) -> float:
    """Log posterior-predictive of points assigned to one MAP segment.

    Evaluates the family block evidence with the segment's training
    posterior as the prior.
    """
    fam = model.resolve().with_posterior(model.segments[segment])
    return fam.block(np.asarray(y, float), np.asarray(w, float)).log_evidence


def _pointwise_loglik(x, y, w, model: ExportedModel) -> tuple[float, int]:
    seg, clamped = model.assign(x)
    total = 0.0
    for b in np.unique(seg):
        mask = seg == b
        total += segment_predictive(y[mask], w[mask], model, int(b))
    return total, int(np.count_nonzero(clamped))


def score_pointwise(x, y, w, models: list[ExportedModel], pi=None) -> PredictionResult:
    """Group membership likelihoods/posterior for one new pointwise sequence."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if w is None else np.asarray(w, float)
    if len(x) == 0:
        raise InputError("no new data to score")
    log_prior = _log_group_prior(models, pi)
    lls = np.empty(len(models))
    clamped = 0
    for g, model in enumerate(models):
        lls[g], c = _pointwise_loglik(x, y, w, model)
        clamped = max(clamped, c)
    post = _softmax_log(log_prior + lls)
    labels = tuple(m.label if m.label is not None else g for g, m in enumerate(models))
    return PredictionResult(lls, post, labels, n_clamped=clamped)


def score_units(
    units: list[PredictionUnit], models: list[ExportedModel], pi=None
) -> PredictionResult:
    """Score set-valued units; also returns per-unit group responsibilities."""
    if not units:
        raise InputError("no units to score")
    log_prior = _log_group_prior(models, pi)
    U, G = len(units), len(models)
    ll = np.empty((U, G))
    clamped = 0
    for u, unit in enumerate(units):
        for g, model in enumerate(models):
            ll[u, g], c = _pointwise_loglik(unit.x, unit.y, unit.w, model)
            clamped = max(clamped, c)
    lls = ll.sum(axis=0)
    post = _softmax_log(log_prior + lls)
    resp = np.empty_like(ll)
    for u in range(U):
        resp[u] = _softmax_log(log_prior + ll[u])
    labels = tuple(m.label if m.label is not None else g for g, m in enumerate(models))
    return PredictionResult(lls, post, labels, unit_resp=resp, n_clamped=clamped)


def score_vector_response(
    x, Y, W, models_by_group: list[list[ExportedModel]], pi=None
) -> PredictionResult:
    """Factorized vector responses: per-group log-liks summed over dimensions.

    ``models_by_group[g]`` lists one model per response dimension; all
    groups must agree on the dimension count, which must match ``Y``.
    """
    x = np.asarray(x, float)
    Y = np.atleast_2d(np.asarray(Y, float))
    if Y.shape[0] != len(x):
        Y = Y.T
    d = Y.shape[1]
    dims = {len(group) for group in models_by_group}
    if dims != {d}:
        raise InputError(f"dimension mismatch: data has d={d}, models have {sorted(dims)}")
    if W is None:
        W = np.ones_like(Y)
    else:
        W = np.atleast_2d(np.asarray(W, float))
        if W.shape != Y.shape:
            W = np.broadcast_to(np.asarray(W, float).reshape(-1, 1), Y.shape)
    G = len(models_by_group)
    log_prior = _log_group_prior(models_by_group, pi)
    lls = np.zeros(G)
    clamped = 0
    for g, group in enumerate(models_by_group):
        for ell, model in enumerate(group):
            ll, c = _pointwise_loglik(x, Y[:, ell], W[:, ell], model)
            lls[g] += ll
            clamped = max(clamped, c)
    post = _softmax_log(log_prior + lls)
    return PredictionResult(lls, post, tuple(range(G)), n_clamped=clamped)


def predict_map_signal(model: ExportedModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant MAP signal: each query gets its segment's posterior mean."""
    queries = np.asarray(queries, float)
    fam = model.resolve()
    seg, clamped = model.assign(queries)
    means = np.array([fam.mean_param(p) for p in model.segments])
    return means[seg], clamped


def predict_bayes_signal(model: ExportedModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-left-grid-point lookup of the exported Bayes curve."""
    if model.bayes_grid is None:
        raise ConfigError("model has no Bayes grid; use MAP signal mode instead")
    queries = np.asarray(queries, float)
    gx = np.asarray(model.bayes_grid["x"], float)
    gm = np.asarray(model.bayes_grid["mean"], float)
    gv = np.asarray(model.bayes_grid["var"], float)
    idx = np.clip(np.searchsorted(gx, queries, side="right") - 1, 0, len(gx) - 1)
    return gm[idx], gv[idx]


def rescore_by_resegmentation(
    seq: Sequence,
    group_configs: list[dict],
    backend: str | None = None,
) -> np.ndarray:
    """Full-pipeline evidence of the new sequence under each group's config.

    Each config carries ``family``, ``k_max``, and optional ``g`` /
    ``p_k`` entries; the result is ``log sum_k p(k) P(new | k)`` per group.
    """
    out = np.empty(len(group_configs))
    for g, cfg in enumerate(group_configs):
        family = resolve_family(cfg["family"])
        k_max = int(cfg["k_max"])
        lf = LengthFactor.from_config(cfg.get("g"))
        cp = CountPrior.from_config(cfg.get("p_k"), k_max)
        table = precompute_blocks(seq, family, lf)
        norm = compute_normalizers(seq.grid, lf, k_max)
        msgs = forward_backward(table, k_max, backend)
        terms = cp.log_p[1:] + msgs.logL[1:, seq.n] - norm.log_C[1:]
        finite = terms[terms > NEG_INF]
        out[g] = _kernels._logsumexp_1d(finite) if len(finite) else NEG_INF
    return out
