"""End-to-end single-sequence inference: table, DP, MAP export, curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Sequence
from .engine import (
    DPMessages,
    SegmentationPosterior,
    bayes_curve,
    boundary_event_probs,
    boundary_marginal,
    forward_backward,
    posterior_k,
    segment_moments_fixed,
)
from .families import BlockEvidenceTable, Family
from .families import precompute_blocks as _precompute
from .mapseg import MapResult, backtrack, maxsum_forward
from .predict import ExportedModel, build_exported_model
from .priors import UNIFORM_LENGTH, CountPrior, LengthFactor, PriorNormalizers, compute_normalizers


@dataclass(frozen=True)
class PriorSpec:
    """Partition-prior configuration shared by all fitting entry points."""

    k_max: int
    length_factor: LengthFactor = UNIFORM_LENGTH
    count_prior: CountPrior | None = None

    def resolve_count_prior(self) -> CountPrior:
        return self.count_prior if self.count_prior is not None else CountPrior.uniform(self.k_max)

    @classmethod
    def from_config(cls, cfg: dict) -> "PriorSpec":
        k_max = int(cfg["k_max"])
        return cls(
            k_max=k_max,
            length_factor=LengthFactor.from_config(cfg.get("g")),
            count_prior=CountPrior.from_config(cfg.get("p_k"), k_max),
        )


@dataclass(frozen=True)
class FitResult:
    seq: Sequence
    family: Family
    table: BlockEvidenceTable
    msgs: DPMessages
    normalizers: PriorNormalizers
    count_prior: CountPrior
    posterior: SegmentationPosterior
    map_result: MapResult

    def export_model(self, include_bayes_grid: bool = True, label=None) -> ExportedModel:
        bounds = self.posterior.map_segmentation
        y_blocks = [self.seq.y[i:j] for i, j in zip(bounds[:-1], bounds[1:])]
        w_blocks = [self.seq.w[i:j] for i, j in zip(bounds[:-1], bounds[1:])]
        grid = None
        if include_bayes_grid:
            grid = {
                "x": self.seq.x.tolist(),
                "mean": self.posterior.bayes_mean.tolist(),
                "var": self.posterior.bayes_var.tolist(),
            }
        return build_exported_model(
            self.seq.x, y_blocks, w_blocks, self.family, bounds, bayes_grid=grid, label=label
        )


def dp_summaries(
    table: BlockEvidenceTable,
    prior: PriorSpec,
    normalizers: PriorNormalizers,
    backend: str | None = None,
):
    """Shared DP stage: messages, count posterior, marginals, MAP boundaries."""
    count_prior = prior.resolve_count_prior()
    msgs = forward_backward(table, prior.k_max, backend)
    log_ev, post_k, k_hat = posterior_k(msgs, normalizers, count_prior)
    marginals = {p: boundary_marginal(msgs, k_hat, p) for p in range(1, k_hat)}
    event = boundary_event_probs(msgs, k_hat)
    scores, ptr = maxsum_forward(table, prior.k_max, backend)
    map_res = MapResult(
        k_used=k_hat,
        boundaries=backtrack(ptr, k_hat),
        score=float(scores[k_hat, table.n]),
        backpointers=ptr,
    )
    return msgs, log_ev, post_k, k_hat, marginals, event, map_res


def fit_sequence(
    seq: Sequence,
    family: Family,
    prior: PriorSpec,
    backend: str | None = None,
) -> FitResult:
    """Fit one sequence: precompute blocks, run the DP, export summaries."""
    table = _precompute(seq, family, prior.length_factor)
    normalizers = compute_normalizers(seq.grid, prior.length_factor, prior.k_max)
    msgs, log_ev, post_k, k_hat, marginals, event, map_res = dp_summaries(
        table, prior, normalizers, backend
    )
    mean, var = bayes_curve(msgs, table, k_hat, backend)
    seg_means, seg_vars = segment_moments_fixed(table, map_res.boundaries)
    posterior = SegmentationPosterior(
        log_evidence_per_k=log_ev,
        post_k=post_k,
        k_hat=k_hat,
        boundary_marginals=marginals,
        boundary_event=event,
        bayes_mean=mean,
        bayes_var=var,
        map_segmentation=map_res.boundaries,
        map_score=map_res.score,
        segment_means=seg_means,
        segment_vars=seg_vars,
    )
    return FitResult(
        seq=seq,
        family=family,
        table=table,
        msgs=msgs,
        normalizers=normalizers,
        count_prior=prior.resolve_count_prior(),
        posterior=posterior,
        map_result=map_res,
    )
