"""Exact shared-boundary pooling across subjects, and known-group fits.

Subjects that share boundaries but keep their own segment parameters pool
by summing prior-free per-subject log block evidences; the length prior is
absorbed once afterwards. The pooled table feeds the unchanged DP engine.
Bayes curves and segment moments are reported per subject (pooled coverage
weights combined with each subject's own moment tables).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, Sequence
from .engine import (
    SegmentationPosterior,
    coverage_weights,
    curve_from_weights,
    segment_moments_fixed,
)
from .errors import ConfigError, InputError
from .families import BlockEvidenceTable, Family, precompute_blocks
from .fit import PriorSpec, dp_summaries
from .predict import ExportedModel, build_exported_model
from .priors import compute_normalizers


@dataclass(frozen=True)
class PooledTable:
    """Pooled evidence table plus the per-subject tables it was built from."""

    table: BlockEvidenceTable
    subject_tables: tuple[BlockEvidenceTable, ...]


def pool_evidences(
    tables: list[BlockEvidenceTable], length_factor=None
) -> PooledTable:
    """Elementwise log-sum of prior-free tables, then one prior absorption.

    Summation runs in ascending subject order for reproducibility.
    """
    if not tables:
        raise InputError("pool_evidences requires at least one table")
    n = tables[0].n
    for t in tables:
        t.require_prior_free()
        if t.n != n:
            raise InputError(f"grid size mismatch: {t.n} != {n}")
    log_a0 = np.zeros_like(tables[0].log_a0)
    upper = np.triu_indices(n + 1, k=1)
    for t in tables:
        log_a0[upper] += t.log_a0[upper]
    log_a0[np.tril_indices(n + 1)] = -np.inf
    pooled = replace(tables[0], log_a0=log_a0, with_prior=False)
    if length_factor is not None:
        pooled = pooled.absorb(length_factor)
    return PooledTable(table=pooled, subject_tables=tuple(tables))


@dataclass(frozen=True)
class PooledFitResult:
    subjects: tuple[Sequence, ...]
    families: tuple[Family, ...]
    pooled: PooledTable
    posterior: SegmentationPosterior  # curve/moment arrays stacked per subject
    group: int | None = None

    def export_model(self, label=None) -> ExportedModel:
        """Group model: segment posteriors absorb all subjects' rows per segment."""
        bounds = self.posterior.map_segmentation
        family = self.families[0]
        y_blocks, w_blocks = [], []
        for i, j in zip(bounds[:-1], bounds[1:]):
            y_blocks.append(np.concatenate([s.y[i:j] for s in self.subjects]))
            w_blocks.append(np.concatenate([s.w[i:j] for s in self.subjects]))
        grid = {
            "x": self.subjects[0].x.tolist(),
            "mean": np.mean(self.posterior.bayes_mean, axis=0).tolist(),
            "var": np.mean(self.posterior.bayes_var, axis=0).tolist(),
        }
        return build_exported_model(
            self.subjects[0].x, y_blocks, w_blocks, family, bounds, bayes_grid=grid, label=label
        )


def _resolve_families(families, n_subjects: int) -> tuple:
    if isinstance(families, (list, tuple)):
        if len(families) != n_subjects:
            raise ConfigError("need one family per subject (or a single shared family)")
        return tuple(families)
    return tuple([families] * n_subjects)


def fit_pooled(
    subjects: list[Sequence],
    families,
    prior: PriorSpec,
    backend: str | None = None,
    group: int | None = None,
) -> PooledFitResult:
    """Shared-boundary fit of several subjects on a common grid."""
    subjects = tuple(subjects)
    fams = _resolve_families(families, len(subjects))
    tables = [precompute_blocks(s, f) for s, f in zip(subjects, fams)]
    pooled = pool_evidences(tables, prior.length_factor)
    normalizers = compute_normalizers(subjects[0].grid, prior.length_factor, prior.k_max)
    msgs, log_ev, post_k, k_hat, marginals, event, map_res = dp_summaries(
        pooled.table, prior, normalizers, backend
    )
    w = coverage_weights(msgs, pooled.table, k_hat, backend)
    means, variances, seg_means, seg_vars = [], [], [], []
    for t in pooled.subject_tables:
        m, v = curve_from_weights(w, t.post_mean, t.post_var)
        means.append(m)
        variances.append(v)
        sm, sv = segment_moments_fixed(t, map_res.boundaries)
        seg_means.append(sm)
        seg_vars.append(sv)
    posterior = SegmentationPosterior(
        log_evidence_per_k=log_ev,
        post_k=post_k,
        k_hat=k_hat,
        boundary_marginals=marginals,
        boundary_event=event,
        bayes_mean=np.vstack(means),
        bayes_var=np.vstack(variances),
        map_segmentation=map_res.boundaries,
        map_score=map_res.score,
        segment_means=np.vstack(seg_means),
        segment_vars=np.vstack(seg_vars),
    )
    return PooledFitResult(
        subjects=subjects,
        families=fams,
        pooled=pooled,
        posterior=posterior,
        group=group,
    )


def fit_known_groups(
    dataset: Dataset,
    families,
    prior: PriorSpec,
    backend: str | None = None,
) -> dict[int, PooledFitResult]:
    """Independent pooled fits within each labelled group."""
    groups = dataset.groups()
    fams = _resolve_families(families, dataset.n_subjects)
    out = {}
    for g, members in sorted(groups.items()):
        if not members:
            raise InputError(f"group {g} is empty")
        subjects = [dataset.subjects[s] for s in members]
        member_fams = [fams[s] for s in members]
        out[g] = fit_pooled(subjects, member_fams, prior, backend, group=g)
    return out
