"""Latent-group template mixture fit by EM.

Each latent group carries one boundary template; subject-specific segment
parameters are already integrated out inside the per-subject block
evidences, so the E-step responsibilities are exact and each M-step
template update is an exact responsibility-weighted max-sum DP. The
observed-data log-likelihood is therefore monotone under the scaled
count-offset objective; the default offset handling adds the count term
once per group (configurable via ``scale_count_offset``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ConfigError, NumericalError
from .families import BlockEvidenceTable, precompute_blocks
from .fit import PriorSpec
from .mapseg import backtrack
from .pooling import _resolve_families
from .priors import CountPrior, PriorNormalizers, compute_normalizers, sample_renewal

NEG_INF = -np.inf


@dataclass(frozen=True)
class Template:
    """A group's segmentation template: count plus boundary vector."""

    k: int
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.int64)
        if len(b) != self.k + 1 or b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ConfigError(f"invalid template boundaries {b.tolist()} for k={self.k}")
        object.__setattr__(self, "boundaries", b)


@dataclass
class MixtureState:
    pi: np.ndarray
    templates: list[Template]
    resp: np.ndarray
    loglik_trace: list[float] = field(default_factory=list)

    @property
    def obs_loglik(self) -> float:
        return self.loglik_trace[-1]

    def hard_assignments(self) -> np.ndarray:
        return np.argmax(self.resp, axis=1)

    def to_dict(self, grid: np.ndarray | None = None) -> dict:
        out = {
            "pi": self.pi.tolist(),
            "templates": [
                {"k": t.k, "boundaries": t.boundaries.tolist()} for t in self.templates
            ],
            "responsibilities": self.resp.tolist(),
            "loglik_trace": [float(v) for v in self.loglik_trace],
        }
        if grid is not None:
            for tmpl, rec in zip(self.templates, out["templates"]):
                interior = tmpl.boundaries[1:-1]
                rec["boundaries_x"] = (
                    ((grid[interior - 1] + grid[interior]) / 2.0).tolist()
                )
        return out


def template_loglik(
    subject_table: BlockEvidenceTable,
    template: Template,
    length_factor,
    normalizers: PriorNormalizers,
    count_prior: CountPrior,
) -> float:
    """log p(y_s | template): count offset plus summed absorbed block scores."""
    subject_table.require_prior_free()
    if normalizers.log_C[template.k] == NEG_INF:
        return NEG_INF
    t = template.boundaries
    i, j = t[:-1], t[1:]
    log_g = length_factor.log_eval(
        subject_table.grid[j] - subject_table.grid[i], steps=j - i
    )
    return float(
        count_prior.log_p[template.k]
        - normalizers.log_C[template.k]
        + np.sum(subject_table.log_a0[i, j] + log_g)
    )


def _template_logliks(
    stacked_absorbed: np.ndarray, templates: list[Template], offsets: np.ndarray
) -> np.ndarray:
    """(S, G) matrix of log p(y_s | tau_g) from prior-absorbed block stacks."""
    S = stacked_absorbed.shape[0]
    G = len(templates)
    out = np.empty((S, G))
    for g, tmpl in enumerate(templates):
        i, j = tmpl.boundaries[:-1], tmpl.boundaries[1:]
        out[:, g] = offsets[tmpl.k] + stacked_absorbed[:, i, j].sum(axis=1)
    return out


def estep(pi: np.ndarray, logliks: np.ndarray) -> np.ndarray:
    """Exact responsibilities, row-normalized with a max shift."""
    scores = np.log(pi)[None, :] + logliks
    shift = scores.max(axis=1, keepdims=True)
    if np.any(shift == NEG_INF):
        bad = int(np.nonzero(shift[:, 0] == NEG_INF)[0][0])
        raise NumericalError(f"subject {bad} is incompatible with every template")
    r = np.exp(scores - shift)
    r /= r.sum(axis=1, keepdims=True)
    return r


def _mstep_templates(
    stacked_plain: np.ndarray,
    log_g_table: np.ndarray,
    resp: np.ndarray,
    offsets: np.ndarray,
    k_max: int,
    scale_count_offset: bool,
    rng: np.random.Generator,
    backend: str | None,
) -> tuple[np.ndarray, list[Template]]:
    """Weight update plus exact max-sum template update per group."""
    S, G = resp.shape
    n = stacked_plain.shape[1] - 1
    pi = resp.mean(axis=0)
    templates: list[Template] = []
    lower = np.tril_indices(n + 1)
    for g in range(G):
        weight = resp[:, g].sum()
        if weight < 1e-12:
            warnings.warn(f"group {g} lost all responsibility; template reset", stacklevel=2)
            k = int(rng.integers(1, k_max + 1))
            templates.append(Template(k, sample_renewal_like(n, k, rng)))
            continue
        B = log_g_table + np.tensordot(resp[:, g], stacked_plain, axes=1)
        B[lower] = NEG_INF
        scores, ptr = _kernels.maxsum_pass(B, k_max, backend)
        scale = weight if scale_count_offset else 1.0
        crit = scores[1:, n] + scale * offsets[1 : k_max + 1]
        if np.all(crit == NEG_INF):
            raise ConfigError("no admissible template for any k")
        k_g = 1 + int(np.argmax(crit))
        templates.append(Template(k_g, backtrack(ptr, k_g)))
    return pi, templates


def sample_renewal_like(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random boundary vector (cohesion-free renewal draw)."""
    from .priors import UNIFORM_LENGTH

    return sample_renewal(UNIFORM_LENGTH, n, k, rng)


def mstep(
    subject_tables: list[BlockEvidenceTable],
    resp: np.ndarray,
    length_factor,
    normalizers: PriorNormalizers,
    count_prior: CountPrior,
    scale_count_offset: bool = False,
    rng: np.random.Generator | None = None,
    backend: str | None = None,
) -> tuple[np.ndarray, list[Template]]:
    """Standalone M-step over prior-free subject tables."""
    stacked, log_g = _stack_tables(subject_tables, length_factor)
    offsets = _count_offsets(count_prior, normalizers)
    rng = rng if rng is not None else np.random.default_rng(0)
    return _mstep_templates(
        stacked, log_g, resp, offsets, normalizers.k_max, scale_count_offset, rng, backend
    )


def _count_offsets(count_prior: CountPrior, normalizers: PriorNormalizers) -> np.ndarray:
    """log p(k) - log C_k with -inf marking infeasible counts (index 0 unused)."""
    out = np.full(normalizers.k_max + 1, NEG_INF)
    feasible = normalizers.log_C[1:] > NEG_INF
    out[1:][feasible] = count_prior.log_p[1:][feasible] - normalizers.log_C[1:][feasible]
    return out


def _stack_tables(subject_tables, length_factor) -> tuple[np.ndarray, np.ndarray]:
    n = subject_tables[0].n
    lower = np.tril_indices(n + 1)
    stacked = np.empty((len(subject_tables), n + 1, n + 1))
    for s, t in enumerate(subject_tables):
        t.require_prior_free()
        arr = t.log_a0.copy()
        arr[lower] = 0.0  # keep weighted sums NaN-free; never read below the diagonal
        stacked[s] = arr
    log_g = length_factor.log_table(subject_tables[0].grid)
    return stacked, log_g


def observed_loglik(pi: np.ndarray, logliks: np.ndarray) -> float:
    scores = np.log(pi)[None, :] + logliks
    shift = scores.max(axis=1, keepdims=True)
    return float(np.sum(shift[:, 0] + np.log(np.exp(scores - shift).sum(axis=1))))


@dataclass(frozen=True)
class EmConfig:
    n_groups: int
    restarts: int = 5
    tol: float = 1e-8
    max_iter: int = 200
    scale_count_offset: bool = False
    seed: int = 0


def em_fit(
    dataset: Dataset,
    families,
    prior: PriorSpec,
    config: EmConfig,
    backend: str | None = None,
) -> MixtureState:
    """Best-of-restarts EM fit of the latent template mixture."""
    if config.n_groups < 1:
        raise ConfigError("n_groups must be at least 1")
    fams = _resolve_families(families, dataset.n_subjects)
    tables = [precompute_blocks(s, f) for s, f in zip(dataset.subjects, fams)]
    normalizers = compute_normalizers(dataset.subjects[0].grid, prior.length_factor, prior.k_max)
    count_prior = prior.resolve_count_prior()
    stacked_plain, log_g = _stack_tables(tables, prior.length_factor)
    stacked_absorbed = stacked_plain + log_g[None, :, :]
    offsets = _count_offsets(count_prior, normalizers)
    n = dataset.n
    rng = np.random.default_rng(config.seed)

    best: MixtureState | None = None
    for _ in range(max(1, config.restarts)):
        templates = []
        for _g in range(config.n_groups):
            k = int(rng.integers(1, prior.k_max + 1))
            templates.append(Template(k, sample_renewal_like(n, k, rng)))
        pi = np.full(config.n_groups, 1.0 / config.n_groups)
        state = _run_em(
            stacked_plain,
            stacked_absorbed,
            log_g,
            offsets,
            pi,
            templates,
            prior.k_max,
            config,
            rng,
            backend,
        )
        if best is None or state.obs_loglik > best.obs_loglik:
            best = state
    return best


def _run_em(
    stacked_plain,
    stacked_absorbed,
    log_g,
    offsets,
    pi,
    templates,
    k_max,
    config: EmConfig,
    rng,
    backend,
) -> MixtureState:
    logliks = _template_logliks(stacked_absorbed, templates, offsets)
    trace = [observed_loglik(pi, logliks)]
    resp = estep(pi, logliks)
    for _ in range(config.max_iter):
        pi, templates = _mstep_templates(
            stacked_plain,
            log_g,
            resp,
            offsets,
            k_max,
            config.scale_count_offset,
            rng,
            backend,
        )
        pi = np.maximum(pi, 1e-300)
        pi /= pi.sum()
        logliks = _template_logliks(stacked_absorbed, templates, offsets)
        trace.append(observed_loglik(pi, logliks))
        resp = estep(pi, logliks)
        if abs(trace[-1] - trace[-2]) < config.tol:
            break
    return MixtureState(pi=pi, templates=templates, resp=resp, loglik_trace=trace)
