"""Randomized DP-vs-enumeration cross-checks behind the ``verify`` command."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Sequence
from .engine import (
    bayes_curve,
    boundary_event_probs,
    boundary_marginal,
    forward_backward,
    posterior_k,
)
from .families import precompute_blocks, resolve_family
from .fit import PriorSpec
from .mapseg import backtrack, maxsum_forward
from .oracle import brute_posterior
from .priors import CountPrior, LengthFactor, compute_normalizers

NEG_INF = -np.inf

LENGTH_FACTORS = (
    LengthFactor("uniform"),
    LengthFactor("geometric", rho=0.3),
    LengthFactor("min-length", min_length=2.0),
)


def _random_instance(rng: np.random.Generator, family_name: str):
    n = int(rng.integers(3, 9))
    if family_name == "gaussian":
        family = resolve_family(
            {"name": "gaussian", "nu": float(rng.normal()), "rho2": float(rng.uniform(0.5, 2.0)),
             "sigma2": float(rng.uniform(0.3, 1.5))}
        )
        y = rng.normal(0.0, 1.5, size=n)
        w = rng.uniform(0.5, 2.0, size=n)
    elif family_name == "poisson":
        family = resolve_family(
            {"name": "poisson", "a0": float(rng.uniform(0.5, 3.0)), "b0": float(rng.uniform(0.5, 2.0))}
        )
        w = rng.uniform(0.5, 2.0, size=n)
        y = rng.poisson(2.0 * w).astype(float)
    elif family_name == "binomial":
        family = resolve_family(
            {"name": "binomial", "a0": float(rng.uniform(0.5, 3.0)), "b0": float(rng.uniform(0.5, 3.0))}
        )
        w = rng.integers(1, 6, size=n).astype(float)
        y = rng.binomial(w.astype(int), rng.uniform(0.2, 0.8)).astype(float)
    elif family_name == "betaobs":
        family = resolve_family({"name": "betaobs", "phi": float(rng.uniform(5.0, 30.0)), "n_nodes": 48})
        y = rng.beta(3.0, 2.0, size=n)
        w = np.ones(n)
    else:
        raise ValueError(family_name)
    x = np.cumsum(rng.uniform(0.5, 1.5, size=n)) if rng.random() < 0.3 else np.arange(1.0, n + 1)
    seq = Sequence(x, y, w, family=family_name)
    return seq, family


@dataclass
class VerifyReport:
    seed: int
    instances: int
    families: tuple[str, ...]
    mismatches: list = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "instances": self.instances,
            "families": list(self.families),
            "checked": self.checked,
            "ok": self.ok,
            "mismatches": self.mismatches[:20],
        }


def _close(a, b, tol=1e-9):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    finite = np.isfinite(a) | np.isfinite(b)
    return np.allclose(a[finite], b[finite], rtol=tol, atol=tol) and np.array_equal(
        np.isneginf(a), np.isneginf(b)
    )


def check_instance(seq, family, length_factor, k_max, corrupt=False, backend=None) -> list[str]:
    """Compare every DP output against enumeration on one instance."""
    issues = []
    clean = precompute_blocks(seq, family, length_factor)
    table = clean
    if corrupt:
        # negative control: the DP sees a perturbed table, the oracle does not
        from dataclasses import replace

        log_a0 = clean.log_a0.copy()
        log_a0[0, clean.n] += 0.37
        table = replace(clean, log_a0=log_a0)
    count_prior = CountPrior.uniform(k_max)
    normalizers = compute_normalizers(seq.grid, length_factor, k_max)
    msgs = forward_backward(table, k_max, backend)
    brute = brute_posterior(clean, length_factor, count_prior, k_max)

    if not _close(normalizers.log_C[1:], brute.log_C[1:]):
        issues.append("prior normalizers C_k disagree with enumeration")
    log_ev, post_k, k_hat = posterior_k(msgs, normalizers, count_prior)
    if not _close(log_ev[1:], brute.log_evidence_per_k[1:]):
        issues.append("log P(y|k) disagrees with enumeration")
    if not _close(post_k[1:], brute.post_k[1:]):
        issues.append("P(k|y) disagrees with enumeration")
    if k_hat != brute.k_hat:
        issues.append(f"k_hat mismatch: dp={k_hat} brute={brute.k_hat}")

    for k in range(1, k_max + 1):
        if brute.log_Z[k] == NEG_INF:
            continue
        for p in range(1, k):
            if not _close(boundary_marginal(msgs, k, p), brute.boundary_marginals[(k, p)]):
                issues.append(f"boundary marginal mismatch at k={k}, p={p}")
        if k >= 2 and not _close(boundary_event_probs(msgs, k), brute.boundary_event[k]):
            issues.append(f"boundary event probabilities mismatch at k={k}")
        mean, var = bayes_curve(msgs, table, k, backend)
        bmean, bvar = brute.curves[k]
        if not (_close(mean, bmean) and _close(var, bvar)):
            issues.append(f"Bayes curve mismatch at k={k}")
        scores, ptr = maxsum_forward(table, k_max, backend)
        bt, bscore = brute.map_per_k[k]
        if scores[k, table.n] > NEG_INF:
            bounds = backtrack(ptr, k)
            if not np.array_equal(bounds, np.asarray(bt)):
                issues.append(f"MAP boundaries mismatch at k={k}: {bounds.tolist()} vs {list(bt)}")
            if abs(scores[k, table.n] - bscore) > 1e-9:
                issues.append(f"MAP score mismatch at k={k}")
    return issues


def run_verification(
    seed: int = 0,
    instances_per_family: int = 25,
    families: tuple[str, ...] = ("gaussian", "poisson", "binomial", "betaobs"),
    corrupt: bool = False,
    backend: str | None = None,
) -> VerifyReport:
    """Run the randomized comparison suite; corruption is a negative control."""
    rng = np.random.default_rng(seed)
    report = VerifyReport(seed=seed, instances=instances_per_family, families=families)
    for fam_name in families:
        for idx in range(instances_per_family):
            seq, family = _random_instance(rng, fam_name)
            lf = LENGTH_FACTORS[idx % len(LENGTH_FACTORS)]
            k_max = min(4, seq.n)
            do_corrupt = corrupt and idx == 0
            issues = check_instance(seq, family, lf, k_max, corrupt=do_corrupt, backend=backend)
            report.checked += 1
            for msg in issues:
                report.mismatches.append(
                    {"family": fam_name, "instance": idx, "g": lf.kind, "issue": msg}
                )
    return report
