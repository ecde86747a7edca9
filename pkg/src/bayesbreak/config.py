"""Run configuration: schema-validated TOML/JSON with unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .families import resolve_family
from .fit import PriorSpec
from .glm import GLM_METHODS, GaussianPrior
from .priors import CountPrior, LengthFactor

_TOP_KEYS = {"family", "prior", "block_method", "glm_prior", "em", "seed"}
_PRIOR_KEYS = {"k_max", "g", "p_k"}
_EM_KEYS = {"groups", "restarts", "tol", "max_iter", "scale_count_offset"}
_GLM_PRIOR_KEYS = {"nu", "rho2"}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
    try:
        import tomllib  # py311+
    except ImportError:
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML ({e})") from None


@dataclass(frozen=True)
class RunConfig:
    family_cfg: dict | None
    prior_cfg: dict
    block_method: str = "closed"
    glm_prior_cfg: dict = field(default_factory=dict)
    em_cfg: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def parse(cls, raw: dict) -> "RunConfig":
        _reject_unknown(raw, _TOP_KEYS, "top level")
        prior_cfg = dict(raw.get("prior") or {})
        _reject_unknown(prior_cfg, _PRIOR_KEYS, "prior")
        if "k_max" not in prior_cfg:
            raise ConfigError("prior.k_max is required")
        em_cfg = dict(raw.get("em") or {})
        _reject_unknown(em_cfg, _EM_KEYS, "em")
        glm_prior_cfg = dict(raw.get("glm_prior") or {})
        _reject_unknown(glm_prior_cfg, _GLM_PRIOR_KEYS, "glm_prior")
        method = raw.get("block_method", "closed")
        if method != "closed" and method not in GLM_METHODS:
            raise ConfigError(
                f"unknown block_method {method!r}; expected closed or one of {GLM_METHODS}"
            )
        return cls(
            family_cfg=dict(raw["family"]) if raw.get("family") else None,
            prior_cfg=prior_cfg,
            block_method=method,
            glm_prior_cfg=glm_prior_cfg,
            em_cfg=em_cfg,
            seed=int(raw.get("seed", 0)),
        )

    def family(self):
        if self.family_cfg is None:
            raise ConfigError("a family must be configured (config file or --family)")
        return resolve_family(self.family_cfg)

    def prior_spec(self) -> PriorSpec:
        return PriorSpec.from_config(self.prior_cfg)

    def glm_prior(self) -> GaussianPrior:
        return GaussianPrior(
            nu=float(self.glm_prior_cfg.get("nu", 0.0)),
            rho2=float(self.glm_prior_cfg.get("rho2", 1.0)),
        )


def build_config(
    config_path=None,
    family: str | None = None,
    k_max: int | None = None,
    g: str | None = None,
    p_k: str | None = None,
    block_method: str | None = None,
    seed: int | None = None,
    groups: int | None = None,
) -> RunConfig:
    """Merge a config file with CLI flag overrides (flags win)."""
    raw = load_config_file(config_path) if config_path else {}
    raw = dict(raw)
    if family is not None:
        raw["family"] = {"name": family}
    if k_max is not None:
        raw.setdefault("prior", {})
        raw["prior"] = dict(raw["prior"])
        raw["prior"]["k_max"] = k_max
    if g is not None:
        raw.setdefault("prior", {})
        raw["prior"] = dict(raw["prior"])
        raw["prior"]["g"] = _parse_inline_g(g)
    if p_k is not None:
        raw.setdefault("prior", {})
        raw["prior"] = dict(raw["prior"])
        raw["prior"]["p_k"] = {"kind": p_k}
    if block_method is not None:
        raw["block_method"] = block_method
    if seed is not None:
        raw["seed"] = seed
    if groups is not None:
        raw.setdefault("em", {})
        raw["em"] = dict(raw["em"])
        raw["em"]["groups"] = groups
    return RunConfig.parse(raw)


def _parse_inline_g(text: str) -> dict:
    """Parse ``uniform``, ``geometric:0.3``, ``min-length:2`` style flags."""
    if ":" not in text:
        return {"kind": text}
    kind, arg = text.split(":", 1)
    if kind in ("geometric", "geometric-index"):
        return {"kind": kind, "rho": float(arg)}
    if kind == "min-length":
        return {"kind": kind, "min_length": float(arg)}
    raise ConfigError(f"cannot parse length factor flag {text!r}")


__all__ = [
    "RunConfig",
    "build_config",
    "load_config_file",
    "CountPrior",
    "LengthFactor",
]
