"""Experiment configuration: validated dataclasses plus TOML loading.

A config fully describes one simulation/comparison run: the layer-type
model, the scale (nodes and layers), optional percolation, replicate
count, seeds, tolerances, and output options.  Unknown keys anywhere in a
config file are hard errors so typos cannot silently change a run.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .layers import LayerTypeDistribution, power_law_distribution

__all__ = ["PercolationSpec", "ExperimentConfig", "ConfigError", "load_config", "config_hash"]

PERCOLATION_MODES = ("site", "bond_overlay", "bond_layerwise")


class ConfigError(ValueError):
    """Invalid or malformed experiment configuration; message names the field."""


@dataclass(frozen=True)
class PercolationSpec:
    mode: str
    theta: float | None = None
    nodes: tuple[int, ...] | None = None  # explicit retained set, site mode only

    def __post_init__(self):
        if self.mode not in PERCOLATION_MODES:
            raise ConfigError(f"percolation.mode must be one of {PERCOLATION_MODES}, got {self.mode!r}")
        if self.theta is None and self.nodes is None:
            raise ConfigError("percolation needs theta or an explicit node set")
        if self.theta is not None and not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"percolation.theta = {self.theta!r} outside [0, 1]")
        if self.nodes is not None and self.mode != "site":
            raise ConfigError("explicit node sets apply to site percolation only")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a simulation run."""

    n: int
    layer_types: LayerTypeDistribution | None = None
    explicit_types: tuple[tuple[int, float], ...] | None = None
    m: int | None = None
    mu: float | None = None
    percolation: PercolationSpec | None = None
    replicates: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("scale.n must be >= 1")
        if (self.layer_types is None) == (self.explicit_types is None):
            raise ConfigError("specify exactly one of a layer-type distribution or an explicit type list")
        if self.explicit_types is None:
            if self.m is None and self.mu is None:
                raise ConfigError("scale needs m or mu")
            if self.m is not None and self.m < 0:
                raise ConfigError("scale.m must be >= 0")
            if self.mu is not None and self.mu < 0:
                raise ConfigError("scale.mu must be >= 0")
            if self.layer_types.max_size > self.n:
                raise ConfigError(
                    f"largest layer size {self.layer_types.max_size} exceeds n = {self.n}; "
                    "cap the model's sizes at n"
                )
        else:
            for x, y in self.explicit_types:
                if x > self.n:
                    raise ConfigError(f"explicit layer size {x} exceeds n = {self.n}")
                if not 0.0 <= y <= 1.0:
                    raise ConfigError(f"explicit layer strength {y!r} outside [0, 1]")
        if self.replicates < 1:
            raise ConfigError("run.replicates must be >= 1")

    @property
    def layer_count(self) -> int:
        if self.explicit_types is not None:
            return len(self.explicit_types)
        if self.m is not None:
            return self.m
        return int(round(self.mu * self.n))

    @property
    def effective_mu(self) -> float:
        return self.layer_count / self.n

    def describe(self) -> dict[str, Any]:
        """Canonical JSON-ready view, used for hashing and report echoes."""
        d: dict[str, Any] = {
            "n": self.n,
            "m": self.layer_count,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
        }
        if self.layer_types is not None:
            d["model"] = self.layer_types.to_records()
        else:
            d["explicit_types"] = [[x, y] for x, y in self.explicit_types]
        if self.percolation is not None:
            d["percolation"] = {
                "mode": self.percolation.mode,
                "theta": self.percolation.theta,
                "nodes": list(self.percolation.nodes) if self.percolation.nodes else None,
            }
        return d


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.describe(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _model_from_section(sec: dict) -> LayerTypeDistribution:
    _require_keys(sec, {"atoms", "power_law", "file"}, "model")
    given = [k for k in ("atoms", "power_law", "file") if k in sec]
    if len(given) != 1:
        raise ConfigError("model needs exactly one of: atoms, power_law, file")
    if "atoms" in sec:
        atoms = sec["atoms"]
        for a in atoms:
            _require_keys(a, {"x", "y", "p"}, "model.atoms[]")
        return LayerTypeDistribution(
            [a["x"] for a in atoms], [a["y"] for a in atoms], [a["p"] for a in atoms]
        )
    if "power_law" in sec:
        pl = sec["power_law"]
        _require_keys(pl, {"alpha", "beta", "b", "x_min", "x_max"}, "model.power_law")
        try:
            return power_law_distribution(pl["alpha"], pl["beta"], pl["b"], pl["x_min"], pl["x_max"])
        except (ValueError, KeyError) as e:
            raise ConfigError(f"model.power_law: {e}") from e
    with open(sec["file"], "r", encoding="utf-8") as fh:
        return LayerTypeDistribution.from_json(fh.read())


# Top-level stanzas understood by the CLI.  The simulation core consumes
# model/scale/percolation/run; theory, tolerances and outputs are read by
# the commands that need them.
_TOP_LEVEL = {"model", "scale", "percolation", "run", "theory", "tolerances", "outputs"}
_SCALE_KEYS = {"n", "m", "mu"}
_RUN_KEYS = {"replicates", "seed"}
_PERC_KEYS = {"mode", "theta", "nodes"}
_THEORY_KEYS = {
    "mu", "spectrum_ts", "size_cap", "cap_schedule", "theta", "theta_grid",
    "regime", "degree_support", "exact_limit",
}
_TOLERANCE_KEYS = {"degree_tv", "tau_abs", "sigma_abs", "giant_abs", "n2_frac_max"}
_OUTPUT_KEYS = {"out_dir", "format"}


def parse_config(doc: dict, base_seed: int | None = None, replicates: int | None = None) -> tuple[ExperimentConfig, dict]:
    """Validate a parsed TOML document; returns (config, extras).

    ``extras`` carries the theory/tolerances/outputs stanzas, already
    key-checked, for commands that consume them.
    """
    _require_keys(doc, _TOP_LEVEL, "top level")
    if "model" not in doc or "scale" not in doc:
        raise ConfigError("config needs [model] and [scale] stanzas")
    model = _model_from_section(doc["model"])
    scale = doc["scale"]
    _require_keys(scale, _SCALE_KEYS, "scale")
    run = doc.get("run", {})
    _require_keys(run, _RUN_KEYS, "run")
    perc = None
    if "percolation" in doc:
        p = doc["percolation"]
        _require_keys(p, _PERC_KEYS, "percolation")
        perc = PercolationSpec(
            mode=p.get("mode", "site"),
            theta=p.get("theta"),
            nodes=tuple(p["nodes"]) if "nodes" in p else None,
        )
    theory = doc.get("theory", {})
    _require_keys(theory, _THEORY_KEYS, "theory")
    tolerances = doc.get("tolerances", {})
    _require_keys(tolerances, _TOLERANCE_KEYS, "tolerances")
    outputs = doc.get("outputs", {})
    _require_keys(outputs, _OUTPUT_KEYS, "outputs")
    if outputs.get("format", "csv") not in ("csv", "machine"):
        raise ConfigError("outputs.format must be 'csv' or 'machine'")
    cfg = ExperimentConfig(
        n=scale.get("n", 0),
        layer_types=model,
        m=scale.get("m"),
        mu=scale.get("mu"),
        percolation=perc,
        replicates=replicates if replicates is not None else run.get("replicates", 1),
        master_seed=base_seed if base_seed is not None else run.get("seed", 0),
    )
    return cfg, {"theory": theory, "tolerances": tolerances, "outputs": outputs}


def load_config(path: str, base_seed: int | None = None, replicates: int | None = None) -> tuple[ExperimentConfig, dict]:
    with open(path, "rb") as fh:
        try:
            doc = _toml.load(fh)
        except _toml.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    return parse_config(doc, base_seed=base_seed, replicates=replicates)
