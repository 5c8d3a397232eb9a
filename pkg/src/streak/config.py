"""Engine knobs and the key=value configuration file."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import spatial_id
from .node_select import NodeCostModel
from .squadtree import TreeConfig

_ALIASES = {
    "blockSize": "block_size",
    "leafCapacity": "leaf_capacity",
    "bloomBits": "bloom_bits",
    "bloomHashes": "bloom_hashes",
    "alphaIO": "alpha_io",
    "alphaCPU": "alpha_cpu",
    "alphaMerge": "alpha_merge",
    "joinFactor": "join_factor",
    "maxLevels": "max_levels",
    "rtreeFanout": "rtree_fanout",
    "defaultK": "default_k",
}


@dataclass(frozen=True)
class EngineConfig:
    block_size: int = 1024
    leaf_capacity: int = 64
    bloom_bits: int = 1024
    bloom_hashes: int = 3
    alpha_io: float = 1.0
    alpha_cpu: float = 0.1
    alpha_merge: float = 0.05
    join_factor: float = 1.0
    max_levels: int = 10
    rtree_fanout: int = 16
    default_k: int = 100

    def __post_init__(self) -> None:
        if self.max_levels > spatial_id.MAX_LEVELS:
            object.__setattr__(self, "max_levels", spatial_id.MAX_LEVELS)
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    @property
    def tree(self) -> TreeConfig:
        return TreeConfig(self.max_levels, self.leaf_capacity, self.bloom_bits, self.bloom_hashes)

    @property
    def cost_model(self) -> NodeCostModel:
        return NodeCostModel(self.alpha_io, self.alpha_cpu, self.alpha_merge)

    def with_(self, **changes) -> EngineConfig:
        return replace(self, **changes)


def parse_config(text: str, base: EngineConfig | None = None) -> EngineConfig:
    """Read ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    base = base or EngineConfig()
    types = {f.name: f.type for f in fields(EngineConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        name = _ALIASES.get(key, key)
        if name not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        kind = types[name]
        changes[name] = int(value) if kind in ("int", int) else float(value)
    return replace(base, **changes)


def load_config(path: str | Path | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return parse_config(Path(path).read_text())
