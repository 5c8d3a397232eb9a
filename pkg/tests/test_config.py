from __future__ import annotations

import pytest

from streak import EngineConfig, parse_config


def test_defaults():
    cfg = EngineConfig()
    assert cfg.block_size == 1024 and cfg.tree.leaf_capacity == 64
    assert cfg.cost_model.alpha_io == 1.0


def test_parse_aliases_and_comments():
    cfg = parse_config("blockSize = 16  # small blocks\nalpha_cpu=0.5\n\nmaxLevels = 12\n")
    assert cfg.block_size == 16 and cfg.alpha_cpu == 0.5
    # depth is capped by the identifier layout
    assert cfg.max_levels == 10


@pytest.mark.parametrize("text", ["blockSize 16", "speed = 3", "blockSize = 0"])
def test_bad_config(text):
    with pytest.raises(ValueError):
        parse_config(text)
