import json

import pytest

from ckptagg.config import ExperimentConfig
from ckptagg.errors import ConfigError


def test_defaults_are_the_reference_scenario():
    cfg = ExperimentConfig.from_dict()
    cluster = cfg.cluster()
    assert (cluster.node_count, cluster.ranks_per_node) == (4, 8)
    assert cfg.checkpoints(cluster).sizes == (4 << 20,) * 32
    assert (cfg.layout().stripe_size, cfg.layout().io_server_count) == (1 << 20, 4)
    assert cfg.doc["execute_limit_bytes"] == 1 << 30
    assert len(cfg.scenarios()) == 4


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigError, match="cluster.bogus"):
        ExperimentConfig.from_dict({"cluster": {"bogus": 1}})
    with pytest.raises(ConfigError, match="extra"):
        ExperimentConfig.from_dict({"extra": 1})
    with pytest.raises(ConfigError, match="grid.cores"):
        ExperimentConfig.from_dict({"grid": {"cores": [1]}})


def test_bad_values_name_key():
    for doc, key in [
        ({"cluster": {"node_count": 0}}, "cluster.node_count"),
        ({"checkpoint_size": -1}, "checkpoint_size"),
        ({"strategy": "fastest"}, "strategy"),
        ({"mode": "dry"}, "mode"),
        ({"weights": [1, 1]}, "weights"),
        ({"layout": {"stripe_size": 1.5}}, "layout.stripe_size"),
        ({"cluster": True}, "cluster"),
    ]:
        with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
            ExperimentConfig.from_dict(doc)


def test_size_list_must_match_rank_count():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"cluster": {"node_count": 2, "ranks_per_node": 2},
                                    "checkpoint_size": [1, 2, 3]})
    cfg = ExperimentConfig.from_dict({"cluster": {"node_count": 2, "ranks_per_node": 2},
                                      "checkpoint_size": [1, 2, 3, 4]})
    assert cfg.checkpoints(cfg.cluster()).sizes == (1, 2, 3, 4)


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "seed": 1,\n  "mode": \n}')
    with pytest.raises(ConfigError, match="line 4"):
        ExperimentConfig.load(p)


def test_overrides_and_grid(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"grid": {"node_count": [1, 2], "ranks_per_node": [3],
                                      "strategy": ["posix_aggregate"]}}))
    cfg = ExperimentConfig.load(p).with_overrides(seed=99, mode=None)
    assert cfg.doc["seed"] == 99 and cfg.mode == "simulate"
    scs = cfg.scenarios()
    assert [(s.cluster.node_count, s.cluster.ranks_per_node) for s in scs] == [(1, 3), (2, 3)]
    assert all(s.ckpts.content_seed == 99 for s in scs)
