"""Experiment configuration: a JSON document with a fixed schema.

Every key is optional and falls back to the built-in default scenario
(4 nodes x 8 ranks x 4 MiB, 1 MiB stripes over 4 I/O servers).  Unknown keys
are rejected with their dotted path.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .model import CheckpointSet, ClusterSpec, StripeLayout
from .simulator import InterferenceModel, PfsModel, Scenario
from .strategies import STRATEGIES, StrategyConfig

MODES = ("simulate", "execute", "both")
FORMATS = ("csv", "json")

DEFAULTS: dict[str, Any] = {
    "cluster": {
        "node_count": 4,
        "ranks_per_node": 8,
        "local_write_bandwidth": 2.0e9,
        "network_bandwidth": 1.25e9,
        "node_load": None,
        "topology_coord": None,
    },
    "checkpoint_size": 4 << 20,
    "seed": 7,
    "layout": {"stripe_size": 1 << 20, "io_server_count": 4, "destination_file_count": 1},
    "pfs": {"per_server_bandwidth": 5.0e8, "stripe_penalty": 1.5},
    "interference": {"app_network_demand": 0.5, "spare_cores": 4},
    "strategy": list(STRATEGIES),
    "M": None,
    "io_threads": 4,
    "weights": [1.0, 1.0, 1.0],
    "mode": "simulate",
    "format": "csv",
    "out": "report.csv",
    "run_dir": "runs/latest",
    "execute_limit_bytes": 1 << 30,
    "grid": None,
}
GRID_KEYS = ("node_count", "ranks_per_node", "strategy")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and base[key] is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _need(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"config key {key!r}: {msg}")


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, override: Optional[dict] = None) -> "ExperimentConfig":
        if override is not None and not isinstance(override, dict):
            raise ConfigError("config document must be a JSON object")
        doc = _merge(DEFAULTS, override or {})
        cfg = cls(doc)
        cfg._validate()
        return cfg

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        text = Path(path).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc)

    def with_overrides(self, **kv: Any) -> "ExperimentConfig":
        doc = copy.deepcopy(self.doc)
        doc.update({k: v for k, v in kv.items() if v is not None})
        return ExperimentConfig.from_dict(doc)

    def _validate(self) -> None:
        d = self.doc
        c = d["cluster"]
        for k in ("node_count", "ranks_per_node"):
            _need(_is_int(c[k]) and c[k] >= 1, f"cluster.{k}", "must be an integer >= 1")
        for k in ("local_write_bandwidth", "network_bandwidth"):
            _need(_is_num(c[k]) and c[k] > 0, f"cluster.{k}", "must be a number > 0")
        size = d["checkpoint_size"]
        if isinstance(size, list):
            _need(all(_is_int(s) and s >= 0 for s in size), "checkpoint_size",
                  "list entries must be integers >= 0")
        else:
            _need(_is_int(size) and size >= 0, "checkpoint_size",
                  "must be an integer >= 0 or a list of them")
        _need(_is_int(d["seed"]) and 0 <= d["seed"] < 2**64, "seed", "must be a u64 integer")
        for k in ("stripe_size", "io_server_count", "destination_file_count"):
            _need(_is_int(d["layout"][k]) and d["layout"][k] >= 1, f"layout.{k}",
                  "must be an integer >= 1")
        strategies = d["strategy"] if isinstance(d["strategy"], list) else [d["strategy"]]
        _need(bool(strategies) and all(s in STRATEGIES for s in strategies), "strategy",
              f"must be one of {STRATEGIES} or a non-empty list of them")
        _need(d["M"] is None or (_is_int(d["M"]) and d["M"] >= 1), "M",
              "must be null or an integer >= 1")
        _need(_is_int(d["io_threads"]) and d["io_threads"] >= 1, "io_threads",
              "must be an integer >= 1")
        w = d["weights"]
        _need(isinstance(w, list) and len(w) == 3 and all(_is_num(x) and x >= 0 for x in w),
              "weights", "must be three non-negative numbers")
        _need(d["mode"] in MODES, "mode", f"must be one of {MODES}")
        _need(d["format"] in FORMATS, "format", f"must be one of {FORMATS}")
        _need(isinstance(d["out"], str) and d["out"], "out", "must be a path string")
        _need(isinstance(d["run_dir"], str) and d["run_dir"], "run_dir", "must be a path string")
        _need(_is_int(d["execute_limit_bytes"]) and d["execute_limit_bytes"] >= 0,
              "execute_limit_bytes", "must be an integer >= 0")
        grid = d["grid"]
        if grid is not None:
            _need(isinstance(grid, dict), "grid", "must be an object")
            for k in grid:
                _need(k in GRID_KEYS, f"grid.{k}", "unknown grid axis")
            for k, v in grid.items():
                _need(isinstance(v, list) and len(v) > 0, f"grid.{k}", "must be a non-empty list")
            if "strategy" in grid:
                _need(all(s in STRATEGIES for s in grid["strategy"]), "grid.strategy",
                      f"entries must be in {STRATEGIES}")
            for k in ("node_count", "ranks_per_node"):
                if k in grid:
                    _need(all(_is_int(x) and x >= 1 for x in grid[k]), f"grid.{k}",
                          "entries must be integers >= 1")
        try:
            for sc in self.scenarios():
                sc.ckpts.check_against(sc.cluster)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    # -- accessors ---------------------------------------------------------

    @property
    def mode(self) -> str:
        return self.doc["mode"]

    @property
    def format(self) -> str:
        return self.doc["format"]

    @property
    def out(self) -> Path:
        return Path(self.doc["out"])

    @property
    def run_dir(self) -> Path:
        return Path(self.doc["run_dir"])

    @property
    def strategies(self) -> list[str]:
        s = self.doc["strategy"]
        return list(s) if isinstance(s, list) else [s]

    def cluster(self, node_count: Optional[int] = None,
                ranks_per_node: Optional[int] = None) -> ClusterSpec:
        c = self.doc["cluster"]
        n = node_count or c["node_count"]
        return ClusterSpec(
            node_count=n,
            ranks_per_node=ranks_per_node or c["ranks_per_node"],
            local_write_bandwidth=float(c["local_write_bandwidth"]),
            network_bandwidth=float(c["network_bandwidth"]),
            node_load=tuple(c["node_load"] or ()),
            topology_coord=tuple(c["topology_coord"] or ()),
        )

    def checkpoints(self, cluster: ClusterSpec) -> CheckpointSet:
        size = self.doc["checkpoint_size"]
        if isinstance(size, list):
            return CheckpointSet(tuple(size), self.doc["seed"])
        return CheckpointSet.uniform(cluster, size, self.doc["seed"])

    def layout(self) -> StripeLayout:
        return StripeLayout(**self.doc["layout"])

    def pfs(self) -> PfsModel:
        return PfsModel(**self.doc["pfs"])

    def interference(self) -> InterferenceModel:
        return InterferenceModel(**self.doc["interference"])

    def strategy_config(self, name: str) -> StrategyConfig:
        return StrategyConfig(name, self.doc["M"], self.doc["io_threads"],
                              tuple(float(w) for w in self.doc["weights"]))

    def scenarios(self) -> list[Scenario]:
        """Grid cross product (node_count x ranks_per_node x strategy), or the
        configured strategies at the configured scale when there is no grid."""
        grid = self.doc["grid"] or {}
        nodes = grid.get("node_count", [self.doc["cluster"]["node_count"]])
        rpns = grid.get("ranks_per_node", [self.doc["cluster"]["ranks_per_node"]])
        strategies = grid.get("strategy", self.strategies)
        out = []
        for n in nodes:
            for rpn in rpns:
                cluster = self.cluster(n, rpn)
                ckpts = self.checkpoints(cluster)
                for s in strategies:
                    out.append(Scenario(cluster, ckpts, self.layout(), self.strategy_config(s),
                                        self.pfs(), self.interference()))
        return out
