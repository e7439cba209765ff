"""The four flush strategies, each turning the same inputs into a FlushPlan."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import PlanError
from .model import CheckpointSet, ClusterSpec, FlushPlan, Source, StripeLayout, Transfer, WriteExtent
from .planner import (
    assign_stripe_sets,
    build_transfer_schedule,
    elect_leaders,
    exclusive_prefix_sum,
)

FILE_PER_PROCESS = "file_per_process"
POSIX_AGGREGATE = "posix_aggregate"
COLLECTIVE_AGGREGATE = "collective_aggregate"
LEADER_AGGREGATE = "leader_aggregate"
STRATEGIES = (FILE_PER_PROCESS, POSIX_AGGREGATE, COLLECTIVE_AGGREGATE, LEADER_AGGREGATE)


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str = LEADER_AGGREGATE
    m: Optional[int] = None
    io_threads_per_backend: int = 4
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.io_threads_per_backend < 1:
            raise ValueError("io_threads_per_backend must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("M must be >= 1")

    def resolved_m(self, cluster: ClusterSpec, layout: StripeLayout) -> int:
        """Destination file / leader count actually used by the strategy."""
        if self.strategy == FILE_PER_PROCESS:
            return cluster.rank_count
        if self.strategy == POSIX_AGGREGATE:
            return 1
        if self.m is not None:
            return self.m
        return min(cluster.node_count, layout.io_server_count)


def plan_file_per_process(ckpts: CheckpointSet, cluster: ClusterSpec) -> FlushPlan:
    ckpts.check_against(cluster)
    extents = tuple(
        WriteExtent(cluster.node_of(r), r, 0, size, (Source(r, 0, size),))
        for r, size in enumerate(ckpts.sizes)
        if size > 0
    )
    return FlushPlan(
        strategy_name=FILE_PER_PROCESS,
        extents=extents,
        file_sizes=ckpts.sizes,
        rank_offsets=tuple((r, 0) for r in range(len(ckpts.sizes))),
    )


def plan_posix_aggregate(
    ckpts: CheckpointSet, cluster: ClusterSpec, layout: Optional[StripeLayout] = None
) -> FlushPlan:
    """Every backend writes its own ranks straight into one shared file."""
    ckpts.check_against(cluster)
    offsets, total = exclusive_prefix_sum(ckpts.sizes)
    extents = tuple(
        WriteExtent(cluster.node_of(r), 0, offsets[r], size, (Source(r, 0, size),))
        for r, size in enumerate(ckpts.sizes)
        if size > 0
    )
    return FlushPlan(
        strategy_name=POSIX_AGGREGATE,
        extents=extents,
        file_sizes=(total,),
        rank_offsets=tuple((0, o) for o in offsets),
    )


def plan_collective_aggregate(
    ckpts: CheckpointSet, cluster: ClusterSpec, layout: StripeLayout, m: int
) -> FlushPlan:
    """Static leaders (first ``m`` nodes), one collective round per local checkpoint.

    Round j moves every node's j-th checkpoint to the leaders owning its file
    range; each round is a barrier for all backends.
    """
    if not 1 <= m <= cluster.node_count:
        raise PlanError(f"M={m} must lie in [1, {cluster.node_count}]")
    total = exclusive_prefix_sum(ckpts.sizes)[1]
    assignment = assign_stripe_sets(tuple(range(m)), total, layout)
    schedule, routed = build_transfer_schedule(
        ckpts, cluster, assignment, layout, COLLECTIVE_AGGREGATE
    )
    rpn = cluster.ranks_per_node
    by_phase: list[list[int]] = [[] for _ in range(rpn)]
    for i, mv in enumerate(schedule.moves):
        by_phase[mv.rank % rpn].append(i)

    extents: list[WriteExtent] = []
    phases: list[tuple[int, ...]] = []
    transfers: list[Transfer] = []
    for members in by_phase:
        ids = []
        for i in members:
            mv = schedule.moves[i]
            ids.append(len(extents))
            extents.append(
                WriteExtent(mv.leader_node, mv.dest_file, mv.dest_offset, mv.length,
                            (Source(mv.rank, mv.source_offset, mv.length),))
            )
            if mv.source_node != mv.leader_node:
                transfers.append(Transfer(mv.source_node, mv.leader_node, mv.length))
        phases.append(tuple(ids))
    return dataclasses.replace(
        routed, extents=tuple(extents), phases=tuple(phases), transfers=tuple(transfers)
    )


def plan_leader_aggregate(
    ckpts: CheckpointSet,
    cluster: ClusterSpec,
    layout: StripeLayout,
    m: int,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> FlushPlan:
    return leader_plan_and_schedule(ckpts, cluster, layout, m, weights)[1]


def leader_plan_and_schedule(ckpts, cluster, layout, m, weights=(1.0, 1.0, 1.0)):
    """Election, stripe assignment and routing; returns (schedule, plan)."""
    ckpts.check_against(cluster)
    elected = elect_leaders(cluster, ckpts.node_bytes(cluster), m, weights)
    total = exclusive_prefix_sum(ckpts.sizes)[1]
    assignment = dataclasses.replace(
        assign_stripe_sets(elected.leaders, total, layout),
        leader_scores=elected.leader_scores,
    )
    return build_transfer_schedule(ckpts, cluster, assignment, layout, LEADER_AGGREGATE)


def make_plan(
    config: StrategyConfig, ckpts: CheckpointSet, cluster: ClusterSpec, layout: StripeLayout
) -> FlushPlan:
    m = config.resolved_m(cluster, layout)
    if config.strategy == FILE_PER_PROCESS:
        return plan_file_per_process(ckpts, cluster)
    if config.strategy == POSIX_AGGREGATE:
        return plan_posix_aggregate(ckpts, cluster, layout)
    if config.strategy == COLLECTIVE_AGGREGATE:
        return plan_collective_aggregate(ckpts, cluster, layout, m)
    return plan_leader_aggregate(ckpts, cluster, layout, m, config.weights)
