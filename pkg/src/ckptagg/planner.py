"""Pure planning algorithms.

Offsets come from an exclusive prefix sum over node-major rank order.  The
aggregated byte space of ``total`` bytes is cut into ``T = ceil(total /
stripe_size)`` stripes; with several destination files each file takes a
contiguous run of ``ceil(T / files)`` stripes of that space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

from . import _kernels
from .errors import ConfigurationTooLarge, PlanError
from .model import (
    INT64_MAX,
    CheckpointSet,
    ClusterSpec,
    FlushPlan,
    Source,
    StripeLayout,
    Transfer,
    WriteExtent,
)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def exclusive_prefix_sum(sizes: Sequence[int]) -> tuple[list[int], int]:
    """Offsets where each entry starts, plus the grand total.

    Raises ConfigurationTooLarge when the total leaves the int64 range.
    """
    return _kernels.exclusive_scan(sizes)


def stripe_conflicts(
    extents: Sequence[WriteExtent], layout: StripeLayout
) -> tuple[int, dict[tuple[int, int], tuple[int, ...]]]:
    """Stripes written by two or more distinct writers.

    Returns the number of such stripes (summed over files) and a mapping
    ``(file_index, stripe_index) -> sorted writers`` for each of them.
    Extents must not overlap within a file.
    """
    return _kernels.endpoint_conflicts(
        [e.file_index for e in extents],
        [e.offset for e in extents],
        [e.length for e in extents],
        [e.writer for e in extents],
        layout.stripe_size,
    )


# -- file space ------------------------------------------------------------


@dataclass(frozen=True)
class FileSpace:
    """Maps the aggregated byte space onto ``file_count`` stripe-aligned files."""

    total_bytes: int
    stripe_size: int
    file_count: int = 1

    @property
    def stripe_count(self) -> int:
        return _ceil_div(self.total_bytes, self.stripe_size)

    @property
    def bytes_per_file(self) -> int:
        per = max(1, _ceil_div(self.stripe_count, self.file_count))
        return per * self.stripe_size

    def file_sizes(self) -> tuple[int, ...]:
        bpf = self.bytes_per_file
        return tuple(
            min(max(self.total_bytes - f * bpf, 0), bpf) for f in range(self.file_count)
        )

    def locate(self, pos: int) -> tuple[int, int]:
        f = min(pos // self.bytes_per_file, self.file_count - 1)
        return f, pos - f * self.bytes_per_file

    def split(self, start: int, end: int) -> list[tuple[int, int, int, int]]:
        """Cut ``[start, end)`` at file boundaries: (file, local_off, global_off, len)."""
        out = []
        bpf = self.bytes_per_file
        pos = start
        while pos < end:
            f, local = self.locate(pos)
            stop = end if f == self.file_count - 1 else min(end, (f + 1) * bpf)
            out.append((f, local, pos, stop - pos))
            pos = stop
        return out


# -- leaders ---------------------------------------------------------------


@dataclass(frozen=True)
class LeaderAssignment:
    leaders: tuple[int, ...]
    stripe_sets: tuple[tuple[tuple[int, int, int], ...], ...] = ()
    leader_scores: tuple[float, ...] = ()
    capacity: tuple[int, ...] = ()
    domains: tuple[tuple[int, int], ...] = ()
    """Per leader, the ``[start, end)`` range of the aggregated byte space."""

    def global_stripes(self, k: int, stripe_size: int) -> range:
        start, end = self.domains[k]
        if end <= start:
            return range(0)
        return range(start // stripe_size, _ceil_div(end, stripe_size))


def _centrality(coords: Sequence[int]) -> list[float]:
    n = len(coords)
    span = max(coords) - min(coords)
    if span == 0:
        return [1.0] * n
    return [1.0 - (sum(abs(c - d) for d in coords) / n) / span for c in coords]


def elect_leaders(
    cluster: ClusterSpec,
    node_ckpt_bytes: Sequence[int],
    m: int,
    weights: Sequence[float] = (1.0, 1.0, 1.0),
) -> LeaderAssignment:
    """Pick the ``m`` best-scoring nodes as I/O leaders.

    score = w_size * bytes/max_bytes + w_load * (1 - load) + w_topo * centrality,
    where centrality is one minus a node's mean coordinate distance to all
    nodes divided by the coordinate span.  Ties go to the lower node index.
    """
    if not 1 <= m <= cluster.node_count:
        raise PlanError(f"cannot elect {m} leaders among {cluster.node_count} nodes")
    if len(node_ckpt_bytes) != cluster.node_count:
        raise PlanError("need one byte count per node")
    w_size, w_load, w_topo = (float(w) for w in weights)
    if min(w_size, w_load, w_topo) < 0:
        raise PlanError("election weights must be non-negative")
    max_bytes = max(node_ckpt_bytes)
    cent = _centrality(cluster.topology_coord)
    scores = []
    for n in range(cluster.node_count):
        size_term = node_ckpt_bytes[n] / max_bytes if max_bytes > 0 else 0.0
        scores.append(
            w_size * size_term + w_load * (1.0 - cluster.node_load[n]) + w_topo * cent[n]
        )
    ranked = sorted(range(cluster.node_count), key=lambda n: (-scores[n], n))
    return LeaderAssignment(leaders=tuple(sorted(ranked[:m])), leader_scores=tuple(scores))


def assign_stripe_sets(
    leaders: Sequence[int], total_bytes: int, layout: StripeLayout
) -> LeaderAssignment:
    """Give each leader a contiguous, stripe-aligned block of stripes.

    Leader k receives stripes ``[k*ceil(T/M), min((k+1)*ceil(T/M), T))``.
    """
    if not leaders:
        raise PlanError("need at least one leader")
    space = FileSpace(total_bytes, layout.stripe_size, layout.destination_file_count)
    s = layout.stripe_size
    t = space.stripe_count
    per = _ceil_div(t, len(leaders))
    stripe_sets, capacity, domains = [], [], []
    for k in range(len(leaders)):
        lo, hi = min(k * per, t), min((k + 1) * per, t)
        start, end = min(lo * s, total_bytes), min(hi * s, total_bytes)
        domains.append((start, end))
        capacity.append(end - start)
        sets = []
        for f, local, _, n in space.split(start, end):
            sets.append((f, local // s, _ceil_div(local + n, s)))
        stripe_sets.append(tuple(sets))
    return LeaderAssignment(
        leaders=tuple(leaders),
        stripe_sets=tuple(stripe_sets),
        capacity=tuple(capacity),
        domains=tuple(domains),
    )


class Move(NamedTuple):
    source_node: int
    leader_node: int
    rank: int
    source_offset: int
    length: int
    dest_file: int
    dest_offset: int


@dataclass(frozen=True)
class TransferSchedule:
    moves: tuple[Move, ...]
    ordering: dict[int, tuple[int, ...]]
    """Leader node -> indices into ``moves`` in arrival (destination) order."""

    @property
    def network_bytes(self) -> int:
        return sum(m.length for m in self.moves if m.source_node != m.leader_node)


def build_transfer_schedule(
    ckpts: CheckpointSet,
    cluster: ClusterSpec,
    assignment: LeaderAssignment,
    layout: StripeLayout,
    strategy_name: str = "leader_aggregate",
) -> tuple[TransferSchedule, FlushPlan]:
    """Cut every rank's bytes at leader boundaries and route them.

    One move is emitted per (rank range x leader domain x file) intersection.
    Each leader writes its whole domain as one extent per file, so every
    stripe has exactly one writer.
    """
    ckpts.check_against(cluster)
    offsets, total = exclusive_prefix_sum(ckpts.sizes)
    if sum(assignment.capacity) != total:
        raise PlanError(
            f"leader capacity {sum(assignment.capacity)} != checkpoint bytes {total}"
        )
    space = FileSpace(total, layout.stripe_size, layout.destination_file_count)

    moves: list[Move] = []
    per_leader: dict[int, list[int]] = {}
    k = 0
    for rank, size in enumerate(ckpts.sizes):
        pos, end = offsets[rank], offsets[rank] + size
        while pos < end:
            while assignment.domains[k][1] <= pos:
                k += 1
            stop = min(end, assignment.domains[k][1])
            leader = assignment.leaders[k]
            for f, local, g, n in space.split(pos, stop):
                per_leader.setdefault(k, []).append(len(moves))
                moves.append(
                    Move(cluster.node_of(rank), leader, rank, g - offsets[rank], n, f, local)
                )
            pos = stop

    extents: list[WriteExtent] = []
    for k, leader in enumerate(assignment.leaders):
        by_file: dict[int, list[Move]] = {}
        for i in per_leader.get(k, ()):
            by_file.setdefault(moves[i].dest_file, []).append(moves[i])
        for f, ms in sorted(by_file.items()):
            extents.append(
                WriteExtent(
                    writer=leader,
                    file_index=f,
                    offset=ms[0].dest_offset,
                    length=sum(m.length for m in ms),
                    sources=tuple(Source(m.rank, m.source_offset, m.length) for m in ms),
                )
            )

    ordering = {
        assignment.leaders[k]: tuple(idx) for k, idx in sorted(per_leader.items())
    }
    schedule = TransferSchedule(tuple(moves), ordering)
    plan = FlushPlan(
        strategy_name=strategy_name,
        extents=tuple(extents),
        file_sizes=space.file_sizes(),
        rank_offsets=tuple(space.locate(o) for o in offsets),
        transfers=tuple(
            Transfer(m.source_node, m.leader_node, m.length)
            for m in moves
            if m.source_node != m.leader_node
        ),
        leaders=tuple(assignment.leaders),
    )
    return schedule, plan


class ScanEntry(NamedTuple):
    offset: int
    directory: Any


def piggyback_scan(sizes: Sequence[int], directory: Any) -> list[ScanEntry]:
    """Exclusive scan whose carried value also holds the leader directory.

    Every participant receives its offset and the same directory object from
    one left-to-right pass, so no separate broadcast is needed.
    """
    out: list[ScanEntry] = []
    carry = (0, directory)
    for s in sizes:
        if s < 0:
            raise ValueError("sizes must be non-negative")
        out.append(ScanEntry(*carry))
        running = carry[0] + int(s)
        if running > INT64_MAX:
            raise ConfigurationTooLarge("byte total exceeds the signed 64-bit range")
        carry = (running, carry[1])
    return out
