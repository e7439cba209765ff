"""Domain types shared by the planners, executor and simulator.

Every type here is a frozen dataclass holding tuples, so instances can be
shared freely between threads.  Ranks are numbered node-major: node 0 owns
ranks ``0 .. ranks_per_node-1``, node 1 the next block, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import PlanError

INT64_MAX = 2**63 - 1
UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class ClusterSpec:
    node_count: int
    ranks_per_node: int
    local_write_bandwidth: float = 2.0e9
    network_bandwidth: float = 1.25e9
    node_load: tuple[float, ...] = ()
    topology_coord: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.node_count < 1 or self.ranks_per_node < 1:
            raise ValueError("node_count and ranks_per_node must be >= 1")
        if self.local_write_bandwidth <= 0 or self.network_bandwidth <= 0:
            raise ValueError("bandwidths must be > 0")
        load = tuple(float(x) for x in self.node_load) or (0.0,) * self.node_count
        coord = tuple(int(c) for c in self.topology_coord) or tuple(range(self.node_count))
        if len(load) != self.node_count:
            raise ValueError(f"node_load has {len(load)} entries, expected {self.node_count}")
        if any(not 0.0 <= x <= 1.0 for x in load):
            raise ValueError("node_load entries must lie in [0, 1]")
        if len(coord) != self.node_count or any(c < 0 for c in coord):
            raise ValueError("topology_coord needs one non-negative entry per node")
        object.__setattr__(self, "node_load", load)
        object.__setattr__(self, "topology_coord", coord)

    @property
    def rank_count(self) -> int:
        return self.node_count * self.ranks_per_node

    def node_of(self, rank: int) -> int:
        return rank // self.ranks_per_node

    def ranks_of(self, node: int) -> range:
        return range(node * self.ranks_per_node, (node + 1) * self.ranks_per_node)


@dataclass(frozen=True)
class CheckpointSet:
    """One checkpoint version: a byte count per rank plus the content seed."""

    sizes: tuple[int, ...]
    content_seed: int = 0

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.sizes)
        if any(s < 0 for s in sizes):
            raise ValueError("checkpoint sizes must be >= 0")
        if not 0 <= self.content_seed <= UINT64_MAX:
            raise ValueError("content_seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, cluster: ClusterSpec, size: int, seed: int = 0) -> "CheckpointSet":
        return cls((size,) * cluster.rank_count, seed)

    @property
    def total_bytes(self) -> int:
        return sum(self.sizes)

    def check_against(self, cluster: ClusterSpec) -> None:
        if len(self.sizes) != cluster.rank_count:
            raise PlanError(
                f"{len(self.sizes)} checkpoint sizes for {cluster.rank_count} ranks"
            )

    def node_bytes(self, cluster: ClusterSpec) -> list[int]:
        self.check_against(cluster)
        return [sum(self.sizes[r] for r in cluster.ranks_of(n)) for n in range(cluster.node_count)]


@dataclass(frozen=True)
class StripeLayout:
    stripe_size: int = 1 << 20
    io_server_count: int = 4
    destination_file_count: int = 1

    def __post_init__(self) -> None:
        if self.stripe_size <= 0:
            raise ValueError("stripe_size must be > 0")
        if self.io_server_count < 1 or self.destination_file_count < 1:
            raise ValueError("io_server_count and destination_file_count must be >= 1")

    def stripe_of(self, offset: int) -> int:
        return offset // self.stripe_size

    def server_of(self, stripe_index: int, first_server: int = 0) -> int:
        """Server holding a stripe of a file whose stripe 0 lives on ``first_server``."""
        return (stripe_index + first_server) % self.io_server_count


class Source(NamedTuple):
    rank: int
    source_offset: int
    length: int


class Transfer(NamedTuple):
    from_node: int
    to_node: int
    byte_count: int


@dataclass(frozen=True)
class WriteExtent:
    writer: int
    file_index: int
    offset: int
    length: int
    sources: tuple[Source, ...]

    def __post_init__(self) -> None:
        srcs = tuple(Source(*s) for s in self.sources)
        object.__setattr__(self, "sources", srcs)
        if self.length < 0 or self.offset < 0:
            raise ValueError("extent offset and length must be >= 0")
        if sum(s.length for s in srcs) != self.length:
            raise ValueError("extent source lengths do not add up to its length")

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True)
class FlushPlan:
    strategy_name: str
    extents: tuple[WriteExtent, ...]
    file_sizes: tuple[int, ...]
    rank_offsets: tuple[tuple[int, int], ...]
    transfers: tuple[Transfer, ...] = ()
    phases: tuple[tuple[int, ...], ...] = ()
    leaders: tuple[int, ...] = ()

    @property
    def total_bytes(self) -> int:
        return sum(e.length for e in self.extents)

    @property
    def network_bytes(self) -> int:
        return sum(t.byte_count for t in self.transfers)

    def phase_of_extents(self) -> list[int]:
        """Phase index per extent; all zero for single-phase plans."""
        out = [0] * len(self.extents)
        for p, members in enumerate(self.phases):
            for i in members:
                out[i] = p
        return out


# -- content ---------------------------------------------------------------


def _bitgen(seed: int, rank: int) -> np.random.Philox:
    return np.random.Philox(key=np.array([seed, rank], dtype=np.uint64))


def content_range(seed: int, rank: int, start: int, length: int) -> bytes:
    """Bytes ``[start, start+length)`` of the stream for (seed, rank).

    Philox is counter based, so any window is produced without generating the
    bytes before it.
    """
    if length < 0 or start < 0:
        raise ValueError("start and length must be >= 0")
    if length == 0:
        return b""
    # Philox advances in blocks of four 64-bit words.
    block, skip = divmod(start, 32)
    n_words = (skip + length + 7) // 8
    bg = _bitgen(seed, rank)
    if block:
        bg.advance(block)
    words = bg.random_raw(n_words).astype("<u8", copy=False)
    return words.tobytes()[skip : skip + length]


def generate_content(seed: int, rank: int, size: int) -> bytes:
    if size < 0:
        raise ValueError("size must be >= 0")
    return content_range(seed, rank, 0, size)


# -- coverage --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    message: str
    extents: tuple[int, ...] = ()
    rank: Optional[int] = None
    file_index: Optional[int] = None

    def __str__(self) -> str:
        return self.message


def plan_coverage_check(plan: FlushPlan, ckpts: CheckpointSet) -> Optional[Violation]:
    """Return ``None`` when the plan is a valid N->M flush of ``ckpts``.

    Checks that extents in a file never overlap, stay inside the declared file
    sizes, and that their sources tile every checkpoint exactly once.
    """
    sizes = ckpts.sizes
    by_file: dict[int, list[int]] = {}
    per_rank: dict[int, list[tuple[int, int, int]]] = {}
    for i, ext in enumerate(plan.extents):
        if not 0 <= ext.file_index < len(plan.file_sizes):
            return Violation(f"extent {i} targets unknown file {ext.file_index}", (i,),
                             file_index=ext.file_index)
        if ext.end > plan.file_sizes[ext.file_index]:
            return Violation(
                f"extent {i} ends at {ext.end}, past file {ext.file_index} size "
                f"{plan.file_sizes[ext.file_index]}", (i,), file_index=ext.file_index)
        for src in ext.sources:
            if not 0 <= src.rank < len(sizes):
                return Violation(f"extent {i} references unknown rank {src.rank}", (i,),
                                 rank=src.rank)
            if src.source_offset < 0 or src.source_offset + src.length > sizes[src.rank]:
                return Violation(
                    f"extent {i} reads rank {src.rank} bytes "
                    f"[{src.source_offset}, {src.source_offset + src.length}) beyond size "
                    f"{sizes[src.rank]}", (i,), rank=src.rank)
            if src.length:
                per_rank.setdefault(src.rank, []).append((src.source_offset, src.length, i))
        if ext.length:
            by_file.setdefault(ext.file_index, []).append(i)

    for f in sorted(by_file):
        idx = sorted(by_file[f], key=lambda k: (plan.extents[k].offset, k))
        for a, b in zip(idx, idx[1:]):
            if plan.extents[b].offset < plan.extents[a].end:
                return Violation(
                    f"extents {a} and {b} overlap in file {f} at offset "
                    f"{plan.extents[b].offset}", (a, b), file_index=f)

    for rank, size in enumerate(sizes):
        pos = 0
        for off, length, i in sorted(per_rank.get(rank, ())):
            if off != pos:
                kind = "gap" if off > pos else "overlap"
                return Violation(f"rank {rank}: {kind} at byte {min(off, pos)} (extent {i})",
                                 (i,), rank=rank)
            pos += length
        if pos != size:
            return Violation(f"rank {rank}: bytes [{pos}, {size}) never written", rank=rank)
    return None

