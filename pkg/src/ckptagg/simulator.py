"""Deterministic fluid-flow simulation of a flush on a striped parallel file system.

Cost model
----------
* Local phase: every node writes its ranks to node-local storage;
  duration is ``max(node_bytes / local_write_bandwidth)``.
* Each extent is cut into per-stripe requests.  A server is a channel of
  ``per_server_bandwidth`` shared equally among its running requests, and a
  request runs at its share times ``min(1, request_bytes / stripe_size)``.
* A stripe written by two or more backends is lock-serialized: one request
  holds it at a time, FIFO, and each such request runs ``stripe_penalty``
  times slower (lock ping-pong).
* Gather flows cross the sender's and the receiver's node link.  Each link
  offers ``network_bandwidth * (1 - app_network_demand)`` to the flush, split
  equally among the flows on it.  A write request starts once the flows
  carrying its bytes have arrived.
* Backends keep at most ``io_threads`` requests (and outgoing flows) in flight.
* Phased plans: a phase's writes start only after all of its gathers finish,
  and phase k+1 starts only after phase k finishes everywhere.

Times are IEEE doubles computed in a fixed operation order by a single
thread, so reports are bit-identical across runs and kernel backends.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from . import _kernels
from .errors import PlanError
from .model import CheckpointSet, ClusterSpec, FlushPlan, StripeLayout, plan_coverage_check
from .strategies import StrategyConfig, make_plan


@dataclass(frozen=True)
class PfsModel:
    per_server_bandwidth: float = 5.0e8
    stripe_penalty: float = 1.5

    def __post_init__(self) -> None:
        if self.per_server_bandwidth <= 0:
            raise ValueError("per_server_bandwidth must be > 0")
        if self.stripe_penalty < 1:
            raise ValueError("stripe_penalty must be >= 1")

    @staticmethod
    def request_efficiency(req_bytes: int, stripe_size: int) -> float:
        return min(1.0, req_bytes / stripe_size)


@dataclass(frozen=True)
class InterferenceModel:
    app_network_demand: float = 0.5
    spare_cores: int = 4

    def __post_init__(self) -> None:
        if not 0 <= self.app_network_demand < 1:
            raise ValueError("app_network_demand must lie in [0, 1)")
        if self.spare_cores < 0:
            raise ValueError("spare_cores must be >= 0")


class TimelineEvent(NamedTuple):
    kind: str  # "write" or "send"
    start: float  # admitted (thread taken)
    begin: float  # data moving (after any stripe-lock wait)
    end: float
    nbytes: int
    target: int  # server for writes, receiving node for sends
    phase: int


@dataclass(frozen=True)
class SimReport:
    strategy: str
    total_bytes: int
    local_phase_seconds: float
    flush_seconds: float
    local_throughput: float
    flush_throughput: float
    conflicted_stripe_count: int
    total_network_bytes: int
    phase_barrier_wait_seconds: float
    app_slowdown_estimate: float
    server_bytes: tuple[int, ...] = ()
    timeline: dict[int, tuple[TimelineEvent, ...]] = field(default_factory=dict)


class _Req(NamedTuple):
    writer: int
    file_index: int
    stripe: int
    start: int  # file offset
    nbytes: int
    phase: int


def _requests(plan: FlushPlan, layout: StripeLayout) -> list[_Req]:
    s = layout.stripe_size
    phase_of = plan.phase_of_extents()
    order = sorted(
        range(len(plan.extents)),
        key=lambda i: (plan.extents[i].writer, phase_of[i], plan.extents[i].file_index,
                       plan.extents[i].offset, i),
    )
    out = []
    for i in order:
        e = plan.extents[i]
        pos = e.offset
        while pos < e.end:
            stripe = pos // s
            stop = min(e.end, (stripe + 1) * s)
            out.append(_Req(e.writer, e.file_index, stripe, pos, stop - pos, phase_of[i]))
            pos = stop
    return out


def _first_servers(reqs: list[_Req], layout: StripeLayout) -> dict[int, int]:
    """Round-robin starting server per file, in the order backends create files.

    Backends create their files concurrently, so creation order interleaves
    them: every backend's first file, then every backend's second file, ...
    """
    per_writer: dict[int, list[int]] = {}
    for r in reqs:
        files = per_writer.setdefault(r.writer, [])
        if r.file_index not in files:
            files.append(r.file_index)
    first: dict[int, int] = {}
    depth = max((len(v) for v in per_writer.values()), default=0)
    for j in range(depth):
        for w in sorted(per_writer):
            if j < len(per_writer[w]) and per_writer[w][j] not in first:
                first[per_writer[w][j]] = len(first) % layout.io_server_count
    return first


def _busy_seconds(intervals: list[tuple[float, float]]) -> float:
    busy, cur_lo, cur_hi = 0.0, None, None
    for lo, hi in sorted(intervals):
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                busy += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        busy += cur_hi - cur_lo
    return busy


def simulate(
    plan: FlushPlan,
    ckpts: CheckpointSet,
    cluster: ClusterSpec,
    layout: StripeLayout,
    pfs: PfsModel = PfsModel(),
    interference: InterferenceModel = InterferenceModel(),
    io_threads: int = 4,
) -> SimReport:
    violation = plan_coverage_check(plan, ckpts)
    if violation is not None:
        raise PlanError(f"invalid plan: {violation}")
    if io_threads < 1:
        raise ValueError("io_threads must be >= 1")
    n_nodes = cluster.node_count
    total = ckpts.total_bytes
    node_bytes = ckpts.node_bytes(cluster)
    local_seconds = max(b / cluster.local_write_bandwidth for b in node_bytes)

    reqs = _requests(plan, layout)
    first_server = _first_servers(reqs, layout)
    writers_on: dict[tuple[int, int], set[int]] = {}
    for r in reqs:
        writers_on.setdefault((r.file_index, r.stripe), set()).add(r.writer)
    lock_ids: dict[tuple[int, int], int] = {}
    for key in sorted(k for k, w in writers_on.items() if len(w) > 1):
        lock_ids[key] = len(lock_ids)

    # gather flows: one per (request, remote source segment)
    ext_by_pos = {}
    for e in plan.extents:
        segs, cursor = [], e.offset
        for src in e.sources:
            segs.append((cursor, cursor + src.length, cluster.node_of(src.rank)))
            cursor += src.length
        ext_by_pos[(e.file_index, e.offset)] = segs
    extent_starts: dict[int, list[int]] = {}
    for e in plan.extents:
        extent_starts.setdefault(e.file_index, []).append(e.offset)
    for v in extent_starts.values():
        v.sort()

    flows = []  # (src, dst, nbytes, phase, req_index, file, offset)
    for qi, r in enumerate(reqs):
        starts = extent_starts[r.file_index]
        e_off = starts[bisect.bisect_right(starts, r.start) - 1]
        for lo, hi, node in ext_by_pos[(r.file_index, e_off)]:
            a, b = max(lo, r.start), min(hi, r.start + r.nbytes)
            if a < b and node != r.writer:
                flows.append((node, r.writer, b - a, r.phase, qi, r.file_index, a))

    n_phases = max(1, len(plan.phases))
    flow_order = sorted(range(len(flows)), key=lambda f: (flows[f][0], flows[f][3], flows[f][5],
                                                           flows[f][6], f))
    fq_ptr = [0] * (n_nodes + 1)
    for f in flows:
        fq_ptr[f[0] + 1] += 1
    for n in range(n_nodes):
        fq_ptr[n + 1] += fq_ptr[n]
    wq_ptr = [0] * (n_nodes + 1)
    for r in reqs:
        wq_ptr[r.writer + 1] += 1
    for n in range(n_nodes):
        wq_ptr[n + 1] += wq_ptr[n]
    ndeps = [0] * len(reqs)
    for f in flows:
        ndeps[f[4]] += 1

    out = _kernels.fluid_run(
        [r.writer for r in reqs],
        [layout.server_of(r.stripe, first_server[r.file_index]) for r in reqs],
        [lock_ids.get((r.file_index, r.stripe), -1) for r in reqs],
        [r.nbytes for r in reqs],
        [PfsModel.request_efficiency(r.nbytes, layout.stripe_size) for r in reqs],
        [r.phase for r in reqs],
        ndeps,
        wq_ptr,
        list(range(len(reqs))),  # requests are already writer-major in queue order
        [f[0] for f in flows],
        [f[1] for f in flows],
        [f[2] for f in flows],
        [f[3] for f in flows],
        fq_ptr,
        flow_order,
        list(range(len(flows) + 1)),
        [f[4] for f in flows],
        layout.io_server_count,
        len(lock_ids),
        n_phases,
        bool(plan.phases),
        float(pfs.per_server_bandwidth),
        float(pfs.stripe_penalty),
        float(cluster.network_bandwidth) * (1.0 - interference.app_network_demand),
        io_threads,
    )
    req_start, req_begin, req_end, flow_start, flow_end, gather_end, phase_end = out
    flush_seconds = phase_end[-1] if (reqs or flows) else 0.0

    barrier_wait = 0.0
    if plan.phases:
        barrier_wait = _barrier_wait(reqs, flows, req_end, flow_end, gather_end, phase_end)

    server_bytes = [0] * layout.io_server_count
    for r in reqs:
        server_bytes[layout.server_of(r.stripe, first_server[r.file_index])] += r.nbytes

    timeline: dict[int, list[TimelineEvent]] = {n: [] for n in range(n_nodes)}
    for i, r in enumerate(reqs):
        timeline[r.writer].append(TimelineEvent("write", req_start[i], req_begin[i], req_end[i],
                                                r.nbytes, layout.server_of(r.stripe, first_server[r.file_index]),
                                                r.phase))
    for f, fl in enumerate(flows):
        timeline[fl[0]].append(TimelineEvent("send", flow_start[f], flow_start[f], flow_end[f],
                                             fl[2], fl[1], fl[3]))
    for events in timeline.values():
        events.sort()

    slowdown = _slowdown(cluster, interference, io_threads, flows, timeline, flush_seconds)
    return SimReport(
        strategy=plan.strategy_name,
        total_bytes=total,
        local_phase_seconds=local_seconds,
        flush_seconds=flush_seconds,
        local_throughput=total / local_seconds if local_seconds > 0 else 0.0,
        flush_throughput=total / flush_seconds if flush_seconds > 0 else 0.0,
        conflicted_stripe_count=len(lock_ids),
        total_network_bytes=sum(f[2] for f in flows),
        phase_barrier_wait_seconds=barrier_wait,
        app_slowdown_estimate=slowdown,
        server_bytes=tuple(server_bytes),
        timeline={n: tuple(ev) for n, ev in timeline.items()},
    )


def _barrier_wait(reqs, flows, req_end, flow_end, gather_end, phase_end) -> float:
    """Backend-seconds spent idle at gather and phase barriers, summed."""
    total = 0.0
    for p in range(len(phase_end)):
        begin = phase_end[p - 1] if p else 0.0
        own_flow: dict[int, float] = {}
        own_write: dict[int, float] = {}
        for f, fl in enumerate(flows):
            if fl[3] == p:
                for n in (fl[0], fl[1]):
                    own_flow[n] = max(own_flow.get(n, begin), flow_end[f])
        for i, r in enumerate(reqs):
            if r.phase == p:
                own_write[r.writer] = max(own_write.get(r.writer, gather_end[p]), req_end[i])
        for n in sorted(set(own_flow) | set(own_write)):
            if own_flow:
                total += gather_end[p] - own_flow.get(n, begin)
            total += phase_end[p] - own_write.get(n, gather_end[p])
    return total


def _slowdown(cluster, interference, io_threads, flows, timeline, flush_seconds) -> float:
    """Mean per-node application slowdown fraction over the flush window.

    Network term: the app's demand share times the fraction of the node link
    the flush occupied.  CPU term: I/O threads beyond the spare cores steal
    that many of the node's application cores while the backend is busy.
    """
    if flush_seconds <= 0:
        return 0.0
    link_bytes = [0] * cluster.node_count
    for src, dst, nbytes, *_ in flows:
        link_bytes[src] += nbytes
        link_bytes[dst] += nbytes
    excess = max(0, io_threads - interference.spare_cores)
    per_node = []
    for n in range(cluster.node_count):
        util = min(1.0, link_bytes[n] / (cluster.network_bandwidth * flush_seconds))
        net = interference.app_network_demand * util
        busy = _busy_seconds([(ev.begin, ev.end) for ev in timeline[n]]) / flush_seconds
        cpu = busy * min(1.0, excess / cluster.ranks_per_node)
        per_node.append(min(1.0, net + cpu))
    return sum(per_node) / len(per_node)


# -- scenarios -------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    cluster: ClusterSpec
    ckpts: CheckpointSet
    layout: StripeLayout
    strategy: StrategyConfig
    pfs: PfsModel = PfsModel()
    interference: InterferenceModel = InterferenceModel()

    def plan(self) -> FlushPlan:
        return make_plan(self.strategy, self.ckpts, self.cluster, self.layout)

    def run(self, plan: Optional[FlushPlan] = None) -> SimReport:
        return simulate(plan or self.plan(), self.ckpts, self.cluster, self.layout, self.pfs,
                        self.interference, self.strategy.io_threads_per_backend)


def sweep(grid: Sequence[Scenario]) -> list[tuple[Scenario, SimReport]]:
    """Simulate every scenario, results in grid order."""
    if not grid:
        raise ValueError("scenario grid is empty")
    return [(sc, sc.run()) for sc in grid]
