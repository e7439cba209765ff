"""Run a FlushPlan against real files for byte-exact verification.

Layout under the run root::

    local/node<k>/rank<r>.ckpt     node-local checkpoints (local phase)
    staging/node<k>/...            gathered pieces received by leader k
    dest/agg.<i>.dat               destination files
    manifest.json                  everything needed to re-verify the run
"""

from __future__ import annotations

import json
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ExecutionError
from .model import (
    CheckpointSet,
    ClusterSpec,
    FlushPlan,
    Source,
    StripeLayout,
    Transfer,
    WriteExtent,
    content_range,
    generate_content,
)

CHUNK = 8 << 20
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class RunDirectory:
    root: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    def node_dir(self, node: int) -> Path:
        return self.root / "local" / f"node{node}"

    def local_file(self, node: int, rank: int) -> Path:
        return self.node_dir(node) / f"rank{rank}.ckpt"

    def staging_file(self, leader: int, rank: int, source_offset: int) -> Path:
        return self.root / "staging" / f"node{leader}" / f"rank{rank}.{source_offset}.part"

    def dest_file(self, index: int) -> Path:
        return self.root / "dest" / f"agg.{index}.dat"


# -- local phase -----------------------------------------------------------


def run_local_phase(ckpts: CheckpointSet, cluster: ClusterSpec, rundir: RunDirectory) -> float:
    """Write every rank's checkpoint to its node directory; returns wall seconds."""
    ckpts.check_against(cluster)

    def write_node(node: int) -> None:
        for rank in cluster.ranks_of(node):
            path = rundir.local_file(node, rank)
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(generate_content(ckpts.content_seed, rank, ckpts.sizes[rank]))
            except OSError as exc:
                raise ExecutionError(f"node {node} rank {rank}: local write failed: {exc}") from exc

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=cluster.node_count) as pool:
        for fut in [pool.submit(write_node, n) for n in range(cluster.node_count)]:
            fut.result()
    return time.perf_counter() - t0


# -- flush phase -----------------------------------------------------------


def _read_range(path: Path, offset: int, length: int, rank: int) -> Iterable[bytes]:
    try:
        fd = os.open(path, os.O_RDONLY)
    except FileNotFoundError:
        raise ExecutionError(f"rank {rank}: local checkpoint {path} is missing") from None
    try:
        done = 0
        while done < length:
            want = min(CHUNK, length - done)
            buf = os.pread(fd, want, offset + done)
            if len(buf) != want:
                raise ExecutionError(f"rank {rank}: {path} is shorter than planned")
            yield buf
            done += want
    finally:
        os.close(fd)


def _gather(rundir: RunDirectory, cluster: ClusterSpec, ext: WriteExtent) -> None:
    """Copy remote source pieces of an extent into the writer's staging area."""
    for src in ext.sources:
        node = cluster.node_of(src.rank)
        if node == ext.writer or src.length == 0:
            continue
        dst = rundir.staging_file(ext.writer, src.rank, src.source_offset)
        dst.parent.mkdir(parents=True, exist_ok=True)
        with open(dst, "wb") as out:
            for buf in _read_range(rundir.local_file(node, src.rank), src.source_offset,
                                   src.length, src.rank):
                out.write(buf)


def _source_path(rundir: RunDirectory, cluster: ClusterSpec, writer: int, src: Source):
    node = cluster.node_of(src.rank)
    if node == writer:
        return rundir.local_file(node, src.rank), src.source_offset
    return rundir.staging_file(writer, src.rank, src.source_offset), 0


def _write_extent(rundir: RunDirectory, cluster: ClusterSpec, ext: WriteExtent,
                  fds: dict[int, int]) -> None:
    fd = fds[ext.file_index]
    pos = ext.offset
    for src in ext.sources:
        path, start = _source_path(rundir, cluster, ext.writer, src)
        for buf in _read_range(path, start, src.length, src.rank):
            n = os.pwrite(fd, buf, pos)
            if n != len(buf):
                raise ExecutionError(
                    f"short write to file {ext.file_index} at offset {pos}: {n} of {len(buf)}")
            pos += n


def run_flush_phase(plan: FlushPlan, cluster: ClusterSpec, rundir: RunDirectory,
                    io_threads: int = 4) -> float:
    """Gather and write every extent of the plan; returns wall seconds.

    Backends run concurrently, each with up to ``io_threads`` extent writers.
    Phases run one after another; within a phase all gathers finish before
    any write starts.
    """
    if io_threads < 1:
        raise ValueError("io_threads must be >= 1")
    t0 = time.perf_counter()
    shutil.rmtree(rundir.root / "staging", ignore_errors=True)
    (rundir.root / "dest").mkdir(parents=True, exist_ok=True)
    fds: dict[int, int] = {}
    try:
        for i, size in enumerate(plan.file_sizes):
            fd = os.open(rundir.dest_file(i), os.O_WRONLY | os.O_CREAT, 0o644)
            fds[i] = fd
            os.ftruncate(fd, size)

        phases = plan.phases or (tuple(range(len(plan.extents))),)
        for members in phases:
            exts = [plan.extents[i] for i in members if plan.extents[i].length > 0]
            with ThreadPoolExecutor(max_workers=max(1, cluster.node_count)) as pool:
                for fut in [pool.submit(_gather, rundir, cluster, e) for e in exts]:
                    fut.result()

            by_writer: dict[int, list[WriteExtent]] = {}
            for e in exts:
                by_writer.setdefault(e.writer, []).append(e)

            def run_backend(batch: list[WriteExtent]) -> None:
                with ThreadPoolExecutor(max_workers=io_threads) as workers:
                    futs = [workers.submit(_write_extent, rundir, cluster, e, fds) for e in batch]
                    for fut in futs:
                        fut.result()

            with ThreadPoolExecutor(max_workers=max(1, len(by_writer))) as backends:
                for fut in [backends.submit(run_backend, b) for _, b in sorted(by_writer.items())]:
                    fut.result()
        for fd in fds.values():
            os.fsync(fd)
    finally:
        for fd in fds.values():
            os.close(fd)
    return time.perf_counter() - t0


# -- verification ----------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    file_index: int
    offset: int
    reason: str

    def __str__(self) -> str:
        return f"file {self.file_index} offset {self.offset}: {self.reason}"


def _first_diff(a: bytes, b: bytes) -> int:
    """Index of the first differing byte of two equal-length buffers, or -1."""
    if a == b:
        return -1
    x = np.frombuffer(a, dtype=np.uint8)
    y = np.frombuffer(b, dtype=np.uint8)
    return int(np.argmax(x != y))


def verify_aggregate(rundir: RunDirectory, ckpts: CheckpointSet,
                     plan: FlushPlan) -> Optional[Mismatch]:
    """``None`` if every destination byte matches the regenerated source bytes."""
    by_file: dict[int, list[WriteExtent]] = {}
    for e in plan.extents:
        if e.length:
            by_file.setdefault(e.file_index, []).append(e)
    for i, size in enumerate(plan.file_sizes):
        path = rundir.dest_file(i)
        if not path.exists():
            return Mismatch(i, 0, f"destination {path.name} is missing")
        actual = path.stat().st_size
        with open(path, "rb") as fh:
            for e in sorted(by_file.get(i, ()), key=lambda e: e.offset):
                pos = e.offset
                for src in e.sources:
                    done = 0
                    while done < src.length:
                        n = min(CHUNK, src.length - done)
                        want = content_range(ckpts.content_seed, src.rank,
                                             src.source_offset + done, n)
                        fh.seek(pos)
                        got = fh.read(n)
                        k = _first_diff(got, want[: len(got)])
                        if k >= 0:
                            return Mismatch(i, pos + k, "content differs")
                        if len(got) < n:
                            return Mismatch(i, actual, f"file truncated at {actual} (expected {size})")
                        pos += n
                        done += n
        if actual != size:
            return Mismatch(i, min(actual, size), f"file is {actual} bytes, expected {size}")
    return None


# -- manifest --------------------------------------------------------------


def plan_to_dict(plan: FlushPlan) -> dict:
    return {
        "strategy": plan.strategy_name,
        "offsets": [list(o) for o in plan.rank_offsets],
        "file_sizes": list(plan.file_sizes),
        "leaders": list(plan.leaders),
        "extents": [
            {"writer": e.writer, "file": e.file_index, "offset": e.offset, "length": e.length,
             "sources": [list(s) for s in e.sources]}
            for e in plan.extents
        ],
        "phases": [list(p) for p in plan.phases],
        "transfers": [list(t) for t in plan.transfers],
    }


def plan_from_dict(doc: dict) -> FlushPlan:
    return FlushPlan(
        strategy_name=doc["strategy"],
        extents=tuple(
            WriteExtent(e["writer"], e["file"], e["offset"], e["length"],
                        tuple(Source(*s) for s in e["sources"]))
            for e in doc["extents"]
        ),
        file_sizes=tuple(doc["file_sizes"]),
        rank_offsets=tuple((int(f), int(o)) for f, o in doc["offsets"]),
        transfers=tuple(Transfer(*t) for t in doc.get("transfers", ())),
        phases=tuple(tuple(p) for p in doc.get("phases", ())),
        leaders=tuple(doc.get("leaders", ())),
    )


def write_manifest(rundir: RunDirectory, plan: FlushPlan, ckpts: CheckpointSet,
                   cluster: ClusterSpec, layout: StripeLayout) -> Path:
    doc = {
        "version": MANIFEST_VERSION,
        "seed": ckpts.content_seed,
        "sizes": list(ckpts.sizes),
        "rank_order": "node-major",
        "cluster": {"node_count": cluster.node_count, "ranks_per_node": cluster.ranks_per_node},
        "layout": {"stripe_size": layout.stripe_size, "io_server_count": layout.io_server_count,
                   "destination_file_count": layout.destination_file_count},
        **plan_to_dict(plan),
    }
    rundir.root.mkdir(parents=True, exist_ok=True)
    rundir.manifest.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return rundir.manifest


def read_manifest(rundir: RunDirectory) -> tuple[FlushPlan, CheckpointSet, ClusterSpec]:
    """Parse a manifest; raises ValueError/KeyError on malformed documents."""
    doc = json.loads(rundir.manifest.read_text(encoding="utf-8"))
    if doc.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {doc.get('version')!r}")
    cluster = ClusterSpec(doc["cluster"]["node_count"], doc["cluster"]["ranks_per_node"])
    ckpts = CheckpointSet(tuple(doc["sizes"]), doc["seed"])
    return plan_from_dict(doc), ckpts, cluster


def execute(plan: FlushPlan, ckpts: CheckpointSet, cluster: ClusterSpec, layout: StripeLayout,
            root: Path, io_threads: int = 4) -> tuple[float, float, Optional[Mismatch]]:
    """Local phase, manifest, flush phase and verification in one go."""
    rundir = RunDirectory(root)
    local = run_local_phase(ckpts, cluster, rundir)
    write_manifest(rundir, plan, ckpts, cluster, layout)
    flush = run_flush_phase(plan, cluster, rundir, io_threads)
    return local, flush, verify_aggregate(rundir, ckpts, plan)
