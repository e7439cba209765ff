"""Acceptance criteria, one test each.  Every test prints a single
``PASS``/``FAIL`` line (visible even under output capture).

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

from ckptagg.cli import main as cli_main
from ckptagg.config import ExperimentConfig
from ckptagg.executor import RunDirectory, execute, verify_aggregate
from ckptagg.model import CheckpointSet, ClusterSpec, StripeLayout
from ckptagg.planner import elect_leaders, exclusive_prefix_sum, stripe_conflicts
from ckptagg.strategies import (
    STRATEGIES,
    StrategyConfig,
    leader_plan_and_schedule,
    make_plan,
    plan_collective_aggregate,
    plan_posix_aggregate,
)

KIB, MIB = 1 << 10, 1 << 20
MISALIGNED_SIZE = 4_000_000  # 4 MB against 1 MiB stripes


@pytest.fixture
def verdict(capsys):
    def emit(label: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, detail
    return emit


def random_case(rng, max_size=64 * KIB, zero_p=0.15):
    nodes, rpn = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    sizes = rng.integers(0, max_size + 1, size=nodes * rpn)
    sizes[rng.random(nodes * rpn) < zero_p] = 0
    stripe = int(rng.choice([4 * KIB, 64 * KIB, 1 * MIB, int(rng.integers(1, 100 * KIB))]))
    layout = StripeLayout(stripe_size=stripe, io_server_count=int(rng.integers(1, 9)),
                          destination_file_count=int(rng.integers(1, 4)))
    cluster = ClusterSpec(nodes, rpn)
    return cluster, CheckpointSet(tuple(int(s) for s in sizes), int(rng.integers(0, 2**63))), layout


def test_c01_randomized_execute_round_trip(tmp_path, verdict):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    failures = []
    for i in range(200):
        cluster, ckpts, layout = random_case(rng)
        name = STRATEGIES[i % len(STRATEGIES)]
        cfg = StrategyConfig(name, io_threads_per_backend=int(rng.integers(1, 5)))
        plan = make_plan(cfg, ckpts, cluster, layout)
        root = tmp_path / f"case{i}"
        _, _, mismatch = execute(plan, ckpts, cluster, layout, root, cfg.io_threads_per_backend)
        code = cli_main(["verify", str(root)])
        if mismatch is not None or code != 0:
            failures.append((i, name, str(mismatch), code))
    elapsed = time.perf_counter() - t0
    verdict("criterion 1 (200 randomized executions verify)",
            not failures and elapsed < 120,
            f"{200 - len(failures)}/200 verified in {elapsed:.1f}s; failures={failures[:3]}")


def test_c02_prefix_sum_matches_fold(verdict):
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(1000):
        sizes = rng.integers(0, 1 << 32, size=int(rng.integers(0, 10_001))).tolist()
        offsets, total = exclusive_prefix_sum(sizes)
        acc, fold = 0, []
        for s in sizes:
            fold.append(acc)
            acc += s
        bad += offsets != fold or total != acc
    verdict("criterion 2 (exclusive_prefix_sum == sequential fold)", bad == 0,
            f"{1000 - bad}/1000 lists agree")


def test_c03_leader_and_collective_conflict_free(verdict):
    rng = np.random.default_rng(3)
    bad, misaligned = [], 0
    for i in range(500):
        cluster, ckpts, layout = random_case(rng, max_size=int(rng.choice([64 * KIB, 4 * MIB])))
        misaligned += any(b % layout.stripe_size for b in ckpts.node_bytes(cluster))
        m = int(rng.integers(1, cluster.node_count + 1))
        w = tuple(float(x) for x in rng.random(3))
        leader = leader_plan_and_schedule(ckpts, cluster, layout, m, w)[1]
        coll = plan_collective_aggregate(ckpts, cluster, layout, m)
        for name, plan in (("leader", leader), ("collective", coll)):
            n = stripe_conflicts(plan.extents, layout)[0]
            if n:
                bad.append((i, name, n))
    verdict("criterion 3 (leader and collective plans have 0 stripe conflicts)", not bad,
            f"500 configs ({misaligned} misaligned), violations={bad[:3]}")


def test_c04_posix_misaligned_conflicts(verdict):
    rng = np.random.default_rng(4)
    bad, tried = [], 0
    while tried < 300:
        nodes, rpn = int(rng.integers(2, 9)), int(rng.integers(1, 9))
        cluster = ClusterSpec(nodes, rpn)
        stripe = int(rng.integers(2, 256 * KIB))
        ckpts = CheckpointSet(tuple(int(s) for s in rng.integers(0, 512 * KIB, size=nodes * rpn)))
        if any(b % stripe == 0 for b in ckpts.node_bytes(cluster)):
            continue
        tried += 1
        layout = StripeLayout(stripe_size=stripe)
        n = stripe_conflicts(plan_posix_aggregate(ckpts, cluster, layout).extents, layout)[0]
        if n < 1:
            bad.append((nodes, rpn, stripe))
    verdict("criterion 4 (posix with misaligned node totals has >= 1 conflict)", not bad,
            f"{tried - len(bad)}/{tried} configs conflict")


def _default_reports(ranks_per_node=8):
    cfg = ExperimentConfig.from_dict({"cluster": {"ranks_per_node": ranks_per_node},
                                      "checkpoint_size": MISALIGNED_SIZE})
    return {sc.strategy.strategy: sc.run() for sc in cfg.scenarios()}


def test_c05_default_scenario_ordering(verdict):
    r = _default_reports()
    tp = {k: v.flush_throughput for k, v in r.items()}
    fpp, posix = tp["file_per_process"], tp["posix_aggregate"]
    coll, leader = tp["collective_aggregate"], tp["leader_aggregate"]
    ok = fpp > posix * 1.01 and posix >= coll and leader > posix * 1.01
    verdict("criterion 5 (fpp > posix, posix >= collective, leader > posix)", ok,
            f"flush GB/s fpp={fpp / 1e9:.4f} posix={posix / 1e9:.4f} "
            f"collective={coll / 1e9:.4f} leader={leader / 1e9:.4f}")


def test_c06_equal_local_phase(verdict):
    r = _default_reports()
    vals = {k: r[k].local_phase_seconds
            for k in ("file_per_process", "posix_aggregate", "leader_aggregate")}
    verdict("criterion 6 (identical simulated local phases)", len(set(vals.values())) == 1,
            f"local seconds {vals}")


def test_c07_barrier_wait(verdict):
    r = _default_reports(ranks_per_node=4)
    coll = r["collective_aggregate"].phase_barrier_wait_seconds
    lead = r["leader_aggregate"].phase_barrier_wait_seconds
    verdict("criterion 7 (collective waits at barriers, leader does not)",
            coll > 0 and lead == 0, f"collective={coll:.6g}s leader={lead!r}")


def test_c08_sweep_reproducible(tmp_path, verdict):
    cfg = tmp_path / "sweep.json"
    cfg.write_text('{"checkpoint_size": 4000000, "grid": {"node_count": [2, 4], '
                   '"ranks_per_node": [1, 2, 4, 8]}}')
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert cli_main(["sweep", "--config", str(cfg), "--seed", "42", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    verdict("criterion 8 (byte-identical sweep reports)", outs[0] == outs[1],
            f"{len(outs[0])} bytes each")


def test_c09_election(verdict):
    rng = np.random.default_rng(9)
    problems = []
    for _ in range(300):
        n = int(rng.integers(1, 17))
        node_bytes = [int(b) for b in rng.integers(0, 1 << 30, size=n)]
        loads = tuple(float(x) for x in rng.random(n))
        cluster = ClusterSpec(n, 1, node_load=loads)
        by_size = elect_leaders(cluster, node_bytes, 1, (1, 0, 0)).leaders
        if by_size != (int(np.argmax(node_bytes)),):
            problems.append(("size", node_bytes, by_size))
        by_load = elect_leaders(cluster, node_bytes, 1, (0, 1, 0)).leaders
        if by_load != (int(np.argmin(loads)),):
            problems.append(("load", loads, by_load))
        m = int(rng.integers(1, n + 1))
        w = tuple(float(x) for x in rng.random(3))
        a = elect_leaders(cluster, node_bytes, m, w).leaders
        b = elect_leaders(cluster, [x * 1000 for x in node_bytes], m, w).leaders
        if a != b:
            problems.append(("scale", node_bytes, a, b))
    verdict("criterion 9 (election by size, by load, scale invariant)", not problems,
            f"300 clusters, problems={problems[:2]}")


def test_c10_split_rank_two_moves(tmp_path, verdict):
    cluster = ClusterSpec(2, 1)
    ckpts = CheckpointSet((6 * MIB, 6 * MIB), 10)
    layout = StripeLayout(stripe_size=4 * MIB, io_server_count=2)
    sched, plan = leader_plan_and_schedule(ckpts, cluster, layout, 2)
    moves = [mv for mv in sched.moves if mv.rank == 1]
    _, _, mismatch = execute(plan, ckpts, cluster, layout, tmp_path / "fixed")
    details = [f"fixed case: {len(moves)} moves, leaders {sorted({m.leader_node for m in moves})}"]
    ok = len(moves) == 2 and len({m.leader_node for m in moves}) == 2 and mismatch is None

    # every rank spanning exactly two leader domains in one file, on random inputs
    rng = np.random.default_rng(10)
    checked = 0
    for i in range(60):
        nodes, rpn = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        cl = ClusterSpec(nodes, rpn)
        ck = CheckpointSet(tuple(int(s) for s in rng.integers(1, 200 * KIB, size=nodes * rpn)), i)
        lay = StripeLayout(stripe_size=int(rng.integers(1, 128 * KIB)))
        sch, pl = leader_plan_and_schedule(ck, cl, lay, nodes)
        leaders_per_rank = {}
        for mv in sch.moves:
            leaders_per_rank.setdefault(mv.rank, []).append(mv.leader_node)
        for rank, ls in leaders_per_rank.items():
            if len(set(ls)) == 2:
                checked += 1
                ok &= len(ls) == 2
        if i < 10:
            ok &= verify_aggregate(*_run(pl, ck, cl, lay, tmp_path / f"r{i}")) is None
    details.append(f"{checked} split ranks on random inputs")
    verdict("criterion 10 (rank across two leaders -> exactly 2 moves, verifies)", ok,
            "; ".join(details))


def _run(plan, ckpts, cluster, layout, root):
    execute(plan, ckpts, cluster, layout, root)
    return RunDirectory(root), ckpts, plan


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
