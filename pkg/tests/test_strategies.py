import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckptagg.errors import PlanError
from ckptagg.model import CheckpointSet, ClusterSpec, StripeLayout, plan_coverage_check
from ckptagg.planner import stripe_conflicts
from ckptagg.strategies import (
    STRATEGIES,
    StrategyConfig,
    leader_plan_and_schedule,
    make_plan,
    plan_collective_aggregate,
    plan_file_per_process,
    plan_leader_aggregate,
    plan_posix_aggregate,
)

MIB = 1 << 20
GIB = 1 << 30


def test_fpp_examples():
    cluster = ClusterSpec(2, 2)
    ckpts = CheckpointSet((10, 0, 30, 40))
    plan = plan_file_per_process(ckpts, cluster)
    assert plan.file_sizes == (10, 0, 30, 40)
    assert len(plan.extents) == 3 and not plan.transfers
    assert stripe_conflicts(plan.extents, StripeLayout(stripe_size=4))[0] == 0
    assert plan_coverage_check(plan, ckpts) is None


def test_posix_examples():
    layout = StripeLayout(stripe_size=4 * MIB)
    one = plan_posix_aggregate(CheckpointSet((MIB, 3 * MIB, 5)), ClusterSpec(1, 3), layout)
    assert stripe_conflicts(one.extents, layout)[0] == 0
    two = plan_posix_aggregate(CheckpointSet((3 * MIB, 3 * MIB)), ClusterSpec(2, 1), layout)
    assert stripe_conflicts(two.extents, layout)[0] >= 1
    aligned = plan_posix_aggregate(CheckpointSet((2 * MIB,) * 4), ClusterSpec(2, 2), layout)
    assert stripe_conflicts(aligned.extents, layout)[0] == 0


def test_posix_offsets_are_prefix_sums():
    plan = plan_posix_aggregate(CheckpointSet((4, 4, 4)), ClusterSpec(3, 1))
    assert [e.offset for e in plan.extents] == [0, 4, 8] and plan.file_sizes == (12,)


def test_collective_phase_count():
    layout = StripeLayout(stripe_size=MIB)
    one = plan_collective_aggregate(CheckpointSet((MIB,) * 4), ClusterSpec(4, 1), layout, 2)
    assert len(one.phases) == 1
    four = plan_collective_aggregate(CheckpointSet((MIB,) * 8), ClusterSpec(2, 4), layout, 2)
    assert len(four.phases) == 4
    assert all(ph for ph in four.phases)
    with pytest.raises(PlanError):
        plan_collective_aggregate(CheckpointSet((1,) * 4), ClusterSpec(2, 2), layout, 3)


def test_leader_single_node():
    layout = StripeLayout(stripe_size=8)
    ckpts = CheckpointSet((5, 7, 9))
    plan = plan_leader_aggregate(ckpts, ClusterSpec(1, 3), layout, 1)
    assert len(plan.extents) == 1 and plan.extents[0].writer == 0
    assert [s.rank for s in plan.extents[0].sources] == [0, 1, 2]


def test_leader_aligned_gib_case():
    cluster = ClusterSpec(4, 8)
    ckpts = CheckpointSet.uniform(cluster, GIB)
    layout = StripeLayout(stripe_size=GIB, io_server_count=4)
    sched, plan = leader_plan_and_schedule(ckpts, cluster, layout, 4)
    assert stripe_conflicts(plan.extents, layout)[0] == 0
    assert len(sched.moves) == cluster.rank_count  # no rank is split


def test_leader_misaligned_768_case():
    cluster = ClusterSpec(4, 8)
    ckpts = CheckpointSet.uniform(cluster, GIB)
    layout = StripeLayout(stripe_size=768 * MIB, io_server_count=4)
    sched, plan = leader_plan_and_schedule(ckpts, cluster, layout, 4)
    assert stripe_conflicts(plan.extents, layout)[0] == 0
    assert len(sched.moves) > cluster.rank_count
    assert plan_coverage_check(plan, ckpts) is None


def test_resolved_m():
    cluster, layout = ClusterSpec(8, 2), StripeLayout(io_server_count=4)
    assert StrategyConfig("file_per_process").resolved_m(cluster, layout) == 16
    assert StrategyConfig("posix_aggregate").resolved_m(cluster, layout) == 1
    assert StrategyConfig("leader_aggregate").resolved_m(cluster, layout) == 4
    assert StrategyConfig("leader_aggregate", m=2).resolved_m(cluster, layout) == 2
    with pytest.raises(ValueError):
        StrategyConfig("nope")


@st.composite
def scenarios(draw):
    nodes, rpn = draw(st.integers(1, 5)), draw(st.integers(1, 4))
    sizes = tuple(draw(st.lists(st.integers(0, 5000), min_size=nodes * rpn, max_size=nodes * rpn)))
    layout = StripeLayout(stripe_size=draw(st.integers(1, 2048)),
                          io_server_count=draw(st.integers(1, 6)),
                          destination_file_count=draw(st.integers(1, 3)))
    m = draw(st.one_of(st.none(), st.integers(1, nodes)))
    return ClusterSpec(nodes, rpn), CheckpointSet(sizes), layout, m


@settings(max_examples=150)
@given(scenarios(), st.sampled_from(STRATEGIES))
def test_every_plan_covers_exactly_once(case, name):
    cluster, ckpts, layout, m = case
    plan = make_plan(StrategyConfig(name, m), ckpts, cluster, layout)
    assert plan_coverage_check(plan, ckpts) is None
    assert plan.total_bytes == ckpts.total_bytes
    if name in ("collective_aggregate", "leader_aggregate", "file_per_process"):
        assert stripe_conflicts(plan.extents, layout)[0] == 0


@settings(max_examples=60)
@given(scenarios())
def test_collective_routes_like_leader_with_static_leaders(case):
    cluster, ckpts, layout, m = case
    m = m or 1
    plan = plan_collective_aggregate(ckpts, cluster, layout, m)
    assert plan.leaders == tuple(range(m))
    assert {e.writer for e in plan.extents} <= set(range(m))
    assert sum(t.byte_count for t in plan.transfers) == plan.network_bytes
