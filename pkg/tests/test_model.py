import numpy as np
import pytest

from ckptagg.errors import PlanError
from ckptagg.model import (
    CheckpointSet,
    ClusterSpec,
    FlushPlan,
    Source,
    StripeLayout,
    WriteExtent,
    content_range,
    generate_content,
    plan_coverage_check,
)
from ckptagg.strategies import plan_posix_aggregate


def test_cluster_validation():
    with pytest.raises(ValueError):
        ClusterSpec(0, 1)
    with pytest.raises(ValueError):
        ClusterSpec(2, 1, node_load=(0.5,))
    c = ClusterSpec(2, 3)
    assert c.rank_count == 6
    assert [c.node_of(r) for r in range(6)] == [0, 0, 0, 1, 1, 1]
    assert list(c.ranks_of(1)) == [3, 4, 5]


def test_checkpoint_set_rank_count_mismatch():
    with pytest.raises(PlanError):
        CheckpointSet((1, 2, 3)).check_against(ClusterSpec(2, 2))
    with pytest.raises(ValueError):
        CheckpointSet((1, -2))


def test_stripe_layout_mapping():
    layout = StripeLayout(stripe_size=100, io_server_count=3)
    assert layout.stripe_of(0) == 0 and layout.stripe_of(299) == 2
    assert [layout.server_of(s) for s in range(5)] == [0, 1, 2, 0, 1]
    assert layout.server_of(0, first_server=2) == 2


def test_generate_content_examples():
    assert generate_content(7, 0, 0) == b""
    a = generate_content(7, 0, 16)
    assert len(a) == 16 and a == generate_content(7, 0, 16)
    assert a != generate_content(7, 1, 16)
    assert a != generate_content(8, 0, 16)


def test_content_range_matches_slices():
    rng = np.random.default_rng(3)
    full = generate_content(99, 5, 10_000)
    for _ in range(300):
        start = int(rng.integers(0, 10_000))
        length = int(rng.integers(0, 10_000 - start + 1))
        assert content_range(99, 5, start, length) == full[start:start + length]


def test_extent_source_lengths_must_sum():
    with pytest.raises(ValueError):
        WriteExtent(0, 0, 0, 10, (Source(0, 0, 9),))


def _ckpts():
    return CheckpointSet((100, 50, 30), content_seed=1), ClusterSpec(3, 1)


def test_coverage_ok():
    ckpts, cluster = _ckpts()
    assert plan_coverage_check(plan_posix_aggregate(ckpts, cluster), ckpts) is None


def test_coverage_missing_last_byte_names_rank():
    ckpts, _ = _ckpts()
    plan = FlushPlan("x", (
        WriteExtent(0, 0, 0, 100, (Source(0, 0, 100),)),
        WriteExtent(1, 0, 100, 50, (Source(1, 0, 50),)),
        WriteExtent(2, 0, 150, 29, (Source(2, 0, 29),)),
    ), (180,), ((0, 0), (0, 100), (0, 150)))
    v = plan_coverage_check(plan, ckpts)
    assert v is not None and v.rank == 2


def test_coverage_overlap_names_both_extents():
    ckpts = CheckpointSet((8192, 8192))
    a = WriteExtent(0, 0, 0, 8192, (Source(0, 0, 8192),))
    b = WriteExtent(1, 0, 4096, 8192, (Source(1, 0, 8192),))
    plan = FlushPlan("x", (a, b), (12288,), ((0, 0), (0, 4096)))
    v = plan_coverage_check(plan, ckpts)
    assert v is not None and v.file_index == 0
    assert set(v.extents) == {0, 1}
    assert "4096" in str(v)


def test_coverage_duplicate_source_bytes():
    ckpts = CheckpointSet((10,))
    plan = FlushPlan("x", (
        WriteExtent(0, 0, 0, 10, (Source(0, 0, 10),)),
        WriteExtent(0, 0, 10, 5, (Source(0, 5, 5),)),
    ), (15,), ((0, 0),))
    v = plan_coverage_check(plan, ckpts)
    assert v is not None and v.rank == 0


def test_coverage_extent_past_file_end():
    ckpts = CheckpointSet((10,))
    plan = FlushPlan("x", (WriteExtent(0, 0, 5, 10, (Source(0, 0, 10),)),), (10,), ((0, 5),))
    assert plan_coverage_check(plan, ckpts) is not None
