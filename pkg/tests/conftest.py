import pytest

from ckptagg.model import CheckpointSet, ClusterSpec, StripeLayout

MIB = 1 << 20


@pytest.fixture
def small():
    cluster = ClusterSpec(node_count=3, ranks_per_node=2)
    ckpts = CheckpointSet((5000, 0, 70000, 1234, 65536, 99), content_seed=11)
    return cluster, ckpts, StripeLayout(stripe_size=4096, io_server_count=3)
