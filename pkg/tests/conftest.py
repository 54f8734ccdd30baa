import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swarmlearn.data import PartitionPlan, partition, synth_dataset  # noqa: E402
from swarmlearn.trainer import ModelSpec, TrainConfig  # noqa: E402
from swarmlearn.node import NodeConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_shards():
    ds = synth_dataset(2000, 8, 1.0, 0.5, seed=7)
    return partition(ds, PartitionPlan((0.1, 0.3, 0.3, 0.3), seed=3))


@pytest.fixture
def node_cfg(small_shards):
    def make(node_id=0, **kw):
        base = dict(node_id=node_id, shard=small_shards[node_id], model=ModelSpec(8, 4),
                    train=TrainConfig(epochs=9, batch_size=32, lr_initial=1e-2, patience=5, seed=100 + node_id),
                    exchange_interval=3, max_epochs=9, init_seed=1)
        base.update(kw)
        return NodeConfig(**base)
    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
