import dataclasses

import networkx as nx
import numpy as np
import pytest

from nakalab.simulator.errors import CannotConnect
from nakalab.simulator.experiments import simulate, run_simulation
from nakalab.simulator.metrics import write_outputs, BLOCK_COLUMNS
from nakalab.simulator.simulator import SimEventKind, node_key
from nakalab.simulator.topology import build_topology
from nakalab.strategies.withholding import WithholdingStrategy
from nakalab.utils.args import SimConfig, AttackConfig
from nakalab.utils.exp import load_scenario


def small_config(**changes) -> SimConfig:
    config = SimConfig(node_count=5, peer_degree=2, latency_model='exponential', latency_mean_s=2.0,
                       miner_nodes=[0, 1, 2, 3, 4], hashpowers=[1.0] * 5, duration_blocks=60, rng_seed=3)
    return dataclasses.replace(config, **changes)


def test_topology_connected_and_seeded():
    config = small_config(node_count=20, miner_nodes=[0], hashpowers=[1.0])
    graph = build_topology(config)
    assert nx.is_connected(graph)
    assert all(graph.degree(n) >= config.peer_degree for n in graph.nodes)
    assert sorted(graph.edges) == sorted(build_topology(config).edges)


def test_topology_impossible_degree():
    with pytest.raises(CannotConnect):
        build_topology(SimConfig(node_count=3, peer_degree=3))


def test_run_is_deterministic():
    a = simulate(small_config())
    b = simulate(small_config())
    assert a.metrics() == b.metrics()
    assert [e.row() for e in a.events] == [e.row() for e in b.events]
    assert a.block_rows() == b.block_rows()


def test_seed_changes_run():
    a = simulate(small_config(rng_seed=1))
    b = simulate(small_config(rng_seed=2))
    assert a.reference.chain.tip != b.reference.chain.tip


def test_honest_nodes_converge():
    sim = simulate(small_config(latency_mean_s=60.0))
    assert sim.converged()
    assert sim.reference.chain.height >= sim.config.duration_blocks
    tips = {n.chain.tip for n in sim.nodes}
    assert len(tips) == 1


def test_zero_latency_has_no_stale_blocks():
    sim = simulate(small_config(latency_model='fixed', latency_mean_s=0.0, duration_blocks=200))
    metrics = sim.metrics()
    assert metrics.stale_rate == 0.0
    assert metrics.reorg_depths == {}
    assert metrics.active_height == sum(metrics.blocks_found.values())


def test_slow_links_make_stale_blocks():
    metrics = simulate(small_config(latency_mean_s=120.0, duration_blocks=200)).metrics()
    assert metrics.stale_rate > 0
    assert metrics.reorg_depths


def test_every_block_reaches_every_node():
    sim = simulate(small_config())
    for record in sim.found.values():
        assert record.propagation_s is not None
        assert all(record.block.hash in n.chain for n in sim.nodes)


def test_event_log_kinds():
    sim = simulate(small_config(duration_blocks=10))
    kinds = {e.kind for e in sim.events}
    assert kinds == {SimEventKind.BLOCK_FOUND, SimEventKind.BLOCK_ARRIVAL}
    times = [e.time for e in sim.events]
    assert times == sorted(times)


def test_background_transactions_are_mined():
    # coinbases mature after 100 blocks, so traffic only starts late in the run
    sim = simulate(small_config(duration_blocks=130, latency_mean_s=1.0, tx_rate_per_s=1 / 300))
    assert any(e.kind == SimEventKind.TX_ARRIVAL for e in sim.events)
    chain = sim.reference.chain
    mined = [tx for e in chain.active_chain() for tx in e.block.transactions[1:]]
    assert mined
    assert chain.replay_utxo() == chain.utxo


def test_node_keys_are_stable():
    assert node_key(3) == node_key(3)
    assert node_key(3) != node_key(4)


def test_outputs_written(tmp_path):
    metrics, events = run_simulation(small_config(duration_blocks=15))
    rows = simulate(small_config(duration_blocks=15)).block_rows()
    paths = write_outputs(metrics, events, rows, str(tmp_path))
    header = open(paths['blocks.csv']).readline().strip()
    assert header == ','.join(BLOCK_COLUMNS)
    assert '"stale_rate"' in open(paths['metrics.json']).read()
    assert len(open(paths['events.csv']).readlines()) == len(events) + 1


def test_withholding_attacker_runs():
    config = small_config(duration_blocks=300, latency_model='fixed', latency_mean_s=1.0,
                          attacker=AttackConfig(hashpower_fraction=0.3, confirmations=1, max_deficit=10))
    sim = simulate(config)
    strategy = sim.strategies[config.attacker_node]
    assert isinstance(strategy, WithholdingStrategy)
    metrics = sim.metrics()
    assert metrics.attack_rounds == strategy.rounds >= 1
    assert strategy.successes + strategy.failures == strategy.rounds
    assert 0.0 <= metrics.attack_success_frequency <= 1.0
    assert sim.converged()


@pytest.mark.slow
def test_honest_interval_near_target():
    config = dataclasses.replace(load_scenario('honest_10min'), progress=False)
    metrics = simulate(config).metrics()
    assert abs(metrics.mean_interval_s - 600.0) <= 0.05 * 600.0
    assert metrics.active_height >= 10_000


def two_miner_config(**changes) -> SimConfig:
    config = SimConfig(node_count=2, peer_degree=1, latency_model='fixed', miner_nodes=[0, 1],
                       hashpowers=[1.0, 1.0], duration_blocks=100)
    return dataclasses.replace(config, **changes)


@pytest.mark.slow
def test_stale_rate_grows_with_latency_over_interval():
    latencies, intervals = (0.0, 30.0, 300.0), (600.0, 6000.0, 60000.0)
    grid = np.zeros((len(latencies), len(intervals)))
    for i, latency in enumerate(latencies):
        for j, interval in enumerate(intervals):
            grid[i, j] = np.mean([
                simulate(two_miner_config(latency_mean_s=latency, block_interval_target_s=interval,
                                          rng_seed=seed, record_events=False)).metrics().stale_rate
                for seed in range(5)])
    tolerance = 0.005
    assert np.all(grid[0] == 0.0)
    assert np.all(np.diff(grid, axis=0) >= -tolerance)
    assert np.all(np.diff(grid, axis=1) <= tolerance)
    assert grid[2, 0] > grid[1, 0] > 0.0


def test_partitioned_equal_miners_lose_half():
    # no block crosses the link before mining stops, so one whole branch is orphaned
    metrics = simulate(two_miner_config(latency_mean_s=1e6, record_events=False)).metrics()
    assert 0.35 <= metrics.stale_rate <= 0.5
    assert metrics.active_height == 100
