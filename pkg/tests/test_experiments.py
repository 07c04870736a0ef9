import dataclasses

import pytest

from nakalab.attacker.double_spend import DoubleSpendAttacker
from nakalab.attacker.sybil import SybilAttacker, SybilArguments
from nakalab.simulator.errors import InvalidFraction
from nakalab.simulator.experiments import miner_share_experiment, sybil_experiment, double_spend_experiment, \
    gamblers_ruin_oracle, agree_within, standard_error, attacker_hashpower, build_strategies, \
    network_double_spend_experiment
from nakalab.simulator.simulator import NetworkSimulator
from nakalab.utils.args import SimConfig, AttackConfig
from nakalab.utils.exp import load_scenario

TRIALS = 10_000


def test_hashpower_proportional_lottery():
    config = SimConfig(node_count=4, peer_degree=2, latency_model='fixed', latency_mean_s=1.0,
                       miner_nodes=[0, 1], hashpowers=[3.0, 1.0], rng_seed=5)
    report = miner_share_experiment(config, trials=TRIALS)
    assert sum(report.counts) >= TRIALS
    assert report.shares[0] == pytest.approx(0.75, abs=0.02)
    assert report.shares[1] == pytest.approx(0.25, abs=0.02)
    assert report.p_value > 0.001


def test_single_miner_share():
    config = SimConfig(node_count=3, peer_degree=1, miner_nodes=[0], hashpowers=[1.0])
    report = miner_share_experiment(config, trials=50)
    assert report.shares == [1.0] and report.p_value == 1.0


def test_sybil_identities_change_nothing():
    config = SimConfig(node_count=5, peer_degree=2, latency_mean_s=2.0, miner_nodes=[0, 1, 2],
                       hashpowers=[3.0, 2.0, 1.0], duration_blocks=300, rng_seed=11)
    report = sybil_experiment(config, 100)
    assert report.identical
    assert report.sybil_blocks == 0
    assert sum(report.baseline_counts.values()) > 0


def test_sybil_attacker_prepare_and_report():
    attacker = SybilAttacker()
    aargs = SybilArguments(enable=True, identities=4)
    config = attacker.prepare(SimConfig(node_count=4, peer_degree=2, duration_blocks=5), aargs)
    assert config.total_nodes == 8
    sim = NetworkSimulator(config, build_strategies(config))
    attacker.load_attacker(None, aargs, sim)
    sim.run()
    assert attacker.attack(None, aargs, sim) == {'sybil_identities': 4, 'sybil_blocks': 0}
    with pytest.raises(ValueError):
        attacker.prepare(config, SybilArguments(enable=True, identities=-1))


def test_double_spend_attacker_reports_rounds():
    attacker = DoubleSpendAttacker()
    aargs = AttackConfig(hashpower_fraction=0.25, confirmations=1, max_deficit=10)
    config = attacker.prepare(SimConfig(node_count=4, peer_degree=2, miner_nodes=[0, 1], hashpowers=[1.0, 1.0],
                                        duration_blocks=100, rng_seed=2), aargs)
    assert attacker_hashpower(config) == pytest.approx(2.0 / 3.0)
    sim = NetworkSimulator(config, build_strategies(config))
    attacker.load_attacker(None, aargs, sim)
    sim.run()
    report = attacker.attack(None, aargs, sim)
    assert report['rounds'] == report['successes'] + report['failures']
    assert report['hashpower_fraction'] == 0.25


def test_double_spend_attacker_needs_node():
    config = SimConfig(node_count=4, peer_degree=2, duration_blocks=5)
    sim = NetworkSimulator(config, build_strategies(config))
    with pytest.raises(ValueError):
        DoubleSpendAttacker().load_attacker(None, AttackConfig(), sim)


def test_no_hashpower_never_wins():
    assert double_spend_experiment(0.0, 1, TRIALS) == 0.0
    assert gamblers_ruin_oracle(0.0, 1, 1000) == 0.0


def test_majority_attacker_wins():
    assert double_spend_experiment(0.6, 6, TRIALS, max_deficit=200) > 0.99


@pytest.mark.parametrize('q', [-0.1, 1.0, 1.5])
def test_invalid_fraction(q):
    with pytest.raises(InvalidFraction):
        double_spend_experiment(q, 6, 100)
    with pytest.raises(InvalidFraction):
        gamblers_ruin_oracle(q, 6, 100)


def test_success_falls_with_confirmations_and_rises_with_hashpower():
    assert double_spend_experiment(0.1, 1, TRIALS) > double_spend_experiment(0.1, 6, TRIALS)
    assert double_spend_experiment(0.4, 3, TRIALS) > double_spend_experiment(0.1, 3, TRIALS)


def test_same_seed_same_frequency():
    assert double_spend_experiment(0.25, 3, 2000, seed=9) == double_spend_experiment(0.25, 3, 2000, seed=9)


@pytest.mark.slow
@pytest.mark.parametrize('q', [0.1, 0.25, 0.4])
@pytest.mark.parametrize('z', [1, 3, 6])
def test_race_agrees_with_random_walk_oracle(q, z):
    p = double_spend_experiment(q, z, TRIALS, seed=0)
    o = gamblers_ruin_oracle(q, z, TRIALS, seed=0)
    assert agree_within(p, o, TRIALS, sigmas=3.0)


def test_agree_within():
    assert agree_within(0.5, 0.5, 100)
    assert agree_within(0.0, 0.0, 100)
    assert not agree_within(0.1, 0.5, 10_000)
    assert standard_error(0.5, 100) == pytest.approx(0.05)


def test_network_race_matches_oracle():
    config = SimConfig(node_count=5, peer_degree=2, latency_model='fixed', latency_mean_s=1.0,
                       miner_nodes=[0, 1, 2, 3, 4], hashpowers=[1.0] * 5, duration_blocks=300, rng_seed=3,
                       attacker=AttackConfig(hashpower_fraction=0.3, confirmations=1, max_deficit=10))
    report = network_double_spend_experiment(config)
    assert report.rounds >= 100
    assert report.frequency == report.successes / report.rounds
    assert report.oracle_frequency == gamblers_ruin_oracle(0.3, 1, TRIALS, 0, max_deficit=10)
    assert report.agrees


def test_network_race_needs_attacker():
    with pytest.raises(ValueError):
        network_double_spend_experiment(SimConfig(node_count=4, peer_degree=2, duration_blocks=5))


@pytest.mark.slow
def test_bundled_attack_scenario_within_oracle_bounds():
    config = dataclasses.replace(load_scenario('attack_q10_z6'), progress=False)
    report = network_double_spend_experiment(config)
    assert report.max_deficit == 20
    assert report.rounds > 0
    assert report.agrees
