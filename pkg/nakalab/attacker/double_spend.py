import dataclasses

from nakalab.attacker.base import Attacker
from nakalab.simulator.simulator import NetworkSimulator
from nakalab.strategies.withholding import WithholdingStrategy
from nakalab.utils.args import AttackConfig, SimConfig


class DoubleSpendAttacker(Attacker):
    """
    A miner with fraction q of the hash rate that tries to reverse payments confirmed `z` times
    by withholding a private branch.
    """
    arg_clz = AttackConfig

    def __init__(self):
        self.strategy: WithholdingStrategy = None

    def prepare(self, config: SimConfig, aargs: AttackConfig) -> SimConfig:
        return dataclasses.replace(config, attacker=aargs)

    def load_attacker(self, args, aargs: AttackConfig, simulator: NetworkSimulator):
        strategy = simulator.strategies.get(simulator.config.attacker_node)
        if not isinstance(strategy, WithholdingStrategy):
            raise ValueError('the simulator was built without a withholding attacker node')
        self.strategy = strategy

    def attack(self, args, aargs: AttackConfig, simulator: NetworkSimulator) -> dict:
        s = self.strategy
        return {'rounds': s.rounds, 'successes': s.successes, 'failures': s.failures,
                'success_frequency': s.success_frequency, 'published_blocks': s.published_blocks,
                'hashpower_fraction': aargs.hashpower_fraction, 'confirmations': aargs.confirmations}
