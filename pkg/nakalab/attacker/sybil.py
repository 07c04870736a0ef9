import dataclasses

from nakalab.attacker.base import Attacker
from nakalab.simulator.simulator import NetworkSimulator
from nakalab.utils.args import SimConfig


@dataclasses.dataclass
class SybilArguments:
    enable: bool = False
    identities: int = 100  # zero-hashpower nodes added to the network


class SybilAttacker(Attacker):
    """
    Floods the network with free identities. They relay like any node but own no hashpower,
    so they should leave every real miner's lottery untouched.
    """
    arg_clz = SybilArguments

    def prepare(self, config: SimConfig, aargs: SybilArguments) -> SimConfig:
        if aargs.identities < 0:
            raise ValueError(f'identities must be >= 0, got {aargs.identities}')
        return dataclasses.replace(config, sybil_identities=config.sybil_identities + aargs.identities)

    def load_attacker(self, args, aargs: SybilArguments, simulator: NetworkSimulator):
        sybils = [n for n in simulator.nodes if n.role == 'sybil']
        if len(sybils) < aargs.identities:
            raise ValueError(f'network has {len(sybils)} sybil nodes, {aargs.identities} requested')

    def attack(self, args, aargs, simulator: NetworkSimulator) -> dict:
        sybils = {n.node_id for n in simulator.nodes if n.role == 'sybil'}
        found = sum(1 for r in simulator.found.values() if r.miner in sybils)
        return {'sybil_identities': len(sybils), 'sybil_blocks': found}
