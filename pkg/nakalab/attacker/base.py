from abc import ABC, abstractmethod
from typing import Optional, Sequence

from nakalab.simulator.simulator import NetworkSimulator
from nakalab.utils.args import PrefixArgumentParser, SimConfig


class Attacker(ABC):
    """
    Base class for all attackers
    """
    arg_clz = None

    def prepare(self, config: SimConfig, aargs) -> SimConfig:
        """Adjust the run configuration before the network is built."""
        return config

    @abstractmethod
    def load_attacker(self, args, aargs, simulator: NetworkSimulator):
        raise NotImplementedError

    @abstractmethod
    def attack(self, args, aargs, simulator: NetworkSimulator) -> dict:
        raise NotImplementedError

    def parse_known_arguments(self, args: Sequence[str], prefix: str, defaults: Optional[dict] = None):
        """(arguments dataclass, strings no flag of this attacker consumed)"""
        parser = PrefixArgumentParser([self.__class__.arg_clz], prefix=prefix)
        if defaults:
            parser.set_dataclass_defaults(defaults)
        aargs, remaining = parser.parse_args_into_dataclasses(list(args), return_remaining_strings=True)
        return aargs, remaining

    def parse_arguments(self, args: Sequence[str], prefix: str, defaults: Optional[dict] = None):
        return self.parse_known_arguments(args, prefix, defaults)[0]
