import dataclasses
import types
from argparse import ArgumentParser
from copy import copy
from enum import Enum
from inspect import isclass
from typing import Iterable, Literal, Optional, Union, get_type_hints

from transformers import HfArgumentParser
from transformers.hf_argparser import DataClassType, make_choice_type_function, string_to_bool

from nakalab.config import RETARGET_INTERVAL, TARGET_SPACING, RETARGET_CLAMP, POW_LIMIT, COINBASE_MATURITY, \
    MEDIAN_TIME_SPAN


@dataclasses.dataclass
class ConsensusConfig:
    retarget_interval: int = RETARGET_INTERVAL
    target_spacing_s: int = TARGET_SPACING
    retarget_clamp: int = RETARGET_CLAMP
    pow_limit: int = POW_LIMIT
    coinbase_maturity: int = COINBASE_MATURITY
    median_time_span: int = MEDIAN_TIME_SPAN


@dataclasses.dataclass
class AttackConfig:
    enable: bool = True
    hashpower_fraction: float = 0.1  # q, attacker share of the total hash rate
    confirmations: int = 6  # z, blocks the victim waits for
    mode: Literal['double-spend-withholding'] = 'double-spend-withholding'
    max_deficit: int = 200  # race abandoned once this far behind

    def __post_init__(self):
        if not 0 <= self.hashpower_fraction < 1:
            raise ValueError(f'hashpower_fraction must be in [0, 1), got {self.hashpower_fraction}')
        if self.confirmations < 0:
            raise ValueError(f'confirmations must be >= 0, got {self.confirmations}')


@dataclasses.dataclass
class SimConfig:
    node_count: int = 10
    peer_degree: int = 8
    latency_model: str = 'exponential'  # 'fixed' or 'exponential'
    latency_mean_s: float = 2.0
    miner_nodes: list[int] = dataclasses.field(default_factory=lambda: [0])
    hashpowers: list[float] = dataclasses.field(default_factory=lambda: [1.0])
    block_interval_target_s: float = 600.0
    duration_blocks: int = 100
    rng_seed: int = 42
    initial_zero_bits: int = 1  # leading zero bits of the genesis target
    retarget_interval: int = RETARGET_INTERVAL
    retarget_clamp: int = RETARGET_CLAMP
    sybil_identities: int = 0  # zero-hashpower relay nodes appended to the network
    tx_rate_per_s: float = 0.0  # background transactions, off by default
    tx_fee_sat: int = 1000
    record_events: bool = True
    progress: bool = False
    log_to_wandb: bool = False
    attacker: Optional[AttackConfig] = dataclasses.field(default=None, metadata={'argparse': False})

    def validate(self):
        if len(self.miner_nodes) != len(self.hashpowers):
            raise ValueError(f'{len(self.miner_nodes)} miner nodes but {len(self.hashpowers)} hashpowers')
        if any(h < 0 for h in self.hashpowers) or sum(self.hashpowers) <= 0:
            raise ValueError('hashpowers must be non-negative with a positive sum')
        if len(set(self.miner_nodes)) != len(self.miner_nodes):
            raise ValueError('a node may appear only once among the miners')
        if any(not 0 <= n < self.node_count for n in self.miner_nodes):
            raise ValueError(f'miner node ids must lie in [0, {self.node_count})')
        if not 0 < self.peer_degree < self.total_nodes:
            raise ValueError(f'peer_degree must be in (0, {self.total_nodes}), got {self.peer_degree}')
        if self.latency_mean_s < 0 or self.block_interval_target_s <= 0 or self.duration_blocks < 1:
            raise ValueError('latency must be >= 0, interval > 0 and duration >= 1 block')
        return self

    @property
    def miners(self) -> list[tuple[int, float]]:
        return list(zip(self.miner_nodes, self.hashpowers))

    @property
    def attacker_enabled(self) -> bool:
        return self.attacker is not None and self.attacker.enable

    @property
    def attacker_node(self) -> Optional[int]:
        return self.node_count + self.sybil_identities if self.attacker_enabled else None

    @property
    def total_nodes(self) -> int:
        return self.node_count + self.sybil_identities + (1 if self.attacker_enabled else 0)

    def consensus(self) -> ConsensusConfig:
        return ConsensusConfig(retarget_interval=self.retarget_interval,
                               target_spacing_s=int(round(self.block_interval_target_s)),
                               retarget_clamp=self.retarget_clamp)


class PrefixArgumentParser(HfArgumentParser):
    """
    HfArgumentParser whose flags carry a prefix: field `duration_blocks` of a parser with prefix
    `sim` becomes `--sim_duration_blocks`. Fields with metadata {'argparse': False} are skipped.
    """

    def __init__(self, dataclass_types: Union[DataClassType, Iterable[DataClassType]], prefix=None, **kwargs):
        self.prefix = prefix
        kwargs.setdefault('allow_abbrev', False)
        super().__init__(dataclass_types, **kwargs)

    def _flag(self, name: str) -> str:
        return f'{self.prefix}_{name}' if self.prefix else name

    @staticmethod
    def _parsed_fields(dtype: DataClassType):
        return [f for f in dataclasses.fields(dtype) if f.init and f.metadata.get('argparse', True)]

    def _add_dataclass_arguments(self, dtype: DataClassType):
        type_hints = get_type_hints(dtype)
        for field in self._parsed_fields(dtype):
            field.type = type_hints[field.name]
            self._parse_dataclass_field(self, field)

    def _parse_dataclass_field(self, parser: ArgumentParser, field: dataclasses.Field):
        kwargs = {k: v for k, v in field.metadata.items() if k != 'argparse'}
        origin_type = getattr(field.type, '__origin__', field.type)
        if origin_type is Union or (hasattr(types, 'UnionType') and isinstance(origin_type, types.UnionType)):
            args = field.type.__args__
            if len(args) != 2 or type(None) not in args:
                raise ValueError(f"Only Optional[X] unions are supported, problem in field '{field.name}'")
            field.type = args[0] if args[1] is type(None) else args[1]
            origin_type = getattr(field.type, '__origin__', field.type)

        bool_kwargs = {}
        if origin_type is Literal or (isinstance(field.type, type) and issubclass(field.type, Enum)):
            kwargs['choices'] = field.type.__args__ if origin_type is Literal else [x.value for x in field.type]
            kwargs['type'] = make_choice_type_function(kwargs['choices'])
            kwargs['default'] = field.default
        elif field.type is bool:
            bool_kwargs = copy(kwargs)
            kwargs['type'] = string_to_bool
            kwargs['default'] = False if field.default is dataclasses.MISSING else field.default
            kwargs['nargs'] = '?'
            kwargs['const'] = True
        elif isclass(origin_type) and issubclass(origin_type, list):
            kwargs['type'] = field.type.__args__[0]
            kwargs['nargs'] = '+'
            kwargs['default'] = field.default_factory()
        else:
            kwargs['type'] = field.type
            if field.default is not dataclasses.MISSING:
                kwargs['default'] = field.default
            elif field.default_factory is not dataclasses.MISSING:
                kwargs['default'] = field.default_factory()
            else:
                kwargs['required'] = True
        dest = self._flag(field.name)
        parser.add_argument(f'--{dest}', dest=dest, **kwargs)
        if field.default is True and field.type is bool:
            bool_kwargs['default'] = False
            parser.add_argument(f'--no_{dest}', action='store_false', dest=dest, **bool_kwargs)

    def set_dataclass_defaults(self, values: dict):
        """Scenario values become defaults so explicit flags still override them."""
        self.set_defaults(**{self._flag(k): v for k, v in values.items()})

    def parse_args_into_dataclasses(self, args=None, return_remaining_strings=False, **_):
        namespace, remaining_args = self.parse_known_args(args=args)
        outputs = []
        for dtype in self.dataclass_types:
            inputs = {}
            for f in self._parsed_fields(dtype):
                inputs[f.name] = getattr(namespace, self._flag(f.name))
                delattr(namespace, self._flag(f.name))
            outputs.append(dtype(**inputs))
        if len(vars(namespace)) > 0:
            outputs.append(namespace)
        if return_remaining_strings:
            return (*outputs, remaining_args)
        if remaining_args:
            raise ValueError(f'Some specified arguments are not used by the argument parser: {remaining_args}')
        return (*outputs,)
