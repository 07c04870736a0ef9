import argparse
import dataclasses
import json
import os
import typing
from typing import Any, Callable, get_type_hints

import numpy as np

from nakalab.config import scenario_dir
from nakalab.simulator.errors import BadScenario
from nakalab.utils.args import SimConfig, AttackConfig

_latency_model_map: dict[str, Callable] = {}

# top-level stream keys; every random consumer owns one so they never share draws
STREAM_TOPOLOGY = 0
STREAM_MINING = 1
STREAM_LATENCY = 2
STREAM_TRAFFIC = 3
STREAM_RACE = 4
STREAM_ORACLE = 5


def register_latency_model(name):
    def wrapper(fn):
        assert callable(fn), "A latency model is a function (rng, mean, size) -> delays"
        _latency_model_map[name] = fn
        return fn

    return wrapper


def get_latency_model(name) -> Callable:
    import nakalab.simulator.topology  # noqa: F401  registers the built-in models
    if name not in _latency_model_map:
        raise ValueError(f'unknown latency model {name!r}, known: {sorted(_latency_model_map)}')
    return _latency_model_map[name]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one consumer of randomness, addressed by `key` under `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def str2bool(v):
    if isinstance(v, bool):
        return v
    if v.lower() in ('yes', 'true', 't', 'y', '1'):
        return True
    elif v.lower() in ('no', 'false', 'f', 'n', '0'):
        return False
    else:
        raise argparse.ArgumentTypeError('Boolean value expected.')


def args_to_dict(args_list):
    dct = {}
    key = None
    for a in args_list:
        if key:
            dct[key] = a
            key = None
        elif a.startswith('--'):
            key = a[2:]
    return dct


def resolve_scenario(path: str) -> str:
    """Bare names such as `honest_10min` resolve against the bundled scenario directory."""
    if os.path.exists(path):
        return path
    for candidate in (os.path.join(scenario_dir, path), os.path.join(scenario_dir, f'{path}.json')):
        if os.path.exists(candidate):
            return candidate
    return path


def _coerce(name: str, tp, value):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(name, args[0], value)
    if origin is typing.Literal:
        if value not in typing.get_args(tp):
            raise BadScenario(f"field '{name}': {value!r} is not one of {list(typing.get_args(tp))}")
        return value
    if origin is list:
        if not isinstance(value, list):
            raise BadScenario(f"field '{name}': expected a list, got {type(value).__name__}")
        inner = typing.get_args(tp)[0]
        return [_coerce(f'{name}[{i}]', inner, v) for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise BadScenario(f"field '{name}': expected an object, got {type(value).__name__}")
        return _build(tp, value, prefix=f'{name}.')
    if tp is bool:
        if not isinstance(value, bool):
            raise BadScenario(f"field '{name}': expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise BadScenario(f"field '{name}': expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadScenario(f"field '{name}': expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise BadScenario(f"field '{name}': expected a string, got {value!r}")
        return value
    return value


def _build(dtype, values: dict, prefix=''):
    hints = get_type_hints(dtype)
    known = {f.name for f in dataclasses.fields(dtype)}
    for key in values:
        if key not in known:
            raise BadScenario(f"unknown field '{prefix}{key}'")
    kwargs = {k: _coerce(f'{prefix}{k}', hints[k], v) for k, v in values.items()}
    try:
        return dtype(**kwargs)
    except ValueError as e:
        raise BadScenario(f"{prefix.rstrip('.') or 'scenario'}: {e}") from e


def parse_scenario(text: str, source: str = '<scenario>') -> SimConfig:
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise BadScenario(f'{source}:{e.lineno}:{e.colno}: {e.msg}') from e
    if not isinstance(values, dict):
        raise BadScenario(f'{source}: top level must be an object')
    # the scenario schema spells miners as [[node, hashpower], ...]
    if 'miners' in values:
        miners = values.pop('miners')
        if not isinstance(miners, list) or any(not isinstance(m, list) or len(m) != 2 for m in miners):
            raise BadScenario(f"{source}: field 'miners' must be a list of [node, hashpower] pairs")
        values['miner_nodes'] = [m[0] for m in miners]
        values['hashpowers'] = [m[1] for m in miners]
    try:
        config = _build(SimConfig, values)
        return config.validate()
    except BadScenario as e:
        raise BadScenario(f'{source}: {e}') from e
    except ValueError as e:
        raise BadScenario(f'{source}: {e}') from e


def load_scenario(path: str) -> SimConfig:
    path = resolve_scenario(path)
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise BadScenario(f'{path}: {e.strerror}') from e
    return parse_scenario(text, path)


def dump_scenario(config: SimConfig) -> dict[str, Any]:
    values = dataclasses.asdict(config)
    values['miners'] = [[n, h] for n, h in zip(values.pop('miner_nodes'), values.pop('hashpowers'))]
    return values


def scenario_defaults(config: SimConfig) -> dict[str, Any]:
    """Flag defaults for PrefixArgumentParser; fields hidden from the command line are left out."""
    return {f.name: getattr(config, f.name) for f in dataclasses.fields(config) if f.metadata.get('argparse', True)}


def add_sim_params(parser):
    parser.add_argument('--exp_name', type=str, default='nakalab')
    parser.add_argument('--case_name', type=str, default='')
    parser.add_argument('--scenario', type=str, default=None, help='scenario file or bundled scenario name')
    parser.add_argument('--node_count', type=int, default=None)
    parser.add_argument('--peer_degree', type=int, default=None)
    parser.add_argument('--latency_model', type=str, default=None, help='fixed or exponential')
    parser.add_argument('--latency_mean_s', type=float, default=None)
    parser.add_argument('--miners', type=str, default=None, help='node:hashpower pairs, e.g. 0:3,1:1')
    parser.add_argument('--block_interval_target_s', type=float, default=None)
    parser.add_argument('--duration_blocks', type=int, default=None)
    parser.add_argument('--rng_seed', type=int, default=None)
    parser.add_argument('--sybil_identities', type=int, default=None)
    parser.add_argument('--tx_rate_per_s', type=float, default=None)
    parser.add_argument('--progress', type=str2bool, default=True)
    parser.add_argument('--log_to_wandb', type=str2bool, default=False)
    parser.add_argument('--out', type=str, default=None)


def get_sim_config(args) -> SimConfig:
    config = load_scenario(args.scenario) if args.scenario else SimConfig()
    overrides = {}
    for name in ('node_count', 'peer_degree', 'latency_model', 'latency_mean_s', 'block_interval_target_s',
                 'duration_blocks', 'rng_seed', 'sybil_identities', 'tx_rate_per_s'):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, 'miners', None):
        pairs = [p.split(':') for p in args.miners.split(',')]
        overrides['miner_nodes'] = [int(n) for n, _ in pairs]
        overrides['hashpowers'] = [float(h) for _, h in pairs]
    config = dataclasses.replace(config, progress=args.progress, log_to_wandb=args.log_to_wandb, **overrides)
    return config.validate()


def attack_config(q: float, z: int, max_deficit: int = 200, enable: bool = True) -> AttackConfig:
    return AttackConfig(enable=enable, hashpower_fraction=q, confirmations=z, max_deficit=max_deficit)
