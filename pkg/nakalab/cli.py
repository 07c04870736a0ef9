"""
Command-line entry point: `python -m nakalab <subcommand> ...`.

Every subcommand exits 0 on success. Failures print one line, `error: <Name>: <detail>`, on
stderr and exit 1; usage errors exit 2.
"""
import argparse
import dataclasses
import hashlib
import secrets
import sys
from typing import Optional, Sequence

from nakalab import config as nk_config
from nakalab.attacker.double_spend import DoubleSpendAttacker
from nakalab.attacker.sybil import SybilAttacker
from nakalab.consensus.block import Target, make_genesis, mine_block
from nakalab.consensus.chain import ChainState, EventKind, build_template
from nakalab.consensus.errors import Exhausted
from nakalab.consensus.store import FileChainStore
from nakalab.crypto.address import Address, derive_address, sign_message, verify_message
from nakalab.crypto.ecc import PublicKey, Scalar, Signature, ZeroKey, derive_public_key, generate_private_key
from nakalab.crypto.hashing import double_sha256, merkle_root
from nakalab.ledger.emission import emission_schedule
from nakalab.ledger.script import DataEmbed, PayToPubKeyHash
from nakalab.ledger.transaction import embed_document
from nakalab.simulator.experiments import build_strategies, double_spend_experiment, gamblers_ruin_oracle, \
    network_double_spend_experiment, standard_error, agree_within
from nakalab.simulator.metrics import write_outputs
from nakalab.simulator.simulator import NetworkSimulator
from nakalab.utils.args import ConsensusConfig, PrefixArgumentParser, SimConfig
from nakalab.utils.data import fmt_float, to_json, write_csv
from nakalab.utils.exp import attack_config, load_scenario, scenario_defaults

MINE_NONCE_BUDGET = 1 << 24
DEFAULT_MAX_DEFICIT = 200


class CliError(ValueError):
    pass


class FileUnreadable(CliError):
    pass


class NotFound(CliError):
    pass


class InvalidSignature(CliError):
    pass


def _emit(args, record: dict):
    if args.format == 'json':
        print(to_json(record))
    elif args.format == 'csv':
        write_csv(sys.stdout, list(record.keys()), [list(record.values())])
    else:
        for k, v in record.items():
            print(f'{k}: {fmt_float(v) if isinstance(v, float) else v}')


def _emit_table(args, header: Sequence[str], rows: list[list]):
    if args.format == 'json':
        print(to_json([dict(zip(header, r)) for r in rows]))
    elif args.format == 'text':
        print(' '.join(header))
        for r in rows:
            print(' '.join(fmt_float(v) if isinstance(v, float) else ('' if v is None else str(v)) for v in r))
    else:
        write_csv(sys.stdout, header, rows)


def _hex(text: str, what: str, size: Optional[int] = None) -> bytes:
    try:
        data = bytes.fromhex(text)
    except ValueError as e:
        raise CliError(f'{what} is not valid hex') from e
    if size is not None and len(data) != size:
        raise CliError(f'{what} must be {size} bytes, got {len(data)}')
    return data


def _private_key(text: str) -> Scalar:
    return generate_private_key(_hex(text, 'private key', 32))


def _read_file(path: str) -> bytes:
    try:
        with open(path, 'rb') as f:
            return f.read()
    except OSError as e:
        raise FileUnreadable(f'{path}: {e.strerror}') from e


# ---- key tools ---------------------------------------------------------------------------------------

def keygen_entropy(seed: Optional[int]) -> bytes:
    if seed is None:
        return secrets.token_bytes(32)
    return hashlib.sha256(b'nakalab-keygen' + seed.to_bytes(8, 'little')).digest()


def cmd_keygen(args, _):
    entropy = keygen_entropy(args.seed)
    try:
        k = generate_private_key(entropy)
    except ZeroKey:
        k = generate_private_key(hashlib.sha256(entropy).digest())
    pk = derive_public_key(k)
    _emit(args, {'private_key': k.to_bytes().hex(), 'public_key': pk.encode().hex(),
                 'address': derive_address(pk).text})


def cmd_address(args, _):
    if args.decode:
        address = Address.from_text(args.key)
        _emit(args, {'address': address.text, 'version': address.version, 'payload': address.payload.hex()})
        return
    raw = _hex(args.key, 'key')
    if len(raw) == 32:
        pk = derive_public_key(generate_private_key(raw))
    else:
        pk = PublicKey.decode(raw)
    _emit(args, {'public_key': pk.encode().hex(), 'address': derive_address(pk).text})


def _message(args) -> bytes:
    if args.file:
        return _read_file(args.file)
    return args.message.encode()


def cmd_sign(args, _):
    k = _private_key(args.privkey)
    pk = derive_public_key(k)
    sig = sign_message(k, _message(args))
    _emit(args, {'address': derive_address(pk).text, 'public_key': pk.encode().hex(),
                 'signature': sig.to_bytes().hex()})


def cmd_verify(args, _):
    address = Address.from_text(args.address)
    pk = PublicKey.decode(_hex(args.pubkey, 'public key', 65))
    sig = Signature.from_bytes(_hex(args.signature, 'signature', 64))
    if not verify_message(address, pk, _message(args), sig):
        raise InvalidSignature(f'signature does not prove control of {address.text}')
    _emit(args, {'address': address.text, 'valid': True})


def cmd_merkle(args, _):
    txids = [_hex(t, 'txid', 32) for t in args.txids]
    _emit(args, {'leaves': len(txids), 'merkle_root': merkle_root(txids).hex()})


def cmd_schedule(args, _):
    rows = []
    for r in emission_schedule(args.max_epochs):
        issuance = float(r.annual_issuance) if r.annual_issuance is not None else None
        rows.append([r.epoch, r.start_height, r.reward_sat, r.cumulative_supply_sat, issuance])
    _emit_table(args, ['epoch', 'start_height', 'reward_sat', 'cumulative_supply_sat', 'annualized_issuance'], rows)


# ---- desk-scale chain ----------------------------------------------------------------------------------

def open_chain(path: str, bits: int, message: bytes) -> tuple[FileChainStore, ChainState]:
    """Replay the chain file, or start one with a fresh genesis block."""
    store = FileChainStore(path)
    params = ConsensusConfig()
    if store.exists():
        return store, store.replay(params)
    genesis = make_genesis(message, target=Target.from_bits(bits))
    store.append(genesis)
    return store, ChainState(genesis, params)


def mine_next(store: FileChainStore, chain: ChainState, script, extra_outputs=()) -> tuple[int, bytes, int]:
    """Mine one block on the active tip and persist it; returns (height, hash, attempts)."""
    attempts = 0
    extra_nonce = 0
    while True:
        template = build_template(chain, [], script, extra_nonce=extra_nonce, extra_outputs=extra_outputs)
        try:
            block = mine_block(template, 0, MINE_NONCE_BUDGET)
            attempts += block.header.nonce + 1
            break
        except Exhausted:
            attempts += MINE_NONCE_BUDGET
            extra_nonce += 1
    event = store.connect_and_append(chain, block)
    if event.kind == EventKind.REJECTED_INVALID:
        raise CliError(f'mined block rejected: {event.reason}')
    return event.height, block.hash, attempts


def _payout(args):
    if args.address:
        return PayToPubKeyHash.for_address(Address.from_text(args.address))
    return PayToPubKeyHash(bytes(20))


def cmd_mine(args, _):
    store, chain = open_chain(args.chain, args.bits, args.message.encode())
    script = _payout(args)
    rows = []
    for _ in range(args.count):
        height, block_hash, attempts = mine_next(store, chain, script)
        rows.append([height, block_hash.hex(), attempts])
    _emit_table(args, ['height', 'hash', 'attempts'], rows)


def find_document(chain: ChainState, digest: bytes) -> Optional[tuple[int, int, bytes]]:
    for entry in chain.active_chain():
        for tx in entry.block.transactions:
            for out in tx.outputs:
                if isinstance(out.script, DataEmbed) and out.script.data == digest:
                    return entry.height, entry.timestamp, entry.hash
    return None


def cmd_notarize(args, _):
    digest = double_sha256(_read_file(args.file))
    if args.verify:
        store = FileChainStore(args.chain)
        if not store.exists():
            raise NotFound(f'no chain at {args.chain}')
        hit = find_document(store.replay(ConsensusConfig()), digest)
        if hit is None:
            raise NotFound(f'digest {digest.hex()} is not on the chain')
        height, timestamp, block_hash = hit
        _emit(args, {'digest': digest.hex(), 'height': height, 'timestamp': timestamp, 'block': block_hash.hex()})
        return
    store, chain = open_chain(args.chain, args.bits, args.message.encode())
    height, block_hash, attempts = mine_next(store, chain, _payout(args), [embed_document(digest)])
    _emit(args, {'digest': digest.hex(), 'height': height, 'block': block_hash.hex(), 'attempts': attempts})


# ---- simulation ----------------------------------------------------------------------------------------

def simulation_config(scenario: str, argv: Sequence[str], seed: Optional[int]) -> tuple[SimConfig, list, list]:
    """Scenario values with `--sim_*`, `--atk_*` and `--sybil_*` overrides applied."""
    base = load_scenario(scenario)
    parser = PrefixArgumentParser([SimConfig], prefix='sim')
    parser.set_dataclass_defaults(scenario_defaults(base))
    config, remaining = parser.parse_args_into_dataclasses(list(argv), return_remaining_strings=True)
    config = dataclasses.replace(config, attacker=base.attacker)
    if seed is not None:
        config = dataclasses.replace(config, rng_seed=seed)

    atk_defaults = dataclasses.asdict(base.attacker) if base.attacker else {'enable': False}
    attackers_conf = [('DoubleSpend', DoubleSpendAttacker(), 'atk', atk_defaults),
                      ('Sybil', SybilAttacker(), 'sybil', None)]
    attackers = []
    for name, attacker, prefix, defaults in attackers_conf:
        aargs, remaining = attacker.parse_known_arguments(remaining, prefix, defaults)
        if name == 'DoubleSpend' and not aargs.enable:
            config = dataclasses.replace(config, attacker=None)
        if aargs.enable:
            config = attacker.prepare(config, aargs)
            attackers.append((name, attacker, aargs))
    return config.validate(), attackers, remaining


def cmd_simulate(args, extra):
    config, attackers, remaining = simulation_config(args.scenario, extra, args.seed)
    if remaining:
        raise CliError(f'unrecognized arguments: {" ".join(remaining)}')
    sim = NetworkSimulator(config, build_strategies(config))
    for name, attacker, aargs in attackers:
        attacker.load_attacker(args, aargs, sim)
    sim.run()
    metrics = sim.metrics()
    out_dir = args.out or nk_config.output_dir
    write_outputs(metrics, sim.events, sim.block_rows(), out_dir)
    record = metrics.to_dict()
    for name, attacker, aargs in attackers:
        record[name] = attacker.attack(args, aargs, sim)
    if args.format == 'csv':
        flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
        _emit(args, flat)
    else:
        print(to_json(record))


def cmd_attack(args, _):
    rows = []
    seed = 0 if args.seed is None else args.seed
    base = load_scenario(args.scenario) if args.scenario else None
    if args.max_deficit is not None:
        max_deficit = args.max_deficit
    elif base is not None and base.attacker is not None:
        max_deficit = base.attacker.max_deficit
    else:
        max_deficit = DEFAULT_MAX_DEFICIT
    for q in args.q:
        for z in args.z:
            p = double_spend_experiment(q, z, args.trials, seed, max_deficit)
            o = gamblers_ruin_oracle(q, z, args.trials, seed, max_deficit)
            row = [q, z, args.trials, p, standard_error(p, args.trials), o,
                   standard_error(o, args.trials), int(agree_within(p, o, args.trials))]
            if base is not None:
                config = dataclasses.replace(base, attacker=attack_config(q, z, max_deficit), progress=False)
                if args.seed is not None:
                    config = dataclasses.replace(config, rng_seed=args.seed)
                report = network_double_spend_experiment(config.validate(), args.trials, seed)
                row += [report.rounds, report.frequency, int(report.agrees)]
            rows.append(row)
    header = ['q', 'z', 'trials', 'success_frequency', 'se', 'oracle_frequency', 'oracle_se', 'agree']
    if base is not None:
        header += ['network_rounds', 'network_frequency', 'network_agree']
    _emit_table(args, header, rows)


# ---- parser --------------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='u64 seed for every random draw')
    common.add_argument('--out', type=str, default=None, help='output directory')
    common.add_argument('--format', choices=['text', 'json', 'csv'], default=None,
                        help='defaults to csv for schedule, text elsewhere')

    parser = argparse.ArgumentParser(prog='nakalab', description='Proof-of-work consensus lab')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('keygen', parents=[common], help='new private key, public key and address')
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser('address', parents=[common], help='address of a key, or decode an address')
    p.add_argument('key', help='32-byte private key hex, 65-byte public key hex, or address with --decode')
    p.add_argument('--decode', action='store_true')
    p.set_defaults(func=cmd_address)

    for name, func in (('sign', cmd_sign), ('verify', cmd_verify)):
        p = sub.add_parser(name, parents=[common], help=f'{name} an ownership-proof message')
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument('--message', type=str)
        group.add_argument('--file', type=str)
        if name == 'sign':
            p.add_argument('--privkey', required=True)
        else:
            p.add_argument('--address', required=True)
            p.add_argument('--pubkey', required=True)
            p.add_argument('--signature', required=True)
        p.set_defaults(func=func)

    p = sub.add_parser('merkle', parents=[common], help='merkle root of txids (hex)')
    p.add_argument('txids', nargs='+')
    p.set_defaults(func=cmd_merkle)

    p = sub.add_parser('schedule', parents=[common], help='subsidy and supply per halving epoch')
    p.add_argument('--max_epochs', type=int, default=33)
    p.set_defaults(func=cmd_schedule, default_format='csv')

    for name, func in (('mine', cmd_mine), ('notarize', cmd_notarize)):
        p = sub.add_parser(name, parents=[common])
        if name == 'notarize':
            p.add_argument('file')
            p.add_argument('--verify', action='store_true', help='look the document up instead of embedding it')
        else:
            p.add_argument('--count', type=int, default=1)
        p.add_argument('--chain', type=str, default=nk_config.chain_path)
        p.add_argument('--bits', type=int, default=8, help='leading zero bits of a new chain')
        p.add_argument('--message', type=str, default=nk_config.GENESIS_MESSAGE.decode(),
                       help='genesis message of a new chain')
        p.add_argument('--address', type=str, default=None, help='payout address')
        p.set_defaults(func=func)

    p = sub.add_parser('simulate', parents=[common], allow_abbrev=False,
                       help='run a scenario; --sim_*, --atk_*, --sybil_* override it')
    p.add_argument('scenario')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('attack', parents=[common], help='double-spend race against the random-walk oracle')
    p.add_argument('--q', type=float, nargs='+', default=[0.1, 0.25, 0.4])
    p.add_argument('--z', type=int, nargs='+', default=[1, 3, 6])
    p.add_argument('--trials', type=int, default=10_000)
    p.add_argument('--max_deficit', type=int, default=None,
                   help=f"give-up deficit, the scenario's or {DEFAULT_MAX_DEFICIT} when unset")
    p.add_argument('--scenario', type=str, default=None,
                   help='also play each race inside a network run of this scenario')
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra and args.command != 'simulate':
        parser.error(f'unrecognized arguments: {" ".join(extra)}')
    if args.format is None:
        args.format = getattr(args, 'default_format', 'text')
    try:
        args.func(args, extra)
    except (ValueError, RuntimeError, OSError) as e:
        print(f'error: {type(e).__name__}: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
