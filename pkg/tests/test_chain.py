import dataclasses

import numpy as np
import pytest

from nakalab.config import COIN, GENESIS_MESSAGE
from nakalab.consensus.block import Target, Block, BlockHeader, check_pow, mine_block, retarget, make_genesis, \
    genesis_message, block_template, header_hash, HEADER_SIZE
from nakalab.consensus.chain import ChainState, EventKind, build_template, validate_block
from nakalab.consensus.errors import BadPoW, WrongTarget, BadMerkleRoot, BadCoinbase, ExcessCoinbase, \
    BadTimestamp, BadTransaction, UnknownParent, NonPositiveTimespan, MessageTooLong, Exhausted, MalformedBlock, \
    DoubleSpendInBlock, DuplicateTxid
from nakalab.crypto.hashing import double_sha256
from nakalab.ledger.script import PayToPubKeyHash
from nakalab.ledger.transaction import OutPoint, TxInput, TxOutput, Transaction, sign_transaction, build_coinbase
from nakalab.utils.args import ConsensusConfig

EXPECTED = 2016 * 600


def test_retarget_unchanged_on_schedule():
    t = Target(2 ** 200)
    assert retarget(t, EXPECTED) == t


def test_retarget_half_timespan_halves():
    assert retarget(Target(2 ** 200), EXPECTED // 2) == Target(2 ** 199)


def test_retarget_clamps_at_four():
    assert retarget(Target(2 ** 200), EXPECTED // 100) == Target(2 ** 198)
    assert retarget(Target(2 ** 200), EXPECTED * 100) == Target(2 ** 202)


def test_retarget_respects_pow_limit():
    assert retarget(Target(2 ** 255), EXPECTED * 4).threshold == 2 ** 256 - 1


def test_retarget_rejects_non_positive():
    with pytest.raises(NonPositiveTimespan):
        retarget(Target(2 ** 200), 0)


def test_genesis_embeds_times_sentence():
    genesis = make_genesis(target=Target.from_bits(4))
    assert genesis_message(genesis) == GENESIS_MESSAGE
    assert GENESIS_MESSAGE == b'The Times 03/Jan/2009 Chancellor on brink of second bailout for banks'
    assert check_pow(genesis.header)
    assert genesis.header.prev_hash == bytes(32)


def test_genesis_message_limit():
    with pytest.raises(MessageTooLong):
        make_genesis(b'x' * 81)


def test_mine_block_exhausts(genesis):
    hard = dataclasses.replace(genesis, header=dataclasses.replace(genesis.header, target=Target(1)))
    with pytest.raises(Exhausted):
        mine_block(hard, 0, 16)


def test_block_serialization(chain, mine_on):
    block = mine_on(chain)
    assert Block.deserialize(block.serialize()) == block
    with pytest.raises(MalformedBlock):
        Block.deserialize(block.serialize()[:-1])
    assert BlockHeader.deserialize(block.header.serialize()).hash == block.hash


def test_header_hash_is_double_sha_of_header(chain, mine_on):
    header = mine_on(chain).header
    raw = header.serialize()
    assert len(raw) == HEADER_SIZE
    assert header_hash(header) == double_sha256(raw)
    assert check_pow(header)
    bumped = dataclasses.replace(header, nonce=header.nonce + 1)
    assert header_hash(bumped) != header_hash(header)


def test_extend_active_chain(chain, mine_on):
    block = mine_on(chain)
    event = chain.connect_block(block)
    assert event.kind == EventKind.EXTENDED_ACTIVE_CHAIN
    assert chain.tip == block.hash and chain.height == 1
    assert chain.connect_block(block).kind == EventKind.ALREADY_KNOWN


def test_fork_race_and_reorg(chain, mine_on):
    a1 = mine_on(chain, extra_nonce=0)
    b1 = mine_on(chain, extra_nonce=1)
    assert chain.connect_block(a1).kind == EventKind.EXTENDED_ACTIVE_CHAIN
    event = chain.connect_block(b1)
    assert event.kind == EventKind.CREATED_SIDE_CHAIN
    assert chain.tip == a1.hash  # first seen wins at equal height

    b2 = mine_on(chain, parent=b1.hash)
    event = chain.connect_block(b2)
    assert event.kind == EventKind.TRIGGERED_REORG
    assert event.rolled_back == (a1.hash,)
    assert event.connected == (b1.hash, b2.hash)
    assert chain.tip == b2.hash and chain.height == 2

    assert chain.replay_utxo() == chain.utxo
    stale = chain.stale_blocks()
    assert [e.hash for e in stale] == [a1.hash]
    for entry in stale:
        competitor = chain.active[entry.height]
        assert competitor != entry.hash and chain.index[competitor].height == entry.height


def test_reorg_moves_transactions_back(chain, mine_on, keys, pubkeys, params):
    # mature the first coinbase, then spend it on one branch only
    blocks = []
    for _ in range(params.coinbase_maturity + 1):
        blocks.append(mine_on(chain))
        chain.connect_block(blocks[-1])
    coinbase = blocks[0].coinbase
    tx = sign_transaction(Transaction((TxInput(OutPoint(coinbase.txid, 0)),),
                                      (TxOutput(coinbase.outputs[0].amount - 1000,
                                                PayToPubKeyHash.for_key(pubkeys['bob'])),)),
                          [[keys['alice']]])
    fork_parent = chain.tip
    with_tx = mine_on(chain, mempool=[tx])
    assert tx in with_tx.transactions
    assert with_tx.coinbase.outputs[0].amount == 50 * COIN + 1000
    chain.connect_block(with_tx)
    assert OutPoint(coinbase.txid, 0) not in chain.utxo

    rival = mine_on(chain, parent=fork_parent, extra_nonce=7)
    chain.connect_block(rival)
    rival2 = mine_on(chain, parent=rival.hash)
    event = chain.connect_block(rival2)
    assert event.kind == EventKind.TRIGGERED_REORG
    assert OutPoint(coinbase.txid, 0) in chain.utxo
    assert chain.replay_utxo() == chain.utxo


def test_orphan_waits_for_parent(chain, mine_on, genesis, params):
    a1 = mine_on(chain)
    side = ChainState(genesis, params)
    side.connect_block(a1)
    a2 = mine_on(side)
    event = chain.connect_block(a2)
    assert event.kind == EventKind.STORED_PENDING_PARENT
    event = chain.connect_block(a1)
    assert event.kind == EventKind.EXTENDED_ACTIVE_CHAIN
    assert [e.kind for e in event.flatten()] == [EventKind.EXTENDED_ACTIVE_CHAIN, EventKind.EXTENDED_ACTIVE_CHAIN]
    assert chain.tip == a2.hash


def test_invalid_block_rejected_with_descendants(chain, mine_on, genesis, params, miner_script):
    # a coinbase claiming one satoshi too much
    greedy = build_coinbase(1, miner_script, 50 * COIN + 1)
    bad = mine_block(block_template(genesis.hash, [greedy], genesis.header.timestamp + 600, genesis.header.target),
                     0, 1 << 20)
    child_cb = build_coinbase(2, miner_script, 50 * COIN)
    child = mine_block(block_template(bad.hash, [child_cb], genesis.header.timestamp + 1200,
                                      genesis.header.target), 0, 1 << 20)
    assert chain.connect_block(child).kind == EventKind.STORED_PENDING_PARENT
    event = chain.connect_block(bad)
    assert event.kind == EventKind.REJECTED_INVALID
    assert event.reason.startswith('ExcessCoinbase')
    assert event.cascaded[0].kind == EventKind.REJECTED_INVALID
    assert event.cascaded[0].reason.startswith('InvalidAncestor')
    assert chain.height == 0
    assert chain.connect_block(bad).kind == EventKind.REJECTED_INVALID


def _variant(chain, **changes):
    template = build_template(chain, [], PayToPubKeyHash(bytes(20)))
    header = dataclasses.replace(template.header, **changes)
    return dataclasses.replace(template, header=header)


def test_validation_errors(chain, genesis, mine_on):
    good = mine_on(chain)
    validate_block(good, chain)

    with pytest.raises(WrongTarget):
        block = _variant(chain, target=Target.from_bits(3))
        validate_block(mine_block(block, 0, 1 << 20), chain)
    with pytest.raises(BadMerkleRoot):
        validate_block(mine_block(_variant(chain, merkle_root=bytes(32)), 0, 1 << 20), chain)
    with pytest.raises(BadTimestamp):
        validate_block(mine_block(_variant(chain, timestamp=genesis.header.timestamp), 0, 1 << 20), chain)
    with pytest.raises(UnknownParent):
        validate_block(mine_block(_variant(chain, prev_hash=bytes(range(32))), 0, 1 << 20), chain)

    unsolved = good
    while check_pow(unsolved.header):
        unsolved = dataclasses.replace(unsolved, header=dataclasses.replace(unsolved.header,
                                                                            nonce=unsolved.header.nonce + 1))
    with pytest.raises(BadPoW):
        validate_block(unsolved, chain)


def test_block_needs_one_leading_coinbase(chain, genesis, miner_script):
    cb = build_coinbase(1, miner_script, 50 * COIN)
    twice = build_coinbase(1, miner_script, 50 * COIN, extra_nonce=1)
    block = mine_block(block_template(genesis.hash, [cb, twice], genesis.header.timestamp + 600,
                                      genesis.header.target), 0, 1 << 20)
    with pytest.raises(BadCoinbase):
        validate_block(block, chain)


def test_block_with_bad_transaction(chain, genesis, keys, pubkeys, miner_script):
    cb = build_coinbase(1, miner_script, 50 * COIN)
    # the genesis coinbase is still immature at height 1
    spend = sign_transaction(Transaction((TxInput(OutPoint(genesis.coinbase.txid, 0)),),
                                         (TxOutput(COIN, PayToPubKeyHash.for_key(pubkeys['bob'])),)),
                             [[keys['alice']]])
    block = mine_block(block_template(genesis.hash, [cb, spend], genesis.header.timestamp + 600,
                                      genesis.header.target), 0, 1 << 20)
    with pytest.raises(BadTransaction):
        validate_block(block, chain)


def test_excess_coinbase(chain, genesis, miner_script):
    cb = build_coinbase(1, miner_script, 50 * COIN + 1)
    block = mine_block(block_template(genesis.hash, [cb], genesis.header.timestamp + 600, genesis.header.target),
                       0, 1 << 20)
    with pytest.raises(ExcessCoinbase):
        validate_block(block, chain)


def test_exact_spacing_keeps_target(chain, mine_on, params):
    target = chain.genesis.header.target
    for _ in range(2 * params.retarget_interval + 1):
        block = mine_on(chain)
        assert chain.connect_block(block).kind == EventKind.EXTENDED_ACTIVE_CHAIN
    assert all(e.target == target for e in chain.active_chain())


def test_fast_blocks_raise_difficulty(genesis):
    params = ConsensusConfig(retarget_interval=4, coinbase_maturity=2)
    chain = ChainState(genesis, params)
    script = PayToPubKeyHash(bytes(20))
    for i in range(4):
        template = build_template(chain, [], script, now=genesis.header.timestamp + 150 * (i + 1))
        chain.connect_block(mine_block(template, 0, 1 << 20))
    expected = retarget(genesis.header.target, 600, params)
    assert chain.tip_entry.target == expected
    assert expected.threshold == genesis.header.target.threshold // 4


def _solve(chain, parent_hash, transactions):
    parent = chain.index[parent_hash]
    template = block_template(parent_hash, list(transactions), parent.timestamp + 600,
                              chain.scheduled_target(parent_hash))
    return mine_block(template, 0, 1 << 20)


def test_repeated_coinbase_rejected(chain, mine_on, genesis):
    b1 = mine_on(chain)
    chain.connect_block(b1)
    copy = _solve(chain, b1.hash, [b1.coinbase])
    event = chain.connect_block(copy)
    assert event.kind == EventKind.REJECTED_INVALID
    assert event.reason.startswith('BadCoinbase')
    assert chain.utxo == chain.replay_utxo()
    assert chain.utxo.total_value() == 2 * 50 * COIN

    r1 = mine_on(chain, parent=genesis.hash, extra_nonce=1)
    chain.connect_block(r1)
    r2 = mine_on(chain, parent=r1.hash)
    assert chain.connect_block(r2).kind == EventKind.TRIGGERED_REORG
    assert chain.utxo == chain.replay_utxo()
    assert OutPoint(b1.coinbase.txid, 0) not in chain.utxo


def test_coinbase_height_tag_must_match(chain, genesis, miner_script):
    block = _solve(chain, genesis.hash, [build_coinbase(5, miner_script, 50 * COIN)])
    with pytest.raises(BadCoinbase):
        validate_block(block, chain)


@pytest.fixture
def spendable(chain, mine_on):
    """Chain at height 2 whose first coinbase (alice, 50 coins) is mature for height 3."""
    first = mine_on(chain)
    chain.connect_block(first)
    chain.connect_block(mine_on(chain))
    return OutPoint(first.coinbase.txid, 0)


def _pay(keys, pubkeys, outpoint, amount, to):
    tx = Transaction((TxInput(outpoint),), (TxOutput(amount, PayToPubKeyHash.for_key(pubkeys[to])),))
    return sign_transaction(tx, [[keys['alice']]])


def test_double_spend_in_block(chain, spendable, keys, pubkeys, miner_script):
    to_bob = _pay(keys, pubkeys, spendable, 10 * COIN, 'bob')
    to_carol = _pay(keys, pubkeys, spendable, 10 * COIN, 'carol')
    block = _solve(chain, chain.tip, [build_coinbase(3, miner_script, 50 * COIN), to_bob, to_carol])
    with pytest.raises(DoubleSpendInBlock):
        validate_block(block, chain)
    tip = chain.tip
    event = chain.connect_block(block)
    assert event.kind == EventKind.REJECTED_INVALID
    assert event.reason.startswith('DoubleSpendInBlock')
    assert chain.tip == tip


def test_duplicate_txid_in_block(chain, spendable, keys, pubkeys, miner_script):
    to_bob = _pay(keys, pubkeys, spendable, 10 * COIN, 'bob')
    block = _solve(chain, chain.tip, [build_coinbase(3, miner_script, 50 * COIN), to_bob, to_bob])
    with pytest.raises(DuplicateTxid):
        validate_block(block, chain)


def test_template_prefers_higher_fee(chain, spendable, keys, pubkeys, miner_script):
    fee3 = _pay(keys, pubkeys, spendable, 50 * COIN - 3, 'carol')
    fee5 = _pay(keys, pubkeys, spendable, 50 * COIN - 5, 'bob')
    template = build_template(chain, [fee3, fee5], miner_script)
    assert list(template.transactions[1:]) == [fee5]
    assert template.coinbase.output_total == 50 * COIN + 5
    assert chain.connect_block(mine_block(template, 0, 1 << 20)).kind == EventKind.EXTENDED_ACTIVE_CHAIN


def test_tip_independent_of_arrival_order(chain, mine_on, genesis, params):
    main = []
    for _ in range(4):
        main.append(mine_on(chain))
        chain.connect_block(main[-1])
    side = [main[0]]
    for _ in range(3):
        side.append(mine_on(chain, parent=side[-1].hash, extra_nonce=1))
        chain.connect_block(side[-1])
    # heights 2..4 each have two competitors; the main branch was seen first
    assert chain.tip == main[-1].hash

    blocks = main + side[1:]
    height = {b.hash: chain.index[b.hash].height for b in blocks}
    rng = np.random.default_rng(8)
    for _ in range(20):
        slots = {}
        for b in blocks:
            slots.setdefault(height[b.hash], []).append(b)
        shuffled = [blocks[i] for i in rng.permutation(len(blocks))]
        # equal-height competitors keep their original relative order
        order = [slots[height[b.hash]].pop(0) for b in shuffled]
        fresh = ChainState(genesis, params)
        for b in order:
            fresh.connect_block(b)
        assert fresh.tip == chain.tip
        assert fresh.utxo == chain.utxo
