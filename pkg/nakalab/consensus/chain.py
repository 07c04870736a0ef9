"""
Block tree, fork choice and ledger state for one node.

The active chain is the tip of greatest height; between tips of equal height the first received
wins. Each stored block keeps the UTXO diff it produced, so the ledger at any known block is
reached from the active tip by reverting to the fork point and replaying the branch.
"""
import dataclasses
import itertools
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

from nakalab.consensus.block import Block, Target, check_pow, retarget, block_template
from nakalab.consensus.errors import BlockValidationError, BadPoW, WrongTarget, BadMerkleRoot, BadCoinbase, \
    ExcessCoinbase, DoubleSpendInBlock, DuplicateTxid, BadTimestamp, BadTransaction, BadGenesis, UnknownParent
from nakalab.crypto.hashing import merkle_root
from nakalab.ledger.emission import reward_at_height
from nakalab.ledger.errors import LedgerError, OutputExists
from nakalab.ledger.script import LockingScript
from nakalab.ledger.transaction import Transaction, TxOutput, build_coinbase, coinbase_height
from nakalab.ledger.utxo import UTXOSet, UtxoDiff, BlockStaging, validate_transaction, tx_fee, \
    apply_block_to_utxo
from nakalab.utils.args import ConsensusConfig


class EventKind(Enum):
    EXTENDED_ACTIVE_CHAIN = 'ExtendedActiveChain'
    CREATED_SIDE_CHAIN = 'CreatedSideChain'
    TRIGGERED_REORG = 'TriggeredReorg'
    STORED_PENDING_PARENT = 'StoredPendingParent'
    REJECTED_INVALID = 'RejectedInvalid'
    ALREADY_KNOWN = 'AlreadyKnown'


@dataclasses.dataclass(frozen=True)
class ConnectEvent:
    kind: EventKind
    block_hash: bytes
    height: Optional[int] = None
    old_tip: Optional[bytes] = None
    new_tip: Optional[bytes] = None
    rolled_back: tuple[bytes, ...] = ()
    connected: tuple[bytes, ...] = ()
    reason: Optional[str] = None
    cascaded: tuple['ConnectEvent', ...] = ()

    @property
    def tip_changed(self) -> bool:
        return self.kind in (EventKind.EXTENDED_ACTIVE_CHAIN, EventKind.TRIGGERED_REORG)

    def flatten(self) -> Iterator['ConnectEvent']:
        """This event followed by every event of blocks released from the pending pool."""
        yield self
        for child in self.cascaded:
            yield from child.flatten()


@dataclasses.dataclass
class BlockEntry:
    block: Block
    height: int
    arrival: int
    diff: UtxoDiff

    @property
    def hash(self) -> bytes:
        return self.block.hash

    @property
    def parent(self) -> bytes:
        return self.block.header.prev_hash

    @property
    def timestamp(self) -> int:
        return self.block.header.timestamp

    @property
    def target(self) -> Target:
        return self.block.header.target


class ChainState:
    """Single-writer: connect_block mutates; lookups are read-only."""

    def __init__(self, genesis: Block, params: Optional[ConsensusConfig] = None):
        self.params = params or ConsensusConfig()
        if not check_pow(genesis.header) or genesis.header.prev_hash != bytes(32):
            raise BadGenesis('genesis must meet its own target and have a zero parent hash')
        if len(genesis.transactions) != 1 or not genesis.coinbase.is_coinbase:
            raise BadGenesis('genesis must hold exactly one coinbase transaction')
        if genesis.header.merkle_root != merkle_root(genesis.txids):
            raise BadGenesis('genesis merkle root does not match its coinbase')
        if genesis.coinbase.output_total > reward_at_height(0):
            raise BadGenesis('genesis coinbase exceeds the initial subsidy')
        empty = UTXOSet()
        staging = BlockStaging(empty, 0)
        staging.add(genesis.coinbase)
        diff = staging.diff()
        self.index: dict[bytes, BlockEntry] = {genesis.hash: BlockEntry(genesis, 0, 0, diff)}
        self.active: list[bytes] = [genesis.hash]
        self.utxo: UTXOSet = empty.apply_diff(diff)
        self.side_tips: set[bytes] = set()
        self.pending: dict[bytes, list[tuple[Block, int]]] = {}
        self.pending_hashes: set[bytes] = set()
        self.rejected: dict[bytes, str] = {}
        self._arrivals = itertools.count(1)

    # ---- queries -------------------------------------------------------------------------------------

    @property
    def genesis(self) -> Block:
        return self.index[self.active[0]].block

    @property
    def tip(self) -> bytes:
        return self.active[-1]

    @property
    def tip_entry(self) -> BlockEntry:
        return self.index[self.active[-1]]

    @property
    def height(self) -> int:
        return len(self.active) - 1

    def __contains__(self, block_hash: bytes) -> bool:
        return block_hash in self.index

    def is_active(self, block_hash: bytes) -> bool:
        entry = self.index.get(block_hash)
        return entry is not None and entry.height < len(self.active) and self.active[entry.height] == block_hash

    def active_chain(self) -> list[BlockEntry]:
        return [self.index[h] for h in self.active]

    def stale_blocks(self) -> list[BlockEntry]:
        return [e for h, e in self.index.items() if not self.is_active(h)]

    def ancestor(self, block_hash: bytes, height: int) -> BlockEntry:
        entry = self.index[block_hash]
        if height > entry.height or height < 0:
            raise ValueError(f'no ancestor at height {height} for a block at height {entry.height}')
        while entry.height > height:
            if self.is_active(entry.hash):
                return self.index[self.active[height]]
            entry = self.index[entry.parent]
        return entry

    def median_time_past(self, block_hash: bytes) -> int:
        stamps = []
        entry = self.index[block_hash]
        while len(stamps) < self.params.median_time_span:
            stamps.append(entry.timestamp)
            if entry.height == 0:
                break
            entry = self.index[entry.parent]
        stamps.sort()
        return stamps[len(stamps) // 2]

    def scheduled_target(self, parent_hash: bytes) -> Target:
        """Target required of a child of `parent_hash`."""
        parent = self.index[parent_hash]
        interval = self.params.retarget_interval
        height = parent.height + 1
        if height % interval != 0:
            return parent.target
        first = self.ancestor(parent_hash, height - interval)
        # the window's first and last timestamps span interval - 1 block gaps
        span = (parent.timestamp - first.timestamp) * interval // (interval - 1)
        return retarget(parent.target, max(span, 1), self.params)

    def utxo_at(self, block_hash: bytes) -> UTXOSet:
        if block_hash == self.tip:
            return self.utxo
        branch = []
        entry = self.index[block_hash]
        while not self.is_active(entry.hash):
            branch.append(entry)
            entry = self.index[entry.parent]
        utxo = self.utxo
        for h in reversed(self.active[entry.height + 1:]):
            utxo = utxo.revert(self.index[h].diff)
        for e in reversed(branch):
            utxo = utxo.apply_diff(e.diff)
        return utxo

    def replay_utxo(self) -> UTXOSet:
        """Recompute the active ledger from genesis, block by block."""
        utxo = UTXOSet()
        for h in self.active:
            utxo = apply_block_to_utxo(self.index[h].block, utxo)
        return utxo.flattened()

    # ---- validation ----------------------------------------------------------------------------------

    def _check_block(self, block: Block, parent: BlockEntry, parent_utxo: UTXOSet) -> UtxoDiff:
        header = block.header
        height = parent.height + 1
        if not check_pow(header):
            raise BadPoW(f'header hash {block.hash.hex()} exceeds its target')
        expected = self.scheduled_target(parent.hash)
        if header.target != expected:
            raise WrongTarget(f'target {header.target.threshold:#x} != scheduled {expected.threshold:#x}')
        txs = block.transactions
        if not txs:
            raise BadCoinbase('block has no transactions')
        if header.merkle_root != merkle_root(block.txids):
            raise BadMerkleRoot(f'header commits to {header.merkle_root.hex()}')
        if not txs[0].is_coinbase or any(tx.is_coinbase for tx in txs[1:]):
            raise BadCoinbase('exactly one coinbase, in first position, is required')
        if coinbase_height(txs[0]) != height:
            raise BadCoinbase(f'coinbase is not tagged with height {height}')
        if len(set(block.txids)) != len(txs):
            raise DuplicateTxid('block lists the same transaction twice')
        mtp = self.median_time_past(parent.hash)
        if header.timestamp <= mtp:
            raise BadTimestamp(f'timestamp {header.timestamp} not after median time past {mtp}')

        staging = BlockStaging(parent_utxo, height)
        try:
            staging.add(txs[0])
        except OutputExists as e:
            raise DuplicateTxid(f'coinbase {e}') from e
        spent = set()
        fees = 0
        for tx in txs[1:]:
            for inp in tx.inputs:
                if inp.outpoint in spent:
                    raise DoubleSpendInBlock(f'{inp.outpoint} spent twice in block')
            try:
                validate_transaction(tx, staging, height, self.params.coinbase_maturity)
                fees += tx_fee(tx, staging)
                staging.add(tx)
            except OutputExists as e:
                raise DuplicateTxid(str(e)) from e
            except LedgerError as e:
                raise BadTransaction(e) from e
            spent.update(inp.outpoint for inp in tx.inputs)
        allowed = reward_at_height(height) + fees
        if txs[0].output_total > allowed:
            raise ExcessCoinbase(f'coinbase claims {txs[0].output_total} sat, at most {allowed} allowed')
        return staging.diff()

    def validate_block(self, block: Block):
        parent = self.index.get(block.header.prev_hash)
        if parent is None:
            raise UnknownParent(f'parent {block.header.prev_hash.hex()} is not known')
        self._check_block(block, parent, self.utxo_at(parent.hash))

    # ---- fork choice ---------------------------------------------------------------------------------

    def _beats_tip(self, entry: BlockEntry) -> bool:
        tip = self.tip_entry
        return entry.height > tip.height or (entry.height == tip.height and entry.arrival < tip.arrival)

    def _attach(self, block: Block, arrival: int) -> ConnectEvent:
        block_hash = block.hash
        parent = self.index[block.header.prev_hash]
        parent_utxo = self.utxo_at(parent.hash)
        try:
            diff = self._check_block(block, parent, parent_utxo)
        except BlockValidationError as e:
            self.rejected[block_hash] = e.reason
            return ConnectEvent(EventKind.REJECTED_INVALID, block_hash, parent.height + 1, reason=e.reason)
        entry = BlockEntry(block, parent.height + 1, arrival, diff)
        self.index[block_hash] = entry
        old_tip = self.tip
        if parent.hash == old_tip:
            self.active.append(block_hash)
            self.utxo = parent_utxo.apply_diff(diff)
            return ConnectEvent(EventKind.EXTENDED_ACTIVE_CHAIN, block_hash, entry.height, old_tip, block_hash,
                                connected=(block_hash,))
        if not self._beats_tip(entry):
            self.side_tips.discard(parent.hash)
            self.side_tips.add(block_hash)
            return ConnectEvent(EventKind.CREATED_SIDE_CHAIN, block_hash, entry.height, old_tip, old_tip)

        branch = [entry]
        fork = parent
        while not self.is_active(fork.hash):
            branch.append(fork)
            fork = self.index[fork.parent]
        rolled_back = tuple(self.active[fork.height + 1:])
        connected = tuple(e.hash for e in reversed(branch))
        self.utxo = parent_utxo.apply_diff(diff)
        self.active = self.active[:fork.height + 1] + list(connected)
        self.side_tips.discard(parent.hash)
        self.side_tips.discard(block_hash)
        if rolled_back:
            self.side_tips.add(old_tip)
        return ConnectEvent(EventKind.TRIGGERED_REORG, block_hash, entry.height, old_tip, block_hash,
                            rolled_back=rolled_back, connected=connected)

    def _reject_descendants(self, block_hash: bytes, reason: str) -> list[ConnectEvent]:
        events = []
        for child, _ in self.pending.pop(block_hash, []):
            self.pending_hashes.discard(child.hash)
            why = f'InvalidAncestor: {reason}'
            self.rejected[child.hash] = why
            events.append(ConnectEvent(EventKind.REJECTED_INVALID, child.hash, reason=why,
                                       cascaded=tuple(self._reject_descendants(child.hash, why))))
        return events

    def _connect(self, block: Block, arrival: int) -> ConnectEvent:
        event = self._attach(block, arrival)
        if event.kind == EventKind.REJECTED_INVALID:
            children = self._reject_descendants(event.block_hash, event.reason)
        else:
            children = []
            for child, child_arrival in self.pending.pop(event.block_hash, []):
                self.pending_hashes.discard(child.hash)
                children.append(self._connect(child, child_arrival))
        return dataclasses.replace(event, cascaded=tuple(children)) if children else event

    def connect_block(self, block: Block, arrival_order: Optional[int] = None) -> ConnectEvent:
        block_hash = block.hash
        if block_hash in self.index or block_hash in self.pending_hashes:
            return ConnectEvent(EventKind.ALREADY_KNOWN, block_hash)
        if block_hash in self.rejected:
            return ConnectEvent(EventKind.REJECTED_INVALID, block_hash, reason=self.rejected[block_hash])
        arrival = next(self._arrivals) if arrival_order is None else arrival_order
        parent_hash = block.header.prev_hash
        if parent_hash in self.rejected:
            why = f'InvalidAncestor: {self.rejected[parent_hash]}'
            self.rejected[block_hash] = why
            return ConnectEvent(EventKind.REJECTED_INVALID, block_hash, reason=why)
        if parent_hash not in self.index:
            self.pending.setdefault(parent_hash, []).append((block, arrival))
            self.pending_hashes.add(block_hash)
            return ConnectEvent(EventKind.STORED_PENDING_PARENT, block_hash)
        return self._connect(block, arrival)


def validate_block(b: Block, chain: ChainState):
    chain.validate_block(b)


def connect_block(chain: ChainState, b: Block, arrival_order: Optional[int] = None) -> ConnectEvent:
    return chain.connect_block(b, arrival_order)


def build_template(chain: ChainState, mempool: Iterable[Transaction], coinbase_script: LockingScript,
                   now: Optional[int] = None, parent: Optional[bytes] = None, extra_nonce: int = 0,
                   extra_outputs: Sequence[TxOutput] = ()) -> Block:
    """
    Unmined block on `parent` (default: the active tip). Transactions go fee-descending with txid
    as tie-break; a transaction that conflicts with one already chosen, or no longer validates, is
    dropped. Timestamp is max(now, median time past + 1); `now` defaults to parent time + spacing.
    """
    parent = parent or chain.tip
    parent_entry = chain.index[parent]
    height = parent_entry.height + 1
    utxo = chain.utxo_at(parent)
    candidates = []
    for tx in mempool:
        if tx.is_coinbase:
            continue
        try:
            candidates.append((tx_fee(tx, utxo), tx))
        except LedgerError:
            continue
    candidates.sort(key=lambda ft: (-ft[0], ft[1].txid))

    staging = BlockStaging(utxo, height)
    chosen, used, fees = [], set(), 0
    for fee, tx in candidates:
        if any(inp.outpoint in used for inp in tx.inputs):
            continue
        try:
            validate_transaction(tx, staging, height, chain.params.coinbase_maturity)
            staging.add(tx)
        except LedgerError:
            continue
        used.update(inp.outpoint for inp in tx.inputs)
        chosen.append(tx)
        fees += fee

    coinbase = build_coinbase(height, coinbase_script, reward_at_height(height) + fees, extra_nonce, extra_outputs)
    if now is None:
        now = parent_entry.timestamp + chain.params.target_spacing_s
    timestamp = max(now, chain.median_time_past(parent) + 1)
    return block_template(parent, [coinbase] + chosen, timestamp, chain.scheduled_target(parent))
