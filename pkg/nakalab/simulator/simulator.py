"""
Discrete-event network of full nodes. Each node keeps its own ChainState; blocks flood over the
peer graph with per-edge latencies and every arrival runs the full connect_block path.
"""
import abc
import dataclasses
import hashlib
import heapq
import itertools
from abc import ABC
from collections import Counter
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from tqdm import tqdm

from nakalab.config import GENESIS_TIMESTAMP
from nakalab.consensus.block import Block, Target, make_genesis, mine_block
from nakalab.consensus.chain import ChainState, ConnectEvent, EventKind, build_template
from nakalab.consensus.errors import Exhausted
from nakalab.crypto.ecc import Scalar, PublicKey, N, derive_public_key
from nakalab.ledger.script import PayToPubKeyHash
from nakalab.ledger.transaction import OutPoint, Transaction, TxInput, TxOutput, sign_transaction
from nakalab.simulator.metrics import Metrics, BlockRow
from nakalab.simulator.topology import build_topology
from nakalab.utils.args import SimConfig
from nakalab.utils.exp import get_latency_model, stream, STREAM_MINING, STREAM_LATENCY, STREAM_TRAFFIC

NONCE_BUDGET = 1 << 20
_DRAW_BATCH = 1024
_LATENCY_BATCH = 64


class SimEventKind(Enum):
    BLOCK_FOUND = 'BlockFound'
    BLOCK_ARRIVAL = 'BlockArrival'
    TX_ARRIVAL = 'TxArrival'


@dataclasses.dataclass(frozen=True)
class SimEvent:
    time: float
    sequence: int
    kind: SimEventKind
    node: int
    block: Optional[Block] = None
    tx: Optional[Transaction] = None
    sender: Optional[int] = None

    @property
    def hash(self) -> bytes:
        return self.block.hash if self.block is not None else self.tx.txid

    def row(self):
        return self.time, self.kind.value, self.node, self.hash


@dataclasses.dataclass
class FoundBlock:
    block: Block
    height: int
    miner: int
    found_time: float
    published: bool
    arrivals: int = 0
    propagation_s: Optional[float] = None


@dataclasses.dataclass
class SimNode:
    node_id: int
    chain: ChainState
    peers: list[int]
    role: str  # 'honest', 'sybil' or 'attacker'
    mempool: dict[bytes, Transaction] = dataclasses.field(default_factory=dict)
    seen_txs: set = dataclasses.field(default_factory=set)

    @property
    def honest(self) -> bool:
        return self.role != 'attacker'


class MiningStrategy(ABC):
    """
    What a mining node does when its clock fires and when blocks reach it.
    """

    def __init__(self, node_id: int, hashpower: float, simulator=None):
        self.node_id = node_id
        self.hashpower = hashpower
        self.simulator: Optional[NetworkSimulator] = simulator

    @abc.abstractmethod
    def on_block_found(self, now: float):
        raise NotImplementedError

    def on_block_connected(self, event: ConnectEvent, now: float):
        pass

    @property
    def node(self) -> SimNode:
        return self.simulator.nodes[self.node_id]


class _ExponentialClock:
    """Gaps of a Poisson process drawn in batches from the miner's own stream."""

    def __init__(self, rng: np.random.Generator, rate: float):
        self.rng = rng
        self.rate = rate
        self._buf = np.empty(0)
        self._pos = 0
        self.next_time = self.gap()

    def gap(self) -> float:
        if self.rate <= 0:
            return float('inf')
        if self._pos == len(self._buf):
            self._buf = self.rng.standard_exponential(_DRAW_BATCH) / self.rate
            self._pos = 0
        g = float(self._buf[self._pos])
        self._pos += 1
        return g

    def advance(self):
        self.next_time += self.gap()


@lru_cache(maxsize=8)
def sim_genesis(zero_bits: int) -> Block:
    return make_genesis(target=Target.from_bits(zero_bits))


@lru_cache(maxsize=1024)
def node_key(node_id: int) -> Scalar:
    seed = hashlib.sha256(b'nakalab-node' + node_id.to_bytes(4, 'little')).digest()
    return Scalar(int.from_bytes(seed, 'big') % (N - 1) + 1)


def node_public_key(node_id: int) -> PublicKey:
    return derive_public_key(node_key(node_id))


class NetworkSimulator(object):
    """
    Event loop: mining clocks and traffic run until the highest honest tip reaches the block
    target; the in-flight queue is then drained, and while honest tips disagree exactly one more
    block is found before draining again.
    """

    def __init__(self, config: SimConfig, strategies: dict[int, MiningStrategy]):
        self.config = config.validate()
        self.params = config.consensus()
        self.graph = build_topology(config)
        self.latency_model = get_latency_model(config.latency_model)
        self.genesis = sim_genesis(config.initial_zero_bits)
        self.nodes: list[SimNode] = []
        for node_id in range(config.total_nodes):
            if node_id < config.node_count:
                role = 'honest'
            elif node_id == config.attacker_node:
                role = 'attacker'
            else:
                role = 'sybil'
            self.nodes.append(SimNode(node_id, ChainState(self.genesis, self.params),
                                      sorted(self.graph.neighbors(node_id)), role))
        self.honest_count = sum(1 for n in self.nodes if n.honest)

        self.strategies = strategies
        total_power = sum(s.hashpower for s in strategies.values())
        self.clocks: dict[int, _ExponentialClock] = {}
        for node_id, strategy in sorted(strategies.items()):
            strategy.simulator = self
            rate = strategy.hashpower / total_power / config.block_interval_target_s
            self.clocks[node_id] = _ExponentialClock(stream(config.rng_seed, STREAM_MINING, node_id), rate)

        self._edge_rngs: dict[tuple[int, int], np.random.Generator] = {}
        self._edge_bufs: dict[tuple[int, int], list] = {}
        self._traffic_rng = stream(config.rng_seed, STREAM_TRAFFIC)
        self._traffic_spent: set[OutPoint] = set()
        self._next_tx = self._traffic_gap() if config.tx_rate_per_s > 0 else float('inf')

        self._queue: list = []
        self._seq = itertools.count()
        self.now = 0.0
        self.events: list[SimEvent] = []
        self.found: dict[bytes, FoundBlock] = {}
        self.find_times: dict[int, list[float]] = {node_id: [] for node_id in strategies}
        self.reorg_depths: Counter = Counter()
        self.max_height = 0
        self.horizon_s: Optional[float] = None
        self._mining = True
        self._pbar = None

    # ---- randomness ----------------------------------------------------------------------------------

    def _delay(self, a: int, b: int) -> float:
        edge = (a, b) if a < b else (b, a)
        buf = self._edge_bufs.get(edge)
        if not buf:
            rng = self._edge_rngs.get(edge)
            if rng is None:
                rng = self._edge_rngs[edge] = stream(self.config.rng_seed, STREAM_LATENCY, *edge)
            buf = list(self.latency_model(rng, self.config.latency_mean_s, _LATENCY_BATCH)[::-1])
            self._edge_bufs[edge] = buf
        return float(buf.pop())

    def _traffic_gap(self) -> float:
        return float(self._traffic_rng.exponential(1.0 / self.config.tx_rate_per_s))

    # ---- event plumbing ------------------------------------------------------------------------------

    def _push(self, time: float, kind: SimEventKind, node: int, block=None, tx=None, sender=None):
        event = SimEvent(time, next(self._seq), kind, node, block, tx, sender)
        heapq.heappush(self._queue, (time, event.sequence, event))

    def _log(self, event: SimEvent):
        if self.config.record_events:
            self.events.append(event)

    def _send(self, node_id: int, exclude: Optional[int], block: Block = None, tx: Transaction = None):
        kind = SimEventKind.BLOCK_ARRIVAL if block is not None else SimEventKind.TX_ARRIVAL
        for peer in self.nodes[node_id].peers:
            if peer != exclude:
                self._push(self.now + self._delay(node_id, peer), kind, peer, block, tx, node_id)

    def _on_connect(self, node: SimNode, event: ConnectEvent):
        if event.kind == EventKind.ALREADY_KNOWN or event.kind == EventKind.REJECTED_INVALID:
            return
        if event.kind != EventKind.STORED_PENDING_PARENT:
            self._arrived(node, event.block_hash)
        if event.tip_changed:
            for h in event.connected:
                for tx in node.chain.index[h].block.transactions[1:]:
                    node.mempool.pop(tx.txid, None)
            if node.honest:
                if event.rolled_back:
                    self.reorg_depths[len(event.rolled_back)] += 1
                if event.height > self.max_height:
                    self._raise_height(event.height)
        strategy = self.strategies.get(node.node_id)
        if strategy is not None:
            strategy.on_block_connected(event, self.now)

    def _arrived(self, node: SimNode, block_hash: bytes):
        record = self.found.get(block_hash)
        if record is None or not node.honest:
            return
        record.arrivals += 1
        if record.arrivals == self.honest_count:
            record.propagation_s = self.now - record.found_time

    def _raise_height(self, height: int):
        if self._pbar is not None:
            self._pbar.update(min(height, self.config.duration_blocks) - min(self.max_height,
                                                                             self.config.duration_blocks))
        self.max_height = height
        if self.config.log_to_wandb and height % 100 == 0:
            import wandb
            wandb.log({'height': height, 'sim_time_s': self.now})
        if self._mining and height >= self.config.duration_blocks:
            self._mining = False
            self.horizon_s = self.now

    def accept_block(self, node_id: int, block: Block, sender: Optional[int] = None, relay: bool = True) \
            -> ConnectEvent:
        node = self.nodes[node_id]
        event = node.chain.connect_block(block)
        for e in event.flatten():
            self._on_connect(node, e)
        if relay and event.kind not in (EventKind.ALREADY_KNOWN, EventKind.REJECTED_INVALID):
            self._send(node_id, sender, block=block)
        return event

    def accept_tx(self, node_id: int, tx: Transaction, sender: Optional[int] = None):
        node = self.nodes[node_id]
        if tx.txid in node.seen_txs:
            return
        node.seen_txs.add(tx.txid)
        node.mempool[tx.txid] = tx
        self._send(node_id, sender, tx=tx)

    # ---- mining --------------------------------------------------------------------------------------

    def payout_script(self, node_id: int) -> PayToPubKeyHash:
        return PayToPubKeyHash.for_key(node_public_key(node_id))

    def mine(self, node_id: int, parent: Optional[bytes] = None, publish: bool = True) -> Block:
        """A block found by `node_id` at the current time, connected at the finder."""
        node = self.nodes[node_id]
        timestamp = GENESIS_TIMESTAMP + int(self.now)
        extra_nonce = 0
        while True:
            template = build_template(node.chain, list(node.mempool.values()), self.payout_script(node_id),
                                      now=timestamp, parent=parent, extra_nonce=extra_nonce)
            try:
                block = mine_block(template, 0, NONCE_BUDGET)
                break
            except Exhausted:
                extra_nonce += 1
        height = node.chain.index[template.header.prev_hash].height + 1
        self.found[block.hash] = FoundBlock(block, height, node_id, self.now, publish)
        self.find_times[node_id].append(self.now)
        self._log(SimEvent(self.now, next(self._seq), SimEventKind.BLOCK_FOUND, node_id, block))
        self.accept_block(node_id, block, relay=publish)
        return block

    def publish(self, node_id: int, block: Block):
        """Release a block that was mined without being relayed."""
        self.found[block.hash].published = True
        self._send(node_id, None, block=block)

    def _fire_clock(self, node_id: int):
        clock = self.clocks[node_id]
        self.now = clock.next_time
        clock.advance()
        self.strategies[node_id].on_block_found(self.now)

    def _earliest_clock(self) -> tuple[float, int]:
        return min((c.next_time, node_id) for node_id, c in self.clocks.items())

    def _skip_paused(self):
        """Drop the ticks that fell due while mining was paused."""
        for clock in self.clocks.values():
            while clock.next_time < self.now:
                clock.advance()

    # ---- background traffic --------------------------------------------------------------------------

    def _spendable_coinbase(self, node_id: int) -> Optional[tuple[OutPoint, int]]:
        chain = self.nodes[node_id].chain
        next_height = chain.height + 1
        for record in self.found.values():
            if record.miner != node_id or next_height - record.height < self.params.coinbase_maturity:
                continue
            if not chain.is_active(record.block.hash):
                continue
            outpoint = OutPoint(record.block.coinbase.txid, 0)
            entry = chain.utxo.get(outpoint)
            if entry is not None and outpoint not in self._traffic_spent:
                return outpoint, entry.output.amount
        return None

    def _generate_tx(self):
        self.now = self._next_tx
        self._next_tx += self._traffic_gap()
        miners = [n for n in sorted(self.strategies) if self.nodes[n].role == 'honest']
        origin = miners[int(self._traffic_rng.integers(len(miners)))]
        spend = self._spendable_coinbase(origin)
        if spend is None:
            return
        outpoint, amount = spend
        fee = min(self.config.tx_fee_sat, amount)
        unsigned = Transaction((TxInput(outpoint),), (TxOutput(amount - fee, self.payout_script(origin)),))
        tx = sign_transaction(unsigned, [[node_key(origin)]])
        self._traffic_spent.add(outpoint)
        self._log(SimEvent(self.now, next(self._seq), SimEventKind.TX_ARRIVAL, origin, tx=tx))
        self.accept_tx(origin, tx)

    # ---- main loop -----------------------------------------------------------------------------------

    def converged(self) -> bool:
        tips = {n.chain.tip for n in self.nodes if n.honest}
        return len(tips) == 1

    def _process(self, event: SimEvent):
        self.now = event.time
        self._log(event)
        if event.kind == SimEventKind.BLOCK_ARRIVAL:
            self.accept_block(event.node, event.block, event.sender)
        else:
            self.accept_tx(event.node, event.tx, event.sender)

    def run(self) -> 'NetworkSimulator':
        with tqdm(total=self.config.duration_blocks, disable=not self.config.progress,
                  desc='simulating blocks') as self._pbar:
            while True:
                t_queue = self._queue[0][0] if self._queue else float('inf')
                t_find, miner = self._earliest_clock()
                if self._mining and min(t_find, self._next_tx) < t_queue:
                    if self._next_tx < t_find:
                        self._generate_tx()
                    else:
                        self._fire_clock(miner)
                elif self._queue:
                    self._process(heapq.heappop(self._queue)[2])
                elif self.converged():
                    break
                else:
                    self._skip_paused()
                    self._fire_clock(self._earliest_clock()[1])
        self._pbar = None
        return self

    # ---- results -------------------------------------------------------------------------------------

    @property
    def reference(self) -> SimNode:
        return self.nodes[0]

    def block_rows(self) -> list[BlockRow]:
        chain = self.reference.chain
        rows = [BlockRow(r.height, h, r.miner, r.found_time, not chain.is_active(h))
                for h, r in self.found.items() if h in chain]
        return sorted(rows, key=lambda r: (r.height, r.found_time))

    def metrics(self) -> Metrics:
        chain = self.reference.chain
        published = [r for r in self.found.values() if r.published]
        stale = sum(1 for r in published if not chain.is_active(r.block.hash))
        total_found = sum(len(t) for t in self.find_times.values())
        blocks_found = {node_id: len(t) for node_id, t in sorted(self.find_times.items())}
        active = chain.active_chain()[1:]
        on_chain = Counter(self.found[e.hash].miner for e in active)
        propagation = [r.propagation_s for r in published
                       if r.propagation_s is not None and self.nodes[r.miner].honest]
        retarget_ratios = []
        entries = chain.active_chain()
        for h in range(self.params.retarget_interval, len(entries), self.params.retarget_interval):
            retarget_ratios.append(entries[h].target.threshold / entries[h - 1].target.threshold)
        metrics = Metrics(
            stale_rate=stale / len(published) if published else 0.0,
            miner_shares={n: c / total_found for n, c in blocks_found.items()} if total_found else {},
            blocks_found=blocks_found,
            chain_shares={n: on_chain[n] / len(active) for n in blocks_found} if active else {},
            propagation_mean_s=float(np.mean(propagation)) if propagation else None,
            propagation_p95_s=float(np.percentile(propagation, 95)) if propagation else None,
            mean_interval_s=self.found[chain.tip].found_time / chain.height if chain.height else None,
            withheld_blocks=sum(1 for r in self.found.values() if not r.published),
            reorg_depths=dict(sorted(self.reorg_depths.items())),
            retarget_ratios=retarget_ratios,
            active_height=chain.height,
            sim_time_s=self.now,
            horizon_s=self.horizon_s,
        )
        attacker = self.strategies.get(self.config.attacker_node) if self.config.attacker_enabled else None
        if attacker is not None:
            metrics.attack_rounds = attacker.rounds
            metrics.attack_success_frequency = attacker.success_frequency
        return metrics
