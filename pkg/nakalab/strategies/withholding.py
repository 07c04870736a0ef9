from typing import Optional

from nakalab.consensus.block import Block
from nakalab.consensus.chain import ConnectEvent, EventKind
from nakalab.simulator.simulator import MiningStrategy
from nakalab.utils.args import AttackConfig


class WithholdingStrategy(MiningStrategy):
    """
    Double-spend by withholding. A round starts at a fork point whose first public successor
    holds the payment. The attacker extends a private branch from the fork point and releases it
    once the public branch has `confirmations` blocks and the private branch is strictly longer.
    A round is lost when the public branch leads by `max_deficit` blocks.
    """

    def __init__(self, node_id: int, hashpower: float, attack: AttackConfig, simulator=None):
        super().__init__(node_id, hashpower, simulator)
        self.attack = attack
        self.fork_point: Optional[bytes] = None
        self.fork_height = 0
        self.private: list[Block] = []
        self.public_tip: Optional[bytes] = None
        self.public_height = 0
        self.rounds = 0
        self.successes = 0
        self.failures = 0
        self.published_blocks = 0

    @property
    def success_frequency(self) -> float:
        return self.successes / self.rounds if self.rounds else 0.0

    def _start_round(self, fork_point: bytes):
        chain = self.node.chain
        self.fork_point = fork_point
        self.fork_height = chain.index[fork_point].height
        self.private = []
        self.public_tip = fork_point
        self.public_height = self.fork_height

    def _ensure_round(self):
        if self.fork_point is None:
            self._start_round(self.node.chain.tip)

    def on_block_found(self, now: float):
        self._ensure_round()
        parent = self.private[-1].hash if self.private else self.fork_point
        self.private.append(self.simulator.mine(self.node_id, parent=parent, publish=False))
        self._settle()

    def on_block_connected(self, event: ConnectEvent, now: float):
        if event.kind in (EventKind.STORED_PENDING_PARENT, EventKind.ALREADY_KNOWN, EventKind.REJECTED_INVALID):
            return
        found = self.simulator.found.get(event.block_hash)
        if found is not None and found.miner == self.node_id:
            return
        self._ensure_round()
        chain = self.node.chain
        entry = chain.index[event.block_hash]
        if entry.height <= self.public_height:
            return
        if chain.ancestor(entry.hash, self.fork_height).hash != self.fork_point:
            # the network moved past our fork point on a branch we had not seen; race afresh from it
            self._start_round(entry.hash)
            return
        self.public_tip = entry.hash
        self.public_height = entry.height
        self._settle()

    def _settle(self):
        m = len(self.private)
        n = self.public_height - self.fork_height
        if n >= self.attack.confirmations and m > n:
            for block in self.private:
                self.simulator.publish(self.node_id, block)
            self.published_blocks += m
            self.successes += 1
            self.rounds += 1
            self._start_round(self.private[-1].hash)
        elif n - m >= self.attack.max_deficit:
            self.failures += 1
            self.rounds += 1
            self._start_round(self.public_tip)

