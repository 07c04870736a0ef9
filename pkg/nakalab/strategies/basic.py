from nakalab.simulator.simulator import MiningStrategy


class HonestMiningStrategy(MiningStrategy):
    """Mine on the current active tip and publish at once."""

    def on_block_found(self, now: float):
        self.simulator.mine(self.node_id)
