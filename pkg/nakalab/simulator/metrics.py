import dataclasses
import os
from typing import Optional, Sequence

from nakalab.utils.data import write_json, write_csv

BLOCK_COLUMNS = ('height', 'hash', 'miner', 'found_time', 'stale')
EVENT_COLUMNS = ('time', 'kind', 'node', 'hash')


@dataclasses.dataclass
class Metrics:
    stale_rate: float = 0.0
    miner_shares: dict[int, float] = dataclasses.field(default_factory=dict)
    blocks_found: dict[int, int] = dataclasses.field(default_factory=dict)
    chain_shares: dict[int, float] = dataclasses.field(default_factory=dict)
    propagation_mean_s: Optional[float] = None
    propagation_p95_s: Optional[float] = None
    mean_interval_s: Optional[float] = None
    attack_success_frequency: Optional[float] = None
    attack_rounds: Optional[int] = None
    withheld_blocks: int = 0
    reorg_depths: dict[int, int] = dataclasses.field(default_factory=dict)
    retarget_ratios: list[float] = dataclasses.field(default_factory=list)
    active_height: int = 0
    sim_time_s: float = 0.0
    horizon_s: Optional[float] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class BlockRow:
    height: int
    hash: bytes
    miner: int
    found_time: float
    stale: bool

    def row(self):
        return self.height, self.hash, self.miner, self.found_time, int(self.stale)


def write_outputs(metrics: Metrics, events: Sequence, blocks: Sequence[BlockRow], out_dir: str) -> dict[str, str]:
    """metrics.json, blocks.csv and events.csv under `out_dir`; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in ('metrics.json', 'blocks.csv', 'events.csv')}
    write_json(paths['metrics.json'], metrics.to_dict())
    write_csv(paths['blocks.csv'], BLOCK_COLUMNS, (b.row() for b in blocks))
    write_csv(paths['events.csv'], EVENT_COLUMNS, (e.row() for e in events))
    return paths
