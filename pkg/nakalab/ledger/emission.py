"""
Subsidy schedule: 50 coins per block, halved by integer right shift every 210,000 blocks.
"""
import dataclasses
import datetime
from fractions import Fraction
from typing import Optional

from nakalab.config import INITIAL_SUBSIDY, HALVING_INTERVAL, BLOCKS_PER_YEAR, TARGET_SPACING


def reward_at_epoch(epoch: int) -> int:
    if epoch >= 64:
        return 0
    return INITIAL_SUBSIDY >> epoch


def reward_at_height(h: int) -> int:
    if h < 0:
        raise ValueError(f'negative height {h}')
    return reward_at_epoch(h // HALVING_INTERVAL)


def cumulative_supply(h: int) -> int:
    """Sum of subsidies for heights 0..h-1, one term per epoch."""
    if h < 0:
        raise ValueError(f'negative height {h}')
    total = 0
    epoch = 0
    while epoch * HALVING_INTERVAL < h:
        reward = reward_at_epoch(epoch)
        if reward == 0:
            break
        blocks = min(h, (epoch + 1) * HALVING_INTERVAL) - epoch * HALVING_INTERVAL
        total += blocks * reward
        epoch += 1
    return total


def _last_paying_epoch() -> int:
    epoch = 0
    while reward_at_epoch(epoch + 1) > 0:
        epoch += 1
    return epoch


LAST_PAYING_EPOCH = _last_paying_epoch()
MAX_SUPPLY = cumulative_supply((LAST_PAYING_EPOCH + 1) * HALVING_INTERVAL)


def annualized_issuance(epoch: int) -> Optional[Fraction]:
    """New coins per year over coins in existence at the epoch start; None for epoch 0."""
    supply = cumulative_supply(epoch * HALVING_INTERVAL)
    if supply == 0:
        return None
    return Fraction(reward_at_epoch(epoch) * BLOCKS_PER_YEAR, supply)


@dataclasses.dataclass
class EpochRow:
    epoch: int
    start_height: int
    reward_sat: int
    cumulative_supply_sat: int
    annual_issuance: Optional[Fraction]


def emission_schedule(max_epochs: int = LAST_PAYING_EPOCH + 1) -> list[EpochRow]:
    rows = []
    for epoch in range(max_epochs + 1):
        start = epoch * HALVING_INTERVAL
        rows.append(EpochRow(epoch, start, reward_at_epoch(epoch), cumulative_supply(start),
                             annualized_issuance(epoch)))
    return rows


def block_clock(blocks: int) -> datetime.timedelta:
    """Nominal time covered by a number of blocks; 52,560 blocks make a year."""
    return datetime.timedelta(seconds=blocks * TARGET_SPACING)


def blocks_per_duration(duration: datetime.timedelta) -> int:
    return int(duration.total_seconds()) // TARGET_SPACING
