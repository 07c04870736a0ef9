import dataclasses
import math
from typing import Optional

import numpy as np
from scipy.stats import chisquare
from tqdm import tqdm

from nakalab.attacker.sybil import SybilAttacker, SybilArguments
from nakalab.simulator.errors import InvalidFraction
from nakalab.simulator.metrics import Metrics
from nakalab.simulator.simulator import NetworkSimulator, MiningStrategy, SimEvent
from nakalab.strategies.basic import HonestMiningStrategy
from nakalab.strategies.withholding import WithholdingStrategy
from nakalab.utils.args import SimConfig
from nakalab.utils.exp import stream, STREAM_RACE, STREAM_ORACLE

RACE_CHUNK = 4096


def attacker_hashpower(config: SimConfig) -> float:
    """Hashpower that gives the attacker fraction q of the total rate."""
    q = config.attacker.hashpower_fraction
    return q / (1 - q) * sum(config.hashpowers)


def build_strategies(config: SimConfig) -> dict[int, MiningStrategy]:
    strategies: dict[int, MiningStrategy] = {n: HonestMiningStrategy(n, h) for n, h in config.miners}
    if config.attacker_enabled:
        node = config.attacker_node
        strategies[node] = WithholdingStrategy(node, attacker_hashpower(config), config.attacker)
    return strategies


def simulate(config: SimConfig) -> NetworkSimulator:
    sim = NetworkSimulator(config, build_strategies(config)).run()
    if config.log_to_wandb:
        import wandb
        wandb.log({f'final/{k}': v for k, v in sim.metrics().to_dict().items() if isinstance(v, (int, float))})
    return sim


def run_simulation(config: SimConfig) -> tuple[Metrics, list[SimEvent]]:
    sim = simulate(config)
    return sim.metrics(), sim.events


def _counts_until(sim: NetworkSimulator, miners, horizon: float) -> list[int]:
    return [sum(1 for t in sim.find_times[n] if t <= horizon) for n in miners]


@dataclasses.dataclass
class MinerShareReport:
    miners: list[int]
    hashpowers: list[float]
    counts: list[int]
    shares: list[float]
    expected_shares: list[float]
    chi2: float
    p_value: float


def miner_share_experiment(config: SimConfig, trials: int = 10_000) -> MinerShareReport:
    """Block shares over `trials` found blocks against the hashpower proportions."""
    cfg = dataclasses.replace(config, duration_blocks=trials, attacker=None, record_events=False)
    sim = simulate(cfg)
    counts = _counts_until(sim, cfg.miner_nodes, sim.horizon_s)
    total = sum(counts)
    power = sum(cfg.hashpowers)
    expected = [h / power for h in cfg.hashpowers]
    observed = [(c, e * total) for c, e in zip(counts, expected) if e > 0]
    if len(observed) > 1:
        chi2, p_value = chisquare([o for o, _ in observed], [e for _, e in observed])
    else:
        chi2, p_value = 0.0, 1.0
    return MinerShareReport(list(cfg.miner_nodes), list(cfg.hashpowers), counts,
                            [c / total for c in counts], expected, float(chi2), float(p_value))


@dataclasses.dataclass
class SybilReport:
    extra_identities: int
    horizon_s: float
    baseline_counts: dict[int, int]
    sybil_counts: dict[int, int]
    baseline_shares: dict[int, float]
    sybil_shares: dict[int, float]
    sybil_blocks: int

    @property
    def identical(self) -> bool:
        return self.baseline_counts == self.sybil_counts


def sybil_experiment(base_config: SimConfig, extra_identities: int) -> SybilReport:
    """
    Paired runs with and without zero-hashpower identities. Mining draws come from per-miner
    streams, so counts compared up to the earlier of the two stopping times match exactly.
    """
    base_config = dataclasses.replace(base_config, record_events=False)
    attacker = SybilAttacker()
    sybil_config = attacker.prepare(base_config, SybilArguments(enable=True, identities=extra_identities))
    baseline = simulate(base_config)
    with_sybils = simulate(sybil_config)
    horizon = min(baseline.horizon_s, with_sybils.horizon_s)
    miners = base_config.miner_nodes
    base_counts = dict(zip(miners, _counts_until(baseline, miners, horizon)))
    sybil_counts = dict(zip(miners, _counts_until(with_sybils, miners, horizon)))

    def shares(counts):
        total = sum(counts.values())
        return {n: c / total if total else 0.0 for n, c in counts.items()}

    return SybilReport(extra_identities, horizon, base_counts, sybil_counts, shares(base_counts),
                       shares(sybil_counts), attacker.attack(None, None, with_sybils)['sybil_blocks'])


def _check_race_args(q: float, z: int, trials: int):
    if not 0 <= q < 1:
        raise InvalidFraction(f'attacker fraction must be in [0, 1), got {q}')
    if z < 0 or trials < 1:
        raise ValueError(f'need z >= 0 and trials >= 1, got z={z}, trials={trials}')


def double_spend_experiment(q: float, z: int, trials: int, seed: int = 0, max_deficit: int = 200,
                            progress: bool = False) -> float:
    """
    Withholding race as two competing exponential clocks, attacker at rate q and the honest
    network at rate 1 - q. A trial succeeds once the public branch has z blocks and the private
    branch is strictly longer; it fails once the public branch leads by `max_deficit`.
    """
    _check_race_args(q, z, trials)
    if q == 0:
        return 0.0
    rng = stream(seed, STREAM_RACE)
    successes = 0
    with tqdm(total=trials, disable=not progress, desc=f'race q={q} z={z}') as pbar:
        for start in range(0, trials, RACE_CHUNK):
            size = min(RACE_CHUNK, trials - start)
            t_att = rng.standard_exponential(size) / q
            t_hon = rng.standard_exponential(size) / (1 - q)
            m = np.zeros(size, dtype=np.int64)
            n = np.zeros(size, dtype=np.int64)
            while m.size:
                now = np.minimum(t_att, t_hon)
                att = t_att < t_hon
                hon = ~att
                m += att
                n += hon
                t_att[att] = now[att] + rng.standard_exponential(int(att.sum())) / q
                t_hon[hon] = now[hon] + rng.standard_exponential(int(hon.sum())) / (1 - q)
                won = (n >= z) & (m > n)
                done = won | (n - m >= max_deficit)
                if done.any():
                    successes += int(won.sum())
                    pbar.update(int(done.sum()))
                    keep = ~done
                    t_att, t_hon, m, n = t_att[keep], t_hon[keep], m[keep], n[keep]
    return successes / trials


def gamblers_ruin_oracle(q: float, z: int, trials: int, seed: int = 0, max_deficit: int = 200) -> float:
    """The same race as a biased random walk: each block is the attacker's with probability q."""
    _check_race_args(q, z, trials)
    rng = stream(seed, STREAM_ORACLE)
    successes = 0
    for start in range(0, trials, RACE_CHUNK):
        size = min(RACE_CHUNK, trials - start)
        lead = np.zeros(size, dtype=np.int64)
        public = np.zeros(size, dtype=np.int64)
        while lead.size:
            step = rng.random(lead.size) < q
            lead += np.where(step, 1, -1)
            public += ~step
            won = (public >= z) & (lead > 0)
            done = won | (lead <= -max_deficit)
            if done.any():
                successes += int(won.sum())
                lead, public = lead[~done], public[~done]
    return successes / trials


def standard_error(p: float, trials: int) -> float:
    return math.sqrt(p * (1 - p) / trials)


def agree_within(p1: float, p2: float, trials: int, sigmas: float = 3.0, trials2: Optional[int] = None) -> bool:
    """Two Monte Carlo frequencies agree within `sigmas` pooled standard errors."""
    trials2 = trials2 or trials
    pooled = (p1 * trials + p2 * trials2) / (trials + trials2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / trials + 1 / trials2))
    return abs(p1 - p2) <= sigmas * se


@dataclasses.dataclass
class NetworkRaceReport:
    hashpower_fraction: float
    confirmations: int
    max_deficit: int
    rounds: int
    successes: int
    frequency: float
    oracle_frequency: float
    oracle_trials: int

    @property
    def agrees(self) -> bool:
        return self.rounds > 0 and agree_within(self.frequency, self.oracle_frequency, self.rounds,
                                                trials2=self.oracle_trials)


def network_double_spend_experiment(config: SimConfig, oracle_trials: int = 10_000,
                                    seed: int = 0) -> NetworkRaceReport:
    """
    Withholding rounds played by the attacker node inside a full network run, scored against the
    random-walk oracle with the same fraction, confirmations and give-up deficit.
    """
    if not config.attacker_enabled:
        raise ValueError('network race needs an enabled attacker')
    attack = config.attacker
    sim = simulate(dataclasses.replace(config, record_events=False))
    strategy = sim.strategies[config.attacker_node]
    oracle = gamblers_ruin_oracle(attack.hashpower_fraction, attack.confirmations, oracle_trials, seed,
                                  attack.max_deficit)
    return NetworkRaceReport(attack.hashpower_fraction, attack.confirmations, attack.max_deficit,
                             strategy.rounds, strategy.successes, strategy.success_frequency, oracle,
                             oracle_trials)
