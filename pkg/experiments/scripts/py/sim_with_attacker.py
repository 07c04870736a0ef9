import argparse
import dataclasses
import os
import sys

sys.path.append(os.path.abspath('../../..'))
from nakalab import config as nk_config
from nakalab.attacker.double_spend import DoubleSpendAttacker
from nakalab.attacker.sybil import SybilAttacker
from nakalab.simulator.experiments import build_strategies
from nakalab.simulator.metrics import write_outputs
from nakalab.simulator.simulator import NetworkSimulator
from nakalab.utils.data import to_json
from nakalab.utils.exp import add_sim_params, get_sim_config, args_to_dict


def sim_with_attacker(args, unknown_args):
    config = get_sim_config(args)

    # Set up attackers
    # Name | AttackerObj | ConfigPrefix | Defaults
    atk_defaults = dataclasses.asdict(config.attacker) if config.attacker else {'enable': False}
    attackers_conf = [('DoubleSpend', DoubleSpendAttacker(), 'atk', atk_defaults),
                      ('Sybil', SybilAttacker(), 'sybil', None)]
    attackers = []
    for name, attacker, prefix, defaults in attackers_conf:
        aargs = attacker.parse_arguments(unknown_args, prefix, defaults)
        if name == 'DoubleSpend' and not aargs.enable:
            config = dataclasses.replace(config, attacker=None)
        if aargs.enable:
            config = attacker.prepare(config, aargs)
            attackers.append((name, attacker, aargs))

    simulator = NetworkSimulator(config.validate(), build_strategies(config))
    for name, attacker, aargs in attackers:
        attacker.load_attacker(args, aargs, simulator)

    if config.log_to_wandb:
        import wandb
        args_dict = vars(args)
        args_dict.update(args_to_dict(unknown_args))
        wandb.init(
            project=args.exp_name,
            name=args.case_name,
            config=args_dict
        )

    simulator.run()
    metrics = simulator.metrics()
    write_outputs(metrics, simulator.events, simulator.block_rows(), args.out or nk_config.output_dir)
    record = metrics.to_dict()
    for name, attacker, aargs in attackers:
        record[name] = attacker.attack(args, aargs, simulator)
    if config.log_to_wandb:
        import wandb
        wandb.log({f'{name}/{k}': v for name, attacker, aargs in attackers
                   for k, v in record[name].items()})
    print(to_json(record))


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    add_sim_params(parser)
    args, remain = parser.parse_known_args()
    sim_with_attacker(args, remain)
