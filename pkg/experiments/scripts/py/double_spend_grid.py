import argparse
import os
import sys

sys.path.append(os.path.abspath('../../..'))
from nakalab.simulator.experiments import double_spend_experiment, gamblers_ruin_oracle, standard_error, \
    agree_within
from nakalab.utils.data import write_csv
from nakalab.utils.exp import str2bool

COLUMNS = ['q', 'z', 'trials', 'success_frequency', 'se', 'oracle_frequency', 'oracle_se', 'agree']


def double_spend_grid(args):
    if args.log_to_wandb:
        import wandb
        wandb.init(project=args.exp_name, name=args.case_name, config=vars(args))
    rows = []
    for q in args.q:
        for z in args.z:
            p = double_spend_experiment(q, z, args.trials, args.seed, args.max_deficit, progress=args.progress)
            o = gamblers_ruin_oracle(q, z, args.trials, args.seed, args.max_deficit)
            row = [q, z, args.trials, p, standard_error(p, args.trials), o, standard_error(o, args.trials),
                   int(agree_within(p, o, args.trials))]
            rows.append(row)
            if args.log_to_wandb:
                wandb.log(dict(zip(COLUMNS, row)))
    write_csv(args.out, COLUMNS, rows)
    print(f'wrote {len(rows)} rows to {args.out}')


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('--exp_name', type=str, default='nakalab-double-spend')
    parser.add_argument('--case_name', type=str, default='grid')
    parser.add_argument('--q', type=float, nargs='+', default=[0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45])
    parser.add_argument('--z', type=int, nargs='+', default=[0, 1, 2, 3, 4, 5, 6, 8, 10])
    parser.add_argument('--trials', type=int, default=10_000)
    parser.add_argument('--max_deficit', type=int, default=200)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', type=str, default='./out/double_spend_grid.csv')
    parser.add_argument('--progress', type=str2bool, default=True)
    parser.add_argument('--log_to_wandb', type=str2bool, default=False)
    double_spend_grid(parser.parse_args())
