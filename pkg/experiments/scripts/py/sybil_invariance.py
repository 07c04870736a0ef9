import argparse
import dataclasses
import os
import sys

sys.path.append(os.path.abspath('../../..'))
from nakalab.simulator.experiments import sybil_experiment
from nakalab.utils.data import to_json
from nakalab.utils.exp import add_sim_params, get_sim_config

if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    add_sim_params(parser)
    parser.add_argument('--extra_identities', type=int, nargs='+', default=[10, 100])
    args = parser.parse_args()
    # identities are added by the experiment itself
    config = dataclasses.replace(get_sim_config(args), sybil_identities=0)
    for extra in args.extra_identities:
        report = sybil_experiment(config, extra)
        print(to_json({'extra_identities': extra, 'identical': report.identical, 'horizon_s': report.horizon_s,
                       'baseline_counts': report.baseline_counts, 'sybil_counts': report.sybil_counts}))
