import argparse
import dataclasses
import os
from time import perf_counter as timer

import fhmmdp

### PARSE ARGUMENTS

parser = argparse.ArgumentParser(description='Train an FHMM on synthetic household data and compare the state perturbation mechanism with the two noise baselines over a range of privacy budgets.')

parser.add_argument('duration', type=int, nargs='?', default=5000,
    help='the number of synthetic samples per household, half of which are used for training [5000]')
parser.add_argument('-c', '--config', default=None, metavar='FILE',
    help='YAML configuration file. Default: three synthetic appliances')
parser.add_argument('-e', '--epsilons', nargs='*', type=float, default=[0.1, 1, 5, 10], metavar='EPS',
    help='Privacy budgets')
parser.add_argument('-m', '--mechanisms', nargs='*', default=['identity', 'states', 'aggregate-laplace', 'hmm-resynth'],
    choices=['identity', 'states', 'aggregate-laplace', 'hmm-resynth'], metavar='M',
    help='Obfuscation mechanisms')
parser.add_argument('-n', '--num-runs', default=20, type=int, metavar='N',
    help='Number of seeds per (mechanism, epsilon) cell')
parser.add_argument('-s', '--seed', type=int, default=0,
    help='Global seed. Default: 0')
parser.add_argument('--sensitivity', default='global', choices=['global', 'local', 'smooth'],
    help='Sensitivity mode of the state perturbation. Default: global')
parser.add_argument('-b', '--beta', type=float, default=None,
    help='Smooth sensitivity damping. Default: 0.1')
parser.add_argument('--state-source', default='viterbi', choices=['viterbi', 'truth'],
    help='Perturb decoded (viterbi) or ground-truth switch states. Default: viterbi')
parser.add_argument('-j', '--jobs', type=int, default=1,
    help='Worker processes for the sweep cells')
parser.add_argument('--no-save', action='store_true', default=False,
    help='Disable saving results')

args = parser.parse_args()


### PREPARATIONS

base_dir = os.path.dirname(os.path.realpath(__file__))

config = fhmmdp.load_config(args.config)
config = dataclasses.replace(config,
    seed = args.seed,
    synth = dataclasses.replace(config.synth, duration=args.duration),
    privacy = dataclasses.replace(config.privacy, sensitivity=args.sensitivity, beta=args.beta,
                                  state_source=args.state_source))


### SETUP

tic = timer()
dataset = fhmmdp.synth_generate(dataclasses.replace(config.synth, seed=fhmmdp.derive_seed(args.seed, 'synth', 0)))
train, evaluate = fhmmdp.split_dataset(dataset, config.train.fraction)
models = fhmmdp.train_models(train.per_appliance, config.omegas(train.appliance_ids), seed=args.seed)
fhmm = fhmmdp.build_fhmm(models, config.train.max_joint_states)
setup_time = timer() - tic
print('Trained FHMM with {} joint states in {:.4f} s'.format(fhmm.num_joint_states, setup_time))


### RUNS

def print_cell(report):
    print('Run {} eps={} seed={}: attack F1 {:.4f}, KL {:.4f}, billing error {:.4f}, {} negative values'.format(
        report.mechanism, report.epsilon, report.seed, report.macro.f1, report.kl_divergence,
        report.billing_relative_error, report.negative_value_count))

tic = timer()
reports = fhmmdp.run_sweep(evaluate, fhmm, args.mechanisms, args.epsilons, range(args.num_runs),
                           privacy=config.privacy, train_aggregate=train.aggregate,
                           kl_bins=config.sweep.kl_bins, global_seed=args.seed, jobs=args.jobs,
                           callback=print_cell)
sweep_time = timer() - tic

print('###')
fhmmdp.print_results(reports, setup_time=setup_time, sweep_time=sweep_time,
                     entropy_band=config.sweep.entropy_band)
print('###')


### SAVE RESULTS

if not args.no_save:
    results_dir = os.path.join(base_dir, 'results')

    sweep_name = 'synth{}_{}'.format(args.duration, args.sensitivity)
    if args.sensitivity == 'smooth' and args.beta is not None:
        sweep_name += '_beta{}'.format(args.beta)
    if args.state_source != 'viterbi':
        sweep_name += '_' + args.state_source
    sweep_name += '_seed{}'.format(args.seed)

    fhmmdp.save_results(results_dir, sweep_name, reports, args.__dict__, file=__file__,
                        entropy_band=config.sweep.entropy_band)
