r"""
Command line interface. Every stage reads the same configuration file and
writes plain text artifacts to the output directory, so stages can be run
one by one or chained by `pipeline`:

    fhmmdp synth      synthetic REDD-style house directories
    fhmmdp train      appliance HMMs and the composed FHMM -> model.yaml
    fhmmdp attack     NILM attack (MAP decoding) on an aggregate series
    fhmmdp privatize  obfuscated load of one or more households
    fhmmdp evaluate   metrics of the configured mechanism and epsilon
    fhmmdp sweep      metrics over the mechanism x epsilon x seed grid
    fhmmdp pipeline   all of the above
"""
import argparse
import dataclasses
import logging
import os
import sys

from .config import MECHANISMS, STATE_SOURCES, load_config, override
from .data import PowerSeries, split_dataset
from .errors import ConfigError, EmptySeriesError, FhmmDpError, TrainingError
from .evaluation import effective_epsilon, obfuscate, run_sweep
from .external import (load_model, load_redd_channel, load_redd_house, save_labeled_dataset, save_model,
                       write_power_csv, write_states_csv)
from .appliances import train_models
from .inference import states_to_power, viterbi_map
from .model import build_fhmm
from .privacy import SENSITIVITY_MODES, default_delta_f_watts
from .reaggregation import fog_aggregate
from .seeds import derive_seed, make_rng
from .summary import print_results, save_results
from .synth import synth_generate

logger = logging.getLogger(__name__)

MODEL_FILE = 'model.yaml'


def load_households(config, house=None):
    r"""The datasets of all households: the given house directory, the
    configured real data, or `synth.meters` synthetic households, each
    generated with its own sub-seed."""
    if house is not None or config.data is not None:
        house_dir = house if house is not None else config.data.house_dir
        appliances = list(config.data.appliances) if config.data is not None and config.data.appliances else None
        return [load_redd_house(house_dir, config.interval, appliances)]
    return [synth_generate(dataclasses.replace(config.synth, seed=derive_seed(config.seed, 'synth', m)))
            for m in range(config.synth.meters)]


def _model_path(out, model=None):
    return model if model is not None else os.path.join(out, MODEL_FILE)


def cmd_synth(config, out):
    r"""Write every synthetic household as a REDD-style house directory."""
    if config.synth is None:
        raise ConfigError("The configuration has no synth section")
    paths = []
    for m, dataset in enumerate(load_households(config), start=1):
        path = os.path.join(out, 'house_{}'.format(m))
        save_labeled_dataset(dataset, path)
        paths.append(path)
        print('Wrote {} samples of {} appliances to {}'.format(len(dataset), len(dataset.appliance_ids), path))
    return paths


def train_fhmm(config, dataset):
    train, _ = split_dataset(dataset, config.train.fraction)
    if not train.per_appliance:
        raise TrainingError("The training data has no per-appliance channels")
    omegas = config.omegas(train.appliance_ids)
    models = train_models(train.per_appliance, omegas, seed=config.seed, threshold=config.train.off_threshold,
                          alpha=config.train.smoothing, std_floor=config.train.std_floor,
                          max_iter=config.train.kmeans_iterations)
    return build_fhmm(models, config.train.max_joint_states)


def cmd_train(config, out, house=None, model=None):
    r"""Train on the first household's training part and write the model
    file. Returns its path."""
    fhmm = train_fhmm(config, load_households(config, house)[0])
    path = _model_path(out, model)
    save_model(fhmm, path)
    print('Trained FHMM over {} appliances with {} joint states, saved to {}'.format(
        len(fhmm.appliances), fhmm.num_joint_states, path))
    return path


def attack(fhmm, aggregate, out, name='states'):
    r"""Decode the switch states of an aggregate series and write them
    together with the decoded per-appliance power."""
    states = viterbi_map(fhmm, aggregate)
    states_path = os.path.join(out, '{}.csv'.format(name))
    write_states_csv(states, aggregate, states_path)
    write_power_csv(states_to_power(fhmm, states, reference=aggregate),
                    os.path.join(out, '{}-power.csv'.format(name)))
    return states_path


def cmd_attack(config, out, model=None, series=None, house=None):
    r"""Run the NILM attack on a REDD channel file, or else on the
    evaluation part of the first household. An empty series yields an
    empty states file."""
    fhmm = load_model(_model_path(out, model))
    if series is not None:
        try:
            aggregate = load_redd_channel(series, config.interval)
        except EmptySeriesError:
            aggregate = PowerSeries(0, config.interval, [])
    else:
        _, evaluate = split_dataset(load_households(config, house)[0], config.train.fraction)
        aggregate = evaluate.aggregate
    path = attack(fhmm, aggregate, out)
    print('Decoded {} samples, states saved to {}'.format(len(aggregate), path))
    return path


def privatize(config, fhmm, dataset, meter=0):
    r"""Obfuscate the evaluation part of one household with the configured
    mechanism. Returns the evaluation dataset and the Obfuscation."""
    train, evaluate = split_dataset(dataset, config.train.fraction)
    privacy = config.privacy
    rng = make_rng(config.seed, 'privatize', privacy.mechanism, float(privacy.epsilon), meter)
    delta_f = privacy.delta_f_watts
    if delta_f is None and privacy.mechanism in ('aggregate-laplace', 'hmm-resynth'):
        delta_f = default_delta_f_watts(train.aggregate)
    states = None
    if privacy.mechanism == 'states' and privacy.state_source == 'truth':
        states = evaluate.truth_states
        if states is None:
            raise ConfigError("state_source 'truth' needs ground-truth states")
    result = obfuscate(privacy.mechanism, fhmm, evaluate.aggregate, privacy.epsilon, rng, privacy=privacy,
                       delta_f_watts=delta_f, originals=evaluate.per_appliance, states=states)
    return evaluate, result


def write_obfuscated(result, path):
    columns = {'aggregate': result.aggregate}
    columns.update(result.per_appliance or {})
    write_power_csv(columns, path, long=False)


def cmd_privatize(config, out, model=None, house=None):
    r"""Obfuscate every household and write one CSV per household plus the
    fog node totals. Returns the list of obfuscated aggregates."""
    fhmm = load_model(_model_path(out, model))
    aggregates = []
    for m, dataset in enumerate(load_households(config, house), start=1):
        _, result = privatize(config, fhmm, dataset, meter=m - 1)
        path = os.path.join(out, 'obfuscated_house_{}.csv'.format(m))
        write_obfuscated(result, path)
        aggregates.append(result.aggregate)
        eff = effective_epsilon(config.privacy.mechanism, config.privacy.epsilon, fhmm.appliance_ids, config.privacy)
        print('House {}: {} mechanism at epsilon {} (effective {}), {} negative values, saved to {}'.format(
            m, config.privacy.mechanism, config.privacy.epsilon, eff, int((result.aggregate.values < 0).sum()), path))
    fog = fog_aggregate(aggregates, config.fog.group_size)
    write_power_csv({'fog_{}'.format(i): s for i, s in enumerate(fog, start=1)}, os.path.join(out, 'fog.csv'),
                    long=False)
    return aggregates


def _print_cell(report):
    print('Cell {} eps={} seed={}: attack F1 {:.4f}, KL {:.4f}, billing error {:.4f}, {} negative values'.format(
        report.mechanism, report.epsilon, report.seed, report.macro.f1, report.kl_divergence,
        report.billing_relative_error, report.negative_value_count))


def sweep(config, fhmm, dataset, mechanisms, epsilons, seeds, jobs=1):
    train, evaluate = split_dataset(dataset, config.train.fraction)
    return run_sweep(evaluate, fhmm, mechanisms, epsilons, seeds, privacy=config.privacy,
                     train_aggregate=train.aggregate, kl_bins=config.sweep.kl_bins, global_seed=config.seed,
                     jobs=jobs, callback=_print_cell)


def cmd_evaluate(config, out, model=None, house=None, jobs=1):
    r"""Evaluate the configured mechanism at the configured epsilon over the
    sweep seeds."""
    fhmm = load_model(_model_path(out, model))
    dataset = load_households(config, house)[0]
    reports = sweep(config, fhmm, dataset, [config.privacy.mechanism], [config.privacy.epsilon],
                    config.sweep.seeds, jobs)
    print('###')
    print_results(reports, name='evaluate', entropy_band=config.sweep.entropy_band)
    print('###')
    save_results(out, 'evaluate', reports, dataclasses.asdict(config.privacy),
                 entropy_band=config.sweep.entropy_band)
    return reports


def cmd_sweep(config, out, model=None, house=None, jobs=1):
    r"""Evaluate the full mechanism x epsilon x seed grid."""
    fhmm = load_model(_model_path(out, model))
    dataset = load_households(config, house)[0]
    reports = sweep(config, fhmm, dataset, list(config.sweep.mechanisms), config.sweep.epsilons,
                    config.sweep.seeds, jobs)
    print('###')
    print_results(reports, name='sweep', entropy_band=config.sweep.entropy_band)
    print('###')
    save_results(out, 'sweep', reports, dataclasses.asdict(config.sweep), dataclasses.asdict(config.privacy),
                 entropy_band=config.sweep.entropy_band)
    return reports


def cmd_pipeline(config, out, house=None, jobs=1):
    r"""Train, privatize every household, attack the obfuscated aggregates
    and run the sweep, with the same artifacts and sub-seeds as the
    separate commands."""
    if config.synth is not None and house is None and config.data is None:
        cmd_synth(config, out)
    model = cmd_train(config, out, house)
    fhmm = load_model(model)
    aggregates = cmd_privatize(config, out, model, house)
    for m, aggregate in enumerate(aggregates, start=1):
        attack(fhmm, aggregate, out, name='attack_house_{}'.format(m))
    return cmd_sweep(config, out, model, house, jobs)


def build_parser():
    parser = argparse.ArgumentParser(prog='fhmmdp', description=(
        'NILM with factorial HMMs and differentially private obfuscation of appliance switch states.'))

    parser.add_argument('-c', '--config', default=None, metavar='FILE', help='YAML configuration file')
    parser.add_argument('-s', '--seed', type=int, default=None, help='Global seed (overrides the config)')
    parser.add_argument('-o', '--out', default='results', metavar='DIR', help='Output directory. Default: results')
    parser.add_argument('-j', '--jobs', type=int, default=1, help='Worker processes for sweep cells. Default: 1')
    parser.add_argument('-v', '--verbose', action='store_true', help='Print debug log messages')

    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    subparsers.add_parser('synth', help='Generate synthetic households')

    p = subparsers.add_parser('train', help='Train the FHMM')
    p.add_argument('--house', default=None, metavar='DIR', help='REDD-style house directory')
    p.add_argument('--model', default=None, metavar='FILE', help='Model file. Default: <out>/model.yaml')

    p = subparsers.add_parser('attack', help='Decode switch states from an aggregate')
    p.add_argument('--model', default=None, metavar='FILE', help='Model file. Default: <out>/model.yaml')
    p.add_argument('--series', default=None, metavar='FILE', help='REDD channel file of the aggregate')
    p.add_argument('--house', default=None, metavar='DIR', help='REDD-style house directory')

    for name, description in [('privatize', 'Obfuscate household loads'),
                       ('evaluate', 'Evaluate the configured mechanism'),
                       ('sweep', 'Run the mechanism x epsilon x seed sweep'),
                       ('pipeline', 'Run all stages')]:
        p = subparsers.add_parser(name, help=description)
        if name != 'pipeline':
            p.add_argument('--model', default=None, metavar='FILE', help='Model file. Default: <out>/model.yaml')
        p.add_argument('--house', default=None, metavar='DIR', help='REDD-style house directory')
        p.add_argument('-m', '--mechanism', choices=MECHANISMS, default=None, help='Obfuscation mechanism')
        p.add_argument('-e', '--epsilon', type=float, default=None, help='Privacy budget')
        p.add_argument('--sensitivity', choices=SENSITIVITY_MODES, default=None, help='Sensitivity mode')
        p.add_argument('-b', '--beta', type=float, default=None, help='Smooth sensitivity damping')
        p.add_argument('--state-source', choices=STATE_SOURCES, default=None,
                       help='Where the perturbed switch states come from')
        p.add_argument('--zero-noise', action='store_true', default=None, help='Skip the noise entirely')
        p.add_argument('--fog-group', type=int, default=None, metavar='N', help='Meters per fog node')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        config = load_config(args.config)
        config = override(config, seed=args.seed,
                          privacy__mechanism=getattr(args, 'mechanism', None),
                          privacy__epsilon=getattr(args, 'epsilon', None),
                          privacy__sensitivity=getattr(args, 'sensitivity', None),
                          privacy__beta=getattr(args, 'beta', None),
                          privacy__state_source=getattr(args, 'state_source', None),
                          privacy__zero_noise=getattr(args, 'zero_noise', None),
                          fog__group_size=getattr(args, 'fog_group', None))
        os.makedirs(args.out, exist_ok=True)

        if args.command == 'synth':
            cmd_synth(config, args.out)
        elif args.command == 'train':
            cmd_train(config, args.out, args.house, args.model)
        elif args.command == 'attack':
            cmd_attack(config, args.out, args.model, args.series, args.house)
        elif args.command == 'privatize':
            cmd_privatize(config, args.out, args.model, args.house)
        elif args.command == 'evaluate':
            cmd_evaluate(config, args.out, args.model, args.house, args.jobs)
        elif args.command == 'sweep':
            cmd_sweep(config, args.out, args.model, args.house, args.jobs)
        elif args.command == 'pipeline':
            cmd_pipeline(config, args.out, args.house, args.jobs)
    except (FhmmDpError, OSError) as e:
        print('fhmmdp {}: error: {}'.format(args.command, e), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
