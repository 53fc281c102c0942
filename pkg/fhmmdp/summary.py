
import os
from contextlib import redirect_stdout

import numpy as np
import pandas as pd
from scipy import stats

from .evaluation import ENTROPY_BAND, REPORT_COLUMNS, entropies_within_band

PLOT_METRICS = ['f1', 'state_match', 'kl', 'entropy_obf', 'billing_err', 'neg_count']
PLOT_COLUMNS = ['metric', 'mechanism', 'epsilon', 'mean', 'ci_low', 'ci_high', 'n']
COMPARISON_COLUMNS = ['metric', 'epsilon', 'better', 'worse', 'verdict']
ENTROPY_BAND_COLUMNS = ['mechanism', 'epsilon', 'entropy_orig', 'entropy_obf', 'band', 'within_band']

# (metric, mechanism expected to be lower, mechanism it is compared with)
DEFAULT_COMPARISONS = [
    ('f1', 'states', 'aggregate-laplace'),
    ('kl', 'states', 'aggregate-laplace'),
    ('billing_err', 'states', 'aggregate-laplace'),
    ('f1', 'states', 'hmm-resynth'),
    ('kl', 'states', 'hmm-resynth'),
]


def reports_to_frame(reports):
    r"""All report rows in one DataFrame with the report CSV columns."""
    rows = [row for report in reports for row in report.to_rows()]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def macro_frame(reports):
    frame = reports_to_frame(reports)
    return frame[frame['appliance'] == 'macro']


def write_report_csv(reports, path):
    reports_to_frame(reports).to_csv(path, index=False)


def mean_confidence_interval(values, confidence=0.95):
    r"""Mean and two-sided Student-t confidence interval of a sample. A
    single value gives a zero-width interval."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, mean, mean
    half = stats.t.ppf(0.5 + confidence / 2, n - 1) * values.std(ddof=1) / np.sqrt(n)
    return mean, float(mean - half), float(mean + half)


def seed_summary(reports, metrics=PLOT_METRICS):
    r"""Seed-averaged macro metrics per (metric, mechanism, epsilon) with
    95% confidence intervals. This is the plot-data table: x = epsilon,
    y = mean, one series per mechanism and metric."""
    frame = macro_frame(reports)
    rows = []
    for metric in metrics:
        for (mechanism, epsilon), group in frame.groupby(['mechanism', 'epsilon'], sort=False):
            mean, lo, hi = mean_confidence_interval(group[metric].to_numpy())
            rows.append({'metric': metric, 'mechanism': mechanism, 'epsilon': epsilon,
                         'mean': mean, 'ci_low': lo, 'ci_high': hi, 'n': len(group)})
    return pd.DataFrame(rows, columns=PLOT_COLUMNS)


def write_plot_data(reports, path):
    seed_summary(reports).to_csv(path, index=False)


def compare_mechanisms(reports, metric, better, worse):
    r"""
    Check per epsilon that mechanism `better` has a lower mean `metric` than
    `worse`. A comparison `holds` if the 95% interval of `better` lies
    entirely below the one of `worse`, is `violated` if it lies entirely
    above, and is `inconclusive` if the intervals overlap. Epsilons where
    either mechanism is missing are skipped.
    """
    summary = seed_summary(reports, metrics=[metric])
    rows = []
    for epsilon in sorted(summary['epsilon'].unique()):
        at = summary[summary['epsilon'] == epsilon]
        a = at[at['mechanism'] == better]
        b = at[at['mechanism'] == worse]
        if a.empty or b.empty:
            continue
        a, b = a.iloc[0], b.iloc[0]
        if a['ci_high'] < b['ci_low'] or (a['ci_high'] == a['ci_low'] == b['ci_low'] == b['ci_high']
                                          and a['mean'] <= b['mean']):
            verdict = 'holds'
        elif a['ci_low'] > b['ci_high']:
            verdict = 'violated'
        else:
            verdict = 'inconclusive'
        rows.append({'metric': metric, 'epsilon': epsilon, 'better': better, 'worse': worse, 'verdict': verdict})
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


def comparison_table(reports, comparisons=DEFAULT_COMPARISONS):
    frames = [compare_mechanisms(reports, metric, better, worse) for metric, better, worse in comparisons]
    frames = [f for f in frames if not f.empty]
    if not frames:
        return pd.DataFrame(columns=COMPARISON_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def entropy_band_table(reports, band=ENTROPY_BAND):
    r"""Seed-averaged entropies of the original and obfuscated loads per
    (mechanism, epsilon), and whether the obfuscated one lies within a
    relative `band` of the original."""
    frame = macro_frame(reports)
    rows = []
    for (mechanism, epsilon), group in frame.groupby(['mechanism', 'epsilon'], sort=False):
        h0, h1 = float(group['entropy_orig'].mean()), float(group['entropy_obf'].mean())
        rows.append({'mechanism': mechanism, 'epsilon': epsilon, 'entropy_orig': h0, 'entropy_obf': h1,
                     'band': band, 'within_band': bool(entropies_within_band(h0, h1, band))})
    return pd.DataFrame(rows, columns=ENTROPY_BAND_COLUMNS)


def print_results(reports, *dictionaries, name=None, print_all=False, entropy_band=ENTROPY_BAND, **kwargs):
    r"""Print a few lines summarizing a sweep: mean +- std of the macro
    metrics of every (mechanism, epsilon) group. If additionally
    dictionaries and/or keyword arguments are given, all their key-value
    pairs are also printed. If print_all is True, the individual results of
    all cells are also printed.
    """
    N = len(reports)
    if N == 0:
        return
    frame = macro_frame(reports)

    print("Summary of {} runs".format(N) + (":" if name is None else " of sweep \"{}\":".format(name)))
    for (mechanism, epsilon), group in frame.groupby(['mechanism', 'epsilon'], sort=False):
        print(" - {} at epsilon {}:".format(mechanism, epsilon))
        for metric, label in [('f1', 'Attack F1'), ('kl', 'KL divergence'), ('billing_err', 'Billing error'),
                              ('neg_count', 'Negative values')]:
            values = group[metric].to_numpy(dtype=float)
            if values.size > 1:
                print("   - Average {}: {:.4f} +- {:.4f}".format(label, values.mean(), values.std()))
            else:
                print("   - {}: {:.4f}".format(label, values.mean()))

    comparisons = comparison_table(reports)
    if not comparisons.empty:
        print()
        print("Mechanism comparisons:")
        for _, row in comparisons.iterrows():
            print(" - {} at epsilon {}: {} <= {}: {}".format(row['metric'], row['epsilon'], row['better'],
                                                            row['worse'], row['verdict']))

    print()
    print("Entropy within {:.0%} of the original:".format(entropy_band))
    for _, row in entropy_band_table(reports, entropy_band).iterrows():
        print(" - {} at epsilon {}: {:.4f} vs {:.4f}: {}".format(
            row['mechanism'], row['epsilon'], row['entropy_obf'], row['entropy_orig'],
            'yes' if row['within_band'] else 'no'))

    if len(dictionaries) > 0 or len(kwargs) > 0:
        print()
        dictionaries = list(dictionaries)
        dictionaries.append(kwargs)
        for d in dictionaries:
            if not isinstance(d, dict):
                d = d.__dict__
            for key, val in d.items():
                print(' - {} = {}'.format(key, val))

    if N > 1 and print_all:
        print()
        print("Individual run results:")
        print(" Mechanism          Epsilon   Seed  AttackF1      KL  Billing  Negative")
        for _, row in frame.iterrows():
            print(" {:<17s}  {:7.3f}  {:5d}  {:8.4f}  {:6.4f}  {:7.4f}  {:8d}".format(
                row['mechanism'], row['epsilon'], int(row['seed']), row['f1'], row['kl'], row['billing_err'],
                int(row['neg_count'])))


def save_results(dir, name, reports, *args, entropy_band=ENTROPY_BAND, **kwargs):
    r"""Write the report CSV, the plot data, the mechanism comparisons, the
    entropy band check and the output of print_results to files in a
    directory named after the sweep within the given parent directory.
    Returns that directory."""
    dir = os.path.join(dir, name)
    os.makedirs(dir, exist_ok=True)
    write_report_csv(reports, os.path.join(dir, 'report.csv'))
    write_plot_data(reports, os.path.join(dir, 'plot-data.csv'))
    comparison_table(reports).to_csv(os.path.join(dir, 'comparison.csv'), index=False)
    entropy_band_table(reports, entropy_band).to_csv(os.path.join(dir, 'entropy-band.csv'), index=False)
    filename = os.path.join(dir, 'summary.txt')
    with open(filename, 'w') as f:
        with redirect_stdout(f):
            print_results(reports, *args, name=name, print_all=True, entropy_band=entropy_band, **kwargs)
    print('Results saved to directory {}'.format(dir))
    return dir
