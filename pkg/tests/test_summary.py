import os

import pandas as pd
import pytest

from fhmmdp.evaluation import REPORT_COLUMNS, ClassificationScores, EvaluationReport
from fhmmdp.summary import (ENTROPY_BAND_COLUMNS, PLOT_COLUMNS, compare_mechanisms, entropy_band_table,
                            mean_confidence_interval, print_results, reports_to_frame, save_results, seed_summary)


def make_report(mechanism, epsilon, seed, f1, kl=0.5, billing=0.01):
    scores = ClassificationScores(f1, f1, f1)
    return EvaluationReport(
        mechanism=mechanism, epsilon=epsilon, seed=seed,
        per_appliance={'fridge': scores, 'oven': scores}, macro=scores,
        state_match={'fridge': 0.9, 'oven': 0.8}, state_match_macro=0.85,
        kl_divergence=kl, entropy_original=2.0, entropy_obfuscated=2.1,
        billing_relative_error=billing, negative_value_count=0)


@pytest.fixture
def reports():
    result = []
    for epsilon in [1.0, 5.0]:
        for seed in range(4):
            result.append(make_report('states', epsilon, seed, 0.2 + 0.01 * seed, kl=0.1))
        for seed in range(4):
            result.append(make_report('aggregate-laplace', epsilon, seed, 0.8 + 0.01 * seed, kl=0.05 + 0.1 * seed))
    return result


def test_report_frame(reports):
    frame = reports_to_frame(reports)
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == 3 * len(reports)
    assert set(frame['appliance']) == {'fridge', 'oven', 'macro'}


def test_confidence_interval():
    assert mean_confidence_interval([3.0]) == (3.0, 3.0, 3.0)
    mean, lo, hi = mean_confidence_interval([1.0, 2.0, 3.0])
    assert mean == 2.0
    # t(0.975, 2) * 1 / sqrt(3)
    assert hi - mean == pytest.approx(4.3027 / 3 ** 0.5, rel=1e-4)
    assert mean - lo == pytest.approx(hi - mean)


def test_seed_summary(reports):
    summary = seed_summary(reports)
    assert list(summary.columns) == PLOT_COLUMNS
    f1 = summary[(summary['metric'] == 'f1') & (summary['mechanism'] == 'states') & (summary['epsilon'] == 1.0)]
    assert f1['mean'].iloc[0] == pytest.approx(0.215)
    assert f1['n'].iloc[0] == 4


def test_compare_mechanisms(reports):
    f1 = compare_mechanisms(reports, 'f1', 'states', 'aggregate-laplace')
    assert list(f1['verdict']) == ['holds', 'holds']
    assert list(compare_mechanisms(reports, 'f1', 'aggregate-laplace', 'states')['verdict']) == ['violated'] * 2
    assert list(compare_mechanisms(reports, 'kl', 'states', 'aggregate-laplace')['verdict']) == ['inconclusive'] * 2
    assert compare_mechanisms(reports, 'f1', 'states', 'hmm-resynth').empty


def test_entropy_band_table(reports):
    table = entropy_band_table(reports)
    assert list(table.columns) == ENTROPY_BAND_COLUMNS
    assert len(table) == 4
    assert table['within_band'].all()
    assert table['entropy_obf'].iloc[0] == pytest.approx(2.1)
    assert not entropy_band_table(reports, band=0.01)['within_band'].any()


def test_report_rows_fall_back_to_the_base_epsilon():
    row = make_report('states', 2.0, 0, 0.5).to_rows()[-1]
    assert row['eff_epsilon'] == 2.0


def test_print_results(reports, capsys):
    print_results(reports, {'duration': 5000}, name='demo', print_all=True, mechanism_count=2)
    out = capsys.readouterr().out
    assert 'Summary of 16 runs of sweep "demo":' in out
    assert ' - states at epsilon 1.0:' in out
    assert ' - f1 at epsilon 1.0: states <= aggregate-laplace: holds' in out
    assert 'Entropy within 20% of the original:' in out
    assert ' - states at epsilon 1.0: 2.1000 vs 2.0000: yes' in out
    assert ' - duration = 5000' in out
    assert 'Individual run results:' in out


def test_save_results(reports, tmp_path):
    path = save_results(str(tmp_path), 'demo', reports, seed=0)
    assert path == os.path.join(str(tmp_path), 'demo')
    assert sorted(os.listdir(path)) == ['comparison.csv', 'entropy-band.csv', 'plot-data.csv', 'report.csv',
                                    'summary.txt']
    frame = pd.read_csv(os.path.join(path, 'report.csv'))
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == 48
    assert list(pd.read_csv(os.path.join(path, 'plot-data.csv')).columns) == PLOT_COLUMNS
    with open(os.path.join(path, 'summary.txt')) as f:
        assert f.readline().startswith('Summary of 16 runs')
    band = pd.read_csv(os.path.join(path, 'entropy-band.csv'))
    assert list(band.columns) == ENTROPY_BAND_COLUMNS
    assert band['within_band'].all()
