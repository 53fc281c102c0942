import numpy as np
import pytest

from fhmmdp.data import PowerSeries, StateSequence
from fhmmdp.errors import EmptySeriesError, ParseError, ValidationError
from fhmmdp.external import (load_redd_channel, write_redd_channel, load_redd_labels, load_redd_house,
                             save_labeled_dataset, write_states_csv, read_states_csv, save_model, load_model,
                             resample_readings)
from fhmmdp.synth import SynthConfig, default_appliances, synth_generate


def write_lines(path, lines):
    path.write_text(''.join(line + '\n' for line in lines))
    return str(path)


def test_identity_resample(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 100', '1 100', '2 300'])
    s = load_redd_channel(path, 1)
    assert np.array_equal(s.values, [100.0, 100.0, 300.0])
    assert s.start_time == 0 and s.interval == 1


def test_bucket_mean(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 100', '1 100', '2 300'])
    assert np.array_equal(load_redd_channel(path, 2).values, [100.0, 300.0])


def test_gaps_are_forward_filled(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 50', '4 50'])
    with pytest.warns(UserWarning):
        s = load_redd_channel(path, 1)
    assert np.array_equal(s.values, [50.0] * 5)


def test_forward_fill_takes_previous_bucket(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 10', '30 20', '200 40'])
    with pytest.warns(UserWarning):
        s = load_redd_channel(path, 60)
    assert np.array_equal(s.values, [15.0, 15.0, 15.0, 40.0])


def test_resampling_preserves_energy():
    watts = np.random.default_rng(1).uniform(0, 500, 503)
    out = resample_readings(np.arange(503), watts, 10)
    assert len(out) == 51
    assert abs(np.sum(out.values) * 10 - np.sum(watts)) <= watts.max() * 10


def test_malformed_line_reports_line_number(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 100', '1 abc'])
    with pytest.raises(ParseError) as info:
        load_redd_channel(path, 1)
    assert info.value.line == 2
    assert 'line 2' in str(info.value)


def test_decreasing_timestamps_are_rejected(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['5 100', '3 100'])
    with pytest.raises(ParseError):
        load_redd_channel(path, 1)


def test_empty_file(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', [])
    with pytest.raises(EmptySeriesError):
        load_redd_channel(path, 1)


def test_negative_power(tmp_path):
    path = write_lines(tmp_path / 'channel_1.dat', ['0 100', '1 -3'])
    with pytest.raises(ValidationError):
        load_redd_channel(path, 1)


def test_channel_round_trip(tmp_path):
    values = np.random.default_rng(0).uniform(0, 2000, 100)
    series = PowerSeries(1303132929, 60, values, measured=True)
    path = str(tmp_path / 'channel_1.dat')
    write_redd_channel(series, path)
    loaded = load_redd_channel(path, 60)
    assert loaded == series


def test_labels(tmp_path):
    path = write_lines(tmp_path / 'labels.dat', ['1 mains', '2 mains', '3 kitchen_outlets'])
    assert load_redd_labels(path) == {1: 'mains', 2: 'mains', 3: 'kitchen_outlets'}


def test_house_sums_mains_and_aligns(tmp_path):
    write_lines(tmp_path / 'labels.dat', ['1 mains', '2 mains', '3 fridge'])
    write_lines(tmp_path / 'channel_1.dat', ['0 10', '60 10', '120 10', '180 10'])
    write_lines(tmp_path / 'channel_2.dat', ['60 5', '120 5', '180 5'])
    write_lines(tmp_path / 'channel_3.dat', ['0 1', '60 2', '120 3'])
    dataset = load_redd_house(str(tmp_path), 60)
    assert dataset.aggregate.start_time == 60
    assert np.array_equal(dataset.aggregate.values, [15.0, 15.0])
    assert np.array_equal(dataset.per_appliance['fridge'].values, [2.0, 3.0])
    assert dataset.truth_states is None


def test_house_missing_appliance(tmp_path):
    write_lines(tmp_path / 'labels.dat', ['1 mains', '2 fridge'])
    write_lines(tmp_path / 'channel_1.dat', ['0 10'])
    write_lines(tmp_path / 'channel_2.dat', ['0 1'])
    with pytest.raises(ValidationError):
        load_redd_house(str(tmp_path), 60, appliances=['oven'])


def test_synthetic_house_round_trip(tmp_path):
    dataset = synth_generate(SynthConfig(default_appliances(), duration=200, seed=4, start_time=1303132929))
    save_labeled_dataset(dataset, str(tmp_path / 'house_1'))
    loaded = load_redd_house(str(tmp_path / 'house_1'), 60)
    assert loaded.aggregate == dataset.aggregate
    assert loaded.appliance_ids == dataset.appliance_ids
    for app_id in dataset.appliance_ids:
        assert loaded.per_appliance[app_id] == dataset.per_appliance[app_id]
        assert loaded.truth_states[app_id] == dataset.truth_states[app_id]


def test_states_csv(tmp_path):
    reference = PowerSeries(600, 60, [0.0, 0.0, 0.0])
    states = [StateSequence('fridge', [0, 1, 1], 1), StateSequence('oven', [2, 0, 1], 2)]
    path = str(tmp_path / 'states.csv')
    write_states_csv(states, reference, path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == '# omega: fridge=1 oven=2'
    assert lines[1] == 't,appliance,state'
    assert lines[2] == '600,fridge,0'
    assert read_states_csv(path) == {s.appliance_id: s for s in states}


def test_model_file_round_trip(tmp_path, two_binary_fhmm):
    path = str(tmp_path / 'model.yaml')
    save_model(two_binary_fhmm, path)
    loaded = load_model(path)
    assert loaded.appliance_ids == two_binary_fhmm.appliance_ids
    for a, b in zip(loaded.appliances, two_binary_fhmm.appliances):
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.stds, b.stds)
        assert all(np.array_equal(x, y) for x, y in zip(a.cp, b.cp))


def test_model_file_format_is_checked(tmp_path):
    path = tmp_path / 'model.yaml'
    path.write_text('format: something-else\nversion: 1\n')
    with pytest.raises(ParseError):
        load_model(str(path))
