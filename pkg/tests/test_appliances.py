import numpy as np
import pytest

from fhmmdp.appliances import estimate_hmm_params, label_states, quantize_states, train_appliance, train_models
from fhmmdp.data import PowerSeries, StateSequence
from fhmmdp.errors import DegenerateClusterError, TrainingError, ValidationError
from fhmmdp.synth import ApplianceSpec, SynthConfig, synth_generate


def series(values):
    return PowerSeries(0, 60, values, measured=True)


def test_quantize_two_level():
    states, stats = quantize_states(series([0, 0, 200, 0, 200]), 1)
    assert np.array_equal(states.states, [0, 0, 1, 0, 1])
    assert stats[1].mean == 200.0


def test_quantize_relabels_by_ascending_mean():
    states, stats = quantize_states(series([0, 100, 100, 500, 500]), 2)
    assert np.array_equal(states.states, [0, 1, 1, 2, 2])
    assert stats[1].mean < stats[2].mean


def test_quantize_noisy_clusters():
    rng = np.random.default_rng(0)
    labels = rng.integers(1, 3, 1000)
    values = np.where(labels == 1, 100.0, 500.0) + rng.normal(0, 10, 1000)
    states, _ = quantize_states(series(values), 2, seed=1)
    assert np.mean(states.states == labels) >= 0.99


def test_quantize_is_permutation_stable():
    rng = np.random.default_rng(2)
    values = np.concatenate([np.zeros(50), rng.normal(150, 20, 100), rng.normal(900, 40, 100)])
    perm = rng.permutation(values.size)
    states, _ = quantize_states(series(values), 2, seed=11)
    shuffled, _ = quantize_states(series(values[perm]), 2, seed=11)
    unshuffled = np.empty_like(shuffled.states)
    unshuffled[perm] = shuffled.states
    assert np.array_equal(unshuffled, states.states)


def test_quantize_errors():
    with pytest.raises(DegenerateClusterError):
        quantize_states(series([0, 100, 100, 0]), 2)
    with pytest.raises(DegenerateClusterError):
        quantize_states(series([0, 1, 2, 3]), 1)
    states, stats = quantize_states(PowerSeries(0, 60, [], measured=True), 2)
    assert len(states) == 0 and stats == []


def test_all_on_sequence_smoothing():
    model = estimate_hmm_params(StateSequence('fan', [1, 1, 1, 1], 1), series([40, 40, 40, 40]))
    assert model.A[1, 1] == pytest.approx(0.8)
    assert model.A[1, 0] == pytest.approx(0.2)
    assert model.pi[1] == pytest.approx(5 / 6)
    # an OFF state that never occurs draws 0 W
    assert np.array_equal(model.cp[0], [0.0])
    assert model.means[0] == 0.0


def test_emission_estimates():
    model = estimate_hmm_params(StateSequence('tv', [0, 1, 0, 1, 0], 1), series([0, 200, 0, 200, 0]))
    assert model.means[0] == 0.0
    assert model.means[1] == 200.0
    # std floored at 1 W
    assert np.array_equal(model.stds, [1.0, 1.0])
    assert np.array_equal(model.cp[1], [200.0, 200.0])


def test_unobserved_on_state_is_a_training_error():
    with pytest.raises(TrainingError) as info:
        estimate_hmm_params(StateSequence('oven', [0, 1, 0, 1], 2), series([0, 600, 0, 600]))
    assert info.value.appliance == 'oven'
    assert info.value.state == 2


def test_estimate_needs_two_samples():
    with pytest.raises(TrainingError):
        estimate_hmm_params(StateSequence('tv', [1], 1), series([100]))


def test_estimated_transitions_match_generator():
    transition = [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]
    spec = ApplianceSpec('oven', [0.0, 600.0, 1400.0], 5.0, transition, [1/3, 1/3, 1/3])
    dataset = synth_generate(SynthConfig([spec], duration=10000, seed=9))
    model = train_appliance('oven', dataset.per_appliance['oven'], 2, seed=0)
    assert np.max(np.abs(model.A - np.array(transition))) <= 0.03
    assert model.means[1] == pytest.approx(600.0, abs=1.0)
    assert model.means[2] == pytest.approx(1400.0, abs=1.0)


def test_label_states(appliance_factory):
    model = appliance_factory('oven', [0.0, 600.0, 1400.0])
    labelled = label_states(model, series([0.0, 3.0, 580.0, 1300.0, 700.0]))
    assert np.array_equal(labelled.states, [0, 0, 1, 2, 1])


def test_train_models_needs_omegas():
    with pytest.raises(TrainingError):
        train_models({'tv': series([0, 100, 0, 100])}, {})


def test_appliance_model_validation(appliance_factory):
    with pytest.raises(ValidationError):
        appliance_factory('tv', [0.0, 100.0], pi=[0.6, 0.6])
    with pytest.raises(ValidationError):
        appliance_factory('tv', [0.0, 100.0], stds=[1.0, 0.0])
    with pytest.raises(TrainingError):
        appliance_factory('tv', [0.0, 100.0], cp=[[0.0], []])
