import itertools

import numpy as np
import pytest

from fhmmdp.data import PowerSeries, StateSequence
from fhmmdp.errors import CapacityError, ValidationError
from fhmmdp.inference import brute_force_map, path_log_likelihood, states_to_power, viterbi_map
from fhmmdp.model import build_fhmm


def aggregate(values):
    return PowerSeries(0, 60, values)


def decoded(states):
    return [list(s.states) for s in states]


def test_noiseless_recovery(appliance_factory):
    fhmm = build_fhmm([appliance_factory('heater', [0.0, 200.0], stds=[1.0, 1.0])])
    assert decoded(viterbi_map(fhmm, aggregate([0, 200, 0]))) == [[0, 1, 0]]


def test_unique_additive_decomposition(two_binary_fhmm):
    assert decoded(viterbi_map(two_binary_fhmm, aggregate([400.0]))) == [[1], [1]]


def test_empty_series(two_binary_fhmm):
    states = viterbi_map(two_binary_fhmm, aggregate([]))
    assert [len(s) for s in states] == [0, 0]
    assert [s.appliance_id for s in states] == ['fridge', 'washer']
    assert [len(s) for s in brute_force_map(two_binary_fhmm, aggregate([]))] == [0, 0]


def test_tie_break_lowest_joint_index(appliance_factory):
    twin = lambda name: appliance_factory(name, [0.0, 100.0], stds=[5.0, 5.0])
    fhmm = build_fhmm([twin('left'), twin('right')])
    # (0, 1) and (1, 0) explain 100 W equally well
    assert decoded(viterbi_map(fhmm, aggregate([100.0]))) == [[0], [1]]
    assert decoded(brute_force_map(fhmm, aggregate([100.0]))) == [[0], [1]]


def test_tied_paths_match_brute_force(appliance_factory):
    triplet = build_fhmm([appliance_factory(name, [0.0, 100.0], stds=[5.0, 5.0]) for name in 'abc'])
    for values in itertools.product([0.0, 100.0, 200.0], repeat=3):
        y = aggregate(list(values))
        assert decoded(viterbi_map(triplet, y)) == decoded(brute_force_map(triplet, y)), values
    # joint states (0,1,1), (1,0,1) and (1,1,0) tie at 200 W; the lowest index wins
    assert decoded(viterbi_map(triplet, aggregate([200.0, 0.0, 0.0]))) == [[0, 0, 0], [1, 0, 0], [1, 0, 0]]


def test_single_step_brute_force(random_fhmm_factory):
    fhmm = random_fhmm_factory(np.random.default_rng(3), 2, 2)
    y = np.array([420.0])
    best = int(np.argmax(fhmm.log_pi() + fhmm.log_emissions(y)[0]))
    expected = [int(s) for s in fhmm.joint_state(best)]
    assert [s.states[0] for s in brute_force_map(fhmm, aggregate(y))] == expected


def test_viterbi_matches_brute_force(random_fhmm_factory):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        fhmm = random_fhmm_factory(rng, int(rng.integers(1, 4)), 2)
        T = int(rng.integers(1, 6))
        while fhmm.num_joint_states ** T > 10**6:
            T -= 1
        y = aggregate(rng.uniform(0, fhmm.emission_means().max() + 50, T))
        assert decoded(viterbi_map(fhmm, y)) == decoded(brute_force_map(fhmm, y))


def test_brute_force_is_deterministic(random_fhmm_factory):
    fhmm = random_fhmm_factory(np.random.default_rng(4), 2, 2)
    y = aggregate([10.0, 500.0, 900.0, 30.0])
    assert decoded(brute_force_map(fhmm, y)) == decoded(brute_force_map(fhmm, y))


def test_brute_force_capacity(random_fhmm_factory):
    # at least 2**3 joint states, so at least 8**8 paths
    fhmm = random_fhmm_factory(np.random.default_rng(5), 3, 2)
    with pytest.raises(CapacityError):
        brute_force_map(fhmm, aggregate(np.zeros(8)))


def test_viterbi_beats_random_paths(random_fhmm_factory):
    rng = np.random.default_rng(6)
    fhmm = random_fhmm_factory(rng, 3, 2)
    y = aggregate(rng.uniform(0, 2000, 40))
    best = path_log_likelihood(fhmm, y, viterbi_map(fhmm, y))
    assert np.isfinite(best)
    for _ in range(1000):
        random_states = [StateSequence(m.appliance_id, rng.integers(0, m.num_states, 40), m.omega)
                         for m in fhmm.appliances]
        assert best >= path_log_likelihood(fhmm, y, random_states)


def test_noise_degrades_recovery(benchmark):
    evaluate = benchmark.evaluate.slice(0, 500)
    truth = [evaluate.truth_states[a] for a in benchmark.fhmm.appliance_ids]
    accuracy = []
    for std in [0.0, 100.0, 400.0]:
        scores = []
        for seed in range(20):
            noise = np.random.default_rng(seed).normal(0, std, len(evaluate)) if std > 0 else 0.0
            states = viterbi_map(benchmark.fhmm, evaluate.aggregate.with_values(evaluate.aggregate.values + noise))
            scores.append(np.mean([np.mean(s.states == t.states) for s, t in zip(states, truth)]))
        accuracy.append(np.mean(scores))
    assert accuracy[0] >= accuracy[1] >= accuracy[2]


def test_states_to_power(two_binary_fhmm):
    states = [StateSequence('fridge', [0, 1], 1), StateSequence('washer', [0, 0], 1)]
    power = states_to_power(two_binary_fhmm, states, reference=PowerSeries(120, 30, [0.0, 0.0]))
    assert np.array_equal(power['fridge'].values, [0.0, 100.0])
    assert np.array_equal(power['washer'].values, [0.0, 0.0])
    assert power['fridge'].start_time == 120 and power['fridge'].interval == 30


def test_states_to_power_out_of_range(two_binary_fhmm):
    states = [StateSequence('fridge', [0, 2], 2), StateSequence('washer', [0, 0], 1)]
    with pytest.raises(ValidationError):
        states_to_power(two_binary_fhmm, states)


def test_decoded_power_sums_to_noiseless_aggregate():
    from fhmmdp.appliances import train_models
    from fhmmdp.data import split_dataset
    from fhmmdp.synth import ApplianceSpec, SynthConfig, synth_generate

    specs = [ApplianceSpec('fridge', [0.0, 100.0], 0.0, [[0.9, 0.1], [0.1, 0.9]], [0.5, 0.5]),
             ApplianceSpec('oven', [0.0, 600.0, 1400.0], 0.0,
                           [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]], [0.4, 0.3, 0.3])]
    dataset = synth_generate(SynthConfig(specs, duration=2000, seed=8))
    train, evaluate = split_dataset(dataset)
    fhmm = build_fhmm(train_models(train.per_appliance, {'fridge': 1, 'oven': 2}))
    states = viterbi_map(fhmm, evaluate.aggregate)
    for s in states:
        assert s == evaluate.truth_states[s.appliance_id]
    power = states_to_power(fhmm, states, reference=evaluate.aggregate)
    total = np.sum([p.values for p in power.values()], axis=0)
    assert np.allclose(total, evaluate.aggregate.values, atol=1e-6)
