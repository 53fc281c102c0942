r"""Shared fixtures: small hand-built appliance models, random FHMM
instances and a trained model on the synthetic three-appliance benchmark."""
from types import SimpleNamespace

import numpy as np
import pytest

from fhmmdp.appliances import ApplianceModel, train_models
from fhmmdp.data import split_dataset
from fhmmdp.model import build_fhmm
from fhmmdp.synth import ApplianceSpec, SynthConfig, default_appliances, synth_generate


def make_appliance(appliance_id, means, stds=None, stay=0.9, pi=None, cp=None):
    k = len(means)
    A = np.full((k, k), (1 - stay) / (k - 1))
    np.fill_diagonal(A, stay)
    return ApplianceModel(
        appliance_id=appliance_id,
        pi=np.full(k, 1 / k) if pi is None else pi,
        A=A,
        means=means,
        stds=np.full(k, 2.0) if stds is None else stds,
        cp=[[float(m)] for m in means] if cp is None else cp)


def make_random_fhmm(rng, num_appliances, max_omega):
    models = []
    for i in range(num_appliances):
        k = int(rng.integers(2, max_omega + 2))
        means = np.concatenate([[0.0], np.sort(rng.uniform(20, 1000, k - 1))])
        models.append(ApplianceModel(
            appliance_id='a{}'.format(i),
            pi=rng.dirichlet(np.ones(k)),
            A=rng.dirichlet(np.ones(k), size=k),
            means=means,
            stds=rng.uniform(5, 80, k),
            cp=[[m] for m in means]))
    return build_fhmm(models)


@pytest.fixture
def appliance_factory():
    return make_appliance


@pytest.fixture
def random_fhmm_factory():
    return make_random_fhmm


@pytest.fixture
def binary_fhmm():
    return build_fhmm([make_appliance('heater', [0.0, 200.0], stds=[1.0, 1.0])])


@pytest.fixture
def two_binary_fhmm():
    return build_fhmm([make_appliance('fridge', [0.0, 100.0], stds=[1.0, 3.0]),
                       make_appliance('washer', [0.0, 300.0], stds=[1.0, 3.0])])


@pytest.fixture(scope='session')
def benchmark():
    r"""Default appliances, 5000 samples at 60 s; the first half trains the
    FHMM, the second half is used for evaluation."""
    dataset = synth_generate(SynthConfig(default_appliances(), duration=5000, interval=60, seed=0))
    train, evaluate = split_dataset(dataset, 0.5)
    omegas = {spec.name: spec.omega for spec in default_appliances()}
    fhmm = build_fhmm(train_models(train.per_appliance, omegas, seed=0))
    return SimpleNamespace(dataset=dataset, train=train, evaluate=evaluate, fhmm=fhmm)


@pytest.fixture
def small_config():
    r"""Configuration document for fast command line runs: two binary
    appliances and a reduced sweep."""
    appliance = lambda name, watts: {
        'name': name,
        'means': [0, watts],
        'jitter_std': 3.0,
        'transition': [[0.9, 0.1], [0.1, 0.9]],
        'initial': [0.5, 0.5],
    }
    return {
        'seed': 3,
        'interval': 60,
        'synth': {
            'duration': 600,
            'start_time': 1303132929,
            'meters': 2,
            'appliances': [appliance('fridge', 100), appliance('washer', 250)],
        },
        'sweep': {
            'mechanisms': ['states', 'aggregate-laplace'],
            'epsilons': [1, 5],
            'seeds': [0, 1],
        },
        'fog': {'group_size': 2},
    }
