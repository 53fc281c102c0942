import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import yaml

from .data import PowerSeries, StateSequence, LabeledDataset
from .errors import ValidationError, ConfigError

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-9


def check_stochastic(matrix, name):
    r"""Raise a ValidationError unless every row of `matrix` (or the vector
    itself) is a probability distribution within 1e-9."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if np.any(matrix < 0):
        raise ValidationError("{} has negative entries".format(name))
    sums = matrix.sum(axis=1)
    if np.any(np.abs(sums - 1) > STOCHASTIC_TOLERANCE):
        raise ValidationError("{} rows must sum to 1, got {}".format(name, sums))


@dataclass(frozen=True)
class ApplianceSpec:
    r"""
    Generator parameters of one synthetic appliance. `means[k]` is the mean
    power of state k in watts (state 0 is OFF and must be 0 W), `jitter_std`
    the Gaussian power jitter of every ON state, `transition` the row
    stochastic transition matrix and `initial` the initial distribution.
    """
    name: str
    means: Sequence[float]
    jitter_std: float
    transition: Sequence[Sequence[float]]
    initial: Sequence[float]

    def __post_init__(self):
        k = len(self.means)
        if k < 2:
            raise ValidationError("Appliance {} needs OFF and at least one ON state".format(self.name))
        if self.means[0] != 0:
            raise ValidationError("State 0 of appliance {} must have mean 0 W".format(self.name))
        if self.jitter_std < 0:
            raise ValidationError("Jitter of appliance {} must be non-negative".format(self.name))
        if np.shape(self.transition) != (k, k) or np.shape(self.initial) != (k,):
            raise ValidationError("Parameter shapes of appliance {} do not match {} states".format(self.name, k))
        check_stochastic(self.transition, "Transition matrix of {}".format(self.name))
        check_stochastic(self.initial, "Initial distribution of {}".format(self.name))

    @property
    def omega(self):
        return len(self.means) - 1


@dataclass(frozen=True)
class SynthConfig:
    appliances: List[ApplianceSpec]
    duration: int
    interval: int = 60
    seed: int = 0
    start_time: int = 0
    meters: int = 1

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("Duration must be non-negative")
        if self.interval <= 0:
            raise ValidationError("Interval must be positive")
        if not self.appliances:
            raise ValidationError("At least one appliance is required")
        names = [a.name for a in self.appliances]
        if len(set(names)) != len(names):
            raise ValidationError("Appliance names must be unique")


def sample_chain(transition, initial, length, rng):
    r"""Sample a state trajectory of a Markov chain by inverse-CDF lookups on
    pre-drawn uniforms (one for the initial state, one per transition)."""
    if length == 0:
        return np.zeros(0, dtype=np.int64)
    cum_initial = np.cumsum(initial)
    cum_transition = np.cumsum(transition, axis=1)
    u = rng.random(length)
    k = len(initial)
    states = np.empty(length, dtype=np.int64)
    states[0] = min(np.searchsorted(cum_initial, u[0], side='right'), k - 1)
    for t in range(1, length):
        states[t] = min(np.searchsorted(cum_transition[states[t-1]], u[t], side='right'), k - 1)
    return states


def synth_generate(config):
    r"""
    Generate a labeled dataset distributed according to a factorial HMM.
    Every appliance's switch states follow its own Markov chain; its power is
    the state mean plus Gaussian jitter, clamped at 0 W, and exactly 0 W in
    the OFF state. The aggregate is the exact per-appliance sum. The same
    config (including its seed) always yields a bit-identical dataset.
    """
    rng = np.random.default_rng(config.seed)
    per_appliance = {}
    truth = {}
    for spec in config.appliances:
        states = sample_chain(np.asarray(spec.transition, dtype=float), np.asarray(spec.initial, dtype=float),
                              config.duration, rng)
        means = np.asarray(spec.means, dtype=float)
        jitter = rng.normal(0.0, spec.jitter_std, config.duration) if spec.jitter_std > 0 else 0.0
        power = np.where(states > 0, np.maximum(means[states] + jitter, 0.0), 0.0)
        per_appliance[spec.name] = PowerSeries(config.start_time, config.interval, power, measured=True)
        truth[spec.name] = StateSequence(spec.name, states, spec.omega)

    if config.duration > 0:
        total = np.sum([s.values for s in per_appliance.values()], axis=0)
    else:
        total = np.zeros(0)
    aggregate = PowerSeries(config.start_time, config.interval, total, measured=True)
    logger.debug('Generated %d samples for %d appliances (seed %d)', config.duration, len(per_appliance), config.seed)
    return LabeledDataset(aggregate, per_appliance, truth, exact=True)


def synth_config_from_dict(d, seed=0, interval=60):
    r"""Build a SynthConfig from the `synth` section of a configuration
    file. `seed` and `interval` come from the top level of the file."""
    try:
        appliances = [ApplianceSpec(
            name=str(a['name']),
            means=[float(v) for v in a['means']],
            jitter_std=float(a.get('jitter_std', 0.0)),
            transition=[[float(v) for v in row] for row in a['transition']],
            initial=[float(v) for v in a['initial']],
        ) for a in d['appliances']]
    except (KeyError, TypeError) as e:
        raise ConfigError("Invalid synth appliance entry: {}".format(e)) from None
    unknown = set(d) - {'appliances', 'duration', 'start_time', 'meters'}
    if unknown:
        raise ConfigError("Unknown synth keys: {}".format(', '.join(sorted(unknown))))
    return SynthConfig(appliances=appliances, duration=int(d.get('duration', 5000)), interval=int(interval),
                       seed=int(seed), start_time=int(d.get('start_time', 0)), meters=int(d.get('meters', 1)))


def load_synth_config(path):
    r"""Load a SynthConfig from a YAML file holding `seed`, `interval` and a
    `synth` section (or a bare synth section)."""
    with open(path, 'r') as f:
        try:
            doc = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError("Invalid configuration file {}: {}".format(path, e)) from None
    section = doc.get('synth', doc)
    return synth_config_from_dict(section, seed=doc.get('seed', 0), interval=doc.get('interval', 60))


def default_appliances():
    r"""Three appliances with well-separated state means, used by the
    example configuration and the experiment script."""
    sticky = lambda k, p: (np.full((k, k), (1 - p) / (k - 1)) + np.eye(k) * (p - (1 - p) / (k - 1))).tolist()
    return [
        ApplianceSpec('fridge', [0.0, 100.0], 5.0, sticky(2, 0.95), [0.5, 0.5]),
        ApplianceSpec('washer', [0.0, 250.0], 5.0, sticky(2, 0.95), [0.5, 0.5]),
        ApplianceSpec('oven', [0.0, 600.0, 1400.0], 5.0, sticky(3, 0.95), [1/3, 1/3, 1/3]),
    ]
