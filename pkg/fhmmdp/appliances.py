import logging
import warnings
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .data import StateSequence
from .errors import DegenerateClusterError, TrainingError, ValidationError, AlignmentError
from .synth import check_stochastic

logger = logging.getLogger(__name__)

OFF_THRESHOLD = 5.0
STD_FLOOR = 1.0
SMOOTHING = 1.0
KMEANS_ITERATIONS = 50


@dataclass(frozen=True)
class StateStats:
    mean: float
    std: float
    samples: np.ndarray


@dataclass(frozen=True, eq=False)
class ApplianceModel:
    r"""
    HMM of one appliance with omega+1 switch states (0 = OFF). `pi` is the
    initial distribution, `A` the transition matrix, `means`/`stds` the
    Gaussian emission parameters in watts, and `cp` the consumption profile,
    i.e. the observed power samples of every state.
    """
    appliance_id: str
    pi: np.ndarray
    A: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    cp: Sequence[np.ndarray]

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        A = np.array(self.A, dtype=float)
        means = np.array(self.means, dtype=float)
        stds = np.array(self.stds, dtype=float)
        cp = tuple(np.array(samples, dtype=float).ravel() for samples in self.cp)
        k = pi.size
        if k < 2 or A.shape != (k, k) or means.shape != (k,) or stds.shape != (k,) or len(cp) != k:
            raise ValidationError("Inconsistent parameter shapes for appliance {}".format(self.appliance_id))
        check_stochastic(pi, "Initial distribution of {}".format(self.appliance_id))
        check_stochastic(A, "Transition matrix of {}".format(self.appliance_id))
        if np.any(stds <= 0):
            raise ValidationError("Emission stds of {} must be positive".format(self.appliance_id))
        for state, samples in enumerate(cp):
            if samples.size == 0:
                raise TrainingError("Consumption profile of {} is empty for state {}".format(
                    self.appliance_id, state), appliance=self.appliance_id, state=state)
        for name, arr in (('pi', pi), ('A', A), ('means', means), ('stds', stds)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for samples in cp:
            samples.setflags(write=False)
        object.__setattr__(self, 'cp', cp)

    @property
    def omega(self):
        return self.pi.size - 1

    @property
    def num_states(self):
        return self.pi.size


def quantize_states(series, omega, threshold=OFF_THRESHOLD, seed=0, max_iter=KMEANS_ITERATIONS,
                    appliance_id='appliance'):
    r"""
    Quantize a measured power trace into switch states. Values at or below
    `threshold` watts are OFF (state 0); the remaining values are clustered
    into `omega` groups by 1-D k-means (k-means++ init, `max_iter`
    iterations, seeded) and relabelled 1..omega by ascending cluster mean.
    The clustering runs on the sorted values so the result depends only on
    the value multiset and the seed.

    Returns the StateSequence and a list of StateStats, one per state.
    """
    if omega < 1:
        raise ValidationError("omega must be at least 1, got {}".format(omega))
    values = series.values
    if values.size > 0 and values.min() < 0:
        raise ValidationError("Cannot quantize a series with negative power")
    if values.size == 0:
        return StateSequence(appliance_id, np.zeros(0, dtype=np.int64), omega), []

    on_mask = values > threshold
    on_values = values[on_mask]
    num_distinct = np.unique(on_values).size
    if num_distinct < omega:
        raise DegenerateClusterError(
            "Cannot form {} ON clusters from {} distinct values above {} W".format(omega, num_distinct, threshold))

    kmeans = KMeans(n_clusters=omega, init='k-means++', n_init=1, max_iter=max_iter, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', ConvergenceWarning)
        kmeans.fit(np.sort(on_values).reshape(-1, 1))
    labels = kmeans.predict(on_values.reshape(-1, 1))
    centers = kmeans.cluster_centers_.ravel()
    order = np.argsort(centers, kind='stable')
    relabel = np.empty(omega, dtype=np.int64)
    relabel[order] = np.arange(1, omega + 1)

    states = np.zeros(values.size, dtype=np.int64)
    states[on_mask] = relabel[labels]
    stats = []
    for k in range(omega + 1):
        samples = values[states == k]
        if k > 0 and samples.size == 0:
            raise DegenerateClusterError("k-means produced an empty cluster for state {}".format(k))
        stats.append(StateStats(float(samples.mean()) if samples.size else 0.0,
                                float(samples.std()) if samples.size else 0.0, samples))
    return StateSequence(appliance_id, states, omega), stats


def estimate_hmm_params(states, series, alpha=SMOOTHING, std_floor=STD_FLOOR, appliance_id=None):
    r"""
    Maximum likelihood estimate of an appliance HMM from a labelled state
    sequence and the matching power trace. Initial probabilities are the
    state frequencies over all samples, transitions the row-normalized
    transition counts, both with additive smoothing `alpha`. Emissions are
    the per-state sample mean and std (floored at `std_floor`), and the
    consumption profile keeps the raw samples of each state.

    An OFF state that never occurs gets a profile of [0.0] and mean 0 W;
    an unobserved ON state raises a TrainingError.
    """
    if not states.discrete:
        raise ValidationError("Parameter estimation needs discrete states")
    if len(states) != len(series):
        raise AlignmentError("State sequence and power series differ in length")
    if len(states) < 2:
        raise TrainingError("At least two samples are required for training", appliance=states.appliance_id)
    appliance_id = appliance_id or states.appliance_id
    k = states.omega + 1
    x = states.states
    y = series.values

    counts = np.bincount(x, minlength=k).astype(float)
    pi = (counts + alpha) / (counts.sum() + alpha * k)

    transitions = np.zeros((k, k))
    np.add.at(transitions, (x[:-1], x[1:]), 1)
    transitions += alpha
    A = transitions / transitions.sum(axis=1, keepdims=True)

    means = np.zeros(k)
    stds = np.full(k, std_floor)
    cp = []
    for state in range(k):
        samples = y[x == state]
        if samples.size == 0:
            if state != 0:
                raise TrainingError("State {} of appliance {} never observed in training data".format(
                    state, appliance_id), appliance=appliance_id, state=state)
            samples = np.zeros(1)
        means[state] = samples.mean()
        stds[state] = max(samples.std(), std_floor)
        cp.append(samples)
    return ApplianceModel(appliance_id, pi, A, means, stds, cp)


def train_appliance(appliance_id, series, omega, threshold=OFF_THRESHOLD, seed=0,
                    alpha=SMOOTHING, std_floor=STD_FLOOR, max_iter=KMEANS_ITERATIONS):
    r"""Quantize a submeter trace and estimate the appliance HMM from it."""
    states, _ = quantize_states(series, omega, threshold=threshold, seed=seed, max_iter=max_iter,
                                appliance_id=appliance_id)
    model = estimate_hmm_params(states, series, alpha=alpha, std_floor=std_floor, appliance_id=appliance_id)
    logger.info('Trained %s: omega=%d, state means %s W', appliance_id, omega,
                np.array2string(model.means, precision=1))
    return model


def label_states(model, series, threshold=OFF_THRESHOLD):
    r"""Label a submeter trace with a trained model's states: OFF at or
    below `threshold`, otherwise the ON state with the nearest emission
    mean. Used as ground truth when a dataset carries none."""
    values = series.values
    on_means = model.means[1:]
    nearest = np.argmin(np.abs(values[:, np.newaxis] - on_means[np.newaxis, :]), axis=1) + 1
    states = np.where(values > threshold, nearest, 0)
    return StateSequence(model.appliance_id, states, model.omega)


def train_models(per_appliance, omegas, seed=0, **kwargs) -> List[ApplianceModel]:
    r"""Train one ApplianceModel per submeter series, in the order of
    `per_appliance`. `omegas` maps appliance id to its number of ON states.
    Each appliance's k-means is seeded with `derive_seed(seed, 'quantize',
    appliance_id)`."""
    from .seeds import derive_seed

    models = []
    for app_id, series in per_appliance.items():
        if app_id not in omegas:
            raise TrainingError("No omega configured for appliance {}".format(app_id), appliance=app_id)
        models.append(train_appliance(app_id, series, int(omegas[app_id]),
                                      seed=derive_seed(seed, 'quantize', app_id), **kwargs))
    return models
