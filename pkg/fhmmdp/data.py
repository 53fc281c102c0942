import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Optional

from .errors import AlignmentError, ValidationError


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PowerSeries:
    r"""
    Uniformly sampled active-power time series of one channel. Sample `k`
    belongs to UNIX time `start_time + k*interval`. If `measured` is True,
    all values must be non-negative; obfuscated series may carry arbitrary
    real values and are created with `measured=False`.
    """
    start_time: int
    interval: int
    values: np.ndarray
    measured: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_array(self.values))
        if int(self.interval) != self.interval or self.interval <= 0:
            raise ValidationError("Series interval must be a positive integer, got {}".format(self.interval))
        object.__setattr__(self, 'interval', int(self.interval))
        object.__setattr__(self, 'start_time', int(self.start_time))
        if self.measured and self.values.size > 0 and self.values.min() < 0:
            raise ValidationError("Measured series contains negative power {:.3f} W".format(self.values.min()))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return (self.start_time == other.start_time and self.interval == other.interval
                and np.array_equal(self.values, other.values))

    @property
    def timestamps(self):
        return self.start_time + self.interval * np.arange(len(self), dtype=np.int64)

    @property
    def end_time(self):
        return self.start_time + self.interval * len(self)

    def with_values(self, values, measured=False):
        r"""Return a series with the same timing and new values."""
        return PowerSeries(self.start_time, self.interval, values, measured=measured)

    def slice(self, start, stop):
        return PowerSeries(self.start_time + start * self.interval, self.interval,
                           self.values[start:stop], measured=self.measured)


@dataclass(frozen=True, eq=False)
class StateSequence:
    r"""
    Switch-state trajectory of one appliance. In discrete form the states are
    integers in {0,...,omega} where 0 is OFF and k >= 1 is ON_k. The noisy
    form holds real values and is only produced by the privacy mechanism.
    """
    appliance_id: str
    states: np.ndarray
    omega: int
    discrete: bool = True

    def __post_init__(self):
        if self.omega < 1:
            raise ValidationError("Appliance {} needs at least one ON state".format(self.appliance_id))
        if self.discrete:
            arr = np.asarray(self.states)
            if arr.size > 0 and not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValidationError("Discrete states of {} must be integers".format(self.appliance_id))
            arr = _frozen_array(arr, dtype=np.int64)
            if arr.size > 0 and (arr.min() < 0 or arr.max() > self.omega):
                raise ValidationError("States of {} must lie in 0..{}".format(self.appliance_id, self.omega))
        else:
            arr = _frozen_array(self.states, dtype=float)
        object.__setattr__(self, 'states', arr)

    def __len__(self):
        return self.states.size

    def __eq__(self, other):
        if not isinstance(other, StateSequence):
            return NotImplemented
        return (self.appliance_id == other.appliance_id and self.omega == other.omega
                and self.discrete == other.discrete and np.array_equal(self.states, other.states))

    def slice(self, start, stop):
        return StateSequence(self.appliance_id, self.states[start:stop], self.omega, self.discrete)


def check_alignment(*series):
    r"""Raise an AlignmentError unless all given series share start time,
    interval, and length."""
    if len(series) == 0:
        return
    first = series[0]
    for s in series[1:]:
        if (s.start_time, s.interval, len(s)) != (first.start_time, first.interval, len(first)):
            raise AlignmentError(
                "Series not aligned: (start {}, interval {}, length {}) vs (start {}, interval {}, length {})".format(
                    first.start_time, first.interval, len(first), s.start_time, s.interval, len(s)))


@dataclass(frozen=True)
class LabeledDataset:
    r"""
    Aggregate meter series together with optional per-appliance submeter
    series and ground-truth switch states. If `exact` is True (synthetic
    data), the aggregate must equal the per-appliance sum within 1e-6 W.
    """
    aggregate: PowerSeries
    per_appliance: Dict[str, PowerSeries] = field(default_factory=dict)
    truth_states: Optional[Dict[str, StateSequence]] = None
    exact: bool = False

    def __post_init__(self):
        check_alignment(self.aggregate, *self.per_appliance.values())
        if self.truth_states is not None:
            for app_id, seq in self.truth_states.items():
                if len(seq) != len(self.aggregate):
                    raise AlignmentError("Truth states of {} have length {} instead of {}".format(
                        app_id, len(seq), len(self.aggregate)))
        if self.exact and self.per_appliance and len(self.aggregate) > 0:
            total = np.sum([s.values for s in self.per_appliance.values()], axis=0)
            err = np.abs(total - self.aggregate.values).max()
            if err > 1e-6:
                raise ValidationError("Aggregate differs from per-appliance sum by {:.3g} W".format(err))

    def __len__(self):
        return len(self.aggregate)

    @property
    def appliance_ids(self):
        return list(self.per_appliance.keys())

    def slice(self, start, stop):
        return LabeledDataset(
            aggregate=self.aggregate.slice(start, stop),
            per_appliance={k: v.slice(start, stop) for k, v in self.per_appliance.items()},
            truth_states=None if self.truth_states is None else
                {k: v.slice(start, stop) for k, v in self.truth_states.items()},
            exact=self.exact)


def split_dataset(dataset, fraction=0.5):
    r"""Split a dataset in time. The first `fraction` of the samples is used
    for training and the remainder for evaluation. Returns a tuple
    (train, evaluate)."""
    if not 0 < fraction < 1:
        raise ValidationError("Training fraction must lie in (0, 1), got {}".format(fraction))
    n_train = int(np.floor(len(dataset) * fraction))
    return dataset.slice(0, n_train), dataset.slice(n_train, len(dataset))
