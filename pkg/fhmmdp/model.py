import logging
from dataclasses import dataclass
from functools import reduce
from typing import Tuple

import numpy as np
from scipy.stats import norm

from .appliances import ApplianceModel
from .errors import CapacityError, ValidationError

logger = logging.getLogger(__name__)

MAX_JOINT_STATES = 4096


@dataclass(frozen=True, eq=False)
class FhmmModel:
    r"""
    Factorial HMM composed of independent appliance chains. Joint states are
    tuples (s_1,...,s_N) flattened in C order, i.e. the first appliance is
    the most significant digit of the flat index. Joint initial and
    transition probabilities are products over appliances; the emission of
    the aggregate is Gaussian with the summed state means and variances.
    All joint quantities are kept in natural-log space.
    """
    appliances: Tuple[ApplianceModel, ...]
    max_joint_states: int = MAX_JOINT_STATES

    @property
    def shape(self):
        return tuple(m.num_states for m in self.appliances)

    @property
    def num_joint_states(self):
        return int(np.prod(self.shape))

    @property
    def appliance_ids(self):
        return [m.appliance_id for m in self.appliances]

    @property
    def omegas(self):
        return [m.omega for m in self.appliances]

    def appliance(self, appliance_id):
        for m in self.appliances:
            if m.appliance_id == appliance_id:
                return m
        raise KeyError(appliance_id)

    def joint_index(self, states):
        r"""Flat index of a joint state tuple (or of arrays of per-appliance
        states, one row per appliance)."""
        return np.ravel_multi_index(tuple(np.asarray(s) for s in states), self.shape)

    def joint_state(self, index):
        r"""Per-appliance state tuple of a flat joint index (or arrays of
        states for an array of indices)."""
        return np.unravel_index(index, self.shape)

    def log_pi(self):
        return reduce(np.add.outer, [np.log(m.pi) for m in self.appliances]).ravel()

    def pi(self):
        return np.exp(self.log_pi())

    def log_transitions(self):
        r"""Per-appliance log transition matrices. Joint transitions factor
        as the sum of these over appliances."""
        return [np.log(m.A) for m in self.appliances]

    def transition_matrix(self):
        r"""Materialize the full joint transition matrix as the Kronecker
        product of the appliance matrices. Only use at desk scale."""
        return reduce(np.kron, [m.A for m in self.appliances])

    def emission_means(self):
        return reduce(np.add.outer, [m.means for m in self.appliances]).ravel()

    def emission_stds(self):
        return np.sqrt(reduce(np.add.outer, [m.stds ** 2 for m in self.appliances]).ravel())

    def log_emissions(self, y):
        r"""Gaussian log-density of every aggregate observation under every
        joint state. Returns an array of shape (len(y), num_joint_states)."""
        y = np.asarray(y, dtype=float)
        return norm.logpdf(y[:, np.newaxis], loc=self.emission_means()[np.newaxis, :],
                           scale=self.emission_stds()[np.newaxis, :])


def build_fhmm(models, max_joint_states=MAX_JOINT_STATES):
    r"""
    Compose appliance models into an FhmmModel. Raises a CapacityError if
    the joint state count exceeds `max_joint_states`, since exact inference
    is then intractable.
    """
    models = tuple(models)
    if len(models) == 0:
        raise ValidationError("At least one appliance model is required")
    ids = [m.appliance_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValidationError("Appliance ids must be unique, got {}".format(ids))
    count = int(np.prod([m.num_states for m in models]))
    if count > max_joint_states:
        raise CapacityError("Joint state count {} exceeds the cap of {}".format(count, max_joint_states))
    logger.debug('Composed FHMM over %d appliances with %d joint states', len(models), count)
    return FhmmModel(models, int(max_joint_states))
