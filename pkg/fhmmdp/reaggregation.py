r"""
Turning obfuscated switch states back into a load profile. Every appliance
is re-aggregated slot by slot from its original readings, zeros, and draws
from its consumption profile; the appliances are then summed into the
obfuscated household aggregate, and households are summed per fog node.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .data import PowerSeries, StateSequence, check_alignment
from .errors import AlignmentError, ReaggregationError, ValidationError
from .inference import viterbi_map, states_to_power
from .privacy import perturb_states, discretize_states

logger = logging.getLogger(__name__)


def reaggregate_appliance(original, x, x_prime, model, rng):
    r"""
    Obfuscated power of one appliance. Per time slot:
     - x' == x != 0: the original reading is kept,
     - x' == 0: 0 W,
     - x' != x, x' != 0: a uniform draw from the consumption profile of x'.
    Draws are made state by state in ascending order, in time order within
    each state.
    """
    if not (len(original) == len(x) == len(x_prime)):
        raise AlignmentError("Original series and state sequences differ in length")
    if not (x.discrete and x_prime.discrete):
        raise ValidationError("Re-aggregation needs discrete states")
    xs, xp = x.states, x_prime.states
    out = np.zeros(len(original))

    keep = (xp == xs) & (xp != 0)
    out[keep] = original.values[keep]

    replace = (xp != xs) & (xp != 0)
    for state in np.unique(xp[replace]):
        state = int(state)
        if state >= len(model.cp) or len(model.cp[state]) == 0:
            raise ReaggregationError("No consumption profile for state {} of appliance {}".format(
                state, model.appliance_id), appliance=model.appliance_id, state=state)
        profile = model.cp[state]
        idx = np.flatnonzero(replace & (xp == state))
        out[idx] = profile[rng.integers(0, len(profile), size=idx.size)]

    return original.with_values(out, measured=True)


def sum_appliances(per_appliance):
    r"""Elementwise sum of aligned per-appliance series."""
    series = list(per_appliance.values())
    if not series:
        raise ValidationError("Nothing to sum")
    check_alignment(*series)
    total = np.sum([s.values for s in series], axis=0) if len(series[0]) else np.zeros(0)
    return series[0].with_values(total, measured=all(s.measured for s in series))


def fog_aggregate(meters, group_size):
    r"""
    Regional totals forwarded by fog nodes. Meters are grouped positionally
    into consecutive groups of `group_size` (the last group may be smaller)
    and each group is summed.
    """
    if group_size < 1:
        raise ValidationError("Fog group size must be at least 1, got {}".format(group_size))
    meters = list(meters)
    if not meters:
        return []
    check_alignment(*meters)
    return [sum_appliances({i: m for i, m in enumerate(meters[k:k+group_size])})
            for k in range(0, len(meters), group_size)]


@dataclass(frozen=True)
class PrivatizedLoad:
    r"""Intermediate and final products of the state mechanism for one
    household. All state lists are in model order."""
    states: List[StateSequence]
    noisy_states: List[StateSequence]
    obfuscated_states: List[StateSequence]
    per_appliance: Dict[str, PowerSeries]
    aggregate: PowerSeries


def privatize_states(fhmm, aggregate, params, rng, originals=None, states=None, zero_noise=False):
    r"""
    Run the state mechanism on one household. The switch states are decoded
    from `aggregate` by the FHMM unless given in `states` (e.g. ground truth,
    as a list or a dict keyed by appliance id). They receive Laplace noise,
    are discretized, re-aggregated against the original per-appliance series
    in `originals` and summed.

    Appliances without an original series are re-aggregated against their
    decoded power. With `zero_noise`, the perturbation is skipped so that
    the obfuscated states equal the input states.
    """
    if states is None:
        states = viterbi_map(fhmm, aggregate)
    elif isinstance(states, dict):
        missing = [a for a in fhmm.appliance_ids if a not in states]
        if missing:
            raise ValidationError("No states for appliances {}".format(', '.join(missing)))
        states = [states[a] for a in fhmm.appliance_ids]
    states = list(states)
    for seq in states:
        if len(seq) != len(aggregate):
            raise AlignmentError("States of {} do not match the aggregate length".format(seq.appliance_id))

    originals = dict(originals or {})
    missing = [a for a in fhmm.appliance_ids if a not in originals]
    if missing:
        warnings.warn('No original series for {}, using decoded power instead'.format(', '.join(missing)))
        decoded = states_to_power(fhmm, states, reference=aggregate)
        for a in missing:
            originals[a] = decoded[a]

    if zero_noise:
        noisy = [StateSequence(s.appliance_id, s.states, s.omega, discrete=False) for s in states]
    else:
        noisy = perturb_states(states, params, fhmm, rng)
    obfuscated = discretize_states(noisy, fhmm)

    per_appliance = {}
    for model, x, x_prime in zip(fhmm.appliances, states, obfuscated):
        per_appliance[model.appliance_id] = reaggregate_appliance(originals[model.appliance_id], x, x_prime,
                                                                  model, rng)
    changed = sum(int(np.sum(x.states != xp.states)) for x, xp in zip(states, obfuscated))
    logger.debug('State mechanism changed %d of %d state entries', changed, len(aggregate) * len(states))
    return PrivatizedLoad(states, noisy, obfuscated, per_appliance, sum_appliances(per_appliance))
