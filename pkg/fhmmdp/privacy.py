import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .data import PowerSeries, StateSequence
from .errors import ValidationError
from .inference import viterbi_map, states_to_power

logger = logging.getLogger(__name__)

SENSITIVITY_MODES = ('global', 'local', 'smooth')
COMPOSITIONS = ('per-slot',)
DEFAULT_BETA = 0.1


@dataclass(frozen=True)
class PrivacyParams:
    r"""
    Parameters of the state perturbation mechanism. `epsilon` is the
    per-slot privacy budget; `appliance_epsilons` optionally overrides it
    per appliance (parallel composition over disjoint appliances, so the
    overall guarantee is the maximum budget). `beta` is only used in smooth
    mode. Noise is drawn independently per time slot and the reported
    budget is the per-slot one (`composition='per-slot'`).
    """
    epsilon: float
    sensitivity_mode: str = 'global'
    beta: Optional[float] = None
    rng_seed: int = 0
    composition: str = 'per-slot'
    appliance_epsilons: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive, got {}".format(self.epsilon))
        if self.sensitivity_mode not in SENSITIVITY_MODES:
            raise ValidationError("Unknown sensitivity mode {!r}, expected one of {}".format(
                self.sensitivity_mode, ', '.join(SENSITIVITY_MODES)))
        if self.sensitivity_mode == 'smooth':
            if self.beta is None:
                object.__setattr__(self, 'beta', DEFAULT_BETA)
            elif not self.beta > 0:
                raise ValidationError("beta must be positive in smooth mode, got {}".format(self.beta))
        if self.composition not in COMPOSITIONS:
            raise ValidationError("Unsupported composition {!r}".format(self.composition))
        for app_id, eps in (self.appliance_epsilons or {}).items():
            if not eps > 0:
                raise ValidationError("epsilon of appliance {} must be positive".format(app_id))

    def epsilon_for(self, appliance_id):
        if self.appliance_epsilons and appliance_id in self.appliance_epsilons:
            return float(self.appliance_epsilons[appliance_id])
        return float(self.epsilon)

    def effective_epsilon(self, appliance_ids):
        r"""Per-slot budget guaranteed for the whole state vector: the
        maximum over the appliances' budgets."""
        return max(self.epsilon_for(a) for a in appliance_ids)


@dataclass(frozen=True)
class SensitivityValue:
    value: float
    mode: str

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("Sensitivity must be non-negative")


def laplace_quantile(u, scale):
    r"""Inverse CDF of Laplace(0, scale) evaluated at u in (0, 1)."""
    u = np.asarray(u, dtype=float) - 0.5
    return -scale * np.sign(u) * np.log1p(-2 * np.abs(u))


def laplace_sample(scale, rng, size=None):
    r"""
    Draw from Laplace(0, scale) by the inverse CDF of uniform draws from
    `rng`. Returns a float if `size` is None, otherwise an array.
    """
    if not scale > 0:
        raise ValidationError("Laplace scale must be positive, got {}".format(scale))
    u = rng.random(size)
    # u == 0 would map to -inf
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    x = laplace_quantile(u, scale)
    return float(x) if size is None else x


def global_sensitivity(fhmm):
    r"""Largest change of a single state entry between adjacent datasets,
    over all possible datasets: max_i omega_i."""
    return SensitivityValue(float(max(fhmm.omegas)), 'global')


def local_sensitivity(states):
    r"""Largest change of a single state entry reachable from the given
    dataset: an entry at v in {0..omega} can move by at most
    max(v, omega - v)."""
    best = 0
    for seq in states:
        if len(seq) == 0:
            continue
        x = seq.states
        best = max(best, int(np.max(np.maximum(x, seq.omega - x))))
    return SensitivityValue(float(best), 'local')


def smooth_sensitivity(states, beta):
    r"""Local sensitivity damped by exp(-beta * |D delta D'|) with
    |D delta D'| = 1 for adjacent datasets."""
    if not beta > 0:
        raise ValidationError("beta must be positive, got {}".format(beta))
    return SensitivityValue(local_sensitivity(states).value * math.exp(-beta), 'smooth')


def sensitivity(states, params, fhmm):
    if params.sensitivity_mode == 'global':
        return global_sensitivity(fhmm)
    elif params.sensitivity_mode == 'local':
        return local_sensitivity(states)
    else:
        return smooth_sensitivity(states, params.beta)


def perturb_states(states, params, fhmm, rng=None):
    r"""
    Add independent Laplace(0, S/epsilon) noise to every entry of every
    appliance's state sequence, with S from the selected sensitivity mode.
    Noise is drawn appliance by appliance, in time order within each
    appliance. If `rng` is None, a generator is seeded with
    `params.rng_seed`. Returns noisy (real-valued) StateSequences.
    """
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    s = sensitivity(states, params, fhmm)
    noisy = []
    for seq in states:
        if not seq.discrete:
            raise ValidationError("Perturbation needs discrete states")
        scale = s.value / params.epsilon_for(seq.appliance_id)
        x = seq.states.astype(float)
        if scale > 0 and len(seq) > 0:
            x = x + laplace_sample(scale, rng, size=len(seq))
        noisy.append(StateSequence(seq.appliance_id, x, seq.omega, discrete=False))
    logger.debug('Perturbed %d appliances with %s sensitivity %.4g', len(states), s.mode, s.value)
    return noisy


def discretize_states(noisy, fhmm=None):
    r"""
    Map noisy states back onto {0..omega}: round to the nearest integer
    (halves away from zero), then clamp to the appliance's range. The omega
    of each appliance is taken from `fhmm` if given, else from the sequence.
    """
    result = []
    for seq in noisy:
        omega = fhmm.appliance(seq.appliance_id).omega if fhmm is not None else seq.omega
        x = np.asarray(seq.states, dtype=float)
        rounded = np.sign(x) * np.floor(np.abs(x) + 0.5)
        result.append(StateSequence(seq.appliance_id, np.clip(rounded, 0, omega).astype(np.int64), omega))
    return result


def baseline_aggregate_laplace(y_sum, epsilon, delta_f_watts, rng):
    r"""
    Direct noise baseline: every aggregate reading receives independent
    Laplace(0, delta_f_watts/epsilon) noise. The output is not clamped and
    may go negative.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive, got {}".format(epsilon))
    if not delta_f_watts > 0:
        raise ValidationError("delta_f_watts must be positive, got {}".format(delta_f_watts))
    noise = laplace_sample(delta_f_watts / epsilon, rng, size=len(y_sum))
    return y_sum.with_values(y_sum.values + noise, measured=False)


def baseline_hmm_resynthesis(fhmm, y_sum, sigma_watts, rng):
    r"""
    Resynthesis baseline: decode the states with the FHMM, regenerate the
    load from the state emission means, and add i.i.d. Gaussian noise of
    standard deviation `sigma_watts` to every reading.
    """
    if sigma_watts < 0:
        raise ValidationError("sigma_watts must be non-negative, got {}".format(sigma_watts))
    states = viterbi_map(fhmm, y_sum)
    decoded = states_to_power(fhmm, states, reference=y_sum)
    total = np.sum([s.values for s in decoded.values()], axis=0) if len(y_sum) else np.zeros(0)
    if sigma_watts > 0:
        total = total + rng.normal(0.0, sigma_watts, size=len(y_sum))
    return y_sum.with_values(total, measured=False)


def default_delta_f_watts(train_aggregate):
    r"""Sensitivity of the direct noise baseline: the maximum aggregate
    power observed in training data."""
    if len(train_aggregate) == 0:
        raise ValidationError("Cannot derive delta_f from an empty training series")
    return float(np.max(train_aggregate.values))


def matched_sigma_watts(delta_f_watts, epsilon):
    r"""Gaussian std with the same noise power as Laplace(0, delta_f/eps)."""
    return math.sqrt(2.0) * delta_f_watts / epsilon
