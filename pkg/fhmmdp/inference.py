r"""
Exact MAP decoding of all appliances' switch states from the aggregate
signal. The same decoder serves as honest disaggregation and as the NILM
attacker. All probability math runs in natural-log space, so products of
many small probabilities cannot underflow.
"""
import logging

import numpy as np

from .data import PowerSeries, StateSequence
from .errors import CapacityError, ValidationError, AlignmentError

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**7
TIE_TOLERANCE = 1e-9


def _first_argmax(x, axis=None):
    r"""Index of the first entry within a relative TIE_TOLERANCE of the
    maximum along `axis`. Paths that tie exactly can score a few ULP apart
    depending on summation order; they resolve to the lowest index here."""
    best = np.max(x, axis=axis, keepdims=True)
    return np.argmax(x >= best - TIE_TOLERANCE * np.maximum(np.abs(best), 1.0), axis=axis)


def _decode_path(fhmm, joint_path):
    per_appliance = fhmm.joint_state(np.asarray(joint_path, dtype=np.int64))
    return [StateSequence(m.appliance_id, s, m.omega) for m, s in zip(fhmm.appliances, per_appliance)]


def _empty_states(fhmm):
    return [StateSequence(m.appliance_id, np.zeros(0, dtype=np.int64), m.omega) for m in fhmm.appliances]


def _max_transition(delta, log_A):
    r"""
    One max-product transition step on the factored joint space. `delta`
    has one axis per appliance. Appliance axes are reduced from the last to
    the first, each with a max over that appliance's previous state, which
    is exact because the joint log transition is a sum over appliances.
    Returns the new scores and the per-stage argmax arrays.
    """
    pointers = [None] * len(log_A)
    for i in reversed(range(len(log_A))):
        moved = np.moveaxis(delta, i, -1)
        cand = moved[..., :, np.newaxis] + log_A[i]
        pointers[i] = np.moveaxis(_first_argmax(cand, axis=-2), -1, i).astype(np.int16)
        delta = np.moveaxis(np.max(cand, axis=-2), -1, i)
    return delta, pointers


def _backtrack_step(pointers, target):
    r"""Recover the previous joint state tuple from the stage pointers of
    one step, given the chosen current state tuple."""
    prev = []
    for i in range(len(pointers)):
        index = tuple(prev) + tuple(target[i:])
        prev.append(int(pointers[i][index]))
    return tuple(prev)


def viterbi_map(fhmm, y_sum):
    r"""
    Joint MAP estimate of all appliances' state sequences given the
    aggregate series, by log-space Viterbi over the joint state space.
    Among equally likely paths, the one chosen has the lowest final joint
    index and, going backwards, the lowest predecessor index at every step.
    Returns one StateSequence per appliance in model order.
    """
    y = y_sum.values if isinstance(y_sum, PowerSeries) else np.asarray(y_sum, dtype=float)
    T = y.size
    if T == 0:
        return _empty_states(fhmm)

    shape = fhmm.shape
    log_A = fhmm.log_transitions()
    log_B = fhmm.log_emissions(y)

    delta = (fhmm.log_pi() + log_B[0]).reshape(shape)
    history = []
    for t in range(1, T):
        delta, pointers = _max_transition(delta, log_A)
        delta = delta + log_B[t].reshape(shape)
        history.append(pointers)

    last = int(_first_argmax(delta.ravel()))
    path = np.empty(T, dtype=np.int64)
    path[-1] = last
    state = tuple(int(s) for s in np.unravel_index(last, shape))
    for t in range(T - 1, 0, -1):
        state = _backtrack_step(history[t-1], state)
        path[t-1] = np.ravel_multi_index(state, shape)
    logger.debug('Viterbi decoded %d samples over %d joint states, log-likelihood %.3f',
                 T, fhmm.num_joint_states, float(delta.max()))
    return _decode_path(fhmm, path)


def path_log_likelihood(fhmm, y_sum, states):
    r"""Joint log-probability log P(Y_sum, X | lambda) of the given
    per-appliance state sequences."""
    y = y_sum.values if isinstance(y_sum, PowerSeries) else np.asarray(y_sum, dtype=float)
    if len(states) != len(fhmm.appliances):
        raise ValidationError("Expected {} state sequences, got {}".format(len(fhmm.appliances), len(states)))
    if y.size == 0:
        return 0.0
    if any(len(s) != y.size for s in states):
        raise AlignmentError("State sequences and aggregate differ in length")
    joint = fhmm.joint_index([s.states for s in states])
    log_B = fhmm.log_emissions(y)
    score = fhmm.log_pi()[joint[0]] + log_B[np.arange(y.size), joint].sum()
    for m, s in zip(fhmm.appliances, states):
        score += np.log(m.A)[s.states[:-1], s.states[1:]].sum()
    return float(score)


def brute_force_map(fhmm, y_sum):
    r"""
    MAP path by exhaustive enumeration of all joint paths. Only feasible for
    tiny instances (num_joint_states**T <= 1e7); serves as the test oracle
    for `viterbi_map` and uses the same tie-break.
    """
    y = y_sum.values if isinstance(y_sum, PowerSeries) else np.asarray(y_sum, dtype=float)
    T = y.size
    if T == 0:
        return _empty_states(fhmm)
    n = fhmm.num_joint_states
    if float(n) ** T > BRUTE_FORCE_LIMIT:
        raise CapacityError("{} joint states over {} steps are too many paths to enumerate".format(n, T))

    log_B = fhmm.log_emissions(y)
    log_trans = np.log(fhmm.transition_matrix()) if T > 1 else None

    # scores has one axis per time step, axis t indexing the joint state at t
    scores = fhmm.log_pi() + log_B[0]
    for t in range(1, T):
        step = log_trans + log_B[t][np.newaxis, :]
        scores = scores[..., np.newaxis] + step.reshape((1,) * (t - 1) + (n, n))

    # reversed axes make the last step the most significant digit, so the
    # first maximum is the smallest path read backwards in time
    flat = np.transpose(scores, tuple(reversed(range(T)))).ravel()
    best = np.unravel_index(int(_first_argmax(flat)), (n,) * T)
    path = np.array(best[::-1], dtype=np.int64)
    return _decode_path(fhmm, path)


def states_to_power(fhmm, states, reference=None, start_time=0, interval=60):
    r"""
    Deterministic decoded load: every appliance emits its state's emission
    mean at each step. Timing is taken from `reference` if given. Returns a
    dict mapping appliance id to PowerSeries.
    """
    if len(states) != len(fhmm.appliances):
        raise ValidationError("Expected {} state sequences, got {}".format(len(fhmm.appliances), len(states)))
    lengths = {len(s) for s in states}
    if len(lengths) > 1:
        raise AlignmentError("State sequences differ in length")
    if reference is not None:
        start_time, interval = reference.start_time, reference.interval
    result = {}
    for m, seq in zip(fhmm.appliances, states):
        if not seq.discrete:
            raise ValidationError("Decoding power needs discrete states")
        x = seq.states
        if x.size > 0 and (x.min() < 0 or x.max() > m.omega):
            raise ValidationError("State out of range for appliance {}".format(m.appliance_id))
        result[m.appliance_id] = PowerSeries(start_time, interval, m.means[x], measured=bool(np.all(m.means >= 0)))
    return result
