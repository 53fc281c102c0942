r"""
Privacy and utility metrics and the experiment sweep. Privacy is measured
as the success of the NILM attacker (F1 of ON/OFF detection), utility as
the closeness of the obfuscated load to the original (KL divergence,
entropy, billing error, negative outliers).
"""
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.special import rel_entr
from scipy.stats import entropy as _shannon_entropy

from .appliances import OFF_THRESHOLD, label_states
from .config import MECHANISMS, PrivacyConfig
from .data import PowerSeries
from .errors import AlignmentError, EmptySeriesError, SweepCellError, ValidationError
from .inference import viterbi_map
from .privacy import (PrivacyParams, baseline_aggregate_laplace, baseline_hmm_resynthesis,
                      default_delta_f_watts, matched_sigma_watts)
from .reaggregation import privatize_states
from .seeds import make_rng

logger = logging.getLogger(__name__)

KL_BINS = 50
ENTROPY_BAND = 0.2
BILLING_FLOOR = 1e-9

REPORT_COLUMNS = ['mechanism', 'epsilon', 'eff_epsilon', 'seed', 'appliance', 'precision', 'recall', 'f1',
                  'state_match', 'kl', 'entropy_orig', 'entropy_obf', 'billing_err', 'neg_count']


def _values(series):
    return series.values if isinstance(series, PowerSeries) else np.asarray(series, dtype=float).ravel()


def _check_bins(bins):
    if bins < 2:
        raise ValidationError("At least two bins are required, got {}".format(bins))


@dataclass(frozen=True)
class ClassificationScores:
    precision: float
    recall: float
    f1: float


def _pair_states(truth, predicted):
    if len(truth) == 0:
        raise ValidationError("No appliances to score")
    by_id = {s.appliance_id: s for s in predicted}
    pairs = []
    for t in truth:
        if t.appliance_id not in by_id:
            raise ValidationError("No prediction for appliance {}".format(t.appliance_id))
        p = by_id[t.appliance_id]
        if len(t) != len(p):
            raise AlignmentError("Truth and prediction of {} differ in length".format(t.appliance_id))
        if not (t.discrete and p.discrete):
            raise ValidationError("Scoring needs discrete states")
        pairs.append((t, p))
    return pairs


def confusion_counts(truth, predicted):
    r"""TP, FP, FN of ON detection for one appliance (ON means state > 0)."""
    t_on = truth.states > 0
    p_on = predicted.states > 0
    return int(np.sum(t_on & p_on)), int(np.sum(~t_on & p_on)), int(np.sum(t_on & ~p_on))


def f1_score(truth, predicted):
    r"""
    Precision, recall and F1 of ON detection per appliance and their
    unweighted mean over appliances. Zero denominators give 0. Returns a
    tuple (dict appliance id -> ClassificationScores, macro scores).
    """
    per_appliance = {}
    for t, p in _pair_states(truth, predicted):
        tp, fp, fn = confusion_counts(t, p)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_appliance[t.appliance_id] = ClassificationScores(precision, recall, f1)
    scores = list(per_appliance.values())
    macro = ClassificationScores(float(np.mean([s.precision for s in scores])),
                                 float(np.mean([s.recall for s in scores])),
                                 float(np.mean([s.f1 for s in scores])))
    return per_appliance, macro


def state_match_rate(truth, predicted):
    r"""Fraction of time slots with exactly the right multi-state label, per
    appliance and averaged. Empty sequences score 0."""
    per_appliance = {}
    for t, p in _pair_states(truth, predicted):
        per_appliance[t.appliance_id] = float(np.mean(t.states == p.states)) if len(t) else 0.0
    return per_appliance, float(np.mean(list(per_appliance.values())))


def kl_from_counts(p_counts, q_counts, pseudo_count=1.0):
    r"""KL divergence D(P||Q) in nats between two bucket count vectors. Q is
    smoothed by adding `pseudo_count` to every bucket."""
    p_counts = np.asarray(p_counts, dtype=float)
    q_counts = np.asarray(q_counts, dtype=float) + pseudo_count
    P = p_counts / p_counts.sum()
    Q = q_counts / q_counts.sum()
    return max(float(np.sum(rel_entr(P, Q))), 0.0)


def kl_divergence(p_series, q_series, bins=KL_BINS, pseudo_count=1.0):
    r"""
    KL divergence D(P||Q) in nats between the value distributions of the
    original series (P) and the obfuscated series (Q). Both are binned into
    `bins` equal-width buckets over their joint value range. Identical
    series and series with a zero joint range give 0.
    """
    _check_bins(bins)
    p, q = _values(p_series), _values(q_series)
    if p.size == 0 or q.size == 0:
        raise EmptySeriesError("KL divergence needs non-empty series")
    if p.size == q.size and np.array_equal(p, q):
        return 0.0
    lo = min(p.min(), q.min())
    hi = max(p.max(), q.max())
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    p_counts, _ = np.histogram(p, edges)
    q_counts, _ = np.histogram(q, edges)
    return kl_from_counts(p_counts, q_counts, pseudo_count)


def entropy(series, bins=KL_BINS):
    r"""Shannon entropy in nats of the series' values, binned into `bins`
    equal-width buckets over its own range. A constant series has entropy 0."""
    _check_bins(bins)
    x = _values(series)
    if x.size == 0:
        raise EmptySeriesError("Entropy needs a non-empty series")
    if x.max() == x.min():
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(x.min(), x.max()))
    return float(_shannon_entropy(counts))


def billing_error(original, obfuscated):
    r"""Relative error of the total consumption (the billed quantity)."""
    a, b = _values(original), _values(obfuscated)
    if a.size != b.size:
        raise AlignmentError("Original and obfuscated series differ in length")
    total = float(np.sum(a))
    return abs(float(np.sum(b)) - total) / max(total, BILLING_FLOOR)


def outlier_count(series):
    return int(np.sum(_values(series) < 0))


def entropies_within_band(h_original, h_obfuscated, band=ENTROPY_BAND):
    return abs(h_obfuscated - h_original) <= band * h_original


def entropy_within_band(original, obfuscated, bins=KL_BINS, band=ENTROPY_BAND):
    r"""True if the entropy of the obfuscated series lies within a relative
    `band` of the original's."""
    return entropies_within_band(entropy(original, bins), entropy(obfuscated, bins), band)


def alpha_beta_utility(original, samples, alpha):
    r"""
    Estimate beta of (alpha, beta)-utility for the mean-power query: the
    fraction of obfuscated samples whose mean deviates from the original
    mean by more than `alpha` watts.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("At least one obfuscated sample is required")
    target = float(np.mean(_values(original)))
    misses = [abs(float(np.mean(_values(s))) - target) > alpha for s in samples]
    return float(np.mean(misses))


def empirical_privacy_loss(samples_a, samples_b, edges=None, min_hits=1000):
    r"""
    Largest absolute log-ratio of the output frequencies of a mechanism run
    on two adjacent inputs. Outputs are bucketed by their distinct values,
    or by `edges` if given. Buckets where neither input reaches `min_hits`
    hits are ignored; a bucket hit by only one input gives inf.
    """
    a = np.asarray(samples_a, dtype=float).ravel()
    b = np.asarray(samples_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySeriesError("Both sample sets must be non-empty")
    if edges is None:
        values = np.union1d(a, b)
        ca = np.searchsorted(values, a)
        cb = np.searchsorted(values, b)
        counts_a = np.bincount(ca, minlength=values.size)
        counts_b = np.bincount(cb, minlength=values.size)
    else:
        counts_a, _ = np.histogram(a, edges)
        counts_b, _ = np.histogram(b, edges)
    loss = 0.0
    for na, nb in zip(counts_a, counts_b):
        if max(na, nb) < min_hits:
            continue
        if na == 0 or nb == 0:
            return float('inf')
        loss = max(loss, abs(np.log(na / a.size) - np.log(nb / b.size)))
    return float(loss)


@dataclass(frozen=True)
class EvaluationReport:
    r"""Metrics of one sweep cell (mechanism, epsilon, seed)."""
    mechanism: str
    epsilon: float
    seed: int
    per_appliance: Dict[str, ClassificationScores]
    macro: ClassificationScores
    state_match: Dict[str, float]
    state_match_macro: float
    kl_divergence: float
    entropy_original: float
    entropy_obfuscated: float
    billing_relative_error: float
    negative_value_count: int
    effective_epsilon: Optional[float] = None

    def to_rows(self):
        r"""Report rows, one per appliance followed by the `macro` row."""
        shared = {
            'kl': self.kl_divergence,
            'entropy_orig': self.entropy_original,
            'entropy_obf': self.entropy_obfuscated,
            'billing_err': self.billing_relative_error,
            'neg_count': self.negative_value_count,
        }
        rows = []
        entries = list(self.per_appliance.items()) + [('macro', self.macro)]
        for app_id, scores in entries:
            match = self.state_match_macro if app_id == 'macro' else self.state_match[app_id]
            row = {'mechanism': self.mechanism, 'epsilon': self.epsilon, 
                   'eff_epsilon': self.epsilon if self.effective_epsilon is None else self.effective_epsilon,
                   'seed': self.seed, 'appliance': app_id, 'precision': scores.precision, 'recall': scores.recall, 'f1': scores.f1, 'state_match': match}
            row.update(shared)
            rows.append(row)
        return rows


def state_privacy_params(epsilon, privacy=PrivacyConfig()):
    return PrivacyParams(epsilon=epsilon, sensitivity_mode=privacy.sensitivity, beta=privacy.beta,
                         composition=privacy.composition, appliance_epsilons=privacy.appliance_epsilons)


def effective_epsilon(mechanism, epsilon, appliance_ids, privacy=PrivacyConfig()):
    r"""Per-slot budget a mechanism run at `epsilon` actually guarantees.
    Per-appliance budgets only apply to the state mechanism, where the
    largest one bounds the whole state vector."""
    if mechanism != 'states' or not privacy.appliance_epsilons:
        return float(epsilon)
    return state_privacy_params(epsilon, privacy).effective_epsilon(appliance_ids)


@dataclass(frozen=True)
class Obfuscation:
    aggregate: PowerSeries
    per_appliance: Optional[Dict[str, PowerSeries]] = None


def obfuscate(mechanism, fhmm, aggregate, epsilon, rng, privacy=PrivacyConfig(), delta_f_watts=None,
              originals=None, states=None):
    r"""
    Apply one obfuscation mechanism to a household's aggregate:
     - `identity`: no change,
     - `states`: noise on the switch states, then re-aggregation,
     - `aggregate-laplace`: Laplace noise on every reading,
     - `hmm-resynth`: FHMM resynthesis plus Gaussian noise.
    Both baselines need `delta_f_watts`; the resynthesis noise defaults to
    the same noise power as the Laplace baseline at this epsilon.
    """
    if mechanism == 'identity':
        return Obfuscation(aggregate)
    elif mechanism == 'states':
        result = privatize_states(fhmm, aggregate, state_privacy_params(epsilon, privacy), rng, originals=originals, states=states,
                                  zero_noise=privacy.zero_noise)
        return Obfuscation(result.aggregate, result.per_appliance)
    elif mechanism in ('aggregate-laplace', 'hmm-resynth'):
        if delta_f_watts is None:
            raise ValidationError("The {} mechanism needs delta_f_watts".format(mechanism))
        if privacy.zero_noise:
            return Obfuscation(aggregate)
        if mechanism == 'aggregate-laplace':
            return Obfuscation(baseline_aggregate_laplace(aggregate, epsilon, delta_f_watts, rng))
        sigma = privacy.sigma_watts
        if sigma is None:
            sigma = matched_sigma_watts(delta_f_watts, epsilon)
        return Obfuscation(baseline_hmm_resynthesis(fhmm, aggregate, sigma, rng))
    else:
        raise ValidationError("Unknown mechanism {!r}, expected one of {}".format(mechanism, ', '.join(MECHANISMS)))


def ground_truth(dataset, fhmm, threshold=OFF_THRESHOLD):
    r"""Ground-truth states of a dataset in model order: its own truth
    states if present, otherwise the submeter series labelled by the
    trained models."""
    truth = []
    for model in fhmm.appliances:
        app_id = model.appliance_id
        if dataset.truth_states is not None and app_id in dataset.truth_states:
            truth.append(dataset.truth_states[app_id])
        elif app_id in dataset.per_appliance:
            truth.append(label_states(model, dataset.per_appliance[app_id], threshold))
        else:
            raise ValidationError("No ground truth for appliance {}".format(app_id))
    return truth


@dataclass(frozen=True)
class _Cell:
    mechanism: str
    epsilon: float
    seed: int
    dataset: object
    fhmm: object
    truth: list
    clean_states: Optional[list]
    privacy: PrivacyConfig
    delta_f_watts: float
    kl_bins: int
    global_seed: int


def evaluate_cell(cell):
    r"""Obfuscate, attack and score one sweep cell."""
    rng = make_rng(cell.global_seed, 'cell', cell.mechanism, float(cell.epsilon), cell.seed)
    dataset = cell.dataset
    result = obfuscate(cell.mechanism, cell.fhmm, dataset.aggregate, cell.epsilon, rng, privacy=cell.privacy,
                       delta_f_watts=cell.delta_f_watts, originals=dataset.per_appliance,
                       states=cell.clean_states)
    attack = viterbi_map(cell.fhmm, result.aggregate)
    per_appliance, macro = f1_score(cell.truth, attack)
    match, match_macro = state_match_rate(cell.truth, attack)
    original, obfuscated = dataset.aggregate, result.aggregate
    report = EvaluationReport(
        mechanism=cell.mechanism,
        epsilon=float(cell.epsilon),
        seed=int(cell.seed),
        per_appliance=per_appliance,
        macro=macro,
        state_match=match,
        state_match_macro=match_macro,
        kl_divergence=kl_divergence(original, obfuscated, bins=cell.kl_bins),
        entropy_original=entropy(original, bins=cell.kl_bins),
        entropy_obfuscated=entropy(obfuscated, bins=cell.kl_bins),
        billing_relative_error=billing_error(original, obfuscated),
        negative_value_count=outlier_count(obfuscated),
        effective_epsilon=effective_epsilon(cell.mechanism, cell.epsilon, cell.fhmm.appliance_ids, cell.privacy),
    )
    return report


def run_sweep(dataset, fhmm, mechanisms, epsilons, seeds, privacy=PrivacyConfig(), train_aggregate=None,
              kl_bins=KL_BINS, global_seed=0, jobs=1, callback=None):
    r"""
    Evaluate every (mechanism, epsilon, seed) cell on the evaluation
    dataset. Each cell obfuscates the aggregate with its own generator,
    derived from `global_seed` and the cell identifiers, runs the NILM
    attack on the result and scores it against the ground truth.

    The aggregate-Laplace sensitivity is `privacy.delta_f_watts` or else
    the maximum of `train_aggregate`. With `jobs` > 1 the cells run in
    worker processes; reports are always returned in (mechanism, epsilon,
    seed) order. `callback` is called with every finished report. A failing
    cell raises a SweepCellError naming the cell.
    """
    mechanisms = list(mechanisms)
    if not mechanisms:
        raise ValidationError("At least one mechanism is required")
    if len(dataset) == 0:
        raise EmptySeriesError("Cannot evaluate on an empty dataset")
    truth = ground_truth(dataset, fhmm)

    delta_f = privacy.delta_f_watts
    if delta_f is None:
        if train_aggregate is None:
            warnings.warn('No training aggregate given, deriving delta_f from the evaluation data')
            train_aggregate = dataset.aggregate
        delta_f = default_delta_f_watts(train_aggregate)

    clean_states = None
    if 'states' in mechanisms:
        if privacy.state_source == 'truth':
            clean_states = truth
        else:
            clean_states = viterbi_map(fhmm, dataset.aggregate)

    cells = [_Cell(m, float(eps), int(s), dataset, fhmm, truth, clean_states, privacy, delta_f, kl_bins,
                   global_seed)
             for m in mechanisms for eps in sorted(epsilons) for s in sorted(seeds)]
    logger.info('Running %d sweep cells with %d job(s)', len(cells), jobs)

    reports = []

    def collect(cell, compute):
        try:
            report = compute()
        except Exception as e:
            raise SweepCellError((cell.mechanism, cell.epsilon, cell.seed), e) from e
        reports.append(report)
        logger.debug('Cell %s eps=%g seed=%d: macro F1 %.4f, KL %.4f', cell.mechanism, cell.epsilon, cell.seed,
                     report.macro.f1, report.kl_divergence)
        if callback is not None:
            callback(report)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(evaluate_cell, cell) for cell in cells]
            for cell, future in zip(cells, futures):
                collect(cell, future.result)
    else:
        for cell in cells:
            collect(cell, lambda: evaluate_cell(cell))
    return reports
