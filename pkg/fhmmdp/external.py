import logging
import os
import warnings

import numpy as np
import pandas as pd
import yaml

from .data import PowerSeries, StateSequence, LabeledDataset
from .errors import ParseError, EmptySeriesError, ValidationError, AlignmentError

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'fhmmdp-model'
MODEL_VERSION = 1


def _read_redd_lines(path):
    timestamps = []
    watts = []
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected '<timestamp> <watts>' in {}, got {!r}".format(path, line), lineno)
            try:
                ts = int(parts[0])
                w = float(parts[1])
            except ValueError:
                raise ParseError("cannot parse {!r} in {}".format(line, path), lineno) from None
            if timestamps and ts < timestamps[-1]:
                raise ParseError("timestamp {} decreases in {}".format(ts, path), lineno)
            if w < 0:
                raise ValidationError("line {}: negative power {} W in {}".format(lineno, w, path))
            timestamps.append(ts)
            watts.append(w)
    if not timestamps:
        raise EmptySeriesError("No readings in {}".format(path))
    return np.array(timestamps, dtype=np.int64), np.array(watts, dtype=float)


def resample_readings(timestamps, watts, interval, start_time=None):
    r"""
    Resample irregular instantaneous power readings onto a uniform grid with
    the given interval (seconds). Each bucket [start + k*interval, start +
    (k+1)*interval) holds the mean of its readings; empty buckets are
    forward-filled from the previous bucket. If `start_time` is None, the
    grid starts at the first reading; readings before `start_time` are
    dropped.
    """
    if start_time is None:
        start_time = int(timestamps[0])
    keep = timestamps >= start_time
    timestamps, watts = timestamps[keep], watts[keep]
    if timestamps.size == 0:
        raise EmptySeriesError("No readings at or after time {}".format(start_time))

    series = pd.Series(watts, index=pd.to_datetime(timestamps, unit='s'))
    origin = pd.to_datetime(start_time, unit='s')
    resampled = series.resample('{}s'.format(int(interval)), label='left', closed='left', origin=origin).mean()
    num_gaps = int(resampled.isna().sum())
    if num_gaps > 0:
        warnings.warn('{} empty buckets forward-filled during resampling'.format(num_gaps))
    resampled = resampled.ffill()

    # buckets before the first reading take the first bucket mean
    offset = int((resampled.index[0] - origin).total_seconds()) // int(interval)
    values = resampled.to_numpy(dtype=float)
    if offset > 0:
        values = np.concatenate([np.full(offset, values[0]), values])
    return PowerSeries(start_time, interval, values, measured=True)


def load_redd_channel(path, interval, start_time=None):
    r"""
    Load a REDD channel file of whitespace-separated `timestamp watts` lines
    and resample it to the given interval. Returns a measured PowerSeries.
    """
    timestamps, watts = _read_redd_lines(path)
    series = resample_readings(timestamps, watts, interval, start_time)
    logger.debug('Loaded %s: %d readings -> %d samples at %d s', path, timestamps.size, len(series), interval)
    return series


def write_redd_channel(series, path):
    r"""Write a PowerSeries in the REDD text format. Values are written in
    their shortest round-trip representation so reloading at the same
    interval reproduces them exactly."""
    with open(path, 'w') as f:
        for ts, v in zip(series.timestamps, series.values):
            f.write('{:d} {!r}\n'.format(int(ts), float(v)))


def load_redd_labels(path):
    r"""Read a REDD labels file (`N name` per line) into a dict mapping
    channel number to appliance name."""
    labels = {}
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ParseError("expected '<channel> <name>' in {}".format(path), lineno)
            try:
                labels[int(parts[0])] = parts[1].strip()
            except ValueError:
                raise ParseError("invalid channel number {!r} in {}".format(parts[0], path), lineno) from None
    return labels


def write_redd_labels(labels, path):
    with open(path, 'w') as f:
        for channel in sorted(labels):
            f.write('{} {}\n'.format(channel, labels[channel]))


def load_redd_house(house_dir, interval, appliances=None):
    r"""
    Load a REDD-style house directory consisting of `labels.dat` and
    `channel_N.dat` files. Channels labelled `mains` are summed into the
    aggregate; all other channels become per-appliance series (restricted to
    the names in `appliances` if given; repeated labels get a `_N` suffix).
    All channels are resampled onto a common grid starting at the latest
    first reading and truncated to the shortest length. If a `states.csv`
    file is present, it is read as ground truth.
    """
    labels = load_redd_labels(os.path.join(house_dir, 'labels.dat'))
    raw = {}
    for channel in sorted(labels):
        path = os.path.join(house_dir, 'channel_{}.dat'.format(channel))
        raw[channel] = _read_redd_lines(path)
    start = max(int(ts[0]) for ts, _ in raw.values())

    mains = []
    per_appliance = {}
    for channel in sorted(labels):
        name = labels[channel]
        if name != 'mains' and appliances is not None and name not in appliances:
            continue
        series = resample_readings(*raw[channel], interval, start_time=start)
        if name == 'mains':
            mains.append(series)
        else:
            key = name if name not in per_appliance else '{}_{}'.format(name, channel)
            per_appliance[key] = series
    if not mains:
        raise ValidationError("No 'mains' channel in {}".format(house_dir))
    if appliances is not None:
        missing = [a for a in appliances if a not in per_appliance]
        if missing:
            raise ValidationError("Channels missing from {}: {}".format(house_dir, ', '.join(missing)))

    length = min(len(s) for s in mains + list(per_appliance.values()))
    aggregate = PowerSeries(start, interval, np.sum([s.values[:length] for s in mains], axis=0), measured=True)
    per_appliance = {k: s.slice(0, length) for k, s in per_appliance.items()}

    truth = None
    states_path = os.path.join(house_dir, 'states.csv')
    if os.path.exists(states_path):
        truth = {k: v.slice(0, length) for k, v in read_states_csv(states_path).items()
                 if k in per_appliance}
    return LabeledDataset(aggregate, per_appliance, truth)


def save_labeled_dataset(dataset, house_dir):
    r"""Write a dataset as a REDD-style house directory: channel 1 is the
    aggregate (`mains`), channels 2.. the appliances, and ground-truth states
    go to `states.csv`."""
    os.makedirs(house_dir, exist_ok=True)
    labels = {1: 'mains'}
    write_redd_channel(dataset.aggregate, os.path.join(house_dir, 'channel_1.dat'))
    for i, (app_id, series) in enumerate(dataset.per_appliance.items(), start=2):
        labels[i] = app_id
        write_redd_channel(series, os.path.join(house_dir, 'channel_{}.dat'.format(i)))
    write_redd_labels(labels, os.path.join(house_dir, 'labels.dat'))
    if dataset.truth_states is not None:
        write_states_csv(list(dataset.truth_states.values()), dataset.aggregate,
                         os.path.join(house_dir, 'states.csv'))


def write_states_csv(states, reference, path):
    r"""Write switch states as a long CSV with columns `t,appliance,state`,
    where `t` is the UNIX time of the sample in `reference`. The omega of
    each appliance is stored in a header comment."""
    frames = []
    for seq in states:
        if len(seq) != len(reference):
            raise AlignmentError("States of {} do not match the reference length".format(seq.appliance_id))
        frames.append(pd.DataFrame({'t': reference.timestamps, 'appliance': seq.appliance_id, 'state': seq.states}))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['t', 'appliance', 'state'])
    with open(path, 'w', newline='') as f:
        f.write('# omega: {}\n'.format(' '.join('{}={}'.format(s.appliance_id, s.omega) for s in states)))
        frame.to_csv(f, index=False)


def read_states_csv(path):
    with open(path, 'r') as f:
        header = f.readline()
        if not header.startswith('# omega:'):
            raise ParseError("missing omega header in {}".format(path), 1)
        omegas = dict(item.split('=') for item in header[len('# omega:'):].split())
        frame = pd.read_csv(f, dtype={'appliance': str})
    result = {}
    for app_id, omega in omegas.items():
        rows = frame[frame['appliance'] == app_id].sort_values('t', kind='stable')
        result[app_id] = StateSequence(app_id, rows['state'].to_numpy(dtype=np.int64), int(omega))
    return result


def write_power_csv(per_appliance, path, long=True):
    r"""Write per-appliance power series. In long form the columns are
    `t,appliance,watts`; otherwise one column per appliance next to `t`."""
    series = list(per_appliance.values())
    if not series:
        pd.DataFrame(columns=['t', 'appliance', 'watts']).to_csv(path, index=False)
        return
    timestamps = series[0].timestamps
    if long:
        frame = pd.concat([pd.DataFrame({'t': s.timestamps, 'appliance': k, 'watts': s.values})
                           for k, s in per_appliance.items()], ignore_index=True)
    else:
        frame = pd.DataFrame({'t': timestamps})
        for k, s in per_appliance.items():
            frame[k] = s.values
    frame.to_csv(path, index=False)


def save_model(fhmm, path):
    r"""Write an FhmmModel to a YAML model file."""
    doc = {
        'format': MODEL_FORMAT,
        'version': MODEL_VERSION,
        'appliances': [{
            'id': m.appliance_id,
            'pi': [float(v) for v in m.pi],
            'A': [[float(v) for v in row] for row in m.A],
            'means': [float(v) for v in m.means],
            'stds': [float(v) for v in m.stds],
            'cp': [[float(v) for v in samples] for samples in m.cp],
        } for m in fhmm.appliances],
        'max_joint_states': int(fhmm.max_joint_states),
    }
    with open(path, 'w') as f:
        yaml.safe_dump(doc, f, sort_keys=False, default_flow_style=None, width=120)


def load_model(path):
    r"""Read a YAML model file written by `save_model` and rebuild the
    FhmmModel."""
    from .appliances import ApplianceModel
    from .model import build_fhmm

    with open(path, 'r') as f:
        try:
            doc = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ParseError("invalid model file {}: {}".format(path, e)) from None
    if not isinstance(doc, dict) or doc.get('format') != MODEL_FORMAT:
        raise ParseError("{} is not an fhmmdp model file".format(path))
    if doc.get('version') != MODEL_VERSION:
        raise ParseError("unsupported model file version {}".format(doc.get('version')))
    models = [ApplianceModel(
        appliance_id=str(a['id']), pi=a['pi'], A=a['A'], means=a['means'], stds=a['stds'],
        cp=[np.array(samples, dtype=float) for samples in a['cp']]) for a in doc['appliances']]
    return build_fhmm(models, max_joint_states=doc.get('max_joint_states', 4096))
