r"""
Run configuration. A single YAML file holds the settings of every stage;
each section maps onto one of the frozen dataclasses below. Missing keys
take the defaults given here, unknown keys are rejected.
"""
import dataclasses
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import yaml

from .errors import ConfigError
from .synth import SynthConfig, synth_config_from_dict, default_appliances

MECHANISMS = ('identity', 'states', 'aggregate-laplace', 'hmm-resynth')
STATE_SOURCES = ('viterbi', 'truth')


@dataclass(frozen=True)
class DataConfig:
    house_dir: str
    appliances: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class TrainConfig:
    fraction: float = 0.5
    off_threshold: float = 5.0
    smoothing: float = 1.0
    std_floor: float = 1.0
    kmeans_iterations: int = 50
    max_joint_states: int = 4096
    omega: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class PrivacyConfig:
    mechanism: str = 'states'
    epsilon: float = 1.0
    sensitivity: str = 'global'
    beta: Optional[float] = None
    composition: str = 'per-slot'
    state_source: str = 'viterbi'
    delta_f_watts: Optional[float] = None
    sigma_watts: Optional[float] = None
    zero_noise: bool = False
    appliance_epsilons: Optional[Dict[str, float]] = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ConfigError("Unknown mechanism {!r}, expected one of {}".format(
                self.mechanism, ', '.join(MECHANISMS)))
        if self.state_source not in STATE_SOURCES:
            raise ConfigError("Unknown state source {!r}".format(self.state_source))


@dataclass(frozen=True)
class SweepConfig:
    mechanisms: Tuple[str, ...] = ('states', 'aggregate-laplace', 'hmm-resynth')
    epsilons: Tuple[float, ...] = (0.1, 1.0, 5.0, 10.0)
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    kl_bins: int = 50
    entropy_band: float = 0.2

    def __post_init__(self):
        unknown = [m for m in self.mechanisms if m not in MECHANISMS]
        if unknown:
            raise ConfigError("Unknown sweep mechanisms: {}".format(', '.join(unknown)))
        if not self.mechanisms:
            raise ConfigError("At least one sweep mechanism is required")
        if self.entropy_band < 0:
            raise ConfigError("entropy_band must be non-negative, got {}".format(self.entropy_band))


@dataclass(frozen=True)
class FogConfig:
    group_size: int = 3


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    interval: int = 60
    synth: Optional[SynthConfig] = None
    data: Optional[DataConfig] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    privacy: PrivacyConfig = field(default_factory=PrivacyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    fog: FogConfig = field(default_factory=FogConfig)

    def omegas(self, appliance_ids):
        r"""Number of ON states per appliance: explicit `train.omega`
        entries first, then the data section, then the synthetic state
        count."""
        result = {}
        synth_omegas = {a.name: a.omega for a in self.synth.appliances} if self.synth else {}
        data_omegas = self.data.appliances if self.data else {}
        for app_id in appliance_ids:
            for source in (self.train.omega, data_omegas, synth_omegas):
                if app_id in source:
                    result[app_id] = int(source[app_id])
                    break
            else:
                raise ConfigError("No omega configured for appliance {}".format(app_id))
        return result


def _section(cls, d, name, **converters):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError("Section {!r} must be a mapping".format(name))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError("Unknown keys in section {!r}: {}".format(name, ', '.join(sorted(unknown))))
    kwargs = {}
    for key, value in d.items():
        kwargs[key] = converters[key](value) if key in converters and value is not None else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("Invalid section {!r}: {}".format(name, e)) from None


def config_from_dict(doc):
    r"""Build a PipelineConfig from a parsed YAML document."""
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("Configuration must be a mapping")
    known = {'seed', 'interval', 'synth', 'data', 'train', 'privacy', 'sweep', 'fog'}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError("Unknown configuration keys: {}".format(', '.join(sorted(unknown))))
    seed = int(doc.get('seed', 0))
    interval = int(doc.get('interval', 60))

    synth = None
    if doc.get('synth') is not None:
        synth = synth_config_from_dict(doc['synth'], seed=seed, interval=interval)
    data = None
    if doc.get('data') is not None:
        data = _section(DataConfig, doc['data'], 'data',
                        appliances=lambda v: {str(k): int(w) for k, w in v.items()})
    if synth is None and data is None:
        synth = SynthConfig(default_appliances(), duration=5000, interval=interval, seed=seed)

    return PipelineConfig(
        seed=seed,
        interval=interval,
        synth=synth,
        data=data,
        train=_section(TrainConfig, doc.get('train'), 'train', fraction=float, off_threshold=float,
                       smoothing=float, std_floor=float, kmeans_iterations=int, max_joint_states=int,
                       omega=lambda v: {str(k): int(w) for k, w in v.items()}),
        privacy=_section(PrivacyConfig, doc.get('privacy'), 'privacy', epsilon=float, beta=float,
                         delta_f_watts=float, sigma_watts=float, zero_noise=bool,
                         appliance_epsilons=lambda v: {str(k): float(e) for k, e in v.items()}),
        sweep=_section(SweepConfig, doc.get('sweep'), 'sweep',
                       mechanisms=lambda v: tuple(str(m) for m in v),
                       epsilons=lambda v: tuple(float(e) for e in v),
                       seeds=lambda v: tuple(int(s) for s in v),
                       kl_bins=int, entropy_band=float),
        fog=_section(FogConfig, doc.get('fog'), 'fog', group_size=int),
    )


def load_config(path=None):
    r"""Read a configuration file. Without a path, the defaults are used
    (synthetic data from the three default appliances)."""
    if path is None:
        return config_from_dict({})
    with open(path, 'r') as f:
        try:
            doc = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError("Invalid configuration file {}: {}".format(path, e)) from None
    return config_from_dict(doc)


def override(config, **changes):
    r"""Return a copy of the config with the given top-level or section
    values replaced. Section values are passed as `section__key=value`;
    None values are ignored."""
    top = {}
    sections = {}
    for key, value in changes.items():
        if value is None:
            continue
        if '__' in key:
            section, name = key.split('__', 1)
            sections.setdefault(section, {})[name] = value
        else:
            top[key] = value
    for section, values in sections.items():
        top[section] = dataclasses.replace(getattr(config, section), **values)
    if 'seed' in top and config.synth is not None:
        top['synth'] = dataclasses.replace(top.get('synth', config.synth), seed=int(top['seed']))
    return dataclasses.replace(config, **top)
