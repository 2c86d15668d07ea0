# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import configparser
import logging
import math
import re

from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional, Tuple

import chardet

from .certify import DEFAULT_TOL_K, DEFAULT_U_GRID, DEFAULT_U_RANGE
from .dde import DEFAULT_DT, DEFAULT_HORIZON, CascadeModel, SimConfig
from .exception import ConfigurationError, DomainError
from .signals import DEFAULT_TAIL_FRACTION
from .stage import RationalStage
from .sweep import DEFAULT_OSC_THRESHOLD

logger = logging.getLogger(__name__)

BUNDLED_CONFIG = 'mapk.ini'
ENCODING_SAMPLE = 64 * 1024

_STAGE_SECTION = re.compile(r'stage\.([1-9][0-9]*)')
_STAGE_KEYS = ('b', 'c', 'd', 'e')

DEFAULT_OUTPUTS = {
    'report': 'report.txt',
    'summary': 'summary.txt',
    'trajectory': 'trajectory.csv',
    'table': 'sweep.csv',
    'certificates': 'certificates.csv',
}


def _floats(value):
    return tuple(float(v) for v in value.split(',') if v.strip())


def _gain_range(value):
    lo, hi, count = value.split(',')
    count = int(count)
    if count < 1:
        raise ValueError(f'gain range needs at least one point, got {count}')
    return float(lo), float(hi), count


_SCHEMA = {
    'delays': {'inter': _floats, 'feedback': float},
    'feedback': {'mu': float, 'k': float, 'k_range': _gain_range},
    'solver': {'dt': float, 'horizon': float, 'x0': _floats, 'history': _floats, 'tail_fraction': float},
    'certify': {'u_bar': float, 'u_lo': float, 'u_hi': float, 'grid_n': int, 'secant_n': int},
    'hopf': {'k_lo': float, 'k_hi': float, 'threshold': float, 'tol': float},
    'output': {'report': str, 'summary': str, 'trajectory': str, 'table': str, 'certificates': str},
}


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs to know: the cascade, the feedback, the solver
    settings, the certification and onset search parameters, and the names
    of the output files.
    """

    stages: Tuple[RationalStage, ...]
    mu: float
    delays: Tuple[float, ...] = ()
    feedback_delay: float = 0.0
    k: Optional[float] = None
    k_range: Optional[Tuple[float, float, int]] = None
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    x0: Optional[Tuple[float, ...]] = None
    history: Optional[Tuple[float, ...]] = None
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    u_bar: Optional[float] = None
    u_lo: float = DEFAULT_U_RANGE[0]
    u_hi: float = DEFAULT_U_RANGE[1]
    grid_n: int = DEFAULT_U_GRID
    secant_n: Optional[int] = None
    k_lo: Optional[float] = None
    k_hi: Optional[float] = None
    threshold: float = DEFAULT_OSC_THRESHOLD
    tol: float = DEFAULT_TOL_K
    outputs: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))

    def model(self, k=None):
        """
        :param k: Feedback gain overriding the configured one.
        :raises ConfigurationError: If no gain is available.
        """
        k = self.k if k is None else k
        if k is None:
            raise ConfigurationError('feedback gain k is not configured')
        return CascadeModel(stages=self.stages, delays=self.delays or (0.0,) * (len(self.stages) - 1),
                            feedback_delay=self.feedback_delay, mu=self.mu, k=k)

    def sim_config(self):
        x0 = self.x0 if self.x0 is not None else (0.0,) * len(self.stages)
        return SimConfig(x0=x0, dt=self.dt, horizon=self.horizon, history=self.history)

    def gains(self):
        """
        Gains of the configured sweep, in ascending order.

        :raises ConfigurationError: If no gain range is configured.
        """
        if self.k_range is None:
            raise ConfigurationError('gain range k_range is not configured')
        lo, hi, count = self.k_range
        if count == 1:
            return [lo]
        return sorted(lo + (hi - lo) * i / (count - 1) for i in range(count))

    def as_dict(self):
        return asdict(self)


def read_text(path):
    """
    Read a text file with autodetected encoding. Detection only looks at the
    head of the file.
    """
    with open(path, 'rb') as f:
        raw = f.read()
    encoding = chardet.detect(raw[:ENCODING_SAMPLE])['encoding'] or 'latin-1'
    return raw.decode(encoding)


def parse_config(text, *, source='<string>'):
    """
    Parse the text of a run configuration. Parsing is strict: unknown
    sections and keys are rejected.

    :param text: INI-style configuration text.
    :param source: Name of the configuration used in error messages.
    :return: RunConfig object.
    :raises ConfigurationError: On syntax errors, unknown or missing keys, and
        invalid values.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section='__defaults__')
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(f'cannot parse {source}: {e}') from e

    stages = {}
    options = {}
    for section in parser.sections():
        match = _STAGE_SECTION.fullmatch(section)
        if match:
            keys = set(parser[section])
            if keys != set(_STAGE_KEYS):
                unknown = sorted(keys - set(_STAGE_KEYS))
                raise ConfigurationError(f'{source}: [{section}] must have exactly the keys {", ".join(_STAGE_KEYS)}'
                                         + (f' (unknown key: {unknown[0]})' if unknown else ''))
            try:
                stages[int(match.group(1))] = RationalStage(**{key: float(parser[section][key]) for key in _STAGE_KEYS})
            except (ValueError, DomainError) as e:
                raise ConfigurationError(f'{source}: [{section}]: {e}') from e
            continue

        if section not in _SCHEMA:
            raise ConfigurationError(f'{source}: unknown section [{section}]')
        for key, value in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f'{source}: unknown key {key!r} in section [{section}]')
            try:
                options[(section, key)] = _SCHEMA[section][key](value)
            except ValueError as e:
                raise ConfigurationError(f'{source}: invalid value for {key!r} in section [{section}]: {value!r}') from e

    if not stages:
        raise ConfigurationError(f'{source}: no [stage.N] section')
    if sorted(stages) != list(range(1, len(stages) + 1)):
        raise ConfigurationError(f'{source}: stage sections must be numbered 1..{len(stages)}, got {sorted(stages)}')
    if ('feedback', 'mu') not in options:
        raise ConfigurationError(f'{source}: missing key \'mu\' in section [feedback]')
    if ('certify', 'u_bar') in options and any(('certify', key) in options for key in ('u_lo', 'u_hi', 'grid_n')):
        raise ConfigurationError(f'{source}: [certify] takes either u_bar or a u_lo/u_hi/grid_n range, not both')

    kwargs = {'stages': tuple(stages[i] for i in sorted(stages))}
    outputs = dict(DEFAULT_OUTPUTS)
    for (section, key), value in options.items():
        if section == 'output':
            outputs[key] = value
        elif section == 'delays':
            kwargs['delays' if key == 'inter' else 'feedback_delay'] = value
        else:
            kwargs[key] = value
    kwargs['outputs'] = outputs

    rc = RunConfig(**kwargs)
    _validate(rc, source)
    return rc


def _validate(rc, source):
    n = len(rc.stages)
    positive = {'mu': rc.mu, 'dt': rc.dt, 'horizon': rc.horizon, 'threshold': rc.threshold, 'tol': rc.tol, 'u_lo': rc.u_lo, 'u_hi': rc.u_hi}
    if rc.u_bar is not None:
        positive['u_bar'] = rc.u_bar
    for name, value in positive.items():
        if not (math.isfinite(value) and value > 0):
            raise ConfigurationError(f'{source}: {name} must be positive, got {value!r}')
    if rc.delays and len(rc.delays) != n - 1:
        raise ConfigurationError(f'{source}: {n} stages need {n - 1} inter-stage delays, got {len(rc.delays)}')
    if not 0 < rc.tail_fraction <= 1:
        raise ConfigurationError(f'{source}: tail_fraction must be in (0, 1], got {rc.tail_fraction!r}')
    for name in ('x0', 'history'):
        value = getattr(rc, name)
        if value is not None and len(value) != n:
            raise ConfigurationError(f'{source}: {name} must have {n} components, got {len(value)}')
    if rc.secant_n is not None and rc.secant_n < 3:
        raise ConfigurationError(f'{source}: secant_n must be at least 3, got {rc.secant_n!r}')
    if not rc.u_lo < rc.u_hi or rc.grid_n < 2:
        raise ConfigurationError(f'{source}: invalid u_bar grid [{rc.u_lo!r}, {rc.u_hi!r}] with {rc.grid_n!r} points')

    # Fail fast on invalid model and solver settings.
    rc.sim_config().check(rc.model(k=rc.k if rc.k is not None else 0.0))


def load_config(path=None):
    """
    Load a run configuration from a file (with autodetected encoding), or the
    bundled MAPK configuration if no path is given.
    """
    if path is None:
        text = resources.files(__package__).joinpath('resources').joinpath(BUNDLED_CONFIG).read_text(encoding='utf-8')
        return parse_config(text, source=BUNDLED_CONFIG)

    try:
        text = read_text(path)
    except OSError as e:
        raise ConfigurationError(f'cannot read configuration {path}: {e}') from e
    return parse_config(text, source=path)
