# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

import argparse
import configparser
import csv
import io
import os
import sys
import time

from dataclasses import replace
from importlib import metadata
from multiprocessing import cpu_count
from os.path import basename, join, realpath, splitext
from textwrap import indent

import numpy as np

import inators

from inators import log as logging

from .certify import (best_certificate, bracket_hopf_onset, cascade_linearized_gain, certify, certify_grid,
                      global_k_bound, linearized_hinf_gain, secant_margin, secant_relaxed_bound)
from .config import BUNDLED_CONFIG, load_config, read_text
from .dde import effective_input_signal, equilibrium_residual, simulate
from .exception import AnalysisException, ConfigurationError
from .outcome import Outcome
from .signals import DEFAULT_TAIL_FRACTION, SampledSignal, estimate_limit
from .sweep import DEFAULT_CONVERGENCE_TOL, DEFAULT_OSC_THRESHOLD, ParallelSweep, RunSummary, Sweep, cross_validate, gain_cases

logger = logging.getLogger('smallgain')
__version__ = metadata.version(__package__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FALSIFIED = 4

SECANT_SCOPE = 'linearized, delay-free, local'


class CommandRegistry:
    registry = {}

    @classmethod
    def register(cls, command_name):
        def decorator(command_fn):
            cls.registry[command_name] = command_fn
            return command_fn
        return decorator


def fmt(value):
    """
    Serialize a report value: numbers with 17 significant digits, sequences
    comma-separated, booleans in lowercase, and None as the empty string.
    """
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, Outcome):
        return value.name
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f'{value:.17g}'
    if isinstance(value, (tuple, list)):
        return ', '.join(fmt(v) for v in value)
    return str(value)


def format_report(sections):
    """
    Render an ordered mapping of sections (each an ordered mapping of keys to
    values) as INI-style text.
    """
    report = configparser.ConfigParser(interpolation=None)
    report.read_dict({name: {key: fmt(value) for key, value in entries.items()} for name, entries in sections.items()})
    out = io.StringIO()
    report.write(out)
    return out.getvalue()


def write_report(path, sections):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_report(sections))
    logger.info('Report saved to %s', path)


def write_table(path, header, rows):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info('Table saved to %s', path)


def write_trajectory(path, states, u_eff):
    """
    Save a trajectory as CSV with the header ``t,x1,...,xn,u_eff``.
    """
    header = ['t'] + [f'x{i + 1}' for i in range(states.dim)] + ['u_eff']
    write_table(path, header, ([t, *x, u[0]] for t, x, u in zip(states.times, states.values, u_eff.values)))


def read_trajectory(path):
    """
    Load a trajectory saved by :func:`write_trajectory` (or any CSV with a
    leading time column and a header row).

    :return: Tuple: (column names without the time column, SampledSignal of
        those columns).
    :raises ConfigurationError: If the file cannot be parsed.
    """
    try:
        rows = list(csv.reader(io.StringIO(read_text(path))))
        header, rows = rows[0], [r for r in rows[1:] if r]
        if len(header) < 2 or header[0] != 't':
            raise ValueError(f'header must start with t and name at least one signal column, got {header!r}')
        data = np.array([[float(v) for v in row] for row in rows])
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
            raise ValueError('need at least 2 rows with one value per header column')
        return header[1:], SampledSignal(data[:, 1:], dt=data[1, 0] - data[0, 0], t0=data[0, 0])
    except (OSError, IndexError, ValueError) as e:
        raise ConfigurationError(f'cannot parse trajectory {path}: {e}') from e


def column_sections(names, signal, *, tail_fraction, tol, threshold):
    """
    Tail amplitude, limit (if converged), and verdict of every column of a
    signal, one report section per column.
    """
    sections = {}
    for i, name in enumerate(names):
        est = estimate_limit(signal.column(i), tail_fraction, tol)
        sections[name] = {
            'amplitude': est.amplitude,
            'tail_start': est.tail_start,
            'limit': est.limit[0] if est.converged else None,
            'outcome': Outcome.classify(est.amplitude, tol=tol, threshold=threshold),
        }
    return sections


def create_parser():
    def positive_int(value):
        value = int(value)
        if value < 1:
            raise argparse.ArgumentTypeError(f'invalid value: {value!r} (must be at least 1)')
        return value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='FILE',
                        help=f'run configuration (default: bundled {BUNDLED_CONFIG})')
    common.add_argument('--out', metavar='DIR',
                        help='output directory (default: config.timestamp)')
    common.add_argument('--tail-fraction', metavar='F', type=float,
                        help='trailing fraction of trajectories to analyze (default: taken from the configuration)')
    common.add_argument('--seed', metavar='N', type=int, default=0,
                        help='seed of the random initial states of the cross-check (default: %(default)d)')
    common.add_argument('-j', '--jobs', metavar='N', type=positive_int, default=1,
                        help=f'maximum number of simulations to run in parallel (default: %(default)d, available: {cpu_count()})')

    # Logging settings.
    inators.arg.add_log_level_argument(common)
    common.add_argument('--log-format', metavar='FORMAT', default='%(message)s',
                        help='printf-style format string of diagnostic messages (default: %(default)s)')
    common.add_argument('--log-datefmt', metavar='FORMAT', default='%Y-%m-%d %H:%M:%S',
                        help='strftime-style format string of timestamps in diagnostic messages (default: %(default)s)')

    parser = argparse.ArgumentParser(description='Command line interface of the "smallgain" stability certificate toolkit')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)

    certify_parser = subparsers.add_parser('certify', parents=[common],
                                           help='compute the small-gain certificate of the configured loop')
    certify_parser.add_argument('--check', action='store_true', default=False,
                                help='try to falsify the certificate by simulation (exit code 4 if falsified)')

    subparsers.add_parser('simulate', parents=[common],
                          help='simulate the configured loop and save its trajectory')
    subparsers.add_parser('sweep', parents=[common],
                          help='simulate the configured loop for every gain of k_range')
    subparsers.add_parser('hopf', parents=[common],
                          help='locate the gain where the configured loop starts to oscillate')

    amplitude_parser = subparsers.add_parser('amplitude', parents=[common],
                                             help='estimate the asymptotic amplitudes of a saved trajectory')
    amplitude_parser.add_argument('-i', '--input', metavar='FILE', required=True,
                                  help='trajectory CSV file')
    amplitude_parser.add_argument('--tol', metavar='T', type=float, default=1e-6,
                                  help='amplitude below which a limit is reported (default: %(default)s)')
    amplitude_parser.add_argument('--threshold', metavar='A', type=float, default=DEFAULT_OSC_THRESHOLD,
                                  help='amplitude from which a column is considered oscillatory (default: %(default)s)')

    inators.arg.add_version_argument(parser, version=__version__)
    return parser


def config_logging(args):
    logging.basicConfig(format=args.log_format, datefmt=args.log_datefmt)
    inators.arg.process_log_level_argument(args, logger)


def process_args(args):
    if args.command == 'amplitude':
        args.input = realpath(args.input)
        if not os.path.exists(args.input):
            raise ValueError(f'Trajectory does not exist: {args.input}')
        if args.tail_fraction is None:
            args.tail_fraction = DEFAULT_TAIL_FRACTION
        if not 0 < args.tail_fraction <= 1:
            raise ValueError(f'Tail fraction must be in (0, 1]: {args.tail_fraction}')
        if not args.tol > 0:
            raise ValueError(f'Tolerance must be positive: {args.tol}')
        if not args.threshold > 0:
            raise ValueError(f'Threshold must be positive: {args.threshold}')
        return

    if args.config:
        args.config = realpath(args.config)
        if not os.path.exists(args.config):
            raise ValueError(f'Configuration does not exist: {args.config}')
    args.rc = load_config(args.config)
    if args.tail_fraction is not None:
        if not 0 < args.tail_fraction <= 1:
            raise ValueError(f'Tail fraction must be in (0, 1]: {args.tail_fraction}')
        args.rc = replace(args.rc, tail_fraction=args.tail_fraction)

    stem = splitext(basename(args.config or BUNDLED_CONFIG))[0]
    args.out = realpath(args.out if args.out else f'{stem}.{time.strftime("%Y%m%d_%H%M%S")}')
    os.makedirs(args.out, exist_ok=True)

    args.sweep = ParallelSweep(tail_fraction=args.rc.tail_fraction, threshold=args.rc.threshold, proc_num=args.jobs) \
        if args.jobs > 1 else Sweep(tail_fraction=args.rc.tail_fraction, threshold=args.rc.threshold)

    logger.info('Configuration loaded from %s', args.config or BUNDLED_CONFIG)


def pretty_str(obj):
    """
    Return the "pretty-string" representation of a configuration: nested dicts
    become indented ``key: value`` blocks, sequences of scalars are joined on
    one line, dataclass instances are shown as their class name and fields.
    The goal is to be informative when logging, not to be parseable.
    """
    def _lines(obj):
        if isinstance(obj, dict):
            lines = []
            for key, value in obj.items():
                value_lines = _lines(value)
                if len(value_lines) == 1:
                    lines.append(f'{key}: {value_lines[0]}')
                else:
                    lines.append(f'{key}:')
                    lines.extend(f'\t{line}' for line in value_lines)
            return lines or ['{}']
        if isinstance(obj, (list, tuple)) and any(isinstance(v, (dict, list, tuple)) for v in obj):
            return [f'- {line}' for v in obj for line in _lines(v)]
        return [fmt(obj) if not hasattr(obj, '__dataclass_fields__') else str(obj)]
    return '\n'.join(_lines(obj))


def _log_session(args):
    if logger.isEnabledFor(logging.INFO):
        logger.info('%s session starts\n%s', args.command, indent(pretty_str(args.rc.as_dict()), '\t'))


@CommandRegistry.register('certify')
def cmd_certify(args):
    """
    Certify the configured loop, either at the configured ``u_bar`` or at the
    best ``u_bar`` of the configured grid (saving the grid as a table), and
    report the certificate together with the secant-relaxed bound and the
    linearized gains. With ``--check``, also try to falsify the certificate by
    simulation.
    """
    rc = args.rc
    _log_session(args)

    if rc.u_bar is not None:
        cert = certify(rc.stages, rc.u_bar, rc.mu)
    else:
        certs = certify_grid(rc.stages, rc.mu, np.linspace(rc.u_lo, rc.u_hi, rc.grid_n))
        write_table(join(args.out, rc.outputs['certificates']),
                    ['u_bar', 'theta_total', 'lambda_total', 'k_smallgain', 'k_input', 'k_max'],
                    ([c.u_bar, c.theta_total, c.lambda_total, c.k_smallgain, c.k_input, c.k_max] for c in certs))
        cert = best_certificate(certs)

    if cert.nothing_certified:
        logger.warning('Nothing certified at u_bar=%r: k_max=%r', cert.u_bar, cert.k_max)
    else:
        logger.info('Certified gains: k < %r', cert.k_max)

    inputs = (cert.u_bar,) + cert.anchors[:-1]
    sections = {
        'certificate': {
            'u_bar': cert.u_bar,
            'mu': cert.mu,
            'anchors': cert.anchors,
            'thetas': cert.thetas,
            'lambdas': cert.lambdas,
            'theta_total': cert.theta_total,
            'lambda_total': cert.lambda_total,
            'k_smallgain': cert.k_smallgain,
            'k_input': cert.k_input,
            'k_max': cert.k_max,
            'nothing_certified': cert.nothing_certified,
        },
        'global': {
            'deltas': tuple(stage.delta_lower_bound() for stage in rc.stages),
            'k_bound': global_k_bound(rc.stages, rc.mu),
        },
        'linearized': {
            'hinf_gains': tuple(linearized_hinf_gain(stage, u) for stage, u in zip(rc.stages, inputs)),
            'cascade_gain': cascade_linearized_gain(rc.stages, cert.u_bar),
            'scope': SECANT_SCOPE,
        },
    }

    secant_n = rc.secant_n or len(rc.stages)
    if secant_n >= 3:
        sections['secant'] = {
            'n': secant_n,
            'margin': secant_margin(secant_n),
            'k_bound': secant_relaxed_bound(cert, secant_n),
            'scope': SECANT_SCOPE,
        }

    code = 0
    if args.check and cert.nothing_certified:
        logger.warning('Nothing to cross-check')
    elif args.check:
        check = cross_validate(cert, rc.model(k=0.0), rc.sim_config(), seed=args.seed, sweep=args.sweep)
        sections['check'] = {
            'k': check.k,
            'seed': args.seed,
            'runs': len(check.runs),
            'converged_runs': sum(run.converged for run in check.runs),
            'spread': check.spread,
            'passed': check.passed,
        }
        if not check.passed:
            logger.error('Certificate falsified at k=%r', check.k)
            code = EXIT_FALSIFIED

    write_report(join(args.out, rc.outputs['report']), sections)
    return code


@CommandRegistry.register('simulate')
def cmd_simulate(args):
    """
    Simulate the configured loop, save the trajectory (with the effective
    input of the first stage), and summarize the tail of every column.
    """
    rc = args.rc
    _log_session(args)

    model, cfg = rc.model(), rc.sim_config()
    states = simulate(model, cfg)
    u_eff = effective_input_signal(model, cfg, states)
    write_trajectory(join(args.out, rc.outputs['trajectory']), states, u_eff)

    run = RunSummary.from_states(model, cfg, states, tail_fraction=rc.tail_fraction, threshold=rc.threshold)
    names = [f'x{i + 1}' for i in range(states.dim)] + ['u_eff']
    signal = SampledSignal(np.column_stack([states.values, u_eff.values]), dt=states.dt, t0=states.t0)
    sections = {
        'run': {
            'k': model.k,
            'mu': model.mu,
            'delays': model.all_delays,
            'outcome': run.outcome,
            'limit': run.limit,
            'residual': equilibrium_residual(model, run.limit) if run.limit is not None and max(run.limit) < 1 else None,
        },
        **column_sections(names, signal, tail_fraction=rc.tail_fraction, tol=DEFAULT_CONVERGENCE_TOL, threshold=rc.threshold),
    }
    write_report(join(args.out, rc.outputs['summary']), sections)
    return 0


@CommandRegistry.register('sweep')
def cmd_sweep(args):
    """
    Simulate the configured loop for every gain of the configured range and
    tabulate the tail of the last stage, in ascending order of gains.
    """
    rc = args.rc
    _log_session(args)

    n = len(rc.stages)
    runs = args.sweep(gain_cases(rc.model(k=0.0), rc.sim_config(), rc.gains()))
    write_table(join(args.out, rc.outputs['table']),
                ['k', f'amplitude_x{n}', 'outcome', 'converged', f'limit_x{n}'],
                ([run.k, run.amplitudes[-1], run.outcome, run.converged, run.limit[-1] if run.limit else None] for run in runs))
    return 0


@CommandRegistry.register('hopf')
def cmd_hopf(args):
    """
    Bracket the onset of oscillations between ``k_lo`` and ``k_hi``. Without a
    configured ``k_lo``, the certified bound ``k_max`` is used, which is on
    the converging side by construction.
    """
    rc = args.rc
    _log_session(args)

    if rc.k_hi is None:
        raise ConfigurationError('k_hi is not configured in section [hopf]')
    k_lo = rc.k_lo
    if k_lo is None:
        cert = certify(rc.stages, rc.u_bar, rc.mu) if rc.u_bar is not None \
            else best_certificate(certify_grid(rc.stages, rc.mu, np.linspace(rc.u_lo, rc.u_hi, rc.grid_n)))
        k_lo = max(cert.k_max, 0.0)
        logger.info('Lower end of the bracket taken from the certificate: %r', k_lo)

    lo, hi = bracket_hopf_onset(rc.model(k=0.0), rc.sim_config(), k_lo, rc.k_hi,
                                threshold=rc.threshold, tol_k=rc.tol, tail_fraction=rc.tail_fraction)
    write_report(join(args.out, rc.outputs['report']), {
        'hopf': {
            'onset': (lo + hi) / 2,
            'k_lo': lo,
            'k_hi': hi,
            'threshold': rc.threshold,
            'tol': rc.tol,
        },
    })
    return 0


@CommandRegistry.register('amplitude')
def cmd_amplitude(args):
    """
    Print the tail amplitude and, if converged, the limit of every column of
    a saved trajectory.
    """
    names, signal = read_trajectory(args.input)
    logger.info('Trajectory loaded from %s', args.input)
    sys.stdout.write(format_report(column_sections(names, signal, tail_fraction=args.tail_fraction, tol=args.tol,
                                                   threshold=args.threshold)))
    return 0


def execute():
    """
    The main entry point of smallgain.
    """
    parser = create_parser()
    args = parser.parse_args()

    config_logging(args)
    try:
        process_args(args)
    except ValueError as e:
        parser.error(e)

    try:
        code = CommandRegistry.registry[args.command](args)
    except ConfigurationError as e:
        logger.error('Configuration error: %s', e)
        sys.exit(EXIT_CONFIG)
    except AnalysisException as e:
        logger.error('Analysis failed: %s', e, exc_info=e)
        sys.exit(EXIT_NUMERICAL)

    if code:
        sys.exit(code)
