# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

from . import cli
from .cli import __version__
from .certify import (best_certificate, bracket_hopf_onset, cascade_linearized_gain, Certificate, certify, certify_grid,
                      cyclic_matrix, find_hopf_onset, global_k_bound, is_hurwitz, Linearization, linearization,
                      linearized_hinf_gain, optimize_ubar, secant_hurwitz_check, secant_margin, secant_relaxed_bound)
from .config import load_config, parse_config, RunConfig
from .dde import CascadeModel, effective_input, effective_input_signal, equilibrium_residual, SimConfig, simulate
from .exception import (AnalysisException, BracketError, ConfigurationError, DegenerateInputError, DomainError,
                        NumericalError, SingularityError)
from .gains import (compose, compose_all, feedback_small_gain, IDENTITY, incremental_small_gain_holds, LinearGain,
                    memoryless_gain, small_gain_holds)
from .outcome import Outcome
from .signals import AmplitudeEstimate, estimate_limit, is_oscillatory, SampledSignal, tail_amplitude
from .stage import mapk_stages, RationalStage, StageInterval
from .sweep import check_delays, CrossCheck, cross_validate, gain_cases, ParallelSweep, run_case, RunSummary, Sweep
