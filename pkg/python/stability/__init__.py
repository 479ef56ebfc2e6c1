"""
Frequency stability of subsequences selected from random bitstreams.

Selection rules are small finite-state programs. Their encoded size stands
in for rule complexity, compression estimators stand in for the complexity of
the input, and the experiment harness measures how far the frequency of ones
in a selected subsequence strays from 1/2 as both grow.
"""

from .bitstream import BitSequence, SourceSpec, frequency, generate, read_bits, write_bits
from .complexity import ComplexityEstimate, deficiency, estimate, ml_prefix_curve
from .experiment import (
    ExperimentConfig,
    ExperimentRecord,
    calibrate_c,
    crystal_stability_check,
    emit,
    load_config,
    run_experiment,
)
from .metrics import BoundReport, bias, bound_report, eq2_bound
from .rule_dsl import load_rule, parse_rule, serialize_text
from .rulevm import SelectionResult, SelectionRule, rule_complexity, run_rule

__all__ = [
    'BitSequence',
    'SourceSpec',
    'frequency',
    'generate',
    'read_bits',
    'write_bits',
    'ComplexityEstimate',
    'deficiency',
    'estimate',
    'ml_prefix_curve',
    'ExperimentConfig',
    'ExperimentRecord',
    'calibrate_c',
    'crystal_stability_check',
    'emit',
    'load_config',
    'run_experiment',
    'BoundReport',
    'bias',
    'bound_report',
    'eq2_bound',
    'load_rule',
    'parse_rule',
    'serialize_text',
    'SelectionResult',
    'SelectionRule',
    'rule_complexity',
    'run_rule',
]
