"""
The two sides of the bias bound.

For a rule R applied to x of length n:

    |ν(R(x)) - 1/2|  <=  c * sqrt((δ(x|n) + K(R|n) + 2·log2 K(R|n)) / l(R(x)))

The left side is measured exactly. On the right, δ comes from a complexity
estimator, K(R|n) from the rule's canonical encoding, and c is an empirical
constant (see experiment.calibrate_c). Logarithms are base 2 throughout.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from shared.config import config

from .bitstream import BitSequence, frequency
from .complexity import DEFAULT_BLOCK, Estimator, deficiency
from .errors import EmptySelectionError, UndefinedFrequencyError
from .rulevm import SelectionResult, SelectionRule, rule_complexity, run_rule

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)


def bias(sub: BitSequence, p: Fraction = HALF) -> Fraction:
    """|ν(sub) - p|, exactly. The bound itself is only stated for p = 1/2."""
    p = Fraction(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p}")
    if sub.length == 0:
        raise UndefinedFrequencyError("bias of an empty subsequence is undefined")
    return abs(frequency(sub) - p)


def denominator(delta_hat: float, k_rule: float) -> float:
    """δ̂ + K̂(R) + 2·log2 K̂(R); k_rule = 1 contributes log2 1 = 0."""
    if k_rule < 1:
        raise ValueError(f"k_rule must be >= 1 bit, got {k_rule}")
    if delta_hat < 0:
        raise ValueError(f"delta_hat must be >= 0, got {delta_hat}")
    return delta_hat + k_rule + 2 * math.log2(k_rule)


def eq2_bound(delta_hat: float, k_rule: float, sub_len: int, c: float) -> float:
    if sub_len < 1:
        raise EmptySelectionError("empty selection, bound undefined")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    return c * math.sqrt(denominator(delta_hat, k_rule) / sub_len)


def normalized_bias(bias_value: float, delta_hat: float, k_rule: float, sub_len: int) -> float:
    """bias·sqrt(sub_len / denominator): the smallest c that would satisfy the bound."""
    if sub_len < 1:
        raise EmptySelectionError("empty selection, normalized bias undefined")
    return float(bias_value) * math.sqrt(sub_len / denominator(delta_hat, k_rule))


@dataclass(frozen=True)
class BoundReport:
    bias: Fraction
    bound: float
    c_used: float
    delta_hat: float
    k_rule: int
    sub_len: int
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "bias": float(self.bias),
            "bound": self.bound,
            "c_used": self.c_used,
            "delta_hat": self.delta_hat,
            "k_rule": self.k_rule,
            "sub_len": self.sub_len,
            "satisfied": self.satisfied,
        }


def report_from_selection(
    selection: SelectionResult, delta_hat: float, k_rule: int, c: float
) -> BoundReport:
    """Assemble a report when δ̂ and K̂(R) are already known."""
    if selection.sub_len == 0:
        raise EmptySelectionError(
            "empty selection, bound undefined", selection.halt_reason
        )
    measured = bias(selection.selected)
    bound = eq2_bound(delta_hat, k_rule, selection.sub_len, c)
    return BoundReport(
        bias=measured,
        bound=bound,
        c_used=c,
        delta_hat=delta_hat,
        k_rule=k_rule,
        sub_len=selection.sub_len,
        satisfied=measured <= bound,
    )


def bound_report(
    x: BitSequence,
    rule: SelectionRule,
    estimator: Estimator = "lz78",
    c: Optional[float] = None,
    block: int = DEFAULT_BLOCK,
) -> BoundReport:
    c = config.default_c if c is None else c
    selection = run_rule(rule, x)
    report = report_from_selection(
        selection, deficiency(x, estimator, block), rule_complexity(rule), c
    )
    logger.debug(
        "rule=%s sub_len=%d bias=%s bound=%.6g", rule.label(), report.sub_len, report.bias, report.bound
    )
    return report
