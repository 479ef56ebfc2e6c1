"""
Selection rules as finite-state programs.

A rule realises the (f, g, h) triple of an admissible selection rule with one
finite-state machine driven only by the values of the bits it has selected:

  - f: each state carries a signed displacement `move`; the candidate index is
       the previously examined index plus `move`, stepping further in the same
       direction over indices that were already selected
  - g: each state's `select` flag decides, before the bit is read, whether the
       examined bit joins R(x)
  - h: each state's `halt` flag stops the process

Only selected bits are read. An examined-but-skipped bit is never exposed to
the rule: the machine follows `next_skip` regardless of its value.

The canonical binary encoding doubles as the complexity proxy K(R|n):
  header  b"RULE" | state count - 1 (u16 LE)
  record  move (i16 LE) | flags (u8: bit0 select, bit1 halt) |
          next_on_0 - 1 | next_on_1 - 1 | next_skip - 1   (u16 LE each)
"""

import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np

from ._jit import jit
from .bitstream import BitSequence
from .errors import BitFormatError, RuleSemanticError
from .prng import Xoshiro256StarStar

MAX_STATES = 2**16
MIN_MOVE = -(2**15)
MAX_MOVE = 2**15 - 1
MAX_DEAD_TIME = 64
MAX_RANDOM_STATES = 256
RANDOM_MOVES = (-3, -2, -1, 1, 2, 3)

RULE_MAGIC = b"RULE"
HEADER = struct.Struct("<4sH")
RECORD = struct.Struct("<hBHHH")

FLAG_SELECT = 0x01
FLAG_HALT = 0x02

HaltReason = Literal["halt_flag", "index_out_of_range", "step_budget_exhausted"]
HALT_REASONS: tuple[HaltReason, ...] = (
    "halt_flag",
    "index_out_of_range",
    "step_budget_exhausted",
)
_HALT_FLAG = 0
_OUT_OF_RANGE = 1
_BUDGET = 2

STEP_BUDGET_FACTOR = 4


@dataclass(frozen=True)
class RuleState:
    """One state of a selection rule; ids are 1-based."""
    move: int
    select: bool
    halt: bool
    next_on_0: int
    next_on_1: int
    next_skip: int


@dataclass(frozen=True)
class SelectionRule:
    """A validated finite-state selection rule. State 1 is the start state."""
    states: tuple[RuleState, ...]
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        count = len(self.states)
        if not 1 <= count <= MAX_STATES:
            raise RuleSemanticError(f"a rule needs 1..{MAX_STATES} states, got {count}")
        for state_id, state in enumerate(self.states, start=1):
            if state.move == 0:
                raise RuleSemanticError("move must be non-zero", state_id)
            if not MIN_MOVE <= state.move <= MAX_MOVE:
                raise RuleSemanticError(
                    f"move {state.move} outside [{MIN_MOVE}, {MAX_MOVE}]", state_id
                )
            for target in (state.next_on_0, state.next_on_1, state.next_skip):
                if not 1 <= target <= count:
                    raise RuleSemanticError(f"undefined state {target}", state_id)

    @property
    def start(self) -> int:
        return 1

    def __len__(self) -> int:
        return len(self.states)

    def label(self) -> str:
        return self.name or f"rule[{len(self.states)}]"

    @cached_property
    def _program(self) -> tuple[np.ndarray, ...]:
        moves = np.array([s.move for s in self.states], dtype=np.int64)
        flags = np.array(
            [(FLAG_SELECT if s.select else 0) | (FLAG_HALT if s.halt else 0) for s in self.states],
            dtype=np.uint8,
        )
        next0 = np.array([s.next_on_0 - 1 for s in self.states], dtype=np.int64)
        next1 = np.array([s.next_on_1 - 1 for s in self.states], dtype=np.int64)
        skip = np.array([s.next_skip - 1 for s in self.states], dtype=np.int64)
        return moves, flags, next0, next1, skip


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """R(x) with its 1-based source indices and the reason the run stopped."""
    selected: BitSequence
    selected_indices: np.ndarray
    examined_count: int
    halt_reason: HaltReason

    @property
    def sub_len(self) -> int:
        return self.selected.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, SelectionResult):
            return NotImplemented
        return (
            self.selected == other.selected
            and np.array_equal(self.selected_indices, other.selected_indices)
            and self.examined_count == other.examined_count
            and self.halt_reason == other.halt_reason
        )


@jit
def _run_kernel(moves, flags, next0, next1, skip, bits, budget):
    n = bits.shape[0]
    taken = np.zeros(n + 1, dtype=np.uint8)
    chosen = np.empty(n, dtype=np.int64)
    count = 0
    examined = 0
    prev = 0
    q = 0
    reason = _HALT_FLAG
    while True:
        if flags[q] & FLAG_HALT:
            reason = _HALT_FLAG
            break
        move = moves[q]
        step = 1 if move > 0 else -1
        i = prev + move
        while i >= 1 and i <= n and taken[i] == 1:
            i += step
        if i < 1 or i > n:
            reason = _OUT_OF_RANGE
            break
        if examined >= budget:
            reason = _BUDGET
            break
        examined += 1
        prev = i
        if flags[q] & FLAG_SELECT:
            taken[i] = 1
            chosen[count] = i
            count += 1
            if bits[i - 1] == 1:
                q = next1[q]
            else:
                q = next0[q]
        else:
            q = skip[q]
    return chosen[:count].copy(), examined, reason


def run_rule(rule: SelectionRule, x: BitSequence) -> SelectionResult:
    """
    Execute a rule against x.

    The run stops on a halt state, when the candidate index leaves 1..n (in
    either direction), or after 4·n examinations. All three are normal results.
    """
    if x.length < 1:
        raise ValueError("run_rule requires a non-empty input sequence")
    bits = np.array(x.to_array(), dtype=np.uint8)
    indices, examined, reason = _run_kernel(
        *rule._program, bits, STEP_BUDGET_FACTOR * x.length
    )
    indices.flags.writeable = False
    return SelectionResult(
        selected=BitSequence.from_array(bits[indices - 1]),
        selected_indices=indices,
        examined_count=int(examined),
        halt_reason=HALT_REASONS[reason],
    )


def serialize_rule(rule: SelectionRule) -> bytes:
    parts = [HEADER.pack(RULE_MAGIC, len(rule.states) - 1)]
    for s in rule.states:
        flags = (FLAG_SELECT if s.select else 0) | (FLAG_HALT if s.halt else 0)
        parts.append(
            RECORD.pack(s.move, flags, s.next_on_0 - 1, s.next_on_1 - 1, s.next_skip - 1)
        )
    return b"".join(parts)


def deserialize_rule(data: bytes, name: Optional[str] = None) -> SelectionRule:
    if len(data) < HEADER.size:
        raise BitFormatError("truncated rule header", len(data))
    magic, stored_count = HEADER.unpack_from(data, 0)
    if magic != RULE_MAGIC:
        raise BitFormatError("bad magic, expected RULE", 0)
    count = stored_count + 1
    expected = HEADER.size + count * RECORD.size
    if len(data) != expected:
        raise BitFormatError(
            f"rule of {count} states needs {expected} bytes", min(len(data), expected)
        )
    states = []
    for k in range(count):
        offset = HEADER.size + k * RECORD.size
        move, flags, on0, on1, skip = RECORD.unpack_from(data, offset)
        if flags & ~(FLAG_SELECT | FLAG_HALT):
            raise BitFormatError("unknown flag bits", offset + 2)
        states.append(
            RuleState(move, bool(flags & FLAG_SELECT), bool(flags & FLAG_HALT), on0 + 1, on1 + 1, skip + 1)
        )
    return SelectionRule(tuple(states), name=name)


def rule_complexity(rule: SelectionRule) -> int:
    """K̂(R|n) proxy in bits: the length of the canonical encoding."""
    return 8 * len(serialize_rule(rule))


def admissibility(rule: SelectionRule) -> Literal["church", "kolmogorov_loveland"]:
    """
    "church" when every move is positive, i.e. the rule scans strictly left to
    right; otherwise the rule may move backwards (Kolmogorov-Loveland).
    """
    if all(s.move > 0 for s in rule.states):
        return "church"
    return "kolmogorov_loveland"


def identity_rule() -> SelectionRule:
    return SelectionRule((RuleState(1, True, False, 1, 1, 1),), name="identity")


def crystal_rule() -> SelectionRule:
    """The perfect crystal: identity selection, the least complex rule."""
    return SelectionRule(identity_rule().states, name="crystal")


def halting_rule() -> SelectionRule:
    """Halts before examining anything; R(x) is always empty."""
    return SelectionRule((RuleState(1, True, True, 1, 1, 1),), name="halt")


def _check_stride(k: int) -> None:
    if not 1 <= k <= MAX_MOVE:
        raise ValueError(f"stride must be in 1..{MAX_MOVE}, got {k}")


def every_k_rule(k: int) -> SelectionRule:
    """Selects x_k, x_2k, x_3k, ..."""
    _check_stride(k)
    return SelectionRule((RuleState(k, True, False, 1, 1, 1),), name=f"every:{k}")


def constant_skip_rule(k: int) -> SelectionRule:
    """
    Alternates a select state and a skip state: select the next bit, then
    examine-and-skip the bit k positions further on, and repeat.
    """
    _check_stride(k)
    return SelectionRule(
        (
            RuleState(1, True, False, 2, 2, 2),
            RuleState(k, False, False, 1, 1, 1),
        ),
        name=f"skip:{k}",
    )


def transient_response_rule(dead_time: int) -> SelectionRule:
    """
    A device with a recovery time: it passes bits through until it sees a
    pulse (a 1), then spends `dead_time` steps examining but not passing the
    following bits before it tracks the input again. d + 1 states.
    """
    if not 1 <= dead_time <= MAX_DEAD_TIME:
        raise ValueError(f"dead time must be in 1..{MAX_DEAD_TIME}, got {dead_time}")
    states = [RuleState(1, True, False, 1, 2, 1)]
    for k in range(2, dead_time + 2):
        following = k + 1 if k <= dead_time else 1
        states.append(RuleState(1, False, False, following, following, following))
    return SelectionRule(tuple(states), name=f"transient:{dead_time}")


def random_rule(seed: int, num_states: int) -> SelectionRule:
    """
    A rule drawn from the package's pseudorandom scheme.

    Per state, in order: move from {-3..-1, 1..3}, select (top bit), halt
    (probability 1/16, never on the start state so the rule always examines
    something), then the three transition targets.
    """
    if not 1 <= num_states <= MAX_RANDOM_STATES:
        raise ValueError(f"num_states must be in 1..{MAX_RANDOM_STATES}, got {num_states}")
    rng = Xoshiro256StarStar.from_seed(seed)
    states = []
    for k in range(num_states):
        move = RANDOM_MOVES[rng.below(len(RANDOM_MOVES))]
        select = bool(rng.next() >> 63)
        halt = rng.below(16) == 0 and k > 0
        targets = [1 + rng.below(num_states) for _ in range(3)]
        states.append(RuleState(move, select, halt, *targets))
    return SelectionRule(tuple(states), name=f"random:seed={seed}:states={num_states}")
