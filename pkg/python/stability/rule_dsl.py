"""
Textual rule language.

One state per line:

    state <id>: move <signed int> <select|skip> halt=<yes|no> -> <on0>,<on1>,<skip>

'#' starts a comment. State ids are 1..N, each defined once; state 1 starts.
"""

import re
from pathlib import Path
from typing import Optional, Union

from .errors import RuleSemanticError, RuleSyntaxError
from .rulevm import MAX_MOVE, MIN_MOVE, RuleState, SelectionRule

TOKEN_PATTERN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<arrow>->)
  | (?P<int>[+-]?[0-9]+)
  | (?P<word>[A-Za-z_]+)
  | (?P<colon>:)
  | (?P<comma>,)
  | (?P<eq>=)
    """,
    re.VERBOSE,
)


def _tokenize(line: str, line_no: int) -> list[tuple[str, str, int]]:
    """(kind, text, 1-based column) triples, whitespace dropped."""
    tokens = []
    pos = 0
    while pos < len(line):
        match = TOKEN_PATTERN.match(line, pos)
        if match is None:
            raise RuleSyntaxError(f"unexpected character {line[pos]!r}", line_no, pos + 1)
        if match.lastgroup != "ws":
            tokens.append((match.lastgroup, match.group(), pos + 1))
        pos = match.end()
    return tokens


class _LineParser:
    def __init__(self, line: str, line_no: int):
        self.tokens = _tokenize(line, line_no)
        self.line_no = line_no
        self.end_column = len(line) + 1
        self.pos = 0

    def _fail(self, expected: str):
        if self.pos < len(self.tokens):
            _, text, column = self.tokens[self.pos]
            raise RuleSyntaxError(f"expected {expected}, found {text!r}", self.line_no, column)
        raise RuleSyntaxError(f"expected {expected}, found end of line", self.line_no, self.end_column)

    def expect(self, kind: str, expected: str, values: Optional[tuple[str, ...]] = None) -> tuple[str, int]:
        if self.pos >= len(self.tokens):
            self._fail(expected)
        tok_kind, text, column = self.tokens[self.pos]
        if tok_kind != kind or (values is not None and text not in values):
            self._fail(expected)
        self.pos += 1
        return text, column

    def state_id(self, expected: str) -> int:
        text, column = self.expect("int", expected)
        if text[0] in "+-":
            raise RuleSyntaxError(f"state ids are unsigned, found {text!r}", self.line_no, column)
        return int(text)

    def finish(self):
        if self.pos < len(self.tokens):
            self._fail("end of line")


def _parse_line(line: str, line_no: int) -> tuple[int, RuleState]:
    p = _LineParser(line, line_no)
    p.expect("word", "'state'", ("state",))
    state_id = p.state_id("state id")
    p.expect("colon", "':'")
    p.expect("word", "'move'", ("move",))
    move_text, move_column = p.expect("int", "signed move")
    mode, _ = p.expect("word", "'select' or 'skip'", ("select", "skip"))
    p.expect("word", "'halt'", ("halt",))
    p.expect("eq", "'='")
    halt, _ = p.expect("word", "'yes' or 'no'", ("yes", "no"))
    p.expect("arrow", "'->'")
    on0 = p.state_id("next state on 0")
    p.expect("comma", "','")
    on1 = p.state_id("next state on 1")
    p.expect("comma", "','")
    skip = p.state_id("next state on skip")
    p.finish()

    move = int(move_text)
    if not MIN_MOVE <= move <= MAX_MOVE:
        raise RuleSemanticError(f"move {move} outside [{MIN_MOVE}, {MAX_MOVE}]", state_id)
    return state_id, RuleState(move, mode == "select", halt == "yes", on0, on1, skip)


def parse_rule(text: str, name: Optional[str] = None) -> SelectionRule:
    defined: dict[int, RuleState] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        state_id, state = _parse_line(line, line_no)
        if state_id in defined:
            raise RuleSemanticError("duplicate state id", state_id)
        defined[state_id] = state

    if not defined:
        raise RuleSemanticError("rule defines no states")
    for expected_id in range(1, len(defined) + 1):
        if expected_id not in defined:
            raise RuleSemanticError(
                f"state ids must be contiguous from 1, but state {expected_id} is missing"
            )
    return SelectionRule(tuple(defined[k] for k in range(1, len(defined) + 1)), name=name)


def serialize_text(rule: SelectionRule) -> str:
    """Canonical DSL text; parse_rule(serialize_text(r)) == r."""
    lines = [f"# rule: {rule.name}"] if rule.name else []
    for state_id, s in enumerate(rule.states, start=1):
        lines.append(
            f"state {state_id}: move {s.move:+d} {'select' if s.select else 'skip'} "
            f"halt={'yes' if s.halt else 'no'} -> {s.next_on_0},{s.next_on_1},{s.next_skip}"
        )
    return "\n".join(lines) + "\n"


def load_rule(path: Union[str, Path]) -> SelectionRule:
    path = Path(path)
    return parse_rule(path.read_text(encoding="utf-8"), name=f"file:{path}")


def save_rule(rule: SelectionRule, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_text(rule), encoding="utf-8")
