"""CTL over partition-membership atoms: parsing, fixpoint checking, witnesses.

Grammar (whitespace-insensitive)::

    formula  := implies
    implies  := or ('->' implies)?                      right-associative
    or       := and ('|' and)*
    and      := unary ('&' unary)*
    unary    := ('!' | 'EX' | 'AX' | 'EF' | 'AF' | 'EG' | 'AG') unary
              | 'E' '[' formula 'U' formula ']'
              | 'A' '[' formula 'U' formula ']'
              | primary
    primary  := 'true' | 'false' | 'p' INT | '(' formula ')'

Checking runs the standard explicit-state fixpoints: EX by existential
preimage, until-operators as least fixpoints, globally-operators as greatest
fixpoints, and the universal forms by the direct all-successor variants.
States without outgoing edges get a stutter self-loop so path quantification
stays well-defined; the states that needed one are reported alongside the
verdict. Alternatively an explicit sink state can absorb such dead ends.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Atom",
    "Const",
    "Not",
    "And",
    "Or",
    "Implies",
    "EX",
    "AX",
    "EF",
    "AF",
    "EG",
    "AG",
    "EU",
    "AU",
    "CtlSyntaxError",
    "UnknownAtomError",
    "parse_ctl",
    "format_formula",
    "KripkeView",
    "CheckResult",
    "check",
    "check_suite",
    "CheckReport",
    "load_formulas",
]

OUT_SINK_ID = 0


class CtlSyntaxError(ValueError):
    """Formula text failed to parse; carries position and expected tokens."""

    def __init__(self, message: str, position: int, expected=()):
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected: {', '.join(sorted(expected))})"
        super().__init__(detail)
        self.position = position
        self.expected = tuple(sorted(expected))


class UnknownAtomError(ValueError):
    """An atom names a partition id that the checked system does not have."""


@dataclass(frozen=True)
class Atom:
    pid: int


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Not:
    child: "CtlFormula"


@dataclass(frozen=True)
class And:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class Or:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class Implies:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class EX:
    child: "CtlFormula"


@dataclass(frozen=True)
class AX:
    child: "CtlFormula"


@dataclass(frozen=True)
class EF:
    child: "CtlFormula"


@dataclass(frozen=True)
class AF:
    child: "CtlFormula"


@dataclass(frozen=True)
class EG:
    child: "CtlFormula"


@dataclass(frozen=True)
class AG:
    child: "CtlFormula"


@dataclass(frozen=True)
class EU:
    left: "CtlFormula"
    right: "CtlFormula"


@dataclass(frozen=True)
class AU:
    left: "CtlFormula"
    right: "CtlFormula"


CtlFormula = (
    Atom | Const | Not | And | Or | Implies | EX | AX | EF | AF | EG | AG | EU | AU
)

_UNARY_TEMPORAL = {"EX": EX, "AX": AX, "EF": EF, "AF": AF, "EG": EG, "AG": AG}
_KEYWORDS = set(_UNARY_TEMPORAL) | {"E", "A", "U", "true", "false"}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<arrow>->)|(?P<punct>[!&|()\[\]])|(?P<word>[A-Za-z][A-Za-z0-9_]*)"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise CtlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        value = m.group()
        if m.lastgroup == "word":
            atom = re.fullmatch(r"p(\d+)", value)
            if atom:
                tokens.append(("atom", int(atom.group(1)), pos))
            elif value in _KEYWORDS:
                tokens.append((value, value, pos))
            else:
                raise CtlSyntaxError(f"unknown token {value!r}", pos)
        else:
            tokens.append((value, value, pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise CtlSyntaxError(
                f"unexpected {tok[0] if tok[0] != 'end' else 'end of input'}",
                tok[2],
                expected={kind},
            )
        return self.advance()

    def formula(self):
        return self.implies()

    def implies(self):
        left = self.disjunction()
        if self.peek()[0] == "->":
            self.advance()
            return Implies(left, self.implies())
        return left

    def disjunction(self):
        node = self.conjunction()
        while self.peek()[0] == "|":
            self.advance()
            node = Or(node, self.conjunction())
        return node

    def conjunction(self):
        node = self.unary()
        while self.peek()[0] == "&":
            self.advance()
            node = And(node, self.unary())
        return node

    def unary(self):
        kind, value, pos = self.peek()
        if kind == "!":
            self.advance()
            return Not(self.unary())
        if kind in _UNARY_TEMPORAL:
            self.advance()
            return _UNARY_TEMPORAL[kind](self.unary())
        if kind in ("E", "A"):
            self.advance()
            self.expect("[")
            left = self.formula()
            self.expect("U")
            right = self.formula()
            self.expect("]")
            return EU(left, right) if kind == "E" else AU(left, right)
        return self.primary()

    def primary(self):
        kind, value, pos = self.peek()
        if kind == "atom":
            self.advance()
            return Atom(value)
        if kind == "true":
            self.advance()
            return Const(True)
        if kind == "false":
            self.advance()
            return Const(False)
        if kind == "(":
            self.advance()
            node = self.formula()
            self.expect(")")
            return node
        raise CtlSyntaxError(
            f"unexpected {kind if kind != 'end' else 'end of input'}",
            pos,
            expected={"atom", "true", "false", "(", "!", "EX", "AX", "EF", "AF", "EG", "AG", "E[", "A["},
        )


def parse_ctl(text: str) -> CtlFormula:
    """Parse formula text into an AST; raises ``CtlSyntaxError`` on bad input."""
    parser = _Parser(_tokenize(text))
    node = parser.formula()
    kind, _, pos = parser.peek()
    if kind != "end":
        raise CtlSyntaxError(f"trailing input {kind!r}", pos, expected={"end of input"})
    return node


_PREC_IMPLIES = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_UNARY = 4


def format_formula(f: CtlFormula) -> str:
    """Minimal-parenthesis text form; reparsing gives an equal AST."""
    return _fmt(f, 0)


def _fmt(f, ctx: int) -> str:
    if isinstance(f, Atom):
        return f"p{f.pid}"
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return _wrap("!" + _fmt(f.child, _PREC_UNARY), _PREC_UNARY, ctx)
    for cls, name in ((EX, "EX"), (AX, "AX"), (EF, "EF"), (AF, "AF"), (EG, "EG"), (AG, "AG")):
        if isinstance(f, cls):
            return _wrap(f"{name} " + _fmt(f.child, _PREC_UNARY), _PREC_UNARY, ctx)
    if isinstance(f, EU):
        return f"E[{_fmt(f.left, 0)} U {_fmt(f.right, 0)}]"
    if isinstance(f, AU):
        return f"A[{_fmt(f.left, 0)} U {_fmt(f.right, 0)}]"
    if isinstance(f, And):
        s = _fmt(f.left, _PREC_AND) + " & " + _fmt(f.right, _PREC_AND + 1)
        return _wrap(s, _PREC_AND, ctx)
    if isinstance(f, Or):
        s = _fmt(f.left, _PREC_OR) + " | " + _fmt(f.right, _PREC_OR + 1)
        return _wrap(s, _PREC_OR, ctx)
    if isinstance(f, Implies):
        s = _fmt(f.left, _PREC_IMPLIES + 1) + " -> " + _fmt(f.right, _PREC_IMPLIES)
        return _wrap(s, _PREC_IMPLIES, ctx)
    raise TypeError(f"not a CTL formula node: {f!r}")


def _wrap(s: str, prec: int, ctx: int) -> str:
    return f"({s})" if prec < ctx else s


class KripkeView:
    """Finite total transition graph with one atom per partition id.

    ``state_ids`` are the partition ids; the edge matrix follows their
    order. Dead-end states either get a stutter self-loop (default, the ids
    are reported in ``stutter_states``) or an edge to an explicit sink state
    with id ``OUT_SINK_ID`` that satisfies no atom.
    """

    def __init__(self, state_ids, edges, out_sink: bool = False):
        state_ids = tuple(int(s) for s in state_ids)
        if len(set(state_ids)) != len(state_ids):
            raise ValueError("state ids must be unique")
        edges = np.array(edges, dtype=bool)
        n = len(state_ids)
        if edges.shape != (n, n):
            raise ValueError(f"edge matrix must be {n}x{n}, got {edges.shape}")

        self.atom_ids = frozenset(state_ids)
        succ: dict[int, tuple[int, ...]] = {}
        stutter = []
        for i, sid in enumerate(state_ids):
            targets = [state_ids[j] for j in np.nonzero(edges[i])[0]]
            succ[sid] = tuple(targets)

        deadlocks = [sid for sid in state_ids if not succ[sid]]
        if out_sink and deadlocks:
            if OUT_SINK_ID in self.atom_ids:
                raise ValueError(f"sink id {OUT_SINK_ID} collides with a partition id")
            for sid in deadlocks:
                succ[sid] = (OUT_SINK_ID,)
            succ[OUT_SINK_ID] = (OUT_SINK_ID,)
            state_ids = state_ids + (OUT_SINK_ID,)
        else:
            for sid in deadlocks:
                succ[sid] = (sid,)
                stutter.append(sid)

        self.state_ids = state_ids
        self.states = frozenset(state_ids)
        self.stutter_states = tuple(stutter)
        self.has_out_sink = bool(out_sink and deadlocks)
        self._succ = {sid: tuple(sorted(targets)) for sid, targets in succ.items()}

    @classmethod
    def from_transition_system(cls, ts, out_sink: bool = False) -> "KripkeView":
        return cls(ts.partition_set.ids, ts.transitions, out_sink=out_sink)

    def successors(self, sid: int):
        return self._succ[sid]

    def _pre_exists(self, target: frozenset) -> frozenset:
        return frozenset(s for s in self.states if any(t in target for t in self._succ[s]))

    def _all_into(self, target: frozenset) -> frozenset:
        return frozenset(s for s in self.states if all(t in target for t in self._succ[s]))

    def sat(self, f: CtlFormula) -> frozenset:
        """States satisfying ``f``, by recursive fixpoint labeling."""
        if isinstance(f, Atom):
            if f.pid not in self.atom_ids:
                raise UnknownAtomError(f"atom p{f.pid} names no partition in the system")
            return frozenset({f.pid})
        if isinstance(f, Const):
            return self.states if f.value else frozenset()
        if isinstance(f, Not):
            return self.states - self.sat(f.child)
        if isinstance(f, And):
            return self.sat(f.left) & self.sat(f.right)
        if isinstance(f, Or):
            return self.sat(f.left) | self.sat(f.right)
        if isinstance(f, Implies):
            return (self.states - self.sat(f.left)) | self.sat(f.right)
        if isinstance(f, EX):
            return self._pre_exists(self.sat(f.child))
        if isinstance(f, AX):
            return self._all_into(self.sat(f.child))
        if isinstance(f, EF):
            return self._lfp(self.sat(f.child), lambda t: self._pre_exists(t))
        if isinstance(f, AF):
            return self._lfp(self.sat(f.child), lambda t: self._all_into(t))
        if isinstance(f, EG):
            return self._gfp(self.sat(f.child), lambda t: self._pre_exists(t))
        if isinstance(f, AG):
            return self._gfp(self.sat(f.child), lambda t: self._all_into(t))
        if isinstance(f, EU):
            hold = self.sat(f.left)
            return self._lfp(self.sat(f.right), lambda t: hold & self._pre_exists(t))
        if isinstance(f, AU):
            hold = self.sat(f.left)
            return self._lfp(self.sat(f.right), lambda t: hold & self._all_into(t))
        raise TypeError(f"not a CTL formula node: {f!r}")

    def _lfp(self, seed: frozenset, step) -> frozenset:
        current = seed
        while True:
            grown = current | step(current)
            if grown == current:
                return current
            current = grown

    def _gfp(self, seed: frozenset, step) -> frozenset:
        current = seed
        while True:
            shrunk = current & step(current)
            if shrunk == current:
                return current
            current = shrunk

    # -- witness construction ------------------------------------------------

    def _shortest_path(self, start: int, targets: frozenset, through: frozenset):
        """BFS path start -> targets whose intermediate states stay in ``through``."""
        if start in targets:
            return (start,)
        if start not in through:
            return None
        parent = {start: None}
        queue = [start]
        while queue:
            nxt = []
            for s in queue:
                for t in self.successors(s):
                    if t in parent:
                        continue
                    parent[t] = s
                    if t in targets:
                        path = [t]
                        while parent[path[-1]] is not None:
                            path.append(parent[path[-1]])
                        return tuple(reversed(path))
                    if t in through:
                        nxt.append(t)
            queue = nxt
        return None

    def _lasso(self, start: int, region: frozenset):
        """Walk greedily inside ``region`` until a state repeats."""
        path = [start]
        seen = {start: 0}
        while True:
            here = path[-1]
            candidates = [t for t in self.successors(here) if t in region]
            if not candidates:
                return None
            t = candidates[0]
            if t in seen:
                return tuple(path), seen[t]
            seen[t] = len(path)
            path.append(t)

    def check(self, f: CtlFormula, initial: int) -> "CheckResult":
        if initial not in self.states:
            raise ValueError(f"initial state {initial} is not in the system")
        verdict = initial in self.sat(f)
        witness, loop_index = self._witness(f, initial, verdict)
        uses_stutter = bool(witness) and any(s in self.stutter_states for s in witness)
        return CheckResult(
            verdict=verdict,
            witness=witness,
            loop_index=loop_index,
            stutter_states=self.stutter_states,
            witness_uses_stutter=uses_stutter,
        )

    def _witness(self, f, initial, verdict):
        """Path evidence for top-level temporal operators.

        True existential verdicts get a witness path (a lasso for EG); false
        universal verdicts get a counterexample path built from the dual
        existential formula. Other shapes return no path.
        """
        if verdict:
            if isinstance(f, EX):
                target = self.sat(f.child)
                for t in self.successors(initial):
                    if t in target:
                        return (initial, t), None
            elif isinstance(f, EF):
                return self._shortest_path(initial, self.sat(f.child), self.states), None
            elif isinstance(f, EU):
                return (
                    self._shortest_path(initial, self.sat(f.right), self.sat(f.left)),
                    None,
                )
            elif isinstance(f, EG):
                region = self.sat(EG(f.child))
                lasso = self._lasso(initial, region)
                if lasso:
                    return lasso
        else:
            if isinstance(f, AX):
                bad = self.states - self.sat(f.child)
                for t in self.successors(initial):
                    if t in bad:
                        return (initial, t), None
            elif isinstance(f, AG):
                return self._shortest_path(initial, self.sat(Not(f.child)), self.states), None
            elif isinstance(f, AF):
                region = self.sat(EG(Not(f.child)))
                lasso = self._lasso(initial, region)
                if lasso:
                    return lasso
            elif isinstance(f, AU):
                # a path either reaches a state failing both obligations while
                # avoiding the goal, or avoids the goal forever
                avoid = Not(f.right)
                stuck = And(Not(f.left), Not(f.right))
                path = self._shortest_path(initial, self.sat(stuck), self.sat(avoid))
                if path is not None:
                    return path, None
                region = self.sat(EG(avoid))
                if initial in region:
                    lasso = self._lasso(initial, region)
                    if lasso:
                        return lasso
        return None, None


@dataclass(frozen=True)
class CheckResult:
    """Verdict plus optional path evidence.

    ``witness`` is a sequence of state ids along real edges; when
    ``loop_index`` is set, the suffix from that index repeats forever (the
    last state has an edge back to ``witness[loop_index]``).
    """

    verdict: bool
    witness: tuple | None
    loop_index: int | None
    stutter_states: tuple
    witness_uses_stutter: bool


def check(ts, formula, initial: int, out_sink: bool = False) -> CheckResult:
    """Check one formula (text or AST) against a transition system."""
    if isinstance(formula, str):
        formula = parse_ctl(formula)
    view = KripkeView.from_transition_system(ts, out_sink=out_sink)
    if initial not in view.atom_ids:
        raise ValueError(f"initial partition {initial} is not in the system")
    return view.check(formula, initial)


@dataclass(frozen=True)
class SuiteRow:
    formula: str
    verdict: bool | None
    witness: tuple | None
    loop_index: int | None
    error: str | None
    uses_stutter: bool = False


class CheckReport:
    """Per-formula verdicts with text-table and JSON renderings."""

    def __init__(self, rows, initial: int):
        self.rows = tuple(rows)
        self.initial = initial

    @property
    def all_evaluated(self) -> bool:
        return all(row.error is None for row in self.rows)

    @property
    def all_true(self) -> bool:
        return all(row.error is None and row.verdict for row in self.rows)

    def to_json_obj(self):
        out = []
        for row in self.rows:
            out.append(
                {
                    "formula": row.formula,
                    "verdict": "error" if row.error is not None else bool(row.verdict),
                    "witness": list(row.witness) if row.witness else [],
                    "loop_index": row.loop_index,
                    "uses_stutter": row.uses_stutter,
                }
            )
        return out

    def to_text(self) -> str:
        header = ("formula", "verdict", "witness")
        body = []
        for row in self.rows:
            if row.error is not None:
                body.append((row.formula, "error", row.error))
            else:
                path = _render_path(row.witness, row.loop_index)
                if row.uses_stutter:
                    path += " (stutters)"
                body.append((row.formula, "true" if row.verdict else "false", path))
        widths = [max(len(r[c]) for r in [header, *body]) for c in range(3)]
        lines = []
        for r in [header, *body]:
            lines.append("  ".join(r[c].ljust(widths[c]) for c in range(3)).rstrip())
        return "\n".join(lines)


def _render_path(witness, loop_index) -> str:
    if not witness:
        return "-"
    states = [str(s) for s in witness]
    if loop_index is None:
        return ",".join(states)
    prefix = states[:loop_index]
    cycle = states[loop_index:]
    rendered = "(" + ",".join(cycle) + ")"
    return ",".join(prefix + [rendered]) if prefix else rendered


def check_suite(ts, formulas, initial: int, out_sink: bool = False) -> CheckReport:
    """Check formulas one by one; a bad formula only fails its own row."""
    view = KripkeView.from_transition_system(ts, out_sink=out_sink)
    if initial not in view.atom_ids:
        raise ValueError(f"initial partition {initial} is not in the system")
    rows = []
    for formula in formulas:
        text = formula if isinstance(formula, str) else format_formula(formula)
        try:
            ast = parse_ctl(formula) if isinstance(formula, str) else formula
            result = view.check(ast, initial)
        except (CtlSyntaxError, UnknownAtomError) as exc:
            rows.append(SuiteRow(text, None, None, None, str(exc)))
            continue
        rows.append(
            SuiteRow(
                text,
                result.verdict,
                result.witness,
                result.loop_index,
                None,
                uses_stutter=result.witness_uses_stutter,
            )
        )
    return CheckReport(rows, initial)


def load_formulas(path) -> list[str]:
    """One formula per line; ``#`` starts a comment; blank lines skipped."""
    formulas = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            formulas.append(stripped)
    return formulas
