"""Tiny sentence language for conditional form behavior.

A rule is either a bare condition ("count is set and seqs > 10") or a
conditional value ("if model == 2 then 1 else 0").  Rules are attached
to descriptor fields (defaults, visibility, enablement, fixed values,
output names) and evaluated against the current input values.

Grammar::

    rule    := 'if' cond 'then' value ('else' value)? | cond
    cond    := or
    or      := and ('or' and)*
    and     := unary ('and' unary)*
    unary   := 'not' unary | atom
    atom    := operand cmpop operand
             | operand 'is' 'set'
             | operand 'is' 'unset'
             | 'true' | 'false'
             | '(' cond ')'
    operand := identifier | string | number | 'true' | 'false'
    cmpop   := '==' | '!=' | '<' | '<=' | '>' | '>='

Identifiers name inputs.  Comparisons against an unset input are false;
"is set" asks whether the input has a value at all.  Comparison is
numeric whenever both sides parse as numbers, otherwise exact string
equality; ordered comparison of a non-number is a type error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, FrozenSet, Optional, Tuple, Union

from .values import UNSET, FileToken, PipedInput


class RuleError(Exception):
    """Base for rule problems.  ``pos`` is a character offset, if known."""

    code = "RULE"

    def __init__(self, message: str, pos: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.pos = pos

    def __str__(self):
        if self.pos is None:
            return self.message
        return "%s (at offset %d)" % (self.message, self.pos)

    def caret(self, text: str) -> str:
        """Two-line rendering of the offending sentence with a caret."""
        if self.pos is None:
            return text
        return text + "\n" + " " * self.pos + "^"


class RuleSyntaxError(RuleError):
    code = "SYNTAX"


class RuleTypeError(RuleError):
    code = "TYPE"


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Ref:
    """Operand naming another input."""

    name: str


@dataclass(frozen=True)
class Lit:
    """Literal operand: string, number, or boolean."""

    value: Union[str, int, float, bool]


Operand = Union[Ref, Lit]


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class IsSet:
    operand: Operand


@dataclass(frozen=True)
class Cmp:
    lhs: Operand
    op: str
    rhs: Operand


@dataclass(frozen=True)
class Not:
    child: "Condition"


@dataclass(frozen=True)
class And:
    children: Tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    children: Tuple["Condition", ...]


Condition = Union[Const, IsSet, Cmp, Not, And, Or]


@dataclass(frozen=True)
class Rule:
    """Parsed rule.  Bare rules leave then/else as None and yield a bool."""

    condition: Condition
    then_value: Optional[Operand] = None
    else_value: Optional[Operand] = None
    bare: bool = True


ORDERED_OPS = ("<", "<=", ">", ">=")
CMP_OPS = ("==", "!=") + ORDERED_OPS

KEYWORDS = frozenset(
    ["if", "then", "else", "and", "or", "not", "is", "set", "unset", "true", "false"]
)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")

_ESCAPES = {"\\": "\\", '"': '"', "'": "'", "n": "\n", "t": "\t", "r": "\r"}


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT NUMBER STRING OP LPAREN RPAREN KW EOF
    text: str
    value: object
    pos: int


def _lex(text: str):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in "\"'":
            quote = ch
            start = i
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise RuleSyntaxError("unterminated string", start)
                c = text[i]
                if c == quote:
                    i += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise RuleSyntaxError("unterminated string", start)
                    esc = text[i + 1]
                    if esc == "u":
                        if i + 6 > n:
                            raise RuleSyntaxError("bad unicode escape", i)
                        try:
                            buf.append(chr(int(text[i + 2 : i + 6], 16)))
                        except ValueError:
                            raise RuleSyntaxError("bad unicode escape", i) from None
                        i += 6
                        continue
                    if esc not in _ESCAPES:
                        raise RuleSyntaxError("bad escape '\\%s'" % esc, i)
                    buf.append(_ESCAPES[esc])
                    i += 2
                    continue
                buf.append(c)
                i += 1
            tokens.append(_Token("STRING", text[start:i], "".join(buf), start))
            continue
        m = NUMBER_RE.match(text, i)
        if m and (ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit())):
            raw = m.group(0)
            num = float(raw) if any(c in raw for c in ".eE") else int(raw)
            tokens.append(_Token("NUMBER", raw, num, i))
            i = m.end()
            continue
        m = IDENT_RE.match(text, i)
        if m:
            word = m.group(0)
            kind = "KW" if word in KEYWORDS else "IDENT"
            tokens.append(_Token(kind, word, word, i))
            i = m.end()
            continue
        two = text[i : i + 2]
        if two in ("==", "!=", "<=", ">="):
            tokens.append(_Token("OP", two, two, i))
            i += 2
            continue
        if ch in "<>":
            tokens.append(_Token("OP", ch, ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("LPAREN", ch, ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("RPAREN", ch, ch, i))
            i += 1
            continue
        raise RuleSyntaxError("unexpected character %r" % ch, i)
    tokens.append(_Token("EOF", "", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.text == word

    def expect_kw(self, word: str) -> _Token:
        tok = self.peek()
        if not self.at_kw(word):
            raise RuleSyntaxError("expected '%s'" % word, tok.pos)
        return self.next()

    def parse_rule(self) -> Rule:
        if self.at_kw("if"):
            self.next()
            cond = self.parse_cond()
            self.expect_kw("then")
            then_value = self.parse_value()
            else_value = None
            if self.at_kw("else"):
                self.next()
                else_value = self.parse_value()
            rule = Rule(cond, then_value, else_value, bare=False)
        else:
            rule = Rule(self.parse_cond())
        tok = self.peek()
        if tok.kind != "EOF":
            raise RuleSyntaxError("unexpected trailing input", tok.pos)
        return rule

    def parse_value(self) -> Operand:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.next()
            return Ref(tok.text)
        if tok.kind in ("STRING", "NUMBER"):
            self.next()
            return Lit(tok.value)
        if tok.kind == "KW" and tok.text in ("true", "false"):
            self.next()
            return Lit(tok.text == "true")
        raise RuleSyntaxError("expected a value", tok.pos)

    def parse_cond(self) -> Condition:
        branches = [self.parse_and()]
        while self.at_kw("or"):
            self.next()
            branches.append(self.parse_and())
        if len(branches) == 1:
            return branches[0]
        return Or(tuple(branches))

    def parse_and(self) -> Condition:
        branches = [self.parse_unary()]
        while self.at_kw("and"):
            self.next()
            branches.append(self.parse_unary())
        if len(branches) == 1:
            return branches[0]
        return And(tuple(branches))

    def parse_unary(self) -> Condition:
        if self.at_kw("not"):
            self.next()
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Condition:
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.next()
            inner = self.parse_cond()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise RuleSyntaxError("expected ')'", closing.pos)
            self.next()
            return inner
        if tok.kind == "KW" and tok.text in ("true", "false"):
            nxt = self.tokens[self.i + 1]
            # "true == x" style: the literal is an operand, not a constant.
            if nxt.kind == "OP" or (nxt.kind == "KW" and nxt.text == "is"):
                return self.parse_test()
            self.next()
            return Const(tok.text == "true")
        if tok.kind in ("IDENT", "STRING", "NUMBER"):
            return self.parse_test()
        raise RuleSyntaxError("expected a condition", tok.pos)

    def parse_operand(self) -> Tuple[Operand, _Token]:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.next()
            return Ref(tok.text), tok
        if tok.kind in ("STRING", "NUMBER"):
            self.next()
            return Lit(tok.value), tok
        if tok.kind == "KW" and tok.text in ("true", "false"):
            self.next()
            return Lit(tok.text == "true"), tok
        raise RuleSyntaxError("expected an operand", tok.pos)

    def parse_test(self) -> Condition:
        left, left_tok = self.parse_operand()
        tok = self.peek()
        if tok.kind == "OP":
            op = self.next().text
            right, right_tok = self.parse_operand()
            if op in ORDERED_OPS:
                for operand, otok in ((left, left_tok), (right, right_tok)):
                    if isinstance(operand, Lit) and _as_number(operand.value) is None:
                        raise RuleTypeError(
                            "ordered comparison needs numbers", otok.pos
                        )
            return Cmp(left, op, right)
        if self.at_kw("is"):
            self.next()
            tok = self.peek()
            if self.at_kw("set"):
                self.next()
                return IsSet(left)
            if self.at_kw("unset"):
                self.next()
                return Not(IsSet(left))
            raise RuleSyntaxError("expected 'set' or 'unset'", tok.pos)
        raise RuleSyntaxError("expected a comparison or 'is set'", tok.pos)


def parse_rule(text: str) -> Rule:
    """Parse one rule sentence.  Raises RuleSyntaxError / RuleTypeError."""
    return _Parser(text).parse_rule()


# --- evaluation --------------------------------------------------------

Lookup = Callable[[str], object]


def _as_number(value):
    """Numeric view of a value, or None.  Booleans are not numbers here."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _operand_value(operand: Operand, lookup: Lookup):
    if isinstance(operand, Lit):
        return operand.value
    value = lookup(operand.name)
    if isinstance(value, FileToken):
        return value.name
    if isinstance(value, PipedInput):
        return "-"
    return value


def _equal(a, b) -> bool:
    na, nb = _as_number(a), _as_number(b)
    if na is not None and nb is not None:
        return na == nb
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _eval_cond(node: Condition, lookup: Lookup) -> bool:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, IsSet):
        return _operand_value(node.operand, lookup) is not UNSET
    if isinstance(node, Not):
        return not _eval_cond(node.child, lookup)
    if isinstance(node, And):
        return all(_eval_cond(child, lookup) for child in node.children)
    if isinstance(node, Or):
        return any(_eval_cond(child, lookup) for child in node.children)
    if isinstance(node, Cmp):
        a = _operand_value(node.lhs, lookup)
        b = _operand_value(node.rhs, lookup)
        if a is UNSET or b is UNSET:
            return False
        if node.op == "==":
            return _equal(a, b)
        if node.op == "!=":
            return not _equal(a, b)
        na, nb = _as_number(a), _as_number(b)
        if na is None or nb is None:
            raise RuleTypeError("ordered comparison needs numbers")
        if node.op == "<":
            return na < nb
        if node.op == "<=":
            return na <= nb
        if node.op == ">":
            return na > nb
        return na >= nb
    raise TypeError("not a condition node: %r" % (node,))


def evaluate(rule: Rule, lookup: Lookup):
    """Evaluate a rule.

    Bare rules return a bool.  Conditional-value rules return the chosen
    branch value (resolving input references through ``lookup``), or
    UNSET when the condition is false and there is no else branch.
    """
    truth = _eval_cond(rule.condition, lookup)
    if rule.bare:
        return truth
    if truth:
        return _operand_value(rule.then_value, lookup)
    if rule.else_value is None:
        return UNSET
    return _operand_value(rule.else_value, lookup)


def references(rule: Rule) -> FrozenSet[str]:
    """All input ids the rule reads."""
    names = set()

    def walk_operand(operand):
        if isinstance(operand, Ref):
            names.add(operand.name)

    def walk(node):
        if isinstance(node, (And, Or)):
            for child in node.children:
                walk(child)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, Cmp):
            walk_operand(node.lhs)
            walk_operand(node.rhs)
        elif isinstance(node, IsSet):
            walk_operand(node.operand)

    walk(rule.condition)
    if rule.then_value is not None:
        walk_operand(rule.then_value)
    if rule.else_value is not None:
        walk_operand(rule.else_value)
    return frozenset(names)


# --- printing ----------------------------------------------------------


def _print_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _print_operand(operand: Operand) -> str:
    if isinstance(operand, Ref):
        return operand.name
    value = operand.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return _print_string(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _print_cond(node: Condition) -> str:
    if isinstance(node, Or):
        return " or ".join(_print_below_or(child) for child in node.children)
    return _print_below_or(node)


def _print_below_or(node: Condition) -> str:
    if isinstance(node, Or):
        return "(%s)" % _print_cond(node)
    if isinstance(node, And):
        return " and ".join(_print_below_and(child) for child in node.children)
    return _print_below_and(node)


def _print_below_and(node: Condition) -> str:
    if isinstance(node, (Or, And)):
        return "(%s)" % _print_cond(node)
    if isinstance(node, Not):
        if isinstance(node.child, IsSet):
            return "%s is unset" % _print_operand(node.child.operand)
        return "not %s" % _print_below_and(node.child)
    if isinstance(node, IsSet):
        return "%s is set" % _print_operand(node.operand)
    if isinstance(node, Cmp):
        return "%s %s %s" % (
            _print_operand(node.lhs),
            node.op,
            _print_operand(node.rhs),
        )
    if isinstance(node, Const):
        return "true" if node.value else "false"
    raise TypeError("not a condition node: %r" % (node,))


def print_rule(rule: Rule) -> str:
    """Deterministic text form; parse_rule(print_rule(r)) == r."""
    if rule.bare:
        return _print_cond(rule.condition)
    text = "if %s then %s" % (
        _print_cond(rule.condition),
        _print_operand(rule.then_value),
    )
    if rule.else_value is not None:
        text += " else %s" % _print_operand(rule.else_value)
    return text
