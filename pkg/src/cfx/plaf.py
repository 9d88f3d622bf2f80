"""The feasibility/plausibility constraint language.

Programs are lists of statements:

    GROUP a, b          # features a and b change jointly
    PLAF atom           # unconditional constraint on the counterfactual
    PLAF IF conj THEN atom

Atoms compare arithmetic expressions over literals, `x.F` (the original
instance) and `x_cf.F` (the counterfactual). A rule's consequent must be of
the form `x_cf.F op expr` (it defines feature F), or the literal keyword
`false` (the rule forbids its antecedent outright). `and` and `&&` are
interchangeable; `#` starts a line comment.

Grounding substitutes x's values and constant-folds. Single-group constraints
filter the group's sample space up front; rules spanning several groups are
repaired at candidate-construction time by `cascade_batch` in topological
group order, resampling the defined group restricted by the rule's consequent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from cfx.schema import (
    CATEGORICAL,
    Dataset,
    FeatureGroupSet,
    FeatureSchema,
    Instance,
)

_KEYWORDS = {"GROUP", "PLAF", "IF", "THEN", "and", "false"}

_TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "&&")
_ONE_CHAR_OPS = "=<>+-*/(),."

_CMP_OPS = ("=", "!=", "<=", "<", ">=", ">")


class PlafError(ValueError):
    """Parse/validation failure with source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line else ""
        super().__init__(message + where)


# --------------------------------------------------------------------------
# lexer

@dataclass(frozen=True)
class Token:
    kind: str  # IDENT KEYWORD NUMBER STRING OP EOF
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KEYWORD" if word in _KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            # optional exponent
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            word = text[i:j]
            try:
                float(word)
            except ValueError:
                raise PlafError(f"bad number literal {word!r}", line, start_col)
            tokens.append(Token("NUMBER", word, line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise PlafError("unterminated string literal", line, start_col)
            tokens.append(Token("STRING", text[i + 1:j], line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("OP", two, line, start_col))
            i += 2
            col += 2
            continue
        if c in _ONE_CHAR_OPS:
            tokens.append(Token("OP", c, line, start_col))
            i += 1
            col += 1
            continue
        raise PlafError(f"unexpected character {c!r}", line, start_col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Lit:
    value: Union[float, str]  # float for numbers, str for quoted strings


@dataclass(frozen=True)
class Ref:
    target: str  # "x" | "x_cf"
    feature: int
    name: str


@dataclass(frozen=True)
class Bin:
    op: str  # + - * /
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Lit, Ref, Bin]

FALSE = "false"  # sentinel consequent


@dataclass(frozen=True)
class Atom:
    lhs: Expr
    op: str  # normalized: = != <= < >= >
    rhs: Expr
    line: int = 0
    col: int = 0

    def __eq__(self, other):
        return (isinstance(other, Atom) and self.lhs == other.lhs
                and self.op == other.op and self.rhs == other.rhs)

    def __hash__(self):
        return hash((self.lhs, self.op, self.rhs))


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[Atom, ...]
    consequent: Union[Atom, str]  # Atom or FALSE
    defined_feature: Optional[int]  # None for FALSE consequents
    line: int = 0
    col: int = 0

    def __eq__(self, other):
        return (isinstance(other, Rule) and self.antecedent == other.antecedent
                and self.consequent == other.consequent)

    def __hash__(self):
        return hash((self.antecedent, self.consequent))


@dataclass
class PlafProgram:
    schema: FeatureSchema
    group_set: FeatureGroupSet
    rules: list[Rule]
    rule_order: list[int]  # rule indices, topological by defined group
    explicit_groups: list[tuple[int, ...]] = field(default_factory=list)

    def __eq__(self, other):
        return (isinstance(other, PlafProgram)
                and self.schema == other.schema
                and self.group_set.groups == other.group_set.groups
                and self.rules == other.rules)


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens: list[Token], schema: FeatureSchema):
        self.toks = tokens
        self.pos = 0
        self.schema = schema

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (value is not None and t.value != value):
            want = value if value is not None else kind
            got = t.value if t.value else "end of input"
            raise PlafError(f"expected {want!r}, got {got!r}", t.line, t.col)
        return self.next()

    def feature_index(self, tok: Token) -> int:
        if tok.value not in self.schema.names:
            raise PlafError(f"unknown feature {tok.value!r}", tok.line, tok.col)
        return self.schema.index(tok.value)

    # expr := term (("+"|"-") term)*
    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "OP" and self.peek().value in "+-":
            op = self.next().value
            rhs = self.parse_term()
            node = Bin(op, node, rhs)
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind == "OP" and self.peek().value in "*/":
            op = self.next().value
            rhs = self.parse_factor()
            node = Bin(op, node, rhs)
        return node

    def parse_factor(self) -> Expr:
        t = self.peek()
        if t.kind == "NUMBER":
            self.next()
            return Lit(float(t.value))
        if t.kind == "STRING":
            self.next()
            return Lit(t.value)
        if t.kind == "OP" and t.value == "(":
            self.next()
            node = self.parse_expr()
            self.expect("OP", ")")
            return node
        if t.kind == "IDENT" and t.value in ("x", "x_cf"):
            self.next()
            self.expect("OP", ".")
            name = self.peek()
            if name.kind not in ("IDENT", "KEYWORD"):
                raise PlafError("expected a feature name after '.'", name.line, name.col)
            self.next()
            return Ref(t.value, self.feature_index(name), name.value)
        got = t.value if t.value else "end of input"
        raise PlafError(
            f"expected a number, string, x.<feature>, x_cf.<feature> or '(', got {got!r}",
            t.line, t.col,
        )

    def parse_atom(self) -> Atom:
        t = self.peek()
        lhs = self.parse_expr()
        op_tok = self.peek()
        if op_tok.kind != "OP" or op_tok.value not in ("==", "=", "!=", "<=", "<", ">=", ">"):
            got = op_tok.value if op_tok.value else "end of input"
            raise PlafError(f"expected a comparison operator, got {got!r}",
                            op_tok.line, op_tok.col)
        self.next()
        op = "=" if op_tok.value == "==" else op_tok.value
        rhs = self.parse_expr()
        return Atom(lhs, op, rhs, t.line, t.col)

    def parse_conj(self) -> list[Atom]:
        atoms = [self.parse_atom()]
        while True:
            t = self.peek()
            if (t.kind == "KEYWORD" and t.value == "and") or (t.kind == "OP" and t.value == "&&"):
                self.next()
                atoms.append(self.parse_atom())
            else:
                return atoms

    def parse_group(self) -> list[Token]:
        names = [self.expect("IDENT")]
        while self.peek().kind == "OP" and self.peek().value == ",":
            self.next()
            names.append(self.expect("IDENT"))
        return names

    def parse_rule(self, kw: Token) -> Rule:
        antecedent: tuple[Atom, ...] = ()
        if self.peek().kind == "KEYWORD" and self.peek().value == "IF":
            self.next()
            antecedent = tuple(self.parse_conj())
            self.expect("KEYWORD", "THEN")
        t = self.peek()
        if t.kind == "KEYWORD" and t.value == "false":
            self.next()
            return Rule(antecedent, FALSE, None, kw.line, kw.col)
        atom = self.parse_atom()
        if not (isinstance(atom.lhs, Ref) and atom.lhs.target == "x_cf"):
            raise PlafError(
                "rule consequent must have the form x_cf.<feature> op expression",
                t.line, t.col,
            )
        return Rule(antecedent, atom, atom.lhs.feature, kw.line, kw.col)


def _refs(expr: Expr):
    if isinstance(expr, Ref):
        yield expr
    elif isinstance(expr, Bin):
        yield from _refs(expr.lhs)
        yield from _refs(expr.rhs)


def _atom_refs(atom: Atom):
    yield from _refs(atom.lhs)
    yield from _refs(atom.rhs)


def _rule_atoms(rule: Rule):
    yield from rule.antecedent
    if rule.consequent is not FALSE:
        yield rule.consequent


def _check_types(schema: FeatureSchema, atom: Atom) -> None:
    """Categorical features admit only =/!= against a string literal or a ref
    to the same feature; arithmetic is numeric-only."""

    def expr_kind(expr: Expr):
        # returns ("cat", feature_index|None) or ("num", None)
        if isinstance(expr, Lit):
            return ("cat", None) if isinstance(expr.value, str) else ("num", None)
        if isinstance(expr, Ref):
            if schema.kind(expr.feature) == CATEGORICAL:
                return ("cat", expr.feature)
            return ("num", None)
        lk = expr_kind(expr.lhs)
        rk = expr_kind(expr.rhs)
        if lk[0] == "cat" or rk[0] == "cat":
            raise PlafError("arithmetic over categorical values", atom.line, atom.col)
        return ("num", None)

    lk = expr_kind(atom.lhs)
    rk = expr_kind(atom.rhs)
    if lk[0] == "cat" or rk[0] == "cat":
        if atom.op not in ("=", "!="):
            raise PlafError(
                "categorical values admit only = and != comparisons", atom.line, atom.col
            )
        if lk[0] != rk[0]:
            # one side categorical ref, other a string literal is the ("cat", None) case;
            # a numeric side against a categorical side is a type error
            raise PlafError(
                "cannot compare categorical and numeric values", atom.line, atom.col
            )
        lf, rf = lk[1], rk[1]
        if lf is not None and rf is not None and lf != rf:
            raise PlafError(
                "categorical comparison must involve a single feature's values",
                atom.line, atom.col,
            )


def _toposort_groups(group_set: FeatureGroupSet, rules: Sequence[Rule]) -> list[int]:
    """Topological order of groups under rule dependency edges.

    Edge G(mentioned) -> G(defined) for every rule defining x_cf.F that also
    mentions an x_cf feature of a different group. Raises on cycles, naming
    the groups involved.
    """
    n = len(group_set)
    succ: list[set[int]] = [set() for _ in range(n)]
    indeg = [0] * n
    for rule in rules:
        if rule.defined_feature is None:
            continue
        gd = int(group_set.group_of[rule.defined_feature])
        mentioned = set()
        for atom in _rule_atoms(rule):
            for ref in _atom_refs(atom):
                if ref.target == "x_cf":
                    gm = int(group_set.group_of[ref.feature])
                    if gm != gd:
                        mentioned.add(gm)
        for gm in mentioned:
            if gd not in succ[gm]:
                succ[gm].add(gd)
                indeg[gd] += 1
    order = []
    ready = [g for g in range(n) if indeg[g] == 0]
    while ready:
        g = ready.pop(0)
        order.append(g)
        for h in sorted(succ[g]):
            indeg[h] -= 1
            if indeg[h] == 0:
                ready.append(h)
    if len(order) != n:
        cyclic = sorted(g for g in range(n) if indeg[g] > 0)
        names = ", ".join(group_set.label(g) for g in cyclic)
        raise PlafError(f"cyclic rules over groups: {names}")
    return order


def parse_plaf(text: str, schema: FeatureSchema,
               groups: Optional[FeatureGroupSet] = None) -> PlafProgram:
    """Parse and validate a program; GROUP statements merge into `groups`."""
    tokens = _tokenize(text)
    parser = _Parser(tokens, schema)
    explicit: list[tuple[int, ...]] = list(groups.groups) if groups is not None else []
    explicit = [g for g in explicit if len(g) > 1]  # singletons re-derive
    rules: list[Rule] = []
    while True:
        t = parser.peek()
        if t.kind == "EOF":
            break
        if t.kind == "KEYWORD" and t.value == "GROUP":
            parser.next()
            name_toks = parser.parse_group()
            if len(name_toks) < 2:
                raise PlafError("GROUP needs at least two features", t.line, t.col)
            explicit.append(tuple(parser.feature_index(nt) for nt in name_toks))
        elif t.kind == "KEYWORD" and t.value == "PLAF":
            parser.next()
            rules.append(parser.parse_rule(t))
        else:
            got = t.value if t.value else "end of input"
            raise PlafError(f"expected GROUP or PLAF, got {got!r}", t.line, t.col)

    try:
        group_set = FeatureGroupSet(schema, explicit)
    except Exception as e:
        raise PlafError(str(e)) from None
    for rule in rules:
        for atom in _rule_atoms(rule):
            _check_types(schema, atom)
    order = _toposort_groups(group_set, rules)
    pos = {g: i for i, g in enumerate(order)}
    rule_order = sorted(
        range(len(rules)),
        key=lambda i: (
            pos[int(group_set.group_of[rules[i].defined_feature])]
            if rules[i].defined_feature is not None else len(order),
            i,
        ),
    )
    return PlafProgram(schema, group_set, rules, rule_order, explicit)


def format_expr(e: Expr, schema: FeatureSchema) -> str:
    if isinstance(e, Lit):
        if isinstance(e.value, str):
            return f'"{e.value}"'
        v = e.value
        return str(int(v)) if float(v).is_integer() else repr(v)
    if isinstance(e, Ref):
        return f"{e.target}.{schema.names[e.feature]}"
    lhs = format_expr(e.lhs, schema)
    rhs = format_expr(e.rhs, schema)
    if isinstance(e.rhs, Bin):
        rhs = f"({rhs})"
    if isinstance(e.lhs, Bin) and e.op in "*/":
        lhs = f"({lhs})"
    return f"{lhs} {e.op} {rhs}"


def format_program(p: PlafProgram) -> str:
    """Canonical text form; parse(format_program(p)) == p structurally."""
    lines = []
    for g in p.explicit_groups:
        lines.append("GROUP " + ", ".join(p.schema.names[i] for i in g))
    for rule in p.rules:
        parts = ["PLAF"]
        if rule.antecedent:
            conj = " and ".join(
                f"{format_expr(a.lhs, p.schema)} {a.op} {format_expr(a.rhs, p.schema)}"
                for a in rule.antecedent
            )
            parts.append(f"IF {conj} THEN")
        if rule.consequent is FALSE:
            parts.append("false")
        else:
            a = rule.consequent
            parts.append(f"{format_expr(a.lhs, p.schema)} {a.op} {format_expr(a.rhs, p.schema)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# grounding

@dataclass(frozen=True)
class GroundedAtom:
    """Atom with every x.F substituted; evaluates over a column provider."""

    lhs: Expr
    op: str
    rhs: Expr
    features: tuple[int, ...]  # x_cf features mentioned

    def evaluate(self, provider: Callable[[int], np.ndarray]) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            a = _eval_expr(self.lhs, provider)
            b = _eval_expr(self.rhs, provider)
            return _compare(self.op, a, b)


def _compare(op: str, a, b):
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<=":
        return a <= b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    return a > b


def _eval_expr(e: Expr, provider: Callable[[int], np.ndarray]):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ref):
        return provider(e.feature)
    a = _eval_expr(e.lhs, provider)
    b = _eval_expr(e.rhs, provider)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    return a / b


@dataclass(frozen=True)
class CrossRule:
    antecedent: tuple[GroundedAtom, ...]
    consequent: Optional[GroundedAtom]  # None encodes `false`
    defined_feature: Optional[int]
    defined_group: Optional[int]
    rule_index: int

    def holds(self, provider: Callable[[int], np.ndarray], n_rows: int) -> np.ndarray:
        ok = np.ones(n_rows, dtype=bool)
        fired = np.ones(n_rows, dtype=bool)
        for atom in self.antecedent:
            fired &= np.broadcast_to(np.asarray(atom.evaluate(provider)), (n_rows,))
        if self.consequent is None:
            return ~fired
        cons = np.broadcast_to(np.asarray(self.consequent.evaluate(provider)), (n_rows,))
        ok = ~fired | cons
        return ok


@dataclass
class GroundedConstraints:
    """Per-group filters plus the ordered multi-group rules for the cascade."""

    program: PlafProgram
    x_codes: np.ndarray
    per_group: list[list[GroundedAtom]]          # unconditional single-group atoms
    per_group_implications: list[list[tuple[tuple[GroundedAtom, ...], GroundedAtom]]]
    cross_rules: list[CrossRule]                 # topological order, `false` last
    forced_groups: list[int]                     # groups whose filters reject x's tuple

    @property
    def has_cross_rules(self) -> bool:
        return bool(self.cross_rules)


def _ground_expr(e: Expr, x_codes: np.ndarray, encode) -> Expr:
    if isinstance(e, Lit):
        return e
    if isinstance(e, Ref):
        if e.target == "x":
            return Lit(float(x_codes[e.feature]))
        return e
    lhs = _ground_expr(e.lhs, x_codes, encode)
    rhs = _ground_expr(e.rhs, x_codes, encode)
    if isinstance(lhs, Lit) and isinstance(rhs, Lit):
        a, b = lhs.value, rhs.value
        if e.op == "+":
            return Lit(a + b)
        if e.op == "-":
            return Lit(a - b)
        if e.op == "*":
            return Lit(a * b)
        return Lit(a / b if b != 0 else float("inf"))
    return Bin(e.op, lhs, rhs)


def _ground_atom(atom: Atom, x_codes: np.ndarray, encode) -> GroundedAtom:
    lhs = _ground_expr(atom.lhs, x_codes, encode)
    rhs = _ground_expr(atom.rhs, x_codes, encode)

    # encode string literals against the compared feature's dictionary
    def lit_feature(a: Expr, b: Expr):
        if isinstance(a, Lit) and isinstance(a.value, str):
            feats = [r.feature for r in _refs(b)]
            return a, feats[0] if feats else None
        return None, None

    la, fa = lit_feature(lhs, rhs)
    if la is not None and fa is not None:
        lhs = Lit(encode(fa, la.value))
    lb, fb = lit_feature(rhs, lhs)
    if lb is not None and fb is not None:
        rhs = Lit(encode(fb, lb.value))

    feats = tuple(sorted({r.feature for r in _refs(lhs)} | {r.feature for r in _refs(rhs)}))
    return GroundedAtom(lhs, op=atom.op, rhs=rhs, features=feats)


def _const_value(a: GroundedAtom) -> Optional[bool]:
    if a.features:
        return None
    lhs = a.lhs.value if isinstance(a.lhs, Lit) else None
    rhs = a.rhs.value if isinstance(a.rhs, Lit) else None
    if lhs is None or rhs is None:
        return None
    return bool(_compare(a.op, lhs, rhs))


def ground(x, program: PlafProgram, dataset: Dataset) -> GroundedConstraints:
    """Substitute x's values, fold constants, split single- vs multi-group rules.

    `x` may be an Instance (raw values) or an encoded float64 vector.
    """
    if isinstance(x, Instance):
        x_codes = dataset.encode_instance(x)
    else:
        x_codes = np.asarray(x, dtype=np.float64)

    def encode(feature: int, value: str) -> float:
        try:
            return dataset.encode_value(feature, value)
        except Exception:
            return -1.0  # literal outside the active domain: never matches

    gs = program.group_set
    n_groups = len(gs)
    per_group: list[list[GroundedAtom]] = [[] for _ in range(n_groups)]
    implications: list[list[tuple[tuple[GroundedAtom, ...], GroundedAtom]]] = [
        [] for _ in range(n_groups)
    ]
    cross: list[CrossRule] = []
    false_rules: list[CrossRule] = []

    for ri in program.rule_order:
        rule = program.rules[ri]
        g_ante = tuple(_ground_atom(a, x_codes, encode) for a in rule.antecedent)
        # constant-fold the antecedent
        always_fires = True
        never_fires = False
        kept_ante = []
        for a in g_ante:
            cv = _const_value(a)
            if cv is True:
                continue
            if cv is False:
                never_fires = True
                break
            kept_ante.append(a)
            always_fires = False
        if never_fires:
            continue  # rule can never fire
        kept_ante = tuple(kept_ante)

        if rule.consequent is FALSE:
            if not kept_ante:
                # grounded to an unconditional `false`: no candidate can ever
                # satisfy the program; keep it as an always-violated rule
                false_rules.append(CrossRule((), None, None, None, ri))
                continue
            groups_spanned = {int(gs.group_of[f]) for a in kept_ante for f in a.features}
            false_rules.append(CrossRule(kept_ante, None, None, None, ri))
            continue

        g_cons = _ground_atom(rule.consequent, x_codes, encode)
        cv = _const_value(g_cons)
        if cv is True:
            continue  # consequent trivially holds
        groups_spanned = {int(gs.group_of[f]) for a in kept_ante for f in a.features}
        groups_spanned |= {int(gs.group_of[f]) for f in g_cons.features}
        gd = int(gs.group_of[rule.defined_feature])

        if len(groups_spanned) <= 1:
            if not kept_ante:
                per_group[gd].append(g_cons)
            else:
                implications[gd].append((kept_ante, g_cons))
        else:
            cross.append(CrossRule(kept_ante, g_cons, rule.defined_feature, gd, ri))

    cross.extend(false_rules)  # `false` rules are pure rejections, checked last

    # groups whose own (x's) tuple violates the group filter must change
    forced: list[int] = []
    for g in range(n_groups):
        if not per_group[g] and not implications[g]:
            continue
        provider = lambda f: x_codes[f]
        ok = True
        for atom in per_group[g]:
            if not bool(np.asarray(atom.evaluate(provider))):
                ok = False
                break
        if ok:
            for ante, cons in implications[g]:
                fired = all(bool(np.asarray(a.evaluate(provider))) for a in ante)
                if fired and not bool(np.asarray(cons.evaluate(provider))):
                    ok = False
                    break
        if not ok:
            forced.append(g)

    return GroundedConstraints(program, x_codes, per_group, implications, cross, forced)


# --------------------------------------------------------------------------
# feasible spaces

@dataclass
class GroupSpace:
    features: tuple[int, ...]
    tuples: np.ndarray   # (K, width) float64, possibly K == 0
    weights: np.ndarray  # (K,) float64 dataset frequencies
    cum_weights: np.ndarray

    @property
    def size(self) -> int:
        return self.tuples.shape[0]


@dataclass
class SampleSpace:
    per_group: list[GroupSpace]

    def dump(self) -> str:
        return "\n".join(
            f"group {i} {gs.features}: {gs.size} tuples"
            for i, gs in enumerate(self.per_group)
        )


def feasible_space(dataset: Dataset, groups: FeatureGroupSet,
                   cx: GroundedConstraints) -> SampleSpace:
    """Per group: the joint active domain filtered by that group's atoms."""
    spaces: list[GroupSpace] = []
    for g, feats in enumerate(groups.groups):
        tuples, counts = dataset.joint_domain(feats)
        pos = {f: c for c, f in enumerate(feats)}
        provider = lambda f: tuples[:, pos[f]]
        mask = np.ones(tuples.shape[0], dtype=bool)
        for atom in cx.per_group[g]:
            mask &= np.broadcast_to(np.asarray(atom.evaluate(provider)), mask.shape)
        for ante, cons in cx.per_group_implications[g]:
            fired = np.ones(tuples.shape[0], dtype=bool)
            for a in ante:
                fired &= np.broadcast_to(np.asarray(a.evaluate(provider)), fired.shape)
            cons_ok = np.broadcast_to(np.asarray(cons.evaluate(provider)), fired.shape)
            mask &= ~fired | cons_ok
        kept = tuples[mask]
        w = counts[mask]
        spaces.append(GroupSpace(tuple(feats), kept, w, np.cumsum(w)))
    return SampleSpace(spaces)


# --------------------------------------------------------------------------
# cascade

CASCADE_RETRY_BUDGET = 10


def _weighted_draw(gs: GroupSpace, mask: np.ndarray, rng: np.random.Generator):
    """One weighted draw among tuples where mask holds; None if empty."""
    w = np.where(mask, gs.weights, 0.0)
    total = w.sum()
    if total <= 0:
        return None
    u = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(w), u, side="right"))
    idx = min(idx, gs.size - 1)
    return idx


def cascade_batch(Z: np.ndarray, bits: np.ndarray, cx: GroundedConstraints,
                  ss: SampleSpace, rng: np.random.Generator) -> np.ndarray:
    """Repair cross-group rules on full candidate rows, in place.

    Z is (R, n) float64 (materialized candidates), bits (R,) int64 delta
    masks. Returns a keep mask; rows that cannot be repaired are dropped.
    Processes forced groups first, then rules in topological order; a
    violated rule resamples its defined group restricted by the rule's
    consequent, re-checking previously processed rules with a bounded retry
    budget.
    """
    R = Z.shape[0]
    keep = np.ones(R, dtype=bool)
    gs = cx.program.group_set

    for g in cx.forced_groups:
        unchanged = keep & ((bits >> g) & 1 == 0)
        if not unchanged.any():
            continue
        space = ss.per_group[g]
        rows = np.nonzero(unchanged)[0]
        if space.size == 0:
            keep[rows] = False
            continue
        for r in rows:
            idx = _weighted_draw(space, np.ones(space.size, dtype=bool), rng)
            Z[r, list(space.features)] = space.tuples[idx]
            bits[r] |= np.int64(1) << np.int64(g)

    if not cx.cross_rules:
        return keep

    processed: list[CrossRule] = []
    for rule in cx.cross_rules:
        provider = lambda f: Z[:, f]
        ok = rule.holds(provider, R)
        viol = np.nonzero(keep & ~ok)[0]
        processed.append(rule)
        if viol.size == 0:
            continue
        if rule.consequent is None:
            keep[viol] = False  # `false` rules reject outright
            continue
        g = rule.defined_group
        space = ss.per_group[g]
        feats = list(space.features)
        pos = {f: c for c, f in enumerate(feats)}
        for r in viol:
            if space.size == 0:
                keep[r] = False
                continue
            row = Z[r]

            def tuple_provider(f: int):
                if f in pos:
                    return space.tuples[:, pos[f]]
                return row[f]

            allowed = np.broadcast_to(
                np.asarray(rule.consequent.evaluate(tuple_provider)),
                (space.size,),
            )
            repaired = False
            for _ in range(CASCADE_RETRY_BUDGET):
                idx = _weighted_draw(space, allowed, rng)
                if idx is None:
                    break
                Z[r, feats] = space.tuples[idx]
                bits[r] |= np.int64(1) << np.int64(g)
                row_provider = lambda f: Z[r, f]
                if all(bool(p.holds(row_provider, 1)[0]) for p in processed):
                    repaired = True
                    break
            if not repaired:
                keep[r] = False
    return keep


def action_cascade(x_prime: np.ndarray, delta_bits: int, cx: GroundedConstraints,
                   ss: SampleSpace, rng: np.random.Generator):
    """Single-candidate cascade; returns (codes, bits) or None for Discard."""
    Z = np.asarray(x_prime, dtype=np.float64).reshape(1, -1).copy()
    bits = np.array([delta_bits], dtype=np.int64)
    keep = cascade_batch(Z, bits, cx, ss, rng)
    if not keep[0]:
        return None
    return Z[0], int(bits[0])


# --------------------------------------------------------------------------
# independent brute-force checker

def _py_eval(e: Expr, x_vals: dict[int, float], z_vals: dict[int, float], encode):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ref):
        return x_vals[e.feature] if e.target == "x" else z_vals[e.feature]
    a = _py_eval(e.lhs, x_vals, z_vals, encode)
    b = _py_eval(e.rhs, x_vals, z_vals, encode)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        return float("inf")
    return a / b


def _py_atom(atom: Atom, x_vals, z_vals, encode) -> bool:
    a = _py_eval(atom.lhs, x_vals, z_vals, encode)
    b = _py_eval(atom.rhs, x_vals, z_vals, encode)
    # encode string literals so categorical comparisons happen in code space
    if isinstance(a, str):
        feats = [r.feature for r in _refs(atom.rhs)]
        a = encode(feats[0], a) if feats else -1.0
    if isinstance(b, str):
        feats = [r.feature for r in _refs(atom.lhs)]
        b = encode(feats[0], b) if feats else -1.0
    if atom.op == "=":
        return a == b
    if atom.op == "!=":
        return a != b
    if atom.op == "<=":
        return a <= b
    if atom.op == "<":
        return a < b
    if atom.op == ">=":
        return a >= b
    return a > b


def check_rules(program: PlafProgram, dataset: Dataset, x_codes: np.ndarray,
                z_codes: np.ndarray) -> list[bool]:
    """Evaluate every rule of the program on (x, z) by direct interpretation.

    Deliberately does not reuse grounding or the vectorized evaluators: this
    is the oracle the engine's outputs are checked against.
    """
    def encode(feature: int, value: str) -> float:
        try:
            return dataset.encode_value(feature, value)
        except Exception:
            return -1.0

    x_vals = {i: float(v) for i, v in enumerate(x_codes)}
    z_vals = {i: float(v) for i, v in enumerate(z_codes)}
    results = []
    for rule in program.rules:
        fired = all(_py_atom(a, x_vals, z_vals, encode) for a in rule.antecedent)
        if not fired:
            results.append(True)
        elif rule.consequent is FALSE:
            results.append(False)
        else:
            results.append(_py_atom(rule.consequent, x_vals, z_vals, encode))
    return results


def satisfies_rules(program: PlafProgram, dataset: Dataset, x_codes: np.ndarray,
                    z_codes: np.ndarray) -> bool:
    return all(check_rules(program, dataset, x_codes, z_codes))
