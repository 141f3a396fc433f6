"""AST, grammar, parser, and printer for annotated movement programs.

A program is a UTF-8 ``.anl`` document, one statement per line:

    # comment (the markers '# rules', '# SH', '# MH' set the tag
    #          attached to the rules that follow them)
    domain agent: a007, a008
    domain loc: l1, l2
    pred at(agent, loc)
    pred abnormal(agent)
    abnormal(A):[0.9,1] <- dt=0: education(A):[1,1] AND utility(A):[1,1] AND AFTER(utility(A),education(A)):[1,1]
    at(a007,l1):[1,1]@5
    conn(l1,l2):[1,1]@*

Statement grammar (whitespace-insensitive within a line):

    domain   := "domain" NAME ":" NAME ("," NAME)*
    pred     := "pred" NAME "(" [NAME ("," NAME)*] ")"
    rule     := annlit "<-" "dt=" INT ":" formula ("AND" formula)*
    formula  := annlit | ("AFTER"|"BEFORE") "(" literal "," literal ")" ":" annotation
    taf      := annlit "@" (INT | "*")
    annlit   := literal ":" annotation
    literal  := ["~"] NAME "(" [term ("," term)*] ")"
    annotation := "[" DECIMAL "," DECIMAL "]"

Identifiers starting with an uppercase letter are variables; lowercase
are constants and predicate names.  ``AND``, ``AFTER``, ``BEFORE``,
``domain``, ``pred`` are reserved.  A TAF time of ``*`` marks a
time-invariant fact (asserted at every timepoint of whatever horizon it
meets).  Declarations must precede use.  Diagnostics carry 1-based
line/column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import ParseError, ProgramError
from .lattice import Annotation, Literal, is_variable

TAG_NONE = ""
TAG_SH = "SH"
TAG_MH = "MH"
_TAGS = (TAG_NONE, TAG_SH, TAG_MH)


@dataclass(frozen=True)
class DomainDecl:
    name: str
    constants: tuple = ()


@dataclass(frozen=True)
class PredDecl:
    name: str
    arg_domains: tuple = ()

    @property
    def arity(self):
        return len(self.arg_domains)


@dataclass(frozen=True)
class AnnotatedLiteral:
    literal: Literal
    annotation: Annotation

    def __str__(self):
        return f"{self.literal}:{self.annotation}"


@dataclass(frozen=True)
class TemporalPair:
    """AFTER(first, second) / BEFORE(first, second) with one annotation.

    AFTER: first occurs after second; BEFORE: first occurs before second.
    """

    op: str  # "AFTER" | "BEFORE"
    first: Literal
    second: Literal
    annotation: Annotation

    def __post_init__(self):
        if self.op not in ("AFTER", "BEFORE"):
            raise ValueError(f"unknown temporal operator {self.op!r}")

    def __str__(self):
        return f"{self.op}({self.first},{self.second}):{self.annotation}"


@dataclass(frozen=True)
class TAF:
    """Temporally annotated fact. time=None means every timepoint (@*)."""

    literal: Literal
    annotation: Annotation
    time: object = None

    def __post_init__(self):
        if self.time is not None and (not isinstance(self.time, int) or self.time < 1):
            raise ValueError(f"TAF time must be >= 1 or None, got {self.time!r}")

    def __str__(self):
        t = "*" if self.time is None else str(self.time)
        return f"{self.literal}:{self.annotation}@{t}"


@dataclass(frozen=True)
class GapRule:
    """head <- dt=delta_t: body.  Head is a positive annotated atom."""

    head: AnnotatedLiteral
    body: tuple
    delta_t: int = 0
    tag: str = TAG_NONE

    def __post_init__(self):
        if self.head.literal.negated:
            raise ValueError("rule heads must be positive atoms")
        if self.delta_t < 0:
            raise ValueError("rule delay must be >= 0")
        if not self.body:
            raise ValueError("rule body must contain at least one formula")
        if self.tag not in _TAGS:
            raise ValueError(f"unknown rule tag {self.tag!r}")

    @property
    def is_ground(self):
        return all(lit.is_ground for lit in self.literals())

    def literals(self):
        yield self.head.literal
        for f in self.body:
            if isinstance(f, AnnotatedLiteral):
                yield f.literal
            else:
                yield f.first
                yield f.second

    def __str__(self):
        body = " AND ".join(str(f) for f in self.body)
        return f"{self.head} <- dt={self.delta_t}: {body}"


@dataclass
class Program:
    domains: list = field(default_factory=list)
    preds: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    tafs: list = field(default_factory=list)

    def _map(self, attr, items):
        # Lazy name->decl maps, rebuilt when the backing list grows.
        cache = self.__dict__.get(attr)
        if cache is None or len(cache) != len(items):
            cache = {x.name: x for x in items}
            self.__dict__[attr] = cache
        return cache

    def domain(self, name):
        try:
            return self._map("_domain_map", self.domains)[name]
        except KeyError:
            raise ProgramError(f"unknown domain {name!r}") from None

    def pred(self, name):
        try:
            return self._map("_pred_map", self.preds)[name]
        except KeyError:
            raise ProgramError(f"predicate {name!r} not declared") from None

    def _constants_set(self, domain_name):
        cache = self.__dict__.setdefault("_constset_map", {})
        d = self.domain(domain_name)
        entry = cache.get(domain_name)
        if entry is None or len(entry) != len(d.constants):
            entry = frozenset(d.constants)
            cache[domain_name] = entry
        return entry

    def rules_tagged(self, *tags):
        return [r for r in self.rules if r.tag in tags]

    def sh_subset(self):
        """Program restricted to single-hop anomaly rules (plus untagged
        infrastructure rules and all TAFs)."""
        return Program(
            list(self.domains),
            list(self.preds),
            self.rules_tagged(TAG_NONE, TAG_SH),
            list(self.tafs),
        )

    def validate(self):
        seen_constants = {}
        seen_domains = set()
        for d in self.domains:
            if d.name in seen_domains:
                raise ProgramError(f"domain {d.name!r} declared twice")
            seen_domains.add(d.name)
            for c in d.constants:
                if c in seen_constants:
                    raise ProgramError(
                        f"constant {c!r} in both {seen_constants[c]!r} and {d.name!r}"
                    )
                seen_constants[c] = d.name
        seen_preds = set()
        for p in self.preds:
            if p.name in seen_preds:
                raise ProgramError(f"predicate {p.name!r} declared twice")
            seen_preds.add(p.name)
            for dom in p.arg_domains:
                if dom not in seen_domains:
                    raise ProgramError(
                        f"predicate {p.name!r} uses undeclared domain {dom!r}"
                    )
        for rule in self.rules:
            self._validate_rule(rule)
        for taf in self.tafs:
            self._validate_literal(taf.literal)
            if not taf.literal.is_ground:
                raise ProgramError(f"TAF literal must be ground: {taf.literal}")
        return self

    def _validate_literal(self, lit, var_domains=None):
        decl = self.pred(lit.predicate)
        if len(lit.args) != decl.arity:
            raise ProgramError(
                f"{lit.predicate!r} expects {decl.arity} args, got {len(lit.args)} in {lit}"
            )
        for arg, dom in zip(lit.args, decl.arg_domains):
            if is_variable(arg):
                if var_domains is None:
                    raise ProgramError(f"variable {arg!r} not allowed in {lit}")
                bound = var_domains.setdefault(arg, dom)
                if bound != dom:
                    raise ProgramError(
                        f"variable {arg!r} typed as both {bound!r} and {dom!r}"
                    )
            else:
                if arg not in self._constants_set(dom):
                    raise ProgramError(
                        f"constant {arg!r} not in domain {dom!r} (in {lit})"
                    )

    def _validate_rule(self, rule):
        var_domains = {}
        for lit in rule.literals():
            self._validate_literal(lit, var_domains)

    def variable_domains(self, rule):
        """Map each rule variable to its domain via predicate signatures."""
        var_domains = {}
        for lit in rule.literals():
            decl = self.pred(lit.predicate)
            for arg, dom in zip(lit.args, decl.arg_domains):
                if is_variable(arg):
                    var_domains.setdefault(arg, dom)
        return var_domains


# ---------------------------------------------------------------------------
# Grounding

def _substitute_literal(lit, binding):
    args = tuple(binding.get(a, a) for a in lit.args)
    return Literal(lit.predicate, args, lit.negated)


def _substitute_formula(f, binding):
    if isinstance(f, AnnotatedLiteral):
        return AnnotatedLiteral(_substitute_literal(f.literal, binding), f.annotation)
    return TemporalPair(
        f.op,
        _substitute_literal(f.first, binding),
        _substitute_literal(f.second, binding),
        f.annotation,
    )


def ground_rule(rule, program):
    """All ground instances of a rule over the program's domains.

    One instance per assignment of constants to the rule's distinct
    variables (in order of first occurrence, constants in declaration
    order), so output order is deterministic.
    """
    var_domains = program.variable_domains(rule)
    variables = []
    for lit in rule.literals():
        for a in lit.args:
            if is_variable(a) and a not in variables:
                variables.append(a)
    if not variables:
        return [rule]
    pools = []
    for v in variables:
        constants = program.domain(var_domains[v]).constants
        if not constants:
            raise ProgramError(
                f"variable {v!r} ranges over empty domain {var_domains[v]!r}"
            )
        pools.append(constants)
    instances = []
    bindings = [{}]
    for v, pool in zip(variables, pools):
        bindings = [dict(b, **{v: c}) for b in bindings for c in pool]
    for b in bindings:
        head = AnnotatedLiteral(
            _substitute_literal(rule.head.literal, b), rule.head.annotation
        )
        body = tuple(_substitute_formula(f, b) for f in rule.body)
        instances.append(GapRule(head, body, rule.delta_t, rule.tag))
    return instances


def ground_program(program):
    """Eagerly ground every rule; TAFs are ground already."""
    rules = []
    for r in program.rules:
        rules.extend(ground_rule(r, program))
    return rules


# ---------------------------------------------------------------------------
# Printer

def format_program(program):
    """Canonical text; parse_program(format_program(p)) == p."""
    lines = ["# domains"]
    for d in program.domains:
        lines.append(f"domain {d.name}: {', '.join(d.constants)}")
    if program.preds:
        lines.append("# predicates")
        for p in program.preds:
            lines.append(f"pred {p.name}({', '.join(p.arg_domains)})")
    if program.rules:
        current = None
        for r in program.rules:
            if r.tag != current:
                lines.append({TAG_NONE: "# rules", TAG_SH: "# SH", TAG_MH: "# MH"}[r.tag])
                current = r.tag
            lines.append(str(r))
    if program.tafs:
        lines.append("# tafs")
        for t in program.tafs:
            lines.append(str(t))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow><-)
  | (?P<num>\d+(\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],:@~*=])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"AND", "AFTER", "BEFORE", "domain", "pred", "dt"}


class _Tokens:
    def __init__(self, text, line_no):
        self.line_no = line_no
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line_no, pos + 1)
            if m.lastgroup != "ws":
                self.tokens.append((m.group(), pos + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self, expect=None):
        if self.i >= len(self.tokens):
            raise ParseError(
                f"unexpected end of line (expected {expect!r})" if expect
                else "unexpected end of line",
                self.line_no,
            )
        tok, col = self.tokens[self.i]
        if expect is not None and tok != expect:
            raise ParseError(f"expected {expect!r}, got {tok!r}", self.line_no, col)
        self.i += 1
        return tok

    def col(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else None

    def done(self):
        return self.i >= len(self.tokens)

    def error(self, message):
        raise ParseError(message, self.line_no, self.col())


def _parse_name(ts, what="identifier"):
    tok = ts.next(None)
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) or tok in _KEYWORDS:
        raise ParseError(f"expected {what}, got {tok!r}", ts.line_no)
    return tok


def _parse_annotation(ts):
    ts.next("[")
    lo = ts.next()
    ts.next(",")
    hi = ts.next()
    ts.next("]")
    try:
        return Annotation.parse(f"[{lo},{hi}]")
    except ValueError as e:
        raise ParseError(str(e), ts.line_no) from None


def _parse_literal(ts):
    negated = False
    if ts.peek() == "~":
        ts.next("~")
        negated = True
    name = _parse_name(ts, "predicate")
    ts.next("(")
    args = []
    if ts.peek() != ")":
        args.append(_parse_name(ts, "term"))
        while ts.peek() == ",":
            ts.next(",")
            args.append(_parse_name(ts, "term"))
    ts.next(")")
    return Literal(name, tuple(args), negated)


def _parse_formula(ts):
    if ts.peek() in ("AFTER", "BEFORE"):
        op = ts.next()
        ts.next("(")
        first = _parse_literal(ts)
        ts.next(",")
        second = _parse_literal(ts)
        ts.next(")")
        ts.next(":")
        return TemporalPair(op, first, second, _parse_annotation(ts))
    lit = _parse_literal(ts)
    ts.next(":")
    return AnnotatedLiteral(lit, _parse_annotation(ts))


def _parse_statement(ts, program, tag):
    first = ts.peek()
    if first == "domain":
        ts.next("domain")
        name = _parse_name(ts, "domain name")
        ts.next(":")
        constants = [_parse_name(ts, "constant")]
        while ts.peek() == ",":
            ts.next(",")
            constants.append(_parse_name(ts, "constant"))
        program.domains.append(DomainDecl(name, tuple(constants)))
        return
    if first == "pred":
        ts.next("pred")
        name = _parse_name(ts, "predicate name")
        ts.next("(")
        doms = []
        if ts.peek() != ")":
            doms.append(_parse_name(ts, "domain name"))
            while ts.peek() == ",":
                ts.next(",")
                doms.append(_parse_name(ts, "domain name"))
        ts.next(")")
        program.preds.append(PredDecl(name, tuple(doms)))
        return
    # Rule or TAF: both start with an annotated literal.
    head = _parse_formula(ts)
    if isinstance(head, TemporalPair):
        ts.error("temporal formulas may only appear in rule bodies")
    if ts.peek() == "@":
        ts.next("@")
        tok = ts.next()
        if tok == "*":
            time = None
        else:
            if not tok.isdigit():
                raise ParseError(f"TAF time must be an integer or '*', got {tok!r}", ts.line_no)
            time = int(tok)
            if time < 1:
                raise ParseError("TAF time must be >= 1", ts.line_no)
        program.tafs.append(TAF(head.literal, head.annotation, time))
        return
    ts.next("<-")
    ts.next("dt")
    ts.next("=")
    delay_tok = ts.next()
    if not delay_tok.isdigit():
        raise ParseError(f"rule delay must be a nonnegative integer, got {delay_tok!r}", ts.line_no)
    ts.next(":")
    body = [_parse_formula(ts)]
    while ts.peek() == "AND":
        ts.next("AND")
        body.append(_parse_formula(ts))
    if head.literal.negated:
        raise ParseError("rule heads must be positive atoms", ts.line_no)
    program.rules.append(GapRule(head, tuple(body), int(delay_tok), tag))


_TAG_COMMENTS = {"# rules": TAG_NONE, "# SH": TAG_SH, "# MH": TAG_MH}


def parse_program(text):
    """Parse an .anl document into a validated Program."""
    program = Program()
    tag = TAG_NONE
    constant_owner = {}
    seen_domains = set()
    seen_preds = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tag = _TAG_COMMENTS.get(line, tag)
            continue
        ts = _Tokens(line, line_no)
        counts = (len(program.domains), len(program.preds),
                  len(program.rules), len(program.tafs))
        try:
            _parse_statement(ts, program, tag)
        except ValueError as e:
            raise ParseError(str(e), line_no) from None
        if not ts.done():
            ts.error(f"trailing input {ts.peek()!r}")
        # Validate just the new statement so diagnostics carry its line.
        try:
            if len(program.domains) > counts[0]:
                d = program.domains[-1]
                if d.name in seen_domains:
                    raise ProgramError(f"domain {d.name!r} declared twice")
                seen_domains.add(d.name)
                for c in d.constants:
                    if c in constant_owner:
                        raise ProgramError(
                            f"constant {c!r} in both {constant_owner[c]!r} and {d.name!r}"
                        )
                    constant_owner[c] = d.name
            elif len(program.preds) > counts[1]:
                p = program.preds[-1]
                if p.name in seen_preds:
                    raise ProgramError(f"predicate {p.name!r} declared twice")
                seen_preds.add(p.name)
                for dom in p.arg_domains:
                    if dom not in seen_domains:
                        raise ProgramError(
                            f"predicate {p.name!r} uses undeclared domain {dom!r}"
                        )
            elif len(program.rules) > counts[2]:
                program._validate_rule(program.rules[-1])
            elif len(program.tafs) > counts[3]:
                taf = program.tafs[-1]
                program._validate_literal(taf.literal)
        except ProgramError as e:
            raise ParseError(str(e), line_no) from None
    return program


def retag(rule, tag):
    return replace(rule, tag=tag)
