"""Concrete text syntax for models: parser and pretty-printer.

The format (extension `.carma`, UTF-8, `#` line comments):

    A := act.P;                      # process constant
    component Name {
      store { a = 1, zone = 'z0' }
      behaviour A | B
    }
    system { Name{a = 2} * 3; Other; }
    env {
      global { total = 0 }
      rate get [sender.zone == 'z0'] = 2;
      prob ping* = 0.5;
      update get = { total := global.total + 1 } install Name{a = 0} * 2;
    }
    measure bikes = avg[kind == 'station'](bikes) @ [0 : 100 : 51];

Actions: `a*[pi]<e1, e2>{upd}` broadcast output, `a*[pi](x, y){upd}`
broadcast input, and the same without `*` for unicast.  `<>`/`()` carry the
unit payload.  Updates list assignments `a := e` or `a := U(e1, ..., ek)`
(uniform choice); explicitly weighted branches are separated by `;` with a
`w ::` prefix.  Operator precedence: prefix > guard > `|` > `+`.

`parse ∘ print` is the identity on every valid model.
"""

from __future__ import annotations

import re
from typing import List, Optional, Tuple

from .environment import (
    ActionPattern,
    EnvironmentDefinition,
    InstallTemplate,
    ProbRule,
    RateRule,
    UpdateRule,
)
from .errors import ModelError, ParseError
from .model import ComponentDef, Instance, Measure, MeasureGrid, Model, MEASURE_KINDS
from .terms import (
    ActionKind,
    ActionPrefix,
    And,
    BinOp,
    BOTTOM,
    Bottom,
    Call,
    Choice,
    Cmp,
    Const,
    CountExpr,
    EnvRef,
    Guarded,
    IDENTITY_UPDATE,
    KILL,
    Kill,
    NIL,
    Name,
    Nil,
    Not,
    Or,
    Parallel,
    Prefix,
    Process,
    Ref,
    SelfAttr,
    Store,
    Symbol,
    TOP,
    Top,
    UNIT,
    UnOp,
    UniformChoice,
    Unit,
    Update,
    make_update,
    format_value,
)

# ---------------------------------------------------------------------------
# Lexer

_KEYWORDS = {
    "nil", "kill", "component", "store", "behaviour", "system", "env",
    "global", "rate", "prob", "update", "install", "measure", "unit",
    "this", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<symbol>'[A-Za-z_][A-Za-z0-9_]*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|::|==|!=|<=|>=|&&|\|\||[-+*/%<>=!|.,;:(){}\[\]@])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind  # "number" | "symbol" | "ident" | keyword | operator | "eof"
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}({self.value!r})"


def _tokenize(source: str) -> List[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            line += text.count("\n")
            if "\n" in text:
                line_start = pos + text.rindex("\n") + 1
        elif kind == "comment":
            pass
        elif kind == "number":
            if "." in text or "e" in text or "E" in text:
                tokens.append(_Token("number", float(text), line, col))
            else:
                tokens.append(_Token("number", int(text), line, col))
        elif kind == "symbol":
            tokens.append(_Token("symbol", text[1:-1], line, col))
        elif kind == "ident":
            if text in _KEYWORDS:
                tokens.append(_Token(text, text, line, col))
            else:
                tokens.append(_Token("ident", text, line, col))
        else:
            tokens.append(_Token(text, text, line, col))
        pos = m.end()
    tokens.append(_Token("eof", None, line, n - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    # -- plumbing ----------------------------------------------------------
    def peek(self, ahead=0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, *kinds) -> bool:
        return self.peek().kind in kinds

    def accept(self, kind) -> Optional[_Token]:
        if self.peek().kind == kind:
            return self.next()
        return None

    def expect(self, *kinds) -> _Token:
        tok = self.peek()
        if tok.kind in kinds:
            return self.next()
        expected = " or ".join(f"'{k}'" for k in kinds)
        raise ParseError(
            f"expected {expected}, found {self._describe(tok)}", tok.line, tok.col
        )

    @staticmethod
    def _describe(tok: _Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        return f"'{tok.value}'"

    def fail(self, message):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- model -------------------------------------------------------------
    def parse_model(self) -> Model:
        model = Model()
        have_env = False
        raw_installs = []  # deferred resolution of install templates
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "component":
                cdef = self.parse_component()
                if cdef.name in model.components:
                    self.fail(f"duplicate component '{cdef.name}'")
                model.components[cdef.name] = cdef
            elif tok.kind == "system":
                if model.system:
                    self.fail("duplicate system block")
                model.system = self.parse_system()
            elif tok.kind == "env":
                if have_env:
                    self.fail("duplicate env block")
                model.environment, raw_installs = self.parse_env()
                have_env = True
            elif tok.kind == "measure":
                model.measures = model.measures + (self.parse_measure(),)
            elif tok.kind == "ident":
                name = self.next().value
                self.expect(":=")
                body = self.parse_process()
                self.expect(";")
                if name in model.definitions:
                    self.fail(f"duplicate definition of constant '{name}'")
                model.definitions[name] = body
            else:
                self.fail(f"unexpected {self._describe(tok)} at top level")
        model.environment = _resolve_installs(model, raw_installs)
        return model

    def parse_component(self) -> ComponentDef:
        self.expect("component")
        name = self.expect("ident").value
        self.expect("{")
        self.expect("store")
        store = self.parse_store_literal()
        self.expect("behaviour")
        behaviour = self.parse_process()
        self.expect("}")
        return ComponentDef(name, store, behaviour)

    def parse_system(self) -> Tuple[Instance, ...]:
        self.expect("system")
        self.expect("{")
        out = []
        while not self.accept("}"):
            out.append(self.parse_instance())
            self.expect(";")
        return tuple(out)

    def parse_instance(self) -> Instance:
        name = self.expect("ident").value
        overrides = Store()
        if self.at("{"):
            overrides = self.parse_store_literal()
        count = 1
        if self.accept("*"):
            tok = self.expect("number")
            if not isinstance(tok.value, int) or tok.value < 1:
                raise ParseError("multiplicity must be a positive integer",
                                 tok.line, tok.col)
            count = tok.value
        return Instance(name, overrides, count)

    def parse_store_literal(self) -> Store:
        self.expect("{")
        items = {}
        first = True
        while not self.accept("}"):
            if not first:
                self.expect(",")
            first = False
            name_tok = self.expect("ident")
            self.expect("=")
            value = self.parse_literal_value()
            if name_tok.value in items:
                raise ParseError(
                    f"duplicate attribute '{name_tok.value}'",
                    name_tok.line, name_tok.col,
                )
            items[name_tok.value] = value
        return Store.of(items)

    def parse_literal_value(self):
        tok = self.peek()
        if tok.kind == "number":
            return self.next().value
        if tok.kind == "-":
            self.next()
            num = self.expect("number")
            return -num.value
        if tok.kind == "symbol":
            return Symbol(self.next().value)
        if tok.kind == "true":
            self.next()
            return True
        if tok.kind == "false":
            self.next()
            return False
        if tok.kind == "unit":
            self.next()
            return UNIT
        self.fail(f"expected a literal value, found {self._describe(tok)}")

    # -- environment -------------------------------------------------------
    def parse_env(self):
        self.expect("env")
        self.expect("{")
        global_store = Store()
        rate_rules = []
        prob_rules = []
        update_rules = []  # (pattern, update, raw install specs)
        while not self.accept("}"):
            tok = self.peek()
            if tok.kind == "global":
                self.next()
                global_store = self.parse_store_literal()
            elif tok.kind in ("rate", "prob"):
                which = self.next().kind
                pattern = self.parse_action_pattern()
                guard = None
                if self.accept("["):
                    guard = self.parse_predicate(env=True)
                    self.expect("]")
                self.expect("=")
                value = self.parse_expr(env=True)
                self.expect(";")
                if which == "rate":
                    rate_rules.append(RateRule(pattern, guard, value))
                else:
                    prob_rules.append(ProbRule(pattern, guard, value))
            elif tok.kind == "update":
                self.next()
                pattern = self.parse_action_pattern()
                self.expect("=")
                update = self.parse_update(env=True)
                installs = []
                if self.accept("install"):
                    installs.append(self.parse_install_spec())
                    while self.accept(","):
                        installs.append(self.parse_install_spec())
                self.expect(";")
                update_rules.append((pattern, update, tuple(installs)))
            else:
                self.fail(
                    f"expected an env item, found {self._describe(tok)}"
                )
        env = EnvironmentDefinition(
            global_store=global_store,
            rate_rules=tuple(rate_rules),
            prob_rules=tuple(prob_rules),
        )
        return env, update_rules

    def parse_action_pattern(self) -> ActionPattern:
        name = self.expect("ident").value
        broadcast = self.accept("*") is not None
        return ActionPattern(name, broadcast)

    def parse_install_spec(self):
        name = self.expect("ident").value
        overrides = []
        if self.accept("{"):
            first = True
            while not self.accept("}"):
                if not first:
                    self.expect(",")
                first = False
                attr = self.expect("ident").value
                self.expect("=")
                overrides.append((attr, self.parse_expr(env=True)))
        count = 1
        if self.accept("*"):
            tok = self.expect("number")
            if not isinstance(tok.value, int) or tok.value < 1:
                raise ParseError("multiplicity must be a positive integer",
                                 tok.line, tok.col)
            count = tok.value
        return (name, tuple(overrides), count)

    # -- measures ----------------------------------------------------------
    def parse_measure(self) -> Measure:
        self.expect("measure")
        name = self.expect("ident").value
        self.expect("=")
        kind_tok = self.expect("ident")
        if kind_tok.value not in MEASURE_KINDS:
            raise ParseError(
                f"unknown measure kind '{kind_tok.value}'",
                kind_tok.line, kind_tok.col,
            )
        self.expect("[")
        predicate = self.parse_predicate()
        self.expect("]")
        attribute = None
        if self.accept("("):
            attribute = self.expect("ident").value
            self.expect(")")
        self.expect("@")
        self.expect("[")
        start = self.parse_signed_number()
        self.expect(":")
        end = self.parse_signed_number()
        self.expect(":")
        pts = self.expect("number")
        if not isinstance(pts.value, int):
            raise ParseError("sample count must be an integer", pts.line, pts.col)
        self.expect("]")
        self.expect(";")
        try:
            grid = MeasureGrid(float(start), float(end), pts.value)
            return Measure(name, kind_tok.value, predicate, attribute, grid)
        except ModelError as exc:
            raise ParseError(str(exc), kind_tok.line, kind_tok.col)

    def parse_signed_number(self):
        if self.accept("-"):
            return -self.expect("number").value
        return self.expect("number").value

    # -- processes ---------------------------------------------------------
    def parse_process(self) -> Process:
        left = self.parse_par()
        while self.accept("+"):
            right = self.parse_par()
            left = Choice(left, right)
        return left

    def parse_par(self) -> Process:
        left = self.parse_prefixed()
        while self.accept("|"):
            right = self.parse_prefixed()
            left = Parallel(left, right)
        return left

    def parse_prefixed(self) -> Process:
        tok = self.peek()
        if tok.kind == "nil":
            self.next()
            return NIL
        if tok.kind == "kill":
            self.next()
            return KILL
        if tok.kind == "[":
            self.next()
            predicate = self.parse_predicate()
            self.expect("]")
            body = self.parse_prefixed()
            return Guarded(predicate, body)
        if tok.kind == "(":
            self.next()
            inner = self.parse_process()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            if self.peek(1).kind in ("*", "[", "<", "(", "{"):
                return self.parse_action_prefix()
            self.next()
            return Ref(tok.value)
        self.fail(f"expected a process, found {self._describe(tok)}")

    def parse_action_prefix(self) -> Process:
        name = self.expect("ident").value
        broadcast = self.accept("*") is not None
        predicate = TOP
        if self.accept("["):
            predicate = self.parse_predicate()
            self.expect("]")
        tok = self.peek()
        if tok.kind == "<":
            self.next()
            payload = []
            if not self.at(">"):
                payload.append(self.parse_expr())
                while self.accept(","):
                    payload.append(self.parse_expr())
            self.expect(">")
            kind = ActionKind.BROADCAST_OUT if broadcast else ActionKind.OUT
            binders = ()
        elif tok.kind == "(":
            self.next()
            binders = []
            if not self.at(")"):
                binders.append(self.expect("ident").value)
                while self.accept(","):
                    binders.append(self.expect("ident").value)
            self.expect(")")
            if len(set(binders)) != len(binders):
                raise ParseError(
                    "input variables must be pairwise distinct", tok.line, tok.col
                )
            kind = ActionKind.BROADCAST_IN if broadcast else ActionKind.IN
            payload = []
            binders = tuple(binders)
        elif tok.kind in ("{", "."):
            # `a*[pi].P` is shorthand for the empty output payload.
            kind = ActionKind.BROADCAST_OUT if broadcast else ActionKind.OUT
            payload = []
            binders = ()
        else:
            self.fail("expected '<', '(', '{' or '.' after action predicate")
        update = IDENTITY_UPDATE
        if self.at("{"):
            update = self.parse_update()
        self.expect(".")
        continuation = self.parse_prefixed()
        try:
            action = ActionPrefix(
                kind, name, predicate, tuple(payload), tuple(binders)
                if not kind.is_output else (), update,
            )
        except ModelError as exc:
            raise ParseError(str(exc), tok.line, tok.col)
        return Prefix(action, continuation)

    # -- updates -----------------------------------------------------------
    def parse_update(self, env=False) -> Update:
        brace = self.expect("{")
        if self.accept("}"):
            return IDENTITY_UPDATE
        # Either plain assignments (with optional U sugar) or weighted
        # branches "w :: assigns ; w :: assigns".
        weighted = self.peek().kind == "number"
        try:
            if weighted:
                branches = [self.parse_branch(env)]
                while self.accept(";"):
                    branches.append(self.parse_branch(env))
                self.expect("}")
                return make_update(None, branches=branches)
            assigns = [self.parse_assignment(True, env)]
            while self.accept(","):
                assigns.append(self.parse_assignment(True, env))
            self.expect("}")
            return make_update(assigns)
        except ModelError as exc:
            raise ParseError(str(exc), brace.line, brace.col)

    def parse_branch(self, env=False):
        weight_tok = self.expect("number")
        self.expect("::")
        assigns = []
        if not self.at(";", "}"):
            assigns.append(self.parse_assignment(False, env))
            while self.accept(","):
                assigns.append(self.parse_assignment(False, env))
        return (float(weight_tok.value), tuple(assigns))

    def parse_assignment(self, allow_uniform: bool, env=False):
        # environment updates may spell the target as `global.attr`; the
        # target is a global attribute either way
        if env and self.accept("global"):
            self.expect(".")
        attr = self.expect("ident").value
        self.expect(":=")
        if (
            allow_uniform
            and self.peek().kind == "ident"
            and self.peek().value == "U"
            and self.peek(1).kind == "("
        ):
            self.next()
            self.next()
            options = [self.parse_expr(env)]
            while self.accept(","):
                options.append(self.parse_expr(env))
            self.expect(")")
            return (attr, UniformChoice(tuple(options)))
        return (attr, self.parse_expr(env))

    # -- predicates --------------------------------------------------------
    def parse_predicate(self, env=False):
        left = self.parse_pred_conj(env)
        while self.accept("||"):
            right = self.parse_pred_conj(env)
            left = Or(left, right)
        return left

    def parse_pred_conj(self, env):
        left = self.parse_pred_atom(env)
        while self.accept("&&"):
            right = self.parse_pred_atom(env)
            left = And(left, right)
        return left

    def parse_pred_atom(self, env):
        tok = self.peek()
        if tok.kind == "!":
            self.next()
            return Not(self.parse_pred_atom(env))
        if tok.kind == "true" and not self._starts_comparison(env):
            self.next()
            return TOP
        if tok.kind == "false" and not self._starts_comparison(env):
            self.next()
            return BOTTOM
        if tok.kind == "(":
            # Could be a parenthesised predicate or a parenthesised
            # expression opening a comparison; try the comparison first.
            saved = self.pos
            try:
                return self.parse_comparison(env)
            except ParseError:
                self.pos = saved
            self.next()
            inner = self.parse_predicate(env)
            self.expect(")")
            return inner
        return self.parse_comparison(env)

    def _starts_comparison(self, env) -> bool:
        return self.peek(1).kind in ("==", "!=", "<", "<=", ">", ">=")

    def parse_comparison(self, env):
        left = self.parse_expr(env)
        op_tok = self.expect("==", "!=", "<", "<=", ">", ">=")
        right = self.parse_expr(env)
        return Cmp(op_tok.kind, left, right)

    # -- expressions -------------------------------------------------------
    def parse_expr(self, env=False):
        left = self.parse_term(env)
        while self.at("+", "-"):
            op = self.next().kind
            right = self.parse_term(env)
            left = BinOp(op, left, right)
        return left

    def parse_term(self, env):
        left = self.parse_factor(env)
        while self.at("*", "/", "%"):
            op = self.next().kind
            right = self.parse_factor(env)
            left = BinOp(op, left, right)
        return left

    def parse_factor(self, env):
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            if self.peek().kind == "number":
                return Const(-self.next().value)
            return UnOp("-", self.parse_factor(env))
        return self.parse_atom(env)

    def parse_atom(self, env):
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return Const(tok.value)
        if tok.kind == "symbol":
            self.next()
            return Const(Symbol(tok.value))
        if tok.kind == "true":
            self.next()
            return Const(True)
        if tok.kind == "false":
            self.next()
            return Const(False)
        if tok.kind == "unit":
            self.next()
            return Const(UNIT)
        if tok.kind == "this":
            self.next()
            self.expect(".")
            return SelfAttr(self.expect("ident").value)
        if tok.kind == "global":
            if not env:
                self.fail("'global.' references are only valid in env rules")
            self.next()
            self.expect(".")
            return EnvRef("global", self.expect("ident").value)
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr(env)
            self.expect(")")
            return inner
        if tok.kind == "ident":
            name = self.next().value
            if env and name in ("sender", "receiver") and self.at("."):
                self.next()
                return EnvRef(name, self.expect("ident").value)
            if env and name == "count" and self.at("("):
                self.next()
                predicate = self.parse_predicate(env=False)
                self.expect(")")
                return CountExpr(predicate)
            if self.at("(") and name != "count":
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.parse_expr(env))
                    while self.accept(","):
                        args.append(self.parse_expr(env))
                self.expect(")")
                return Call(name, tuple(args))
            return Name(name)
        self.fail(f"expected an expression, found {self._describe(tok)}")


def _resolve_installs(model: Model, raw_update_rules) -> EnvironmentDefinition:
    env = model.environment
    if not raw_update_rules:
        return env
    rules = []
    for pattern, update, installs in raw_update_rules:
        templates = []
        for name, overrides, count in installs:
            cdef = model.components.get(name)
            if cdef is None:
                raise ModelError(
                    f"install references undeclared component '{name}'"
                )
            exprs = {attr: Const(v) for attr, v in cdef.store.bindings}
            exprs.update(dict(overrides))
            templates.append(
                InstallTemplate(cdef.behaviour, tuple(sorted(exprs.items())), count)
            )
        rules.append(UpdateRule(pattern, update, tuple(templates)))
    return EnvironmentDefinition(
        global_store=env.global_store,
        rate_rules=env.rate_rules,
        prob_rules=env.prob_rules,
        update_rules=tuple(rules),
    )


def parse_model(source: str) -> Model:
    """Parse and validate a model from text."""
    model = _Parser(source).parse_model()
    model.validate()
    return model


# ---------------------------------------------------------------------------
# Printer

_PROC_CHOICE, _PROC_PAR, _PROC_PREFIX = 1, 2, 3


def format_process(p: Process, level: int = _PROC_CHOICE) -> str:
    if isinstance(p, Nil):
        return "nil"
    if isinstance(p, Kill):
        return "kill"
    if isinstance(p, Ref):
        return p.name
    if isinstance(p, Choice):
        text = (
            f"{format_process(p.left, _PROC_CHOICE)} + "
            f"{format_process(p.right, _PROC_PAR)}"
        )
        return f"({text})" if level > _PROC_CHOICE else text
    if isinstance(p, Parallel):
        text = (
            f"{format_process(p.left, _PROC_PAR)} | "
            f"{format_process(p.right, _PROC_PREFIX)}"
        )
        return f"({text})" if level > _PROC_PAR else text
    if isinstance(p, Guarded):
        return f"[{format_predicate(p.predicate)}] {format_process(p.body, _PROC_PREFIX)}"
    if isinstance(p, Prefix):
        return f"{format_action(p.action)}.{format_process(p.continuation, _PROC_PREFIX)}"
    raise ModelError(f"cannot print process {p!r}")


def format_action(a: ActionPrefix) -> str:
    star = "*" if a.kind.is_broadcast else ""
    head = f"{a.action}{star}[{format_predicate(a.predicate)}]"
    if a.kind.is_output:
        head += "<" + ", ".join(format_expr(e) for e in a.payload) + ">"
    else:
        head += "(" + ", ".join(a.binders) + ")"
    if not a.update.is_identity():
        head += format_update(a.update)
    return head


def format_update(u: Update) -> str:
    if len(u.branches) == 1 and u.branches[0].weight == 1.0:
        assigns = u.branches[0].assignments
        return "{" + ", ".join(f"{a} := {format_expr(e)}" for a, e in assigns) + "}"
    parts = []
    for b in u.branches:
        assigns = ", ".join(f"{a} := {format_expr(e)}" for a, e in b.assignments)
        parts.append(f"{_format_number(b.weight)} :: {assigns}")
    return "{" + "; ".join(parts) + "}"


_PRED_OR, _PRED_AND, _PRED_ATOM = 1, 2, 3


def format_predicate(p, level: int = _PRED_OR) -> str:
    if isinstance(p, Top):
        return "true"
    if isinstance(p, Bottom):
        return "false"
    if isinstance(p, Or):
        text = (
            f"{format_predicate(p.left, _PRED_OR)} || "
            f"{format_predicate(p.right, _PRED_AND)}"
        )
        return f"({text})" if level > _PRED_OR else text
    if isinstance(p, And):
        text = (
            f"{format_predicate(p.left, _PRED_AND)} && "
            f"{format_predicate(p.right, _PRED_ATOM)}"
        )
        return f"({text})" if level > _PRED_AND else text
    if isinstance(p, Not):
        return f"!{format_predicate(p.operand, _PRED_ATOM)}"
    if isinstance(p, Cmp):
        text = f"{format_expr(p.left)} {p.op} {format_expr(p.right)}"
        return f"({text})" if level > _PRED_AND else text
    raise ModelError(f"cannot print predicate {p!r}")


_EXPR_ADD, _EXPR_MUL, _EXPR_ATOM = 1, 2, 3


def _format_number(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def format_expr(e, level: int = _EXPR_ADD) -> str:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            text = _format_number(v)
            return f"({text})" if v < 0 and level > _EXPR_ADD else text
        if isinstance(v, Symbol):
            return f"'{v.name}'"
        if isinstance(v, Unit):
            return "unit"
        raise ModelError(f"cannot print constant {v!r}")
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, SelfAttr):
        return f"this.{e.attr}"
    if isinstance(e, EnvRef):
        return f"{e.scope}.{e.attr}"
    if isinstance(e, CountExpr):
        return f"count({format_predicate(e.predicate)})"
    if isinstance(e, Call):
        return f"{e.fn}(" + ", ".join(format_expr(a) for a in e.args) + ")"
    if isinstance(e, UnOp):
        return f"-{format_expr(e.operand, _EXPR_ATOM)}"
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            text = (
                f"{format_expr(e.left, _EXPR_ADD)} {e.op} "
                f"{format_expr(e.right, _EXPR_MUL)}"
            )
            return f"({text})" if level > _EXPR_ADD else text
        text = (
            f"{format_expr(e.left, _EXPR_MUL)} {e.op} "
            f"{format_expr(e.right, _EXPR_ATOM)}"
        )
        return f"({text})" if level > _EXPR_MUL else text
    raise ModelError(f"cannot print expression {e!r}")


def format_store_literal(store: Store) -> str:
    return "{" + ", ".join(
        f"{k} = {format_value(v)}" for k, v in store.bindings
    ) + "}"


def format_model(model: Model) -> str:
    """Render a model back to source text; parsing the result yields a
    structurally identical model."""
    lines = []
    for name, body in model.definitions.items():
        lines.append(f"{name} := {format_process(body)};")
    for cdef in model.components.values():
        lines.append(f"component {cdef.name} {{")
        lines.append(f"  store {format_store_literal(cdef.store)}")
        lines.append(f"  behaviour {format_process(cdef.behaviour)}")
        lines.append("}")
    if model.system:
        lines.append("system {")
        for inst in model.system:
            text = inst.component
            if inst.overrides.bindings:
                text += format_store_literal(inst.overrides)
            if inst.count != 1:
                text += f" * {inst.count}"
            lines.append(f"  {text};")
        lines.append("}")
    env = model.environment
    if (
        env.global_store.bindings
        or env.rate_rules
        or env.prob_rules
        or env.update_rules
    ):
        lines.append("env {")
        if env.global_store.bindings:
            lines.append(f"  global {format_store_literal(env.global_store)}")
        for rule in env.rate_rules:
            guard = f" [{format_predicate(rule.guard)}]" if rule.guard else ""
            lines.append(
                f"  rate {_format_pattern(rule.pattern)}{guard}"
                f" = {format_expr(rule.value)};"
            )
        for rule in env.prob_rules:
            guard = f" [{format_predicate(rule.guard)}]" if rule.guard else ""
            lines.append(
                f"  prob {_format_pattern(rule.pattern)}{guard}"
                f" = {format_expr(rule.value)};"
            )
        for rule in env.update_rules:
            assigns = format_update(rule.update) if not rule.update.is_identity() else "{}"
            text = f"  update {_format_pattern(rule.pattern)} = {assigns}"
            installs = []
            for tpl in rule.install:
                installs.append(_format_install(model, tpl))
            if installs:
                text += " install " + ", ".join(installs)
            lines.append(text + ";")
        lines.append("}")
    for m in model.measures:
        attr = f"({m.attribute})" if m.attribute is not None else ""
        grid = m.grid
        lines.append(
            f"measure {m.name} = {m.kind}[{format_predicate(m.predicate)}]{attr}"
            f" @ [{_format_number(grid.start)} : {_format_number(grid.end)}"
            f" : {grid.points}];"
        )
    return "\n".join(lines) + "\n"


def _format_pattern(p: ActionPattern) -> str:
    return p.name + ("*" if p.broadcast else "")


def _format_install(model: Model, tpl: InstallTemplate) -> str:
    # Find the component definition the template was built from.
    for name, cdef in model.components.items():
        if cdef.behaviour == tpl.process:
            defaults = {attr: Const(v) for attr, v in cdef.store.bindings}
            overrides = [
                (attr, expr)
                for attr, expr in tpl.store_exprs
                if defaults.get(attr) != expr
            ]
            text = name
            if overrides or set(defaults) != {a for a, _ in tpl.store_exprs}:
                text += "{" + ", ".join(
                    f"{a} = {format_expr(e)}" for a, e in overrides
                ) + "}"
            if tpl.count != 1:
                text += f" * {tpl.count}"
            return text
    raise ModelError("install template does not match any declared component")
