"""Expression/predicate evaluation, substitution and store updates.

Scoping follows the two-store discipline of attribute-based communication:
bare names resolve against variable bindings first and then the local store,
while `this.`-prefixed names resolve against the sender store (falling back
to the local store when no sender is in play, e.g. inside guards and
updates).  Environment rules use explicitly qualified references
(`sender.`, `receiver.`, `global.`) plus the `count(pi)` primitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import (
    ArityMismatchError,
    DivisionByZeroError,
    EvalError,
    TypeMismatchError,
    UnboundNameError,
)
from .terms import (
    ActionPrefix,
    And,
    BinOp,
    Bottom,
    Call,
    Choice,
    Cmp,
    Collective,
    Const,
    CountExpr,
    EnvRef,
    Guarded,
    Kill,
    Name,
    Nil,
    Not,
    Or,
    Parallel,
    Predicate,
    Prefix,
    Process,
    Ref,
    SelfAttr,
    Store,
    Symbol,
    Top,
    UnOp,
    UniformChoice,
    Unit,
    Update,
    UpdateBranch,
    Value,
    WEIGHT_TOL,
    value_key,
)

_BUILTINS = {
    "abs": (1, lambda a: abs(a)),
    "min": (2, lambda a, b: min(a, b)),
    "max": (2, lambda a, b: max(a, b)),
}


@dataclass
class EvalScope:
    """Name-resolution context for one evaluation."""

    local: Optional[Store] = None
    sender: Optional[Store] = None
    bindings: Mapping[str, Value] = field(default_factory=dict)
    named: Mapping[str, Store] = field(default_factory=dict)  # env rules
    collective: Optional[Collective] = None  # for count(pi)


def _require_num(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeMismatchError(f"{what} requires a number, got {v!r}")
    return v


def eval_expr(e, scope: EvalScope) -> Value:
    """Evaluate an expression to a value; raises EvalError subclasses."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Name):
        if e.ident in scope.bindings:
            return scope.bindings[e.ident]
        if scope.local is not None and e.ident in scope.local:
            return scope.local.get(e.ident)
        raise UnboundNameError(f"unbound name '{e.ident}'")
    if isinstance(e, SelfAttr):
        store = scope.sender if scope.sender is not None else scope.local
        if store is not None and e.attr in store:
            return store.get(e.attr)
        raise UnboundNameError(f"unbound attribute 'this.{e.attr}'")
    if isinstance(e, EnvRef):
        store = scope.named.get(e.scope)
        if store is None:
            raise UnboundNameError(f"no '{e.scope}' store in this context")
        if e.attr in store:
            return store.get(e.attr)
        raise UnboundNameError(f"unbound attribute '{e.scope}.{e.attr}'")
    if isinstance(e, BinOp):
        lv = eval_expr(e.left, scope)
        rv = eval_expr(e.right, scope)
        return _apply_binop(e.op, lv, rv)
    if isinstance(e, UnOp):
        v = _require_num(eval_expr(e.operand, scope), "unary minus")
        return -v
    if isinstance(e, Call):
        try:
            arity, fn = _BUILTINS[e.fn]
        except KeyError:
            raise UnboundNameError(f"unknown function '{e.fn}'")
        if len(e.args) != arity:
            raise ArityMismatchError(
                f"'{e.fn}' expects {arity} argument(s), got {len(e.args)}"
            )
        args = [_require_num(eval_expr(a, scope), e.fn) for a in e.args]
        return fn(*args)
    if isinstance(e, CountExpr):
        if scope.collective is None:
            raise EvalError("count(...) used outside an environment rule")
        n = 0
        for comp in scope.collective.components:
            if satisfies(comp.store, e.predicate):
                n += 1
        return n
    raise EvalError(f"cannot evaluate: {e!r}")


def _apply_binop(op, lv, rv):
    _require_num(lv, f"operator '{op}'")
    _require_num(rv, f"operator '{op}'")
    if op == "+":
        return lv + rv
    if op == "-":
        return lv - rv
    if op == "*":
        return lv * rv
    if op == "/":
        if rv == 0:
            raise DivisionByZeroError("division by zero")
        out = lv / rv
        if isinstance(lv, int) and isinstance(rv, int) and lv % rv == 0:
            return lv // rv
        return out
    if op == "%":
        if rv == 0:
            raise DivisionByZeroError("modulo by zero")
        return lv % rv
    raise EvalError(f"unknown operator '{op}'")


def _values_equal(a, b) -> bool:
    ka, kb = value_key(a)[0], value_key(b)[0]
    if ka != kb:
        return False
    return a == b


def eval_pred(p, scope: EvalScope) -> bool:
    """Evaluate a predicate; unresolvable names raise UnboundNameError."""
    if isinstance(p, Top):
        return True
    if isinstance(p, Bottom):
        return False
    if isinstance(p, Not):
        return not eval_pred(p.operand, scope)
    if isinstance(p, And):
        return eval_pred(p.left, scope) and eval_pred(p.right, scope)
    if isinstance(p, Or):
        return eval_pred(p.left, scope) or eval_pred(p.right, scope)
    if isinstance(p, Cmp):
        lv = eval_expr(p.left, scope)
        rv = eval_expr(p.right, scope)
        if p.op == "==":
            return _values_equal(lv, rv)
        if p.op == "!=":
            return not _values_equal(lv, rv)
        # Ordering comparisons: numbers with numbers, symbols with symbols.
        if isinstance(lv, Symbol) and isinstance(rv, Symbol):
            lv, rv = lv.name, rv.name
        else:
            _require_num(lv, f"comparison '{p.op}'")
            _require_num(rv, f"comparison '{p.op}'")
        if p.op == "<":
            return lv < rv
        if p.op == "<=":
            return lv <= rv
        if p.op == ">":
            return lv > rv
        if p.op == ">=":
            return lv >= rv
    raise EvalError(f"cannot evaluate predicate: {p!r}")


def satisfies(store: Store, predicate) -> bool:
    """Store satisfaction for a closed predicate.

    An attribute missing from the store makes the whole predicate false
    rather than erroring: heterogeneous components routinely lack each
    other's attributes and simply must not match.
    """
    try:
        return eval_pred(predicate, EvalScope(local=store, sender=store))
    except UnboundNameError:
        return False


# ---------------------------------------------------------------------------
# Predicate closure (sender side)


def close_expr(e, sender: Store):
    """Resolve `this.a` references against the sender store."""
    if isinstance(e, SelfAttr):
        if e.attr not in sender:
            raise UnboundNameError(f"unbound attribute 'this.{e.attr}'")
        return Const(sender.get(e.attr))
    if isinstance(e, BinOp):
        return BinOp(e.op, close_expr(e.left, sender), close_expr(e.right, sender))
    if isinstance(e, UnOp):
        return UnOp(e.op, close_expr(e.operand, sender))
    if isinstance(e, Call):
        return Call(e.fn, tuple(close_expr(a, sender) for a in e.args))
    return e


def close_predicate(p, sender: Store):
    """Close a target predicate on the sender side: `this.a` references
    become constants, bare attribute references stay open for the
    receiver."""
    if isinstance(p, (Top, Bottom)):
        return p
    if isinstance(p, Not):
        return Not(close_predicate(p.operand, sender))
    if isinstance(p, And):
        return And(close_predicate(p.left, sender), close_predicate(p.right, sender))
    if isinstance(p, Or):
        return Or(close_predicate(p.left, sender), close_predicate(p.right, sender))
    if isinstance(p, Cmp):
        return Cmp(p.op, close_expr(p.left, sender), close_expr(p.right, sender))
    raise EvalError(f"cannot close predicate: {p!r}")


# ---------------------------------------------------------------------------
# Substitution of received values


def _subst_expr(e, env):
    if isinstance(e, Name) and e.ident in env:
        return Const(env[e.ident])
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_expr(e.left, env), _subst_expr(e.right, env))
    if isinstance(e, UnOp):
        return UnOp(e.op, _subst_expr(e.operand, env))
    if isinstance(e, Call):
        return Call(e.fn, tuple(_subst_expr(a, env) for a in e.args))
    if isinstance(e, CountExpr):
        return CountExpr(_subst_pred(e.predicate, env))
    return e


def _subst_pred(p, env):
    if isinstance(p, (Top, Bottom)):
        return p
    if isinstance(p, Not):
        return Not(_subst_pred(p.operand, env))
    if isinstance(p, And):
        return And(_subst_pred(p.left, env), _subst_pred(p.right, env))
    if isinstance(p, Or):
        return Or(_subst_pred(p.left, env), _subst_pred(p.right, env))
    if isinstance(p, Cmp):
        return Cmp(p.op, _subst_expr(p.left, env), _subst_expr(p.right, env))
    raise EvalError(f"cannot substitute in predicate: {p!r}")


def _subst_update(u: Update, env) -> Update:
    return Update(
        tuple(
            UpdateBranch(
                b.weight,
                tuple((a, _subst_expr(e, env)) for a, e in b.assignments),
            )
            for b in u.branches
        )
    )


def _subst_process(p, env):
    if not env:
        return p
    if isinstance(p, (Nil, Kill, Ref)):
        return p
    if isinstance(p, Prefix):
        act = p.action
        inner = env
        if act.binders:
            # Input binders shadow: stop substituting captured variables in
            # the prefix's own predicate, update and continuation.
            inner = {k: v for k, v in env.items() if k not in act.binders}
        new_act = ActionPrefix(
            act.kind,
            act.action,
            _subst_pred(act.predicate, inner),
            tuple(_subst_expr(e, env) for e in act.payload),
            act.binders,
            _subst_update(act.update, inner),
        )
        return Prefix(new_act, _subst_process(p.continuation, inner))
    if isinstance(p, Choice):
        return Choice(_subst_process(p.left, env), _subst_process(p.right, env))
    if isinstance(p, Parallel):
        return Parallel(_subst_process(p.left, env), _subst_process(p.right, env))
    if isinstance(p, Guarded):
        return Guarded(_subst_pred(p.predicate, env), _subst_process(p.body, env))
    raise EvalError(f"cannot substitute in process: {p!r}")


def substitute(p: Process, variables, values) -> Process:
    """Capture-avoiding replacement of input variables by received values."""
    if len(variables) != len(values):
        raise ArityMismatchError(
            f"substitution arity mismatch: {len(variables)} vs {len(values)}"
        )
    return _subst_process(p, dict(zip(variables, values)))


def substitute_update(u: Update, variables, values) -> Update:
    if len(variables) != len(values):
        raise ArityMismatchError(
            f"substitution arity mismatch: {len(variables)} vs {len(values)}"
        )
    return _subst_update(u, dict(zip(variables, values)))


def substitute_pred(p, variables, values):
    if len(variables) != len(values):
        raise ArityMismatchError(
            f"substitution arity mismatch: {len(variables)} vs {len(values)}"
        )
    return _subst_pred(p, dict(zip(variables, values)))


# ---------------------------------------------------------------------------
# Store updates


def apply_update(update: Update, store: Store, scope: Optional[EvalScope] = None):
    """Apply an update to a store: a finitely-supported distribution over
    stores, equal outcomes merged.  Branch expressions are evaluated under
    the original store (simultaneous assignment)."""
    base = scope or EvalScope()
    eval_scope = EvalScope(
        local=store,
        sender=base.sender,
        bindings=base.bindings,
        named=base.named,
        collective=base.collective,
    )
    out = {}
    total = 0.0
    for branch in update.branches:
        total += branch.weight
        changes = {
            attr: eval_expr(expr, eval_scope) for attr, expr in branch.assignments
        }
        target = store.updated(changes) if changes else store
        out[target] = out.get(target, 0.0) + branch.weight
    if abs(total - 1.0) > WEIGHT_TOL:
        raise EvalError(f"update branch weights sum to {total}, expected 1")
    return out

