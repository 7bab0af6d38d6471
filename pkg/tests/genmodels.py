"""Random model, collective and process-term generators for the tests.

Everything is driven by an explicit `random.Random` instance so corpora
are reproducible from a seed.  Generated models keep payload arities
consistent per action name (mismatched arities simply block, which would
make many checks vacuous) and only reference attributes every store
carries, so evaluation never raises.
"""

import random

from carma.environment import (
    ActionPattern,
    EnvironmentDefinition,
    InstallTemplate,
    ProbRule,
    RateRule,
    UpdateRule,
)
from carma.model import ComponentDef, Instance, Model
from carma.terms import (
    ActionKind,
    ActionPrefix,
    And,
    BinOp,
    Choice,
    Cmp,
    Const,
    Guarded,
    KILL,
    Name,
    NIL,
    Not,
    Or,
    Parallel,
    Prefix,
    Ref,
    SelfAttr,
    Store,
    Symbol,
    TOP,
    BOTTOM,
    UniformChoice,
    Update,
    UpdateBranch,
    make_update,
)

#: payload arity per action name, shared by senders and receivers
ACTION_ARITY = {"a": 0, "b": 1, "c": 0, "d": 2}

ATTRS = ("x", "y")
ZONES = (Symbol("u"), Symbol("v"))


def rand_store(rng: random.Random) -> Store:
    return Store.of(
        x=rng.randrange(3),
        y=rng.randrange(3),
        zone=rng.choice(ZONES),
    )


def rand_pred(rng: random.Random, depth: int = 2, allow_this: bool = False):
    roll = rng.random()
    if roll < 0.25 or depth <= 0:
        return TOP
    if roll < 0.30:
        return BOTTOM
    if roll < 0.70:
        attr = rng.choice(ATTRS + ("zone",))
        if attr == "zone":
            rhs = Const(rng.choice(ZONES)) if not allow_this or rng.random() < 0.5 \
                else SelfAttr("zone")
            return Cmp(rng.choice(("==", "!=")), Name("zone"), rhs)
        rhs = Const(rng.randrange(3)) if not allow_this or rng.random() < 0.5 \
            else SelfAttr(rng.choice(ATTRS))
        return Cmp(rng.choice(("==", "!=", "<", "<=", ">", ">=")),
                   Name(attr), rhs)
    if roll < 0.80:
        return Not(rand_pred(rng, depth - 1, allow_this))
    ctor = And if roll < 0.90 else Or
    return ctor(rand_pred(rng, depth - 1, allow_this),
                rand_pred(rng, depth - 1, allow_this))


def rand_payload(rng: random.Random, arity: int):
    out = []
    for _ in range(arity):
        if rng.random() < 0.5:
            out.append(Const(rng.randrange(3)))
        else:
            out.append(Name(rng.choice(ATTRS)))
    return tuple(out)


def rand_update(rng: random.Random) -> Update:
    roll = rng.random()
    if roll < 0.5:
        return make_update([])
    attr = rng.choice(ATTRS)
    bump = BinOp("%", BinOp("+", Name(attr), Const(1)), Const(3))
    if roll < 0.8:
        return make_update([(attr, bump)])
    return make_update([(attr, UniformChoice((Const(0), Const(1))))])


def rand_prefix(rng: random.Random, actions, continuation) -> Prefix:
    action = rng.choice(actions)
    arity = ACTION_ARITY[action]
    broadcast = rng.random() < 0.5
    output = rng.random() < 0.55
    if output:
        kind = ActionKind.BROADCAST_OUT if broadcast else ActionKind.OUT
        pfx = ActionPrefix(
            kind=kind,
            action=action,
            predicate=rand_pred(rng, allow_this=True),
            payload=rand_payload(rng, arity),
            update=rand_update(rng),
        )
    else:
        kind = ActionKind.BROADCAST_IN if broadcast else ActionKind.IN
        pfx = ActionPrefix(
            kind=kind,
            action=action,
            predicate=rand_pred(rng, allow_this=True),
            binders=tuple(f"v{i}" for i in range(arity)),
            update=rand_update(rng),
        )
    return Prefix(pfx, continuation)


def rand_process(rng: random.Random, actions, constants, depth: int = 2):
    roll = rng.random()
    if depth <= 0 or roll < 0.5:
        cont_roll = rng.random()
        if cont_roll < 0.7:
            continuation = Ref(rng.choice(constants))
        elif cont_roll < 0.8:
            continuation = NIL
        elif cont_roll < 0.85:
            continuation = KILL
        else:
            continuation = rand_process(rng, actions, constants, 0)
        return rand_prefix(rng, actions, continuation)
    if roll < 0.7:
        return Choice(
            rand_process(rng, actions, constants, depth - 1),
            rand_process(rng, actions, constants, depth - 1),
        )
    if roll < 0.85:
        return Parallel(
            rand_process(rng, actions, constants, depth - 1),
            rand_process(rng, actions, constants, depth - 1),
        )
    return Guarded(
        rand_pred(rng),
        rand_process(rng, actions, constants, depth - 1),
    )


def rand_environment(rng: random.Random, actions, dynamic: bool = False,
                     components=None) -> EnvironmentDefinition:
    rate_rules = []
    prob_rules = []
    update_rules = []
    for action in actions:
        for broadcast in (True, False):
            pattern = ActionPattern(action, broadcast)
            if rng.random() < 0.7:
                guard = None
                if rng.random() < 0.3:
                    guard = Cmp("<=", Name("sender.x"), Const(rng.randrange(1, 3)))
                    guard = _qualify(guard)
                rate_rules.append(
                    RateRule(pattern, guard,
                             Const(rng.choice((0.5, 1.0, 2.0, 3.0))))
                )
            if rng.random() < 0.5:
                prob_rules.append(
                    ProbRule(pattern, None,
                             Const(rng.choice((0.25, 0.5, 1.0))))
                )
            if dynamic and rng.random() < 0.3:
                update = make_update([("total", BinOp("+", Name("global.total"),
                                                      Const(1)))])
                update = _qualify_update(update)
                install = ()
                if components and rng.random() < 0.3:
                    cdef = rng.choice(components)
                    store_exprs = tuple(
                        (k, Const(v)) for k, v in cdef.store.bindings
                    )
                    install = (InstallTemplate(cdef.behaviour, store_exprs), )
                update_rules.append(UpdateRule(pattern, update, install))
    global_store = Store.of(total=0) if dynamic else Store()
    return EnvironmentDefinition(
        global_store=global_store,
        rate_rules=tuple(rate_rules),
        prob_rules=tuple(prob_rules),
        update_rules=tuple(update_rules),
    )


def _qualify(pred):
    """Rewrite bare `sender.x` names into proper environment references."""
    from carma.terms import EnvRef

    if isinstance(pred, Cmp):
        left = pred.left
        if isinstance(left, Name) and "." in left.ident:
            scope, attr = left.ident.split(".", 1)
            left = EnvRef(scope, attr)
        return Cmp(pred.op, left, pred.right)
    return pred


def _qualify_update(update):
    from carma.terms import EnvRef

    branches = []
    for b in update.branches:
        assigns = []
        for attr, e in b.assignments:
            if isinstance(e, BinOp) and isinstance(e.left, Name) \
                    and "." in e.left.ident:
                scope, name = e.left.ident.split(".", 1)
                e = BinOp(e.op, EnvRef(scope, name), e.right)
            assigns.append((attr, e))
        branches.append(UpdateBranch(b.weight, tuple(assigns)))
    return Update(tuple(branches))


def rand_model(rng: random.Random, n_components: int,
               n_actions: int = 3, n_constants: int = 3,
               dynamic: bool = False) -> Model:
    actions = list(ACTION_ARITY)[:n_actions]
    constants = [f"P{i}" for i in range(n_constants)]
    definitions = {
        name: rand_process(rng, actions, constants) for name in constants
    }
    components = {}
    instances = []
    for i in range(n_components):
        name = f"C{i}"
        behaviour = Ref(rng.choice(constants))
        components[name] = ComponentDef(name, rand_store(rng), behaviour)
        instances.append(Instance(name))
    env = rand_environment(rng, actions, dynamic=dynamic,
                           components=list(components.values()))
    model = Model(
        definitions=definitions,
        components=components,
        system=tuple(instances),
        environment=env,
    )
    model.validate()
    return model


# ---------------------------------------------------------------------------
# Random process terms for printer/parser round-trips.
#
# Restricted to forms the concrete syntax represents exactly: no negative
# literals (they reparse as unary minus), no tuple constants, and update
# branch weights that are exact binary fractions so renormalisation is
# the identity.

_RT_ACTIONS = ("a", "b", "go", "ret")
_RT_VARS = ("x", "y", "z")


def rt_expr(rng: random.Random, depth: int = 2):
    roll = rng.random()
    if depth <= 0 or roll < 0.4:
        kind = rng.random()
        if kind < 0.4:
            return Const(rng.randrange(10))
        if kind < 0.6:
            return Const(rng.choice((0.5, 1.5, 2.25)))
        if kind < 0.8:
            return Const(Symbol(rng.choice(("red", "green", "blue"))))
        return Name(rng.choice(_RT_VARS))
    if roll < 0.5:
        return SelfAttr(rng.choice(_RT_VARS))
    if roll < 0.85:
        op = rng.choice(("+", "-", "*", "/", "%"))
        return BinOp(op, rt_expr(rng, depth - 1), rt_expr(rng, depth - 1))
    from carma.terms import Call

    fn = rng.choice(("abs", "min", "max"))
    n = 1 if fn == "abs" else 2
    return Call(fn, tuple(rt_expr(rng, depth - 1) for _ in range(n)))


def rt_pred(rng: random.Random, depth: int = 2):
    roll = rng.random()
    if depth <= 0 or roll < 0.3:
        return rng.choice((TOP, BOTTOM))
    if roll < 0.6:
        return Cmp(rng.choice(("==", "!=", "<", "<=", ">", ">=")),
                   rt_expr(rng, 1), rt_expr(rng, 1))
    if roll < 0.7:
        return Not(rt_pred(rng, depth - 1))
    ctor = And if roll < 0.85 else Or
    return ctor(rt_pred(rng, depth - 1), rt_pred(rng, depth - 1))


def rt_update(rng: random.Random) -> Update:
    roll = rng.random()
    if roll < 0.4:
        return make_update([])
    if roll < 0.8:
        n = rng.randrange(1, 3)
        attrs = rng.sample(_RT_VARS, n)
        return make_update([(a, rt_expr(rng, 1)) for a in attrs])
    weights = rng.choice(((0.5, 0.5), (0.25, 0.75), (0.25, 0.25, 0.5)))
    branches = [
        (w, tuple((a, rt_expr(rng, 1)) for a in rng.sample(_RT_VARS, 1)))
        for w in weights
    ]
    return make_update(None, branches=branches)


def rt_prefix(rng: random.Random, continuation):
    action = rng.choice(_RT_ACTIONS)
    broadcast = rng.random() < 0.5
    output = rng.random() < 0.5
    if output:
        kind = ActionKind.BROADCAST_OUT if broadcast else ActionKind.OUT
        pfx = ActionPrefix(
            kind=kind,
            action=action,
            predicate=rt_pred(rng),
            payload=tuple(rt_expr(rng, 1) for _ in range(rng.randrange(3))),
            update=rt_update(rng),
        )
    else:
        kind = ActionKind.BROADCAST_IN if broadcast else ActionKind.IN
        pfx = ActionPrefix(
            kind=kind,
            action=action,
            predicate=rt_pred(rng),
            binders=tuple(rng.sample(("p", "q", "r"), rng.randrange(3))),
            update=rt_update(rng),
        )
    return Prefix(pfx, continuation)


def rt_process(rng: random.Random, depth: int = 3):
    roll = rng.random()
    if depth <= 0 or roll < 0.45:
        cont_roll = rng.random()
        if cont_roll < 0.4:
            continuation = NIL
        elif cont_roll < 0.5:
            continuation = KILL
        elif cont_roll < 0.8:
            continuation = Ref(rng.choice(("A", "B", "Sys")))
        else:
            continuation = rt_process(rng, 0)
        return rt_prefix(rng, continuation)
    if roll < 0.6:
        return Choice(rt_process(rng, depth - 1), rt_process(rng, depth - 1))
    if roll < 0.75:
        return Parallel(rt_process(rng, depth - 1), rt_process(rng, depth - 1))
    if roll < 0.9:
        return Guarded(rt_pred(rng), rt_process(rng, depth - 1))
    return rng.choice((NIL, Ref("A")))
