"""Composable predicate expressions, a small text syntax for them, and their evaluation.

Grammar::

    expr   := call
    call   := NAME "(" arg ("," arg)* ")"
    arg    := call | VAR | INT | NAME | NAME OP NUMBER
    VAR    := "$" NAME
    OP     := "<" | "<=" | ">" | ">="

Combinators are ``and``, ``or`` and ``not``. Atoms:

    lane_change(x)
    crossed_paths(x, y[, gap<S][, heading>RAD])
    close_proximity(x, y[, dist<=M])
    high_acceleration(x[, accel>=MPS2])
    type(x, vehicle|pedestrian|cyclist)

Agent slots ``x``/``y`` are variables (``$a``) or literal object ids.
"""

from __future__ import annotations

import itertools
import operator
import re
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from trajeval.mining.predicates import (
    accelerations,
    close_proximity,
    crossed_paths,
    detect_lane_change,
    high_acceleration,
)
from trajeval.scenario import STEP_SECONDS, ObjectType, Scenario


class ExpressionError(ValueError):
    pass


class UnboundNegationError(ExpressionError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"${self.name}"


Slot = Union[Var, int]

_OPS: Dict[str, Callable[[float, float], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class Param:
    key: str
    op: str
    value: float

    def test(self, x: float) -> bool:
        return _OPS[self.op](x, self.value)

    def __str__(self) -> str:
        return f"{self.key}{self.op}{self.value!r}"


@dataclass(frozen=True)
class Atom:
    name: str
    slots: Tuple[Slot, ...]
    params: Tuple[Param, ...] = ()
    type_name: Optional[str] = None

    def __str__(self) -> str:
        args = [str(s) for s in self.slots]
        if self.type_name is not None:
            args.append(self.type_name)
        args.extend(str(p) for p in self.params)
        return f"{self.name}({','.join(args)})"


@dataclass(frozen=True)
class And:
    children: Tuple["Expr", ...]

    def __str__(self) -> str:
        return f"and({','.join(map(str, self.children))})"


@dataclass(frozen=True)
class Or:
    children: Tuple["Expr", ...]

    def __str__(self) -> str:
        return f"or({','.join(map(str, self.children))})"


@dataclass(frozen=True)
class Not:
    child: "Expr"

    def __str__(self) -> str:
        return f"not({self.child})"


Expr = Union[Atom, And, Or, Not]

# atom name -> (slot count, allowed params with the directions they may use)
ATOMS: Dict[str, Tuple[int, Dict[str, Tuple[str, ...]]]] = {
    "lane_change": (1, {}),
    "crossed_paths": (2, {"gap": ("<", "<="), "heading": (">", ">=")}),
    "close_proximity": (2, {"dist": ("<", "<=")}),
    "high_acceleration": (1, {"accel": (">", ">=")}),
    "type": (1, {}),
}

DEFAULT_PARAMS = {
    "close_proximity": (Param("dist", "<=", 5.0),),
    "high_acceleration": (Param("accel", ">=", 3.0),),
}


def atom(name: str, *slots: Slot, type_name: Optional[str] = None, **params: float) -> Atom:
    """Convenience constructor: ``atom("crossed_paths", Var("a"), Var("b"), gap=5)``.

    Keyword parameters use the default direction for their key
    (``<=`` for upper bounds, ``>=`` for lower bounds).
    """
    direction = {"gap": "<=", "dist": "<=", "heading": ">=", "accel": ">="}
    built = tuple(Param(k, direction[k], float(v)) for k, v in sorted(params.items()))
    return _check_atom(Atom(name, tuple(slots), built, type_name))


def _check_atom(a: Atom) -> Atom:
    if a.name not in ATOMS:
        raise ExpressionError(f"unknown predicate {a.name!r}")
    arity, allowed = ATOMS[a.name]
    if len(a.slots) != arity:
        raise ExpressionError(f"{a.name} takes {arity} agent slot(s), got {len(a.slots)}")
    if a.name == "type":
        if a.type_name not in {t.value for t in ObjectType}:
            raise ExpressionError(f"type() needs an object type, got {a.type_name!r}")
    elif a.type_name is not None:
        raise ExpressionError(f"{a.name} takes no type argument")
    seen = set()
    for p in a.params:
        if p.key not in allowed:
            raise ExpressionError(f"{a.name} has no parameter {p.key!r}")
        if p.op not in allowed[p.key]:
            raise ExpressionError(f"{p.key} must use one of {allowed[p.key]}")
        if p.key in seen:
            raise ExpressionError(f"parameter {p.key!r} given twice")
        if not p.value > 0:
            raise ExpressionError(f"parameter {p.key!r} must be positive")
        seen.add(p.key)
    if not a.params and a.name in DEFAULT_PARAMS:
        a = Atom(a.name, a.slots, DEFAULT_PARAMS[a.name], a.type_name)
    return a


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*(?:(<=|>=|<|>)|(\$[A-Za-z_]\w*)|([A-Za-z_]\w*)|(-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)|([(),]))")


def _tokenize(text: str) -> List[Tuple[str, str]]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        kinds = ("op", "var", "name", "num", "punct")
        for kind, value in zip(kinds, m.groups()):
            if value is not None:
                tokens.append((kind, value))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0) -> Tuple[str, str]:
        j = self.i + offset
        return self.tokens[j] if j < len(self.tokens) else ("eof", "")

    def take(self, kind: str, value: Optional[str] = None) -> str:
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise ExpressionError(f"expected {value or kind}, got {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok[1]

    def parse(self) -> Expr:
        expr = self.call()
        if self.peek()[0] != "eof":
            raise ExpressionError(f"trailing input at {self.peek()[1]!r}")
        return expr

    def call(self) -> Expr:
        name = self.take("name")
        self.take("punct", "(")
        args = [self.arg()]
        while self.peek() == ("punct", ","):
            self.i += 1
            args.append(self.arg())
        self.take("punct", ")")
        return self.build(name, args)

    def arg(self):
        kind, value = self.peek()
        if kind == "var":
            self.i += 1
            return Var(value[1:])
        if kind == "num":
            self.i += 1
            if not re.fullmatch(r"-?\d+", value):
                raise ExpressionError(f"object ids are integers, got {value}")
            return int(value)
        if kind == "name":
            nxt = self.peek(1)
            if nxt == ("punct", "("):
                return self.call()
            self.i += 1
            if nxt[0] == "op":
                op = self.take("op")
                return Param(value, op, float(self.take("num")))
            return value
        raise ExpressionError(f"unexpected {value or 'end of input'!r}")

    def build(self, name: str, args: list) -> Expr:
        if name in ("and", "or"):
            if not all(isinstance(a, (Atom, And, Or, Not)) for a in args):
                raise ExpressionError(f"{name}() takes expressions")
            return (And if name == "and" else Or)(tuple(args))
        if name == "not":
            if len(args) != 1 or not isinstance(args[0], (Atom, And, Or, Not)):
                raise ExpressionError("not() takes exactly one expression")
            return Not(args[0])
        slots = tuple(a for a in args if isinstance(a, (Var, int)))
        params = tuple(a for a in args if isinstance(a, Param))
        names = [a for a in args if isinstance(a, str)]
        if len(slots) + len(params) + len(names) != len(args):
            raise ExpressionError(f"{name}() takes agent slots and parameters only")
        if len(names) > 1:
            raise ExpressionError(f"{name}() takes at most one bare name")
        return _check_atom(Atom(name, slots, params, names[0] if names else None))


def parse_expression(text: str) -> Expr:
    """Parse the text syntax into an expression tree."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Evaluation


def free_vars(expr: Expr) -> FrozenSet[str]:
    if isinstance(expr, Atom):
        return frozenset(s.name for s in expr.slots if isinstance(s, Var))
    if isinstance(expr, Not):
        return free_vars(expr.child)
    return frozenset().union(*(free_vars(c) for c in expr.children))


def positive_vars(expr: Expr) -> FrozenSet[str]:
    """Variables that occur outside every negation."""
    if isinstance(expr, Atom):
        return free_vars(expr)
    if isinstance(expr, Not):
        return frozenset()
    return frozenset().union(*(positive_vars(c) for c in expr.children))


def check_safe(expr: Expr) -> None:
    unbound = free_vars(expr) - positive_vars(expr)
    if unbound:
        names = ", ".join(f"${v}" for v in sorted(unbound))
        raise UnboundNegationError(f"variables only used under not(): {names}")


@dataclass(frozen=True, order=True)
class Binding:
    assignment: Tuple[Tuple[str, int], ...]
    times: Tuple[float, ...]

    def get(self, var: str) -> int:
        return dict(self.assignment)[var]


class AtomEvaluator:
    """Evaluates atoms on concrete object ids, with memoization."""

    def __init__(self, scenario: Scenario, step_seconds: float = STEP_SECONDS):
        self.scenario = scenario
        self.step_seconds = step_seconds
        self.lanes = scenario.lane_centers()
        self._cache: Dict[Tuple[Atom, Tuple[int, ...]], Optional[FrozenSet[float]]] = {}

    def __call__(self, a: Atom, ids: Tuple[int, ...]) -> Optional[FrozenSet[float]]:
        """Witness times when the atom holds, ``None`` when it does not."""
        key = (a, ids)
        if key not in self._cache:
            self._cache[key] = self._eval(a, ids)
        return self._cache[key]

    def _eval(self, a: Atom, ids: Tuple[int, ...]) -> Optional[FrozenSet[float]]:
        tracks = self.scenario.track_by_id
        if any(i not in tracks for i in ids) or len(set(ids)) != len(ids):
            return None
        params = {p.key: p for p in a.params}
        dt = self.step_seconds
        if a.name == "type":
            return frozenset() if tracks[ids[0]].object_type.value == a.type_name else None
        if a.name == "lane_change":
            if not self.lanes:
                return None
            events = detect_lane_change(tracks[ids[0]], self.lanes, step_seconds=dt)
            return frozenset(e.time for e in events) or None
        if a.name == "crossed_paths":
            c = crossed_paths(tracks[ids[0]], tracks[ids[1]], dt)
            if c is None:
                return None
            if "gap" in params and not params["gap"].test(c.time_gap):
                return None
            if "heading" in params and not params["heading"].test(c.heading_diff):
                return None
            return frozenset((c.time_a, c.time_b))
        if a.name == "close_proximity":
            p = params["dist"]
            ta, tb = tracks[ids[0]], tracks[ids[1]]
            gaps = np.hypot(*(ta.xy - tb.xy).T)
            steps = [s for s in close_proximity(ta, tb, p.value) if p.test(gaps[s])]
            return frozenset(s * dt for s in steps) or None
        if a.name == "high_acceleration":
            p = params["accel"]
            acc = accelerations(tracks[ids[0]], dt)
            steps = [s for s in high_acceleration(tracks[ids[0]], p.value, dt) if p.test(acc[s])]
            return frozenset(s * dt for s in steps) or None
        raise ExpressionError(f"unknown predicate {a.name!r}")


Relation = Dict[Tuple[int, ...], FrozenSet[float]]


def _injective(assign: Sequence[int]) -> bool:
    return len(set(assign)) == len(assign)


def _assignments(vars_: Sequence[str], domain: Sequence[int]) -> Iterable[Tuple[int, ...]]:
    return itertools.permutations(domain, len(vars_))


def _extend(vars_: Tuple[str, ...], rel: Relation, target: Tuple[str, ...], domain: Sequence[int]) -> Relation:
    """Re-key a relation onto ``target`` variables, free ones ranging over the domain."""
    extra = [v for v in target if v not in vars_]
    pos = {v: i for i, v in enumerate(vars_)}
    out: Relation = {}
    for key, times in rel.items():
        used = set(key)
        for fill in itertools.permutations([d for d in domain if d not in used], len(extra)):
            values = dict(zip(extra, fill))
            out[tuple(key[pos[v]] if v in pos else values[v] for v in target)] = times
    return out


def _relation(expr: Expr, ev: AtomEvaluator, domain: Sequence[int]) -> Tuple[Tuple[str, ...], Relation]:
    if isinstance(expr, Atom):
        vars_ = tuple(sorted(free_vars(expr)))
        rel: Relation = {}
        for assign in _assignments(vars_, domain):
            env = dict(zip(vars_, assign))
            ids = tuple(env[s.name] if isinstance(s, Var) else s for s in expr.slots)
            times = ev(expr, ids)
            if times is not None:
                rel[assign] = times
        return vars_, rel
    if isinstance(expr, Not):
        vars_, inner = _relation(expr.child, ev, domain)
        return vars_, {a: frozenset() for a in _assignments(vars_, domain) if a not in inner}
    parts = [_relation(c, ev, domain) for c in expr.children]
    target = tuple(sorted(set().union(*(set(v) for v, _ in parts))))
    if isinstance(expr, Or):
        out: Relation = {}
        for vars_, rel in parts:
            for key, times in _extend(vars_, rel, target, domain).items():
                out[key] = out.get(key, frozenset()) | times
        return target, out
    # and: natural join, smallest relations first
    vars_, acc = parts[0]
    for other_vars, other in parts[1:]:
        joined_vars = tuple(sorted(set(vars_) | set(other_vars)))
        shared = [v for v in vars_ if v in other_vars]
        ia = {v: i for i, v in enumerate(vars_)}
        ib = {v: i for i, v in enumerate(other_vars)}
        by_shared: Dict[Tuple[int, ...], List[Tuple[Tuple[int, ...], FrozenSet[float]]]] = {}
        for key, times in other.items():
            by_shared.setdefault(tuple(key[ib[v]] for v in shared), []).append((key, times))
        new: Relation = {}
        for key, times in acc.items():
            for okey, otimes in by_shared.get(tuple(key[ia[v]] for v in shared), []):
                merged = tuple(key[ia[v]] if v in ia else okey[ib[v]] for v in joined_vars)
                if _injective(merged):
                    new[merged] = times | otimes
        vars_, acc = joined_vars, new
    return vars_, acc


def evaluate_predicate(expr: Expr, scenario: Scenario, step_seconds: float = STEP_SECONDS) -> List[Binding]:
    """All injective assignments of object ids to the expression's variables that satisfy it.

    Distinct variables always bind distinct objects. Each binding carries the
    witness times (seconds from scenario start) collected from its atoms.
    """
    check_safe(expr)
    domain = sorted(t.object_id for t in scenario.tracks)
    ev = AtomEvaluator(scenario, step_seconds)
    vars_, rel = _relation(expr, ev, domain)
    return sorted(
        Binding(tuple(zip(vars_, key)), tuple(sorted(times))) for key, times in rel.items()
    )
