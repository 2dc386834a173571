"""Core domain model for probabilistic typestates with internal mutable state.

A protocol participant is described by a :class:`ProtocolSpec`: a typestate
(named states offering input/output action branches) plus declarations of the
internal integer state (constants, variables, named assignments, named
predicates) and enumerations used as action return types.

All values are immutable after construction and safe to share between
threads.  Source locations (:class:`SourceSpan`) are carried for diagnostics
but excluded from structural equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

__all__ = [
    "ActionAttrs",
    "ActionSignature",
    "Assignment",
    "BinOp",
    "Branch",
    "Comparison",
    "DecisionDest",
    "Destination",
    "Expr",
    "IntLit",
    "InternalStateDecl",
    "Name",
    "PlainDest",
    "Predicate",
    "ProtocolSpec",
    "SourceSpan",
    "SpecError",
    "StateBody",
    "TypeRef",
    "Typestate",
    "UndefinedActionError",
    "UnknownEnumError",
    "Value",
    "actions_of",
    "decisions_of",
    "dest_of",
    "enum_labels",
    "expr_names",
    "attrs",
    "post_assigns_of",
    "pre_assigns_of",
    "preds_of",
    "ratio_of",
    "ratios_of",
    "resolve_state",
    "BOOLEAN",
    "UNIT",
    "enum_type",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# A transition value: None for actions with a plain destination, True/False
# for boolean outcomes, a label string for enumeration outcomes.
Value = Union[None, bool, str]


class SpecError(Exception):
    """Base class for semantic errors raised while querying a spec."""


class UndefinedActionError(SpecError):
    """Raised when an action is looked up in a state that does not offer it."""


class UnknownEnumError(SpecError):
    """Raised when a type refers to an enumeration that is not declared."""


def _require_ident(name: str, what: str) -> None:
    if not _IDENT_RE.match(name):
        raise ValueError(f"{what} {name!r} is not a valid identifier")


@dataclass(frozen=True)
class SourceSpan:
    """1-based position of a token in a source file."""

    line: int
    column: int
    length: int = 0


# --------------------------------------------------------------------------
# Integer expressions and predicates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: "Expr"
    right: "Expr"

    def __post_init__(self) -> None:
        if self.op not in ("+", "-", "*"):
            raise ValueError(f"unsupported operator {self.op!r}")


Expr = Union[IntLit, Name, BinOp]


def expr_names(expr: Expr) -> frozenset[str]:
    """Set of identifiers referenced by an integer expression."""
    if isinstance(expr, IntLit):
        return frozenset()
    if isinstance(expr, Name):
        return frozenset((expr.ident,))
    return expr_names(expr.left) | expr_names(expr.right)


_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in _CMP_OPS:
            raise ValueError(f"unsupported comparison {self.op!r}")


@dataclass(frozen=True)
class Predicate:
    """A conjunction of integer comparisons over the internal state."""

    clauses: tuple[Comparison, ...]

    def __post_init__(self) -> None:
        if not self.clauses:
            raise ValueError("predicate needs at least one comparison")

    def names(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for c in self.clauses:
            out |= expr_names(c.left) | expr_names(c.right)
        return out


@dataclass(frozen=True)
class Assignment:
    """A named update rule `target := expr` for one internal variable."""

    target: str
    expr: Expr

    def __post_init__(self) -> None:
        _require_ident(self.target, "assignment target")


# --------------------------------------------------------------------------
# Typestate structure
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeRef:
    """Return type of an action: unit, boolean, or a declared enumeration."""

    kind: str  # "unit" | "boolean" | "enum"
    enum_name: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("unit", "boolean", "enum"):
            raise ValueError(f"unknown type kind {self.kind!r}")
        if self.kind == "enum":
            if not self.enum_name:
                raise ValueError("enum type needs an enumeration name")
            _require_ident(self.enum_name, "enum name")
        elif self.enum_name is not None:
            raise ValueError(f"{self.kind} type cannot carry an enum name")


UNIT = TypeRef("unit")
BOOLEAN = TypeRef("boolean")


def enum_type(name: str) -> TypeRef:
    return TypeRef("enum", name)


@dataclass(frozen=True)
class ActionSignature:
    name: str
    param_types: tuple[str, ...] = ()
    return_type: TypeRef = UNIT

    def __post_init__(self) -> None:
        _require_ident(self.name, "action name")


@dataclass(frozen=True)
class PlainDest:
    """Unconditional destination state."""

    state: str


@dataclass(frozen=True)
class DecisionDest:
    """Destination chosen by the action's returned value.

    ``cases`` is an ordered (outcome, state) sequence; outcomes are booleans
    or enumeration labels and must be pairwise distinct.
    """

    cases: tuple[tuple[Value, str], ...]

    def __post_init__(self) -> None:
        if not self.cases:
            raise ValueError("decision needs at least one outcome")
        seen = set()
        for outcome, _state in self.cases:
            if outcome is None:
                raise ValueError("decision outcomes cannot be empty")
            if outcome in seen:
                raise ValueError(f"duplicate decision outcome {outcome!r}")
            seen.add(outcome)

    def target(self, outcome: Value) -> Optional[str]:
        for o, s in self.cases:
            if o == outcome:
                return s
        return None

    def outcomes(self) -> frozenset[Value]:
        return frozenset(o for o, _ in self.cases)


Destination = Union[PlainDest, DecisionDest]


@dataclass(frozen=True)
class Branch:
    """One action offered by a state.

    ``ratio`` is the expected share of the state's monitored executions taken
    by this action, or ``None`` for an unmonitored action.  ``pre_assigns``
    and ``post_assigns`` name assignment rules applied before predicate
    evaluation and after a triggered transition; ``preds`` names the
    predicates gating the transition.
    """

    action: ActionSignature
    ratio: Optional[float]
    pre_assigns: tuple[str, ...]
    preds: tuple[str, ...]
    dest: Destination
    post_assigns: tuple[str, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.ratio is not None and not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio {self.ratio!r} outside [0, 1]")


@dataclass(frozen=True)
class StateBody:
    """Input and output branches of one state.

    Both sides non-empty means a mixed session; both empty is an explicit
    terminal state.  Action names must be unique across the combined set.
    """

    in_branches: tuple[Branch, ...] = ()
    out_branches: tuple[Branch, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for br in self.in_branches + self.out_branches:
            if br.action.name in seen:
                raise ValueError(f"duplicate action {br.action.name!r} in state")
            seen.add(br.action.name)

    def branches(self) -> tuple[Branch, ...]:
        return self.in_branches + self.out_branches

    def find(self, action: str) -> Optional[tuple[Branch, bool]]:
        """Return (branch, is_input) for the named action, if offered."""
        for br in self.in_branches:
            if br.action.name == action:
                return br, True
        for br in self.out_branches:
            if br.action.name == action:
                return br, False
        return None

    @property
    def terminal(self) -> bool:
        return not self.in_branches and not self.out_branches


@dataclass(frozen=True)
class Typestate:
    """Ordered map of state names to bodies; the first entry is the start."""

    states: dict[str, StateBody]
    state_spans: dict[str, SourceSpan] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if not self.states:
            raise ValueError("typestate needs at least one state")
        for name in self.states:
            _require_ident(name, "state name")

    @property
    def start(self) -> str:
        return next(iter(self.states))


@dataclass(frozen=True)
class InternalStateDecl:
    """Declarations of the internal state and named rules.

    ``consts`` are read-only integers, ``vars`` map to initializer
    expressions over constants and literals, ``assigns``/``preds`` are the
    named rules referenced from branches, and ``enums`` declares label sets
    for enumeration return types.
    """

    consts: dict[str, int] = field(default_factory=dict)
    vars: dict[str, Expr] = field(default_factory=dict)
    assigns: dict[str, Assignment] = field(default_factory=dict)
    preds: dict[str, Predicate] = field(default_factory=dict)
    enums: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        overlapping = self.consts.keys() & self.vars.keys()
        if overlapping:
            raise ValueError(f"names declared as both const and var: {sorted(overlapping)}")
        declared = self.consts.keys() | self.vars.keys()
        for name, init in self.vars.items():
            loose = expr_names(init) - self.consts.keys()
            if loose:
                raise ValueError(
                    f"initializer of {name!r} may only use constants, got {sorted(loose)}"
                )
        for key, assign in self.assigns.items():
            if assign.target not in self.vars:
                raise ValueError(
                    f"assignment {key!r} targets {assign.target!r}, which is not a variable"
                )
            loose = expr_names(assign.expr) - declared
            if loose:
                raise ValueError(f"assignment {key!r} references undeclared {sorted(loose)}")
        for key, pred in self.preds.items():
            loose = pred.names() - declared
            if loose:
                raise ValueError(f"predicate {key!r} references undeclared {sorted(loose)}")
        for name, labels in self.enums.items():
            if not labels:
                raise ValueError(f"enum {name!r} has no labels")
            if len(set(labels)) != len(labels):
                raise ValueError(f"enum {name!r} has duplicate labels")


@dataclass(frozen=True)
class ProtocolSpec:
    """One participant: a typestate plus its internal-state declarations."""

    typestate: Typestate
    internal: InternalStateDecl = field(default_factory=InternalStateDecl)

    def __post_init__(self) -> None:
        internal = self.internal
        for state, body in self.typestate.states.items():
            for br in body.branches():
                ctx = f"state {state!r}, action {br.action.name!r}"
                for key in br.pre_assigns + br.post_assigns:
                    if key not in internal.assigns:
                        raise ValueError(f"{ctx}: undeclared assignment key {key!r}")
                for key in br.preds:
                    if key not in internal.preds:
                        raise ValueError(f"{ctx}: undeclared predicate key {key!r}")
                rt = br.action.return_type
                if rt.kind == "enum" and rt.enum_name not in internal.enums:
                    raise ValueError(f"{ctx}: undeclared enum {rt.enum_name!r}")


# --------------------------------------------------------------------------
# Accessors
# --------------------------------------------------------------------------


class ActionAttrs(NamedTuple):
    """Attributes of one action in one state."""

    ratio: Optional[float]
    dest: Destination
    pre_assigns: tuple[str, ...]
    post_assigns: tuple[str, ...]
    preds: tuple[str, ...]


def resolve_state(ts: Typestate, state: str) -> Union[StateBody, str]:
    """Return the body bound to ``state``, or the name itself if undefined.

    Total by definition: unresolved names are returned verbatim so that
    dangling destinations behave as opaque terminal states.
    """
    body = ts.states.get(state)
    return body if body is not None else state


def actions_of(ts: Typestate, state: str) -> frozenset[str]:
    """Names of all actions offered by a state; empty for unresolved names."""
    body = resolve_state(ts, state)
    if isinstance(body, str):
        return frozenset()
    return frozenset(br.action.name for br in body.branches())


def attrs(ts: Typestate, state: str, action: str) -> ActionAttrs:
    """Attributes of ``action`` in ``state``, whichever session side holds it."""
    body = resolve_state(ts, state)
    found = body.find(action) if isinstance(body, StateBody) else None
    if found is None:
        raise UndefinedActionError(f"state {state!r} offers no action {action!r}")
    br, _ = found
    return ActionAttrs(br.ratio, br.dest, br.pre_assigns, br.post_assigns, br.preds)


def ratio_of(ts: Typestate, state: str, action: str) -> Optional[float]:
    return attrs(ts, state, action).ratio


def dest_of(ts: Typestate, state: str, action: str) -> Destination:
    return attrs(ts, state, action).dest


def pre_assigns_of(ts: Typestate, state: str, action: str) -> tuple[str, ...]:
    return attrs(ts, state, action).pre_assigns


def post_assigns_of(ts: Typestate, state: str, action: str) -> tuple[str, ...]:
    return attrs(ts, state, action).post_assigns


def preds_of(ts: Typestate, state: str, action: str) -> tuple[str, ...]:
    return attrs(ts, state, action).preds


def decisions_of(ts: Typestate, state: str, action: str) -> frozenset[Value]:
    """Outcome set of an action: its decision labels, or {None} when plain."""
    dest = dest_of(ts, state, action)
    if isinstance(dest, DecisionDest):
        return dest.outcomes()
    return frozenset((None,))


def enum_labels(spec: ProtocolSpec, tref: TypeRef) -> frozenset[Value]:
    """Observable values of a return type: labels, {True, False}, or {None}."""
    if tref.kind == "boolean":
        return frozenset((True, False))
    if tref.kind == "enum":
        labels = spec.internal.enums.get(tref.enum_name or "")
        if labels is None:
            raise UnknownEnumError(f"enum {tref.enum_name!r} is not declared")
        return frozenset(labels)
    return frozenset((None,))


def ratios_of(ts: Typestate, state: str) -> list[float]:
    """Numeric ratios declared in a state, unmonitored entries excluded."""
    body = resolve_state(ts, state)
    if isinstance(body, str):
        return []
    return [br.ratio for br in body.branches() if br.ratio is not None]
