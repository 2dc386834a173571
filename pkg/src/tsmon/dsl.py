"""Parser and serializer for the ``.tsp`` protocol description format.

A ``.tsp`` file describes one participant.  Declarations may appear in any
order; references are resolved after the whole file is read.

::

    // comments run to end of line
    enum LoginResult { success, failure }
    const n = 2
    var acks = 0
    assign A1: acks := acks + 1
    pred P1: acks == n

    state L0 = !{ unit vreq() [_; [A2]; []] : L1 [] }
    state L1 = !{ unit vreq() [0.5; [A2]; [P2]] : L2 [A3, A4] }
             + ?{ unit vack() [0.5; [A1]; [P1]] : L2 [A3, A4] }

Output sessions are written ``!{ ... }``, input sessions ``?{ ... }``, and a
mixed session joins one of each with ``+``.  A branch is
``ret name(params) [r; [pre...]; [preds...]] : Dest [post...]`` where the
ratio ``r`` is a literal in [0, 1] or ``_`` for an unmonitored action, and
``Dest`` is a state name or a decision ``<outcome: State, ...>``.  The
attribute block and the trailing post-assignment list may be omitted and
default to ``[_; []; []]`` and ``[]``.  A terminal state is written
``state X = end``.

Parsing is deterministic and aborts on the first error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    ActionSignature,
    Assignment,
    BinOp,
    Branch,
    Comparison,
    DecisionDest,
    Destination,
    Expr,
    IntLit,
    InternalStateDecl,
    Name,
    PlainDest,
    Predicate,
    ProtocolSpec,
    SourceSpan,
    StateBody,
    TypeRef,
    Typestate,
    Value,
)

__all__ = ["ParseError", "parse_protocol", "serialize_protocol"]

_KEYWORDS = {
    "state",
    "const",
    "var",
    "assign",
    "pred",
    "enum",
    "end",
    "true",
    "false",
    "unit",
    "boolean",
}

# Multi-character operators first so the lexer takes the longest match.
_PUNCT = (
    ":=",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "{",
    "}",
    "[",
    "]",
    "(",
    ")",
    "<",
    ">",
    "+",
    "-",
    "*",
    ",",
    ";",
    ":",
    "=",
    "!",
    "?",
    "_",
)


class ParseError(Exception):
    """A rejected input, with its location and error category.

    ``kind`` is one of ``syntax``, ``range``, ``reference`` or ``duplicate``.
    """

    def __init__(self, kind: str, message: str, span: SourceSpan):
        super().__init__(f"{span.line}:{span.column}: {message}")
        self.kind = kind
        self.message = message
        self.span = span


@dataclass(frozen=True)
class _Token:
    type: str  # "ident", "int", "float", "eof", or a punctuation literal
    text: str
    span: SourceSpan


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        span = SourceSpan(line, col, 1)
        # Identifiers are ASCII alphanumerics plus underscore.
        if ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z"):
            j = i
            while j < n and (
                text[j] == "_"
                or "a" <= text[j] <= "z"
                or "A" <= text[j] <= "Z"
                or "0" <= text[j] <= "9"
            ):
                j += 1
            word = text[i:j]
            if word == "_":
                tokens.append(_Token("_", word, span))
            else:
                tokens.append(_Token("ident", word, SourceSpan(line, col, j - i)))
            col += j - i
            i = j
            continue
        if "0" <= ch <= "9":
            j = i
            while j < n and "0" <= text[j] <= "9":
                j += 1
            if j < n and text[j] == "." and j + 1 < n and "0" <= text[j + 1] <= "9":
                j += 1
                while j < n and "0" <= text[j] <= "9":
                    j += 1
                tokens.append(_Token("float", text[i:j], SourceSpan(line, col, j - i)))
            else:
                tokens.append(_Token("int", text[i:j], SourceSpan(line, col, j - i)))
            col += j - i
            i = j
            continue
        for punct in _PUNCT:
            if text.startswith(punct, i):
                tokens.append(_Token(punct, punct, SourceSpan(line, col, len(punct))))
                col += len(punct)
                i += len(punct)
                break
        else:
            raise ParseError("syntax", f"unexpected character {ch!r}", span)
    tokens.append(_Token("eof", "", SourceSpan(line, col, 0)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0
        self.consts: dict[str, int] = {}
        self.vars: dict[str, Expr] = {}
        self.assigns: dict[str, Assignment] = {}
        self.preds: dict[str, Predicate] = {}
        self.enums: dict[str, tuple[str, ...]] = {}
        self.states: dict[str, StateBody] = {}
        self.state_spans: dict[str, SourceSpan] = {}
        # Spans remembered for the post-parse reference checks.
        self.decl_spans: dict[tuple[str, str], SourceSpan] = {}
        self.pending_refs: list[tuple[str, str, str, SourceSpan]] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, ttype: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.type == ttype and (text is None or tok.text == text)

    def expect(self, ttype: str, what: str) -> _Token:
        tok = self.peek()
        if tok.type != ttype:
            raise ParseError("syntax", f"expected {what}, found {tok.text or 'end of input'!r}", tok.span)
        return self.advance()

    def expect_ident(self, what: str) -> _Token:
        tok = self.peek()
        if tok.type != "ident" or tok.text in _KEYWORDS:
            raise ParseError("syntax", f"expected {what}, found {tok.text or 'end of input'!r}", tok.span)
        return self.advance()

    def keyword(self, word: str) -> bool:
        if self.at("ident", word):
            self.advance()
            return True
        return False

    # -- declarations ------------------------------------------------------

    def parse_file(self) -> ProtocolSpec:
        while not self.at("eof"):
            if self.keyword("const"):
                self.parse_const()
            elif self.keyword("var"):
                self.parse_var()
            elif self.keyword("assign"):
                self.parse_assign()
            elif self.keyword("pred"):
                self.parse_pred()
            elif self.keyword("enum"):
                self.parse_enum()
            elif self.keyword("state"):
                self.parse_state()
            else:
                tok = self.peek()
                raise ParseError(
                    "syntax",
                    f"expected a declaration, found {tok.text or 'end of input'!r}",
                    tok.span,
                )
        if not self.states:
            raise ParseError("syntax", "no states declared", self.peek().span)
        self.check_references()
        internal = InternalStateDecl(
            consts=self.consts,
            vars=self.vars,
            assigns=self.assigns,
            preds=self.preds,
            enums=self.enums,
        )
        ts = Typestate(states=self.states, state_spans=self.state_spans)
        return ProtocolSpec(typestate=ts, internal=internal)

    def declare(self, kind: str, name: _Token) -> None:
        # consts and vars share a namespace; assigns, preds and enums each
        # have their own.
        space = "name" if kind in ("const", "var") else kind
        key = (space, name.text)
        if key in self.decl_spans:
            raise ParseError("duplicate", f"{kind} {name.text!r} is already declared", name.span)
        self.decl_spans[key] = name.span

    def parse_const(self) -> None:
        name = self.expect_ident("constant name")
        self.declare("const", name)
        self.expect("=", "'='")
        negate = False
        if self.at("-"):
            self.advance()
            negate = True
        tok = self.expect("int", "integer literal")
        self.consts[name.text] = -int(tok.text) if negate else int(tok.text)

    def parse_var(self) -> None:
        name = self.expect_ident("variable name")
        self.declare("var", name)
        self.expect("=", "'='")
        self.vars[name.text] = self.parse_expr(refs_kind="init")

    def parse_assign(self) -> None:
        key = self.expect_ident("assignment key")
        self.declare("assign", key)
        self.expect(":", "':'")
        target = self.expect_ident("target variable")
        self.pending_refs.append(("target", target.text, key.text, target.span))
        self.expect(":=", "':='")
        expr = self.parse_expr(refs_kind="expr")
        self.assigns[key.text] = Assignment(target=target.text, expr=expr)

    def parse_pred(self) -> None:
        key = self.expect_ident("predicate key")
        self.declare("pred", key)
        self.expect(":", "':'")
        clauses = [self.parse_comparison()]
        while self.at("&&"):
            self.advance()
            clauses.append(self.parse_comparison())
        self.preds[key.text] = Predicate(clauses=tuple(clauses))

    def parse_enum(self) -> None:
        name = self.expect_ident("enum name")
        self.declare("enum", name)
        self.expect("{", "'{'")
        labels = [self.expect_ident("enum label")]
        label_spans = {labels[0].text: labels[0].span}
        while self.at(","):
            self.advance()
            tok = self.expect_ident("enum label")
            if tok.text in label_spans:
                raise ParseError("duplicate", f"duplicate enum label {tok.text!r}", tok.span)
            label_spans[tok.text] = tok.span
            labels.append(tok)
        self.expect("}", "'}'")
        self.enums[name.text] = tuple(t.text for t in labels)

    # -- expressions ---------------------------------------------------------

    def parse_comparison(self) -> Comparison:
        left = self.parse_expr(refs_kind="expr")
        tok = self.peek()
        if tok.type in ("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().type
        elif tok.type == "=":
            self.advance()
            op = "=="
        else:
            raise ParseError("syntax", f"expected a comparison operator, found {tok.text!r}", tok.span)
        right = self.parse_expr(refs_kind="expr")
        return Comparison(op=op, left=left, right=right)

    def parse_expr(self, refs_kind: str) -> Expr:
        left = self.parse_term(refs_kind)
        while self.peek().type in ("+", "-"):
            op = self.advance().type
            left = BinOp(op=op, left=left, right=self.parse_term(refs_kind))
        return left

    def parse_term(self, refs_kind: str) -> Expr:
        left = self.parse_factor(refs_kind)
        while self.at("*"):
            self.advance()
            left = BinOp(op="*", left=left, right=self.parse_factor(refs_kind))
        return left

    def parse_factor(self, refs_kind: str) -> Expr:
        tok = self.peek()
        if tok.type == "int":
            self.advance()
            return IntLit(int(tok.text))
        if tok.type == "-":
            self.advance()
            lit = self.expect("int", "integer literal")
            return IntLit(-int(lit.text))
        if tok.type == "(":
            self.advance()
            inner = self.parse_expr(refs_kind)
            self.expect(")", "')'")
            return inner
        if tok.type == "ident" and tok.text not in _KEYWORDS:
            self.advance()
            self.pending_refs.append((refs_kind, tok.text, "", tok.span))
            return Name(tok.text)
        raise ParseError("syntax", f"expected an expression, found {tok.text or 'end of input'!r}", tok.span)

    # -- states --------------------------------------------------------------

    def parse_state(self) -> None:
        name = self.expect_ident("state name")
        if name.text in self.states:
            raise ParseError("duplicate", f"state {name.text!r} is already declared", name.span)
        self.expect("=", "'='")
        if self.keyword("end"):
            body = StateBody()
        else:
            first_kind, first = self.parse_session()
            in_branches = first if first_kind == "in" else ()
            out_branches = first if first_kind == "out" else ()
            if self.at("+"):
                self.advance()
                second_kind, second = self.parse_session()
                if second_kind == first_kind:
                    raise ParseError(
                        "syntax",
                        "a mixed session combines one input and one output session",
                        self.peek().span,
                    )
                if second_kind == "in":
                    in_branches = second
                else:
                    out_branches = second
            self.check_branch_names(in_branches + out_branches)
            body = StateBody(in_branches=in_branches, out_branches=out_branches)
        self.states[name.text] = body
        self.state_spans[name.text] = name.span

    def check_branch_names(self, branches: tuple[Branch, ...]) -> None:
        seen: dict[str, SourceSpan] = {}
        for br in branches:
            span = br.span or SourceSpan(0, 0)
            if br.action.name in seen:
                raise ParseError(
                    "duplicate", f"duplicate action {br.action.name!r} in state", span
                )
            seen[br.action.name] = span

    def parse_session(self) -> tuple[str, tuple[Branch, ...]]:
        tok = self.peek()
        if tok.type == "!":
            kind = "out"
        elif tok.type == "?":
            kind = "in"
        else:
            raise ParseError(
                "syntax", f"expected '!{{' or '?{{', found {tok.text or 'end of input'!r}", tok.span
            )
        self.advance()
        self.expect("{", "'{'")
        if self.at("}"):
            raise ParseError(
                "syntax", "empty session; write 'end' for a terminal state", self.peek().span
            )
        branches = [self.parse_branch()]
        while self.at(","):
            self.advance()
            branches.append(self.parse_branch())
        self.expect("}", "'}'")
        return kind, tuple(branches)

    def parse_type(self) -> TypeRef:
        tok = self.peek()
        if tok.type != "ident":
            raise ParseError("syntax", f"expected a type, found {tok.text or 'end of input'!r}", tok.span)
        self.advance()
        if tok.text == "unit":
            return TypeRef("unit")
        if tok.text == "boolean":
            return TypeRef("boolean")
        if tok.text in _KEYWORDS:
            raise ParseError("syntax", f"expected a type, found {tok.text!r}", tok.span)
        self.pending_refs.append(("enum", tok.text, "", tok.span))
        return TypeRef("enum", tok.text)

    def parse_branch(self) -> Branch:
        rtype = self.parse_type()
        name = self.expect_ident("action name")
        self.expect("(", "'('")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.parse_param())
            while self.at(","):
                self.advance()
                params.append(self.parse_param())
        self.expect(")", "')'")
        ratio: Optional[float] = None
        pre: tuple[str, ...] = ()
        preds: tuple[str, ...] = ()
        if self.at("["):
            self.advance()
            ratio = self.parse_ratio()
            self.expect(";", "';'")
            pre = self.parse_key_list("assign")
            self.expect(";", "';'")
            preds = self.parse_key_list("pred")
            self.expect("]", "']'")
        self.expect(":", "':'")
        dest = self.parse_dest(rtype)
        post: tuple[str, ...] = ()
        if self.at("["):
            post = self.parse_key_list("assign")
        return Branch(
            action=ActionSignature(name.text, tuple(params), rtype),
            ratio=ratio,
            pre_assigns=pre,
            preds=preds,
            dest=dest,
            post_assigns=post,
            span=name.span,
        )

    def parse_param(self) -> str:
        tok = self.peek()
        if tok.type != "ident":
            raise ParseError("syntax", f"expected a parameter type, found {tok.text!r}", tok.span)
        self.advance()
        if tok.text not in ("unit", "boolean") and tok.text in _KEYWORDS:
            raise ParseError("syntax", f"expected a parameter type, found {tok.text!r}", tok.span)
        return tok.text

    def parse_ratio(self) -> Optional[float]:
        tok = self.peek()
        if tok.type == "_":
            self.advance()
            return None
        if tok.type in ("int", "float"):
            self.advance()
            value = float(tok.text)
            if not 0.0 <= value <= 1.0:
                raise ParseError("range", f"ratio {tok.text} outside [0, 1]", tok.span)
            return value
        raise ParseError("syntax", f"expected a ratio or '_', found {tok.text!r}", tok.span)

    def parse_key_list(self, kind: str) -> tuple[str, ...]:
        self.expect("[", "'['")
        keys: list[str] = []
        if not self.at("]"):
            tok = self.expect_ident(f"{kind} key")
            self.pending_refs.append((kind, tok.text, "", tok.span))
            keys.append(tok.text)
            while self.at(","):
                self.advance()
                tok = self.expect_ident(f"{kind} key")
                self.pending_refs.append((kind, tok.text, "", tok.span))
                keys.append(tok.text)
        self.expect("]", "']'")
        return tuple(keys)

    def parse_dest(self, rtype: TypeRef) -> Destination:
        if self.at("<"):
            self.advance()
            cases = [self.parse_case()]
            outcomes = {cases[0][0]}
            while self.at(","):
                self.advance()
                case = self.parse_case()
                if case[0] in outcomes:
                    raise ParseError(
                        "duplicate", f"duplicate decision outcome {self._outcome_text(case[0])!r}", case[2]
                    )
                outcomes.add(case[0])
                cases.append(case)
            self.expect(">", "'>'")
            return DecisionDest(cases=tuple((o, s) for o, s, _ in cases))
        tok = self.expect_ident("a destination state or '<'")
        return PlainDest(state=tok.text)

    @staticmethod
    def _outcome_text(outcome: Value) -> str:
        if outcome is True:
            return "true"
        if outcome is False:
            return "false"
        return str(outcome)

    def parse_case(self) -> tuple[Value, str, SourceSpan]:
        tok = self.peek()
        outcome: Value
        if tok.type == "ident" and tok.text == "true":
            outcome = True
        elif tok.type == "ident" and tok.text == "false":
            outcome = False
        elif tok.type == "ident" and tok.text not in _KEYWORDS:
            outcome = tok.text
        else:
            raise ParseError(
                "syntax", f"expected a decision outcome, found {tok.text or 'end of input'!r}", tok.span
            )
        self.advance()
        self.expect(":", "':'")
        state = self.expect_ident("a destination state")
        return outcome, state.text, tok.span

    # -- reference resolution ------------------------------------------------

    def check_references(self) -> None:
        declared = self.consts.keys() | self.vars.keys()
        for kind, name, ctx, span in self.pending_refs:
            if kind == "init":
                if name in self.vars:
                    raise ParseError(
                        "reference",
                        f"initializers may only reference constants, {name!r} is a variable",
                        span,
                    )
                if name not in self.consts:
                    raise ParseError("reference", f"undeclared constant {name!r}", span)
            elif kind == "expr":
                if name not in declared:
                    raise ParseError("reference", f"undeclared name {name!r}", span)
            elif kind == "target":
                if name in self.consts:
                    raise ParseError(
                        "reference", f"assignment target {name!r} is a constant", span
                    )
                if name not in self.vars:
                    raise ParseError("reference", f"undeclared variable {name!r}", span)
            elif kind == "assign":
                if name not in self.assigns:
                    raise ParseError("reference", f"undeclared assignment key {name!r}", span)
            elif kind == "pred":
                if name not in self.preds:
                    raise ParseError("reference", f"undeclared predicate key {name!r}", span)
            elif kind == "enum":
                if name not in self.enums:
                    raise ParseError("reference", f"undeclared enum {name!r}", span)


def parse_protocol(text: str) -> ProtocolSpec:
    """Parse ``.tsp`` source into a structurally valid :class:`ProtocolSpec`.

    Raises :class:`ParseError` on the first syntax, range, reference or
    duplicate-name error.  Well-formedness rules are not checked here.
    """
    return _Parser(text).parse_file()


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2}


def _expr_text(expr: Expr, ctx: int = 0) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, Name):
        return expr.ident
    prec = _PREC[expr.op]
    text = f"{_expr_text(expr.left, prec)} {expr.op} {_expr_text(expr.right, prec + 1)}"
    return f"({text})" if prec < ctx else text


def _pred_text(pred: Predicate) -> str:
    return " && ".join(
        f"{_expr_text(c.left)} {c.op} {_expr_text(c.right)}" for c in pred.clauses
    )


def _type_text(tref: TypeRef) -> str:
    return tref.enum_name if tref.kind == "enum" else tref.kind


def _outcome_text(outcome: Value) -> str:
    if outcome is True:
        return "true"
    if outcome is False:
        return "false"
    return str(outcome)


def _dest_text(dest: Destination) -> str:
    if isinstance(dest, PlainDest):
        return dest.state
    cases = ", ".join(f"{_outcome_text(o)}: {s}" for o, s in dest.cases)
    return f"<{cases}>"


def _ratio_text(ratio: Optional[float]) -> str:
    return "_" if ratio is None else repr(ratio)


def _branch_text(br: Branch) -> str:
    params = ", ".join(br.action.param_types)
    attrs = f"[{_ratio_text(br.ratio)}; [{', '.join(br.pre_assigns)}]; [{', '.join(br.preds)}]]"
    post = f"[{', '.join(br.post_assigns)}]"
    return (
        f"{_type_text(br.action.return_type)} {br.action.name}({params}) "
        f"{attrs} : {_dest_text(br.dest)} {post}"
    )


def _session_text(marker: str, branches: tuple[Branch, ...]) -> str:
    return f"{marker}{{ {', '.join(_branch_text(b) for b in branches)} }}"


def _body_text(body: StateBody) -> str:
    parts = []
    if body.out_branches:
        parts.append(_session_text("!", body.out_branches))
    if body.in_branches:
        parts.append(_session_text("?", body.in_branches))
    if not parts:
        return "end"
    return " + ".join(parts)


def serialize_protocol(spec: ProtocolSpec) -> str:
    """Render a spec as canonical ``.tsp`` text.

    Sugared input forms are expanded (every branch carries the full
    attribute block and post-assignment list), so
    ``parse_protocol(serialize_protocol(s))`` is structurally equal to ``s``.
    """
    lines: list[str] = []
    internal = spec.internal
    for name, labels in internal.enums.items():
        lines.append(f"enum {name} {{ {', '.join(labels)} }}")
    for name, value in internal.consts.items():
        lines.append(f"const {name} = {value}")
    for name, init in internal.vars.items():
        lines.append(f"var {name} = {_expr_text(init)}")
    for key, assign in internal.assigns.items():
        lines.append(f"assign {key}: {assign.target} := {_expr_text(assign.expr)}")
    for key, pred in internal.preds.items():
        lines.append(f"pred {key}: {_pred_text(pred)}")
    if lines:
        lines.append("")
    for name, body in spec.typestate.states.items():
        lines.append(f"state {name} = {_body_text(body)}")
    return "\n".join(lines) + "\n"
