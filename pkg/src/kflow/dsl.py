"""The ``.kf`` protocol description format.

Grammar::

    document  := "protocol" NAME "{" clause* "}"
    clause    := "roles" VAR* ";"
               | "options" WORD* ";"
               | "primitives" WORD* ";"
               | "atoms" (WORD ":" ("identity" | "seed" | "generic"))* ";"
               | "secret" WORD* ";"
               | "rule" WORD ":" "premises" "{" [template ("," template)*] "}"
                     "conclude" template ["where" guards] ";"
               | "theorem" WORD ":" "exists" VAR* "." [guards] ";"
    guards    := guard ("," guard)*
    guard     := WORD "(" [arg ("," arg)*] ")"
    template  := VAR | atom
               | "enc" "(" "key" "=" template "," "plain" "=" set ")"
               | "nonce" "(" "seed" "=" template "," "id" "=" template ")"
               | ("hash" | "tuple") set
               | "puf" "(" template ")"
    set       := "{" template ("," template)* "}" | "(" VAR ")"

Variables start with an upper-case letter, atoms and keywords with a
lower-case one. ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .engine import TheoremSpec
from .patterns import GUARD_SIGNATURES, KIND_WORDS, Const, Ctor, Guard, SetLit, SortError, Var, guard_vars, template_vars
from .protocols import ProtocolSpec
from .rules import PRIMITIVES, RuleSchema
from .terms import AtomKind, Kind

OPTIONS = ("IdentitiesAreKeys", "PublicKeyCryptography")
CTORS = ("enc", "nonce", "hash", "tuple", "puf")
# guards that give a variable a finite domain on their own
DECLARING = ("principal", "honest", "oscar", "seed", "fresh", "param")
MAX_DEPTH = 64


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    start: int
    end: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.start}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str
    code: str
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.code}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, punct, eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"(?P<ws>[ \t\r\n]+)|(?P<comment>#[^\n]*)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>[0-9]+)|(?P<punct>[{}(),;:=.])")


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, file: str):
        self.file = file
        self.diags: list[ParseDiagnostic] = []
        self.toks: list[Token] = []
        self.i = 0
        self.depth = 0
        self.var_tokens: dict[str, Token] = {}
        self.consts: list[Token] = []

    # -- diagnostics ----------------------------------------------------------

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.file, tok.line, tok.col, tok.col + max(len(tok.text), 1))

    def error(self, code: str, message: str, tok: Token) -> None:
        self.diags.append(ParseDiagnostic("error", code, message, self.span(tok)))

    def fail(self, message: str, tok: Token | None = None):
        self.error("SyntaxError", message, tok or self.peek())
        raise _Abort

    # -- lexing -----------------------------------------------------------------

    def _lex(self, text: str) -> list[Token]:
        out = []
        pos, line, line_start = 0, 1, 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                tok = Token("punct", text[pos], line, pos - line_start + 1)
                self.fail(f"unexpected character {text[pos]!r}", tok)
            kind = m.lastgroup
            if kind in ("ident", "int", "punct"):
                out.append(Token(kind, m.group(), line, pos - line_start + 1))
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex("\n") + 1
            pos = m.end()
        out.append(Token("eof", "", line, pos - line_start + 1))
        return out

    # -- token helpers ----------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i = min(self.i + 1, len(self.toks) - 1)
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("ident", "punct") and t.text == text

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            shown = t.text or "end of input"
            self.fail(f"expected {text!r}, found {shown!r}", t)
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "ident":
            self.fail(f"expected {what}, found {t.text or 'end of input'!r}", t)
        return self.next()

    def var(self) -> Token:
        t = self.ident("variable")
        if not t.text[0].isupper():
            self.fail(f"variables start with an upper-case letter: {t.text!r}", t)
        return t

    # -- document ------------------------------------------------------------------

    def document(self):
        if self.peek().kind == "eof":
            self.fail("missing protocol header")
        self.expect("protocol")
        name = self.ident("protocol name").text
        self.expect("{")
        roles, options, prims, atoms, secrets = [], [], [], [], []
        rules, theorems = [], []
        seen = set()
        while not self.at("}"):
            t = self.peek()
            if t.kind == "eof":
                self.fail("missing '}' at end of protocol", t)
            kw = self.ident("clause keyword")
            if kw.text in ("roles", "options", "primitives", "atoms", "secret"):
                if kw.text in seen:
                    self.fail(f"duplicate {kw.text} clause", kw)
                seen.add(kw.text)
            if kw.text == "roles":
                while not self.at(";"):
                    roles.append(self.var())
            elif kw.text == "options":
                while not self.at(";"):
                    options.append(self.ident("option"))
            elif kw.text == "primitives":
                while not self.at(";"):
                    prims.append(self.ident("primitive"))
            elif kw.text == "atoms":
                while not self.at(";"):
                    label = self.ident("atom label")
                    self.expect(":")
                    kind = self.ident("atom kind")
                    atoms.append((label, kind))
            elif kw.text == "secret":
                while not self.at(";"):
                    secrets.append(self.ident("secret"))
            elif kw.text == "rule":
                rules.append(self.rule())
                continue
            elif kw.text == "theorem":
                theorems.append(self.theorem())
                continue
            else:
                self.fail(f"unknown clause {kw.text!r}", kw)
            self.expect(";")
        self.expect("}")
        if self.peek().kind != "eof":
            self.fail("unexpected text after protocol")
        return name, roles, options, prims, atoms, secrets, rules, theorems

    def rule(self):
        label = self.ident("rule label")
        self.expect(":")
        self.expect("premises")
        self.expect("{")
        premises = []
        if not self.at("}"):
            premises.append(self.template())
            while self.at(","):
                self.next()
                premises.append(self.template())
        self.expect("}")
        self.expect("conclude")
        conclusion = self.template()
        guards = []
        if self.at("where"):
            self.next()
            guards = self.guards()
        self.expect(";")
        return label, premises, conclusion, guards

    def theorem(self):
        label = self.ident("theorem label")
        self.expect(":")
        self.expect("exists")
        variables = []
        while not self.at("."):
            variables.append(self.var())
        self.expect(".")
        guards = [] if self.at(";") else self.guards()
        self.expect(";")
        return label, variables, guards

    def guards(self):
        out = [self.guard()]
        while self.at(","):
            self.next()
            out.append(self.guard())
        return out

    def guard(self):
        name = self.ident("guard")
        sig = GUARD_SIGNATURES.get(name.text)
        if sig is None:
            self.fail(f"unknown guard {name.text!r}", name)
        self.expect("(")
        args = []
        for pos, kind in enumerate(sig):
            if pos:
                self.expect(",")
            if self.at(")"):
                self.fail(f"{name.text} takes {len(sig)} argument(s)", self.peek())
            if kind == "v":
                t = self.var()
                args.append(Var(t.text))
            elif kind == "t":
                args.append(self.template())
            elif kind == "w":
                t = self.ident("word")
                if name.text == "kind" and t.text not in KIND_WORDS:
                    self.fail(f"unknown kind {t.text!r}", t)
                args.append(t.text)
            else:
                t = self.peek()
                if t.kind != "int":
                    self.fail("expected an integer", t)
                self.next()
                args.append(int(t.text))
        if not self.at(")"):
            self.fail(f"{name.text} takes {len(sig)} argument(s)", self.peek())
        self.next()
        return name, Guard(name.text, tuple(args))

    # -- templates -----------------------------------------------------------------

    def template(self):
        self.depth += 1
        try:
            if self.depth > MAX_DEPTH:
                self.fail("template nested too deeply")
            return self._template()
        finally:
            self.depth -= 1

    def _template(self):
        t = self.ident("template")
        word = t.text
        if word[0].isupper():
            self._note_var(t)
            return Var(word)
        if word in CTORS and (self.at("(") or self.at("{")):
            if word == "enc":
                self.expect("(")
                self.expect("key")
                self.expect("=")
                key = self.template()
                self.expect(",")
                self.expect("plain")
                self.expect("=")
                plain = self.set_arg()
                self.expect(")")
                return Ctor(Kind.ENC, (key, plain))
            if word == "nonce":
                self.expect("(")
                self.expect("seed")
                self.expect("=")
                seed = self.template()
                self.expect(",")
                self.expect("id")
                self.expect("=")
                ident = self.template()
                self.expect(")")
                return Ctor(Kind.NONCE, (seed, ident))
            if word == "puf":
                self.expect("(")
                arg = self.template()
                self.expect(")")
                return Ctor(Kind.PUF, (arg,))
            return Ctor(KIND_WORDS[word], (self.set_arg(),))
        if word in CTORS:
            self.fail(f"{word} needs arguments", self.peek())
        self.consts.append(t)
        return Const(word)

    def set_arg(self):
        if self.at("("):
            self.next()
            t = self.var()
            self._note_var(t)
            self.expect(")")
            return Var(t.text)
        if self.at("{"):
            self.next()
            items = [self.template()]
            while self.at(","):
                self.next()
                items.append(self.template())
            self.expect("}")
            return SetLit(tuple(items))
        if self.peek().kind == "ident" and self.peek().text[0].isupper():
            t = self.next()
            self._note_var(t)
            return Var(t.text)
        self.fail("expected a set: '{...}' or a set variable")

    def _note_var(self, tok: Token) -> None:
        self.var_tokens.setdefault(tok.text, tok)


def parse(text, file: str = "<input>") -> ProtocolSpec:
    """Parse a ``.kf`` document; raises :class:`ParseError` with spanned
    diagnostics on any problem."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(
                [ParseDiagnostic("error", "SyntaxError", f"input is not UTF-8 ({e.reason})", SourceSpan(file, 1, 1, 2))]
            ) from None
    p = _Parser(file)
    try:
        p.toks = p._lex(text)
        name, roles, options, prims, atoms, secrets, rules, theorems = p.document()
    except _Abort:
        raise ParseError(p.diags) from None
    return _build(p, name, roles, options, prims, atoms, secrets, rules, theorems)


def _build(p: _Parser, name, roles, options, prims, atoms, secrets, rules, theorems) -> ProtocolSpec:
    role_names = [t.text for t in roles]
    for t in options:
        if t.text not in OPTIONS:
            p.error("SyntaxError", f"unknown option {t.text!r}", t)
    for t in prims:
        if t.text not in PRIMITIVES:
            p.error("UnknownPrimitive", f"unknown primitive {t.text!r}", t)
    atom_decls = []
    for label, kind in atoms:
        if label.text in CTORS or label.text[0].isupper():
            p.error("SyntaxError", f"bad atom label {label.text!r}", label)
        try:
            atom_decls.append((label.text, AtomKind(kind.text)))
        except ValueError:
            p.error("SyntaxError", f"unknown atom kind {kind.text!r}", kind)
    declared = {a[0] for a in atom_decls}
    for t in p.consts:
        if t.text not in declared:
            p.error("UnboundVariable", f"undeclared atom {t.text!r}", t)

    schemas, labels = [], {}
    for label, premises, conclusion, guards in rules:
        if label.text in labels:
            p.error("DuplicateRuleLabel", f"rule {label.text!r} already defined", label)
            continue
        labels[label.text] = label
        schema = RuleSchema(label.text, tuple(premises), conclusion, tuple(g for _, g in guards))
        try:
            schema.sorts(role_names)
        except SortError as e:
            p.error("SyntaxError", str(e), label)
        bound = _bound_vars(role_names, premises, [g for _, g in guards])
        used = template_vars(conclusion)
        for _, g in guards:
            used |= guard_vars(g)
        for v in sorted(used - bound):
            p.error("UnboundVariable", f"variable {v} is not bound in rule {label.text}", p.var_tokens.get(v, label))
        schemas.append(schema)

    theorem = None
    if not theorems:
        p.error("SyntaxError", "protocol has no theorem", p.peek())
    for label, variables, guards in theorems[1:]:
        p.error("SyntaxError", "only one theorem per protocol", label)
    if theorems:
        label, variables, guards = theorems[0]
        names = [t.text for t in variables]
        for gtok, g in guards:
            for v in sorted(guard_vars(g) - set(names)):
                p.error("UnboundVariable", f"variable {v} is not quantified", p.var_tokens.get(v, gtok))
        theorem = TheoremSpec(label.text, tuple(names), tuple(g for _, g in guards))
        try:
            theorem.sorts()
        except SortError as e:
            p.error("SyntaxError", str(e), label)
    if p.diags:
        raise ParseError(p.diags)
    return ProtocolSpec.make(
        name,
        role_names,
        [t.text for t in prims],
        [t.text for t in options],
        schemas,
        theorem,
        atoms=atom_decls,
        secrets=[t.text for t in secrets],
    )


def _bound_vars(roles, premises, guards) -> set:
    """Variables a rule can enumerate: roles, premise variables, sorted
    variables, and whatever eq/member pins down from those."""
    bound = set(roles)
    for t in premises:
        template_vars(t, bound)
    for g in guards:
        if g.name in DECLARING:
            bound |= guard_vars(g)
    changed = True
    while changed:
        changed = False
        for g in guards:
            new = set()
            if g.name == "eq":
                x, rhs = g.args[0].name, template_vars(g.args[1])
                if x in bound:
                    new = rhs
                elif rhs <= bound:
                    new = {x}
            elif g.name == "member" and g.args[1].name in bound:
                new = {g.args[0].name}
            if not new <= bound:
                bound |= new
                changed = True
    return bound


def parse_file(path) -> ProtocolSpec:
    with open(path, "rb") as f:
        return parse(f.read(), file=str(path))


# -- rendering ----------------------------------------------------------------------


def render_template(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.label
    if isinstance(t, SetLit):
        return "{" + ", ".join(render_template(i) for i in t.items) + "}"
    args = t.args
    if t.kind is Kind.ENC:
        return f"enc(key={render_template(args[0])}, plain={_render_set(args[1])})"
    if t.kind is Kind.NONCE:
        return f"nonce(seed={render_template(args[0])}, id={render_template(args[1])})"
    if t.kind is Kind.PUF:
        return f"puf({render_template(args[0])})"
    return t.kind.value + _render_set(args[0])


def _render_set(s) -> str:
    return f"({s.name})" if isinstance(s, Var) else render_template(s)


def render_guard(g: Guard) -> str:
    parts = []
    for a in g.args:
        parts.append(str(a) if isinstance(a, (str, int)) else render_template(a))
    return f"{g.name}({', '.join(parts)})"


def render(spec: ProtocolSpec) -> str:
    """Canonical text for ``spec``; parse(render(spec)) == spec."""
    out = [f"protocol {spec.name} {{"]
    if spec.roles:
        out.append(f"  roles {' '.join(spec.roles)};")
    if spec.options:
        out.append(f"  options {' '.join(spec.options)};")
    if spec.primitives:
        out.append(f"  primitives {' '.join(spec.primitives)};")
    if spec.atoms:
        out.append("  atoms " + " ".join(f"{label}:{kind.value}" for label, kind in spec.atoms) + ";")
    if spec.secrets:
        out.append(f"  secret {' '.join(spec.secrets)};")
    for s in spec.schemas:
        out.append("")
        out.append(f"  rule {s.label}:")
        out.append("    premises {" + ", ".join(render_template(t) for t in s.premises) + "}")
        line = f"    conclude {render_template(s.conclusion)}"
        if s.guards:
            out.append(line)
            out.append("    where " + ", ".join(render_guard(g) for g in s.guards) + ";")
        else:
            out.append(line + ";")
    th = spec.theorem
    out.append("")
    out.append(f"  theorem {th.label}:")
    out.append("    exists " + "".join(v + " " for v in th.variables) + ".")
    body = ",\n      ".join(render_guard(g) for g in th.guards)
    out.append(f"      {body};" if body else "      ;")
    out.append("}")
    return "\n".join(out) + "\n"
