"""Surface syntax for ``.rsill`` programs and its inverse pretty-printer.

Grammar (``#`` starts a line comment)::

    program  ::= (typedef | procdef)*
    typedef  ::= 'type' ID ['[' ids ']'] ['where' cons] '=' stype
    procdef  ::= 'proc' ['costfree'] ID '[' [ids] ']' ['where' cons]
                 '|' pot '|' '(' [ID ':' stype, ...] ')' '->' '(' ID ':' stype ')' '=' proc
    cons     ::= pot ('>=' | '<=' | '==') pot (',' ...)*
    stype    ::= atype [('*' | '-o') '^' patom stype]
    atype    ::= '+{' branch, ... '}' | '&{' branch, ... '}' | '1' '^' patom
               | ID ['[' pot, ... ']'] | '(' stype ')'
    branch   ::= ID '^' patom ':' stype
    pot      ::= term (('+' | '-') term)*        # '-' is truncated subtraction
    term     ::= patom ('*' patom)*
    patom    ::= NAT | ID | 'clog' '(' pot ')' | '(' pot ')'
    proc     ::= x '<-' 'spawn' X '[' pots ']' '(' chans ')' ';' proc
               | y '<-' 'recv' x ';' proc
               | 'fwd' x y | 'close' x | 'wait' x ';' proc
               | x '.' l ';' proc | 'send' x w ';' proc
               | 'case' x '{' l '=>' proc ('|' l '=>' proc)* '}'
               | X '[' pots ']' '(' chans ')'    # tail call
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (
    COSTFREE,
    STANDARD,
    Add,
    CaseRecv,
    CLog,
    Close,
    Const,
    Constraint,
    EChoice,
    Fwd,
    IChoice,
    IVar,
    Lolli,
    Mul,
    One,
    PotExpr,
    ProcDef,
    ProcExpr,
    RecvChan,
    SendChan,
    SendLabel,
    Signature,
    Spawn,
    SType,
    Sub,
    Tensor,
    TVar,
    TypeDef,
    Wait,
    show_pot,
    show_type,
)
from .errors import RsillSyntaxError

KEYWORDS = {"type", "proc", "costfree", "where", "spawn", "recv", "fwd", "case",
            "send", "close", "wait", "clog"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>-o|<-|->|=>|>=|<=|==|[-+*^{}()\[\],:;.|&=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, id, sym, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise RsillSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            out.append(Token(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.fresh = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> RsillSyntaxError:
        tok = tok or self.tok
        return RsillSyntaxError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        tok = self.tok
        if tok.kind != "id" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def label(self) -> str:
        # labels live in their own namespace, so keywords are allowed
        tok = self.tok
        if tok.kind != "id":
            raise self.error(f"expected label, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def comma_list(self, close: str, item):
        items = []
        if self.at(close):
            return items
        items.append(item())
        while self.accept(","):
            items.append(item())
        return items

    # potentials

    def pot(self) -> PotExpr:
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> PotExpr:
        e = self.patom()
        while self.accept("*"):
            e = Mul(e, self.patom())
        return e

    def patom(self) -> PotExpr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(int(tok.text))
        if self.accept("clog"):
            self.expect("(")
            e = self.pot()
            self.expect(")")
            return CLog(e)
        if self.accept("("):
            e = self.pot()
            self.expect(")")
            return e
        return IVar(self.ident("potential expression"))

    def constraints(self) -> tuple[Constraint, ...]:
        out = []
        while True:
            lhs = self.pot()
            tok = self.tok
            if tok.text not in (">=", "<=", "=="):
                raise self.error("expected comparison '>=', '<=' or '=='")
            self.i += 1
            out.append(Constraint(lhs, tok.text, self.pot()))
            if not self.accept(","):
                return tuple(out)

    # types

    def stype(self) -> SType:
        left = self.atype()
        if self.at("*") or self.at("-o"):
            ctor = Tensor if self.tok.text == "*" else Lolli
            self.i += 1
            self.expect("^")
            p = self.patom()
            return ctor(p, left, self.stype())
        return left

    def atype(self) -> SType:
        tok = self.tok
        if self.at("+") or self.at("&"):
            ctor = IChoice if tok.text == "+" else EChoice
            self.i += 1
            self.expect("{")
            branches = self.comma_list("}", self.branch)
            self.expect("}")
            if not branches:
                raise self.error("a choice needs at least one label", tok)
            labels = [b[0] for b in branches]
            dup = {l for l in labels if labels.count(l) > 1}
            if dup:
                raise self.error(f"duplicate label {sorted(dup)[0]!r}", tok)
            return ctor(tuple(branches))
        if tok.kind == "num":
            if tok.text != "1":
                raise self.error("expected a session type", tok)
            self.i += 1
            self.expect("^")
            return One(self.patom())
        if self.accept("("):
            t = self.stype()
            self.expect(")")
            return t
        name = self.ident("session type")
        args: list[PotExpr] = []
        if self.accept("["):
            args = self.comma_list("]", self.pot)
            self.expect("]")
        return TVar(name, tuple(args))

    def branch(self):
        lab = self.label()
        self.expect("^")
        p = self.patom()
        self.expect(":")
        return (lab, p, self.stype())

    # processes

    def proc(self, provided: str) -> ProcExpr:
        tok = self.tok
        if self.accept("fwd"):
            return Fwd(self.ident("channel"), self.ident("channel"))
        if self.accept("close"):
            return Close(self.ident("channel"))
        if self.accept("wait"):
            x = self.ident("channel")
            self.expect(";")
            return Wait(x, self.proc(provided))
        if self.accept("send"):
            x = self.ident("channel")
            w = self.ident("channel")
            self.expect(";")
            return SendChan(x, w, self.proc(provided))
        if self.accept("case"):
            x = self.ident("channel")
            self.expect("{")
            branches = [self.case_branch(provided)]
            while self.accept("|"):
                branches.append(self.case_branch(provided))
            self.expect("}")
            labels = [b[0] for b in branches]
            dup = {l for l in labels if labels.count(l) > 1}
            if dup:
                raise self.error(f"duplicate case branch {sorted(dup)[0]!r}", tok)
            return CaseRecv(x, tuple(branches))
        name = self.ident("process")
        if self.accept("<-"):
            if self.accept("recv"):
                x = self.ident("channel")
                self.expect(";")
                return RecvChan(x, name, self.proc(provided))
            self.expect("spawn")
            callee, idx, chans = self.call()
            self.expect(";")
            return Spawn(callee, idx, chans, name, self.proc(provided))
        if self.accept("."):
            lab = self.label()
            self.expect(";")
            return SendLabel(name, lab, self.proc(provided))
        if self.at("["):
            self.i -= 1
            callee, idx, chans = self.call()
            fresh = f"_tc{self.fresh}"
            self.fresh += 1
            return Spawn(callee, idx, chans, fresh, Fwd(provided, fresh))
        raise self.error(f"unexpected {self.tok.text or 'end of input'!r} after {name!r}")

    def call(self):
        callee = self.ident("process name")
        self.expect("[")
        idx = self.comma_list("]", self.pot)
        self.expect("]")
        self.expect("(")
        chans = self.comma_list(")", lambda: self.ident("channel"))
        self.expect(")")
        return callee, tuple(idx), tuple(chans)

    def case_branch(self, provided: str):
        lab = self.label()
        self.expect("=>")
        return (lab, self.proc(provided))

    # definitions

    def params(self) -> tuple[str, ...]:
        ps = self.comma_list("]", self.ident)
        self.expect("]")
        if len(set(ps)) != len(ps):
            raise self.error("duplicate index parameter")
        return tuple(ps)

    def typedef(self) -> TypeDef:
        start = self.expect("type")
        name = self.ident("type name")
        params: tuple[str, ...] = ()
        if self.accept("["):
            params = self.params()
        domain = self.constraints() if self.accept("where") else ()
        self.expect("=")
        body = self.stype()
        try:
            return TypeDef(name, params, domain, body)
        except ValueError as exc:
            raise self.error(str(exc), start) from None

    def chan_decl(self):
        c = self.ident("channel")
        self.expect(":")
        return (c, self.stype())

    def procdef(self) -> ProcDef:
        start = self.expect("proc")
        mode = COSTFREE if self.accept("costfree") else STANDARD
        name = self.ident("process name")
        self.expect("[")
        params = self.params()
        domain = self.constraints() if self.accept("where") else ()
        self.expect("|")
        pot = self.pot()
        self.expect("|")
        self.expect("(")
        uses = self.comma_list(")", self.chan_decl)
        self.expect(")")
        self.expect("->")
        self.expect("(")
        provides = self.chan_decl()
        self.expect(")")
        self.expect("=")
        self.fresh = 0
        body = self.proc(provides[0])
        try:
            return ProcDef(name, params, domain, pot, tuple(uses), provides, mode, body)
        except ValueError as exc:
            raise self.error(str(exc), start) from None

    def program(self) -> Signature:
        sig = Signature()
        while self.tok.kind != "eof":
            tok = self.tok
            if self.at("type"):
                td = self.typedef()
                if td.name in sig.type_defs:
                    raise self.error(f"duplicate type {td.name!r}", tok)
                sig.type_defs[td.name] = td
            elif self.at("proc"):
                pd = self.procdef()
                if pd.name in sig.proc_defs:
                    raise self.error(f"duplicate process {pd.name!r}", tok)
                sig.proc_defs[pd.name] = pd
            else:
                raise self.error("expected 'type' or 'proc'")
        return sig


def parse_program(text: str, validate: bool = True) -> Signature:
    """Parse a whole program. With ``validate`` every reference must resolve."""
    sig = _Parser(text).program()
    if validate:
        sig.validate()
    return sig


def parse_type(text: str) -> SType:
    p = _Parser(text)
    t = p.stype()
    if p.tok.kind != "eof":
        raise p.error("trailing input after type")
    return t


def parse_pot(text: str) -> PotExpr:
    p = _Parser(text)
    e = p.pot()
    if p.tok.kind != "eof":
        raise p.error("trailing input after expression")
    return e


# --------------------------------------------------------------------------
# pretty printing


def _pots(es) -> str:
    return ", ".join(show_pot(e) for e in es)


def pretty_proc(p: ProcExpr, indent: int = 1) -> str:
    pad = "  " * indent
    lines: list[str] = []
    while True:
        match p:
            case Spawn(x, idx, chans, bind, cont):
                lines.append(f"{pad}{bind} <- spawn {x}[{_pots(idx)}]({', '.join(chans)});")
                p = cont
            case RecvChan(x, y, cont):
                lines.append(f"{pad}{y} <- recv {x};")
                p = cont
            case SendLabel(x, l, cont):
                lines.append(f"{pad}{x}.{l};")
                p = cont
            case SendChan(x, w, cont):
                lines.append(f"{pad}send {x} {w};")
                p = cont
            case Wait(x, cont):
                lines.append(f"{pad}wait {x};")
                p = cont
            case Fwd(a, b):
                lines.append(f"{pad}fwd {a} {b}")
                return "\n".join(lines)
            case Close(x):
                lines.append(f"{pad}close {x}")
                return "\n".join(lines)
            case CaseRecv(x, bs):
                lines.append(f"{pad}case {x} {{")
                for k, (l, q) in enumerate(bs):
                    bar = "  " if k == 0 else "| "
                    lines.append(f"{pad}{bar}{l} =>")
                    lines.append(pretty_proc(q, indent + 2))
                lines.append(f"{pad}}}")
                return "\n".join(lines)
            case _:
                raise TypeError(f"not a process expression: {p!r}")


def _params(ps, domain) -> str:
    where = f" where {', '.join(str(c) for c in domain)}" if domain else ""
    return f"[{', '.join(ps)}]{where}"


def pretty_typedef(td: TypeDef) -> str:
    head = f"type {td.name}"
    if td.index_params or td.domain:
        head += _params(td.index_params, td.domain)
    return f"{head} = {show_type(td.body)}"


def pretty_procdef(pd: ProcDef) -> str:
    mode = "costfree " if pd.cost_mode == COSTFREE else ""
    uses = ", ".join(f"{c} : {show_type(t)}" for c, t in pd.uses)
    c, t = pd.provides
    head = (f"proc {mode}{pd.name} {_params(pd.index_params, pd.domain)} "
            f"|{show_pot(pd.potential)}| ({uses}) -> ({c} : {show_type(t)}) =")
    return head + "\n" + pretty_proc(pd.body)


def pretty_program(sig: Signature) -> str:
    parts = [pretty_typedef(td) for td in sig.type_defs.values()]
    parts += [pretty_procdef(pd) for pd in sig.proc_defs.values()]
    return "\n\n".join(parts) + ("\n" if parts else "")
