"""Source language: lexer, LL(1) recursive-descent parser, static checks.

The language is a small CSP-style process notation.  See docs/grammar.md
for the grammar, the width rules and the subset restrictions; the three
shipped benchmark sources are the normative examples.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union


class FrontendError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class SyntaxError(FrontendError):
    pass


class UndeclaredName(FrontendError):
    pass


class ParConflict(FrontendError):
    pass


# ---------------------------------------------------------------------------
# Tokens

_KEYWORDS = {"module", "in", "out", "var", "chan", "loop", "while", "if",
             "else", "case", "of", "for", "skip"}

_PUNCT = ["||", ":=", "..", "==", "!=", "<=", ">=", "<<", ">>",
          "(", ")", "{", "}", "[", "]", ";", ":", "?", "!",
          "<", ">", "+", "-", "*", "&", "|", "^", "~", ","]


@dataclass(frozen=True)
class Token:
    type: str  # 'ident' | 'num' | 'kw' | punct literal | 'eof'
    value: Union[str, int]
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
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
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            if text.startswith("0x", i) or text.startswith("0X", i):
                i += 2
                while i < n and text[i] in "0123456789abcdefABCDEF":
                    i += 1
                if i == start + 2:
                    raise SyntaxError("malformed hex literal", line, col)
                val = int(text[start:i], 16)
            else:
                while i < n and text[i].isdigit():
                    i += 1
                val = int(text[start:i])
            toks.append(Token("num", val, line, col))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            toks.append(Token("kw" if word in _KEYWORDS else "ident", word, line, col))
            col += i - start
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token(p, p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise SyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Pos:
    line: int
    col: int


@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos


@dataclass(frozen=True)
class Name:
    ident: str
    pos: Pos


@dataclass(frozen=True)
class BinOp:
    op: str
    a: "Expr"
    b: "Expr"
    pos: Pos


@dataclass(frozen=True)
class UnOp:
    op: str
    a: "Expr"
    pos: Pos


Expr = Union[Num, Name, BinOp, UnOp]


@dataclass(frozen=True)
class Skip:
    pos: Pos


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    pos: Pos


@dataclass(frozen=True)
class Send:
    chan: str
    expr: Expr
    pos: Pos


@dataclass(frozen=True)
class Receive:
    chan: str
    var: str
    pos: Pos


@dataclass(frozen=True)
class Seq:
    parts: tuple
    pos: Pos


@dataclass(frozen=True)
class Par:
    branches: tuple
    pos: Pos


@dataclass(frozen=True)
class LoopStmt:
    body: "Stmt"
    pos: Pos


@dataclass(frozen=True)
class WhileStmt:
    cond: Expr
    body: "Stmt"
    pos: Pos


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then: "Stmt"
    els: "Stmt"
    pos: Pos


@dataclass(frozen=True)
class CaseStmt:
    sel: Expr
    arms: tuple  # of (value, Stmt)
    pos: Pos


Stmt = Union[Skip, Assign, Send, Receive, Seq, Par, LoopStmt, WhileStmt,
             IfStmt, CaseStmt]


@dataclass(frozen=True)
class PortDecl:
    name: str
    dir: str
    width: int


@dataclass
class SourceModule:
    name: str
    ports: list[PortDecl]
    vars: dict[str, int]   # name -> width
    chans: dict[str, int]  # name -> width
    body: Stmt
    # Filled by the checker:
    widths: dict[int, int] = field(default_factory=dict)  # id(expr) -> width


# ---------------------------------------------------------------------------
# Parser

# Binary operator precedence, loosest first.  Bitwise ops bind looser than
# comparisons, so masks want parentheses: (q & 1) == 1.
_BIN_LEVELS = [
    ["|"], ["^"], ["&"],
    ["==", "!="],
    ["<", ">", "<=", ">="],
    ["<<", ">>"],
    ["+", "-"],
    ["*"],
]

_BIN_FN = {"|": "or", "^": "xor", "&": "and", "==": "eq", "!=": "ne",
           "<": "lt", ">": "gt", "<=": "le", ">=": "ge",
           "<<": "shl", ">>": "shr", "+": "add", "-": "sub", "*": "mul"}


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, type_: str, what: str = "") -> Token:
        tok = self.next()
        if tok.type != type_:
            raise SyntaxError(
                f"expected {what or type_}, got {tok.value!r}", tok.line, tok.col)
        return tok

    def expect_kw(self, word: str) -> Token:
        tok = self.next()
        if tok.type != "kw" or tok.value != word:
            raise SyntaxError(f"expected {word!r}, got {tok.value!r}", tok.line, tok.col)
        return tok

    def pos(self) -> Pos:
        tok = self.peek()
        return Pos(tok.line, tok.col)

    # -- declarations

    def module(self) -> SourceModule:
        self.expect_kw("module")
        name = self.expect("ident", "module name").value
        self.expect("(")
        ports: list[PortDecl] = []
        if self.peek().type != ")":
            ports.extend(self.portdecl())
            while self.peek().type == ";":
                self.next()
                ports.extend(self.portdecl())
        self.expect(")")
        self.expect("{")
        vars_: dict[str, int] = {}
        chans: dict[str, int] = {}
        while self.peek().type == "kw" and self.peek().value in ("var", "chan"):
            tok = self.next()
            ident = self.expect("ident").value
            self.expect(":")
            width = self._width()
            self.expect(";")
            table = vars_ if tok.value == "var" else chans
            if ident in table:
                raise SyntaxError(f"duplicate declaration {ident}", tok.line, tok.col)
            table[ident] = width
        body = self.stmt()
        self.expect("}")
        self.expect("eof")
        return SourceModule(str(name), ports, vars_, chans, body)

    def portdecl(self) -> list[PortDecl]:
        tok = self.next()
        if tok.type != "kw" or tok.value not in ("in", "out"):
            raise SyntaxError("expected 'in' or 'out'", tok.line, tok.col)
        direction = tok.value
        ident = self.expect("ident").value
        lo = hi = None
        if self.peek().type == "[":
            self.next()
            lo = self.expect("num").value
            self.expect("..")
            hi = self.expect("num").value
            self.expect("]")
            if hi < lo:
                raise SyntaxError("array range upper bound below lower", tok.line, tok.col)
        self.expect(":")
        width = self._width()
        if lo is None:
            return [PortDecl(str(ident), direction, width)]
        return [PortDecl(f"{ident}[{k}]", direction, width) for k in range(lo, hi + 1)]

    def _width(self) -> int:
        tok = self.expect("num", "width")
        if tok.value < 0 or tok.value > 512:
            raise SyntaxError("width out of range 0..512", tok.line, tok.col)
        return tok.value

    # -- statements

    def stmt(self) -> Stmt:
        pos = self.pos()
        parts = [self.par()]
        while self.peek().type == ";":
            self.next()
            parts.append(self.par())
        return parts[0] if len(parts) == 1 else Seq(tuple(parts), pos)

    def par(self) -> Stmt:
        pos = self.pos()
        branches = [self.piece()]
        while self.peek().type == "||":
            self.next()
            branches.append(self.piece())
        return branches[0] if len(branches) == 1 else Par(tuple(branches), pos)

    def piece(self) -> Stmt:
        tok = self.peek()
        pos = Pos(tok.line, tok.col)
        if tok.type == "{":
            self.next()
            inner = self.stmt()
            self.expect("}")
            return inner
        if tok.type == "kw":
            if tok.value == "skip":
                self.next()
                return Skip(pos)
            if tok.value == "loop":
                self.next()
                return LoopStmt(self.block(), pos)
            if tok.value == "while":
                self.next()
                cond = self.expr()
                return WhileStmt(cond, self.block(), pos)
            if tok.value == "if":
                self.next()
                cond = self.expr()
                then = self.block()
                self.expect_kw("else")
                return IfStmt(cond, then, self.block(), pos)
            if tok.value == "case":
                self.next()
                sel = self.expr()
                self.expect_kw("of")
                self.expect("{")
                arms: list[tuple[int, Stmt]] = []
                while self.peek().type != "}":
                    arms.extend(self.arm())
                self.expect("}")
                if not arms:
                    raise SyntaxError("case with no arms", pos.line, pos.col)
                return CaseStmt(sel, tuple(arms), pos)
            raise SyntaxError(f"unexpected keyword {tok.value!r}", tok.line, tok.col)
        if tok.type == "ident":
            base = self.next().value
            name = str(base)
            if self.peek().type == "[":
                self.next()
                name = f"{base}[{self._index()}]"
            nxt = self.next()
            if nxt.type == "?":
                target = self.expect("ident", "receive target variable")
                return Receive(name, str(target.value), pos)
            if nxt.type == "!":
                return Send(name, self.expr(), pos)
            if nxt.type == ":=":
                if name != base:
                    raise SyntaxError("cannot assign to an indexed name", pos.line, pos.col)
                return Assign(name, self.expr(), pos)
            raise SyntaxError(f"expected '?', '!' or ':=' after {name}", nxt.line, nxt.col)
        raise SyntaxError(f"unexpected token {tok.value!r}", tok.line, tok.col)

    def block(self) -> Stmt:
        self.expect("{")
        inner = self.stmt()
        self.expect("}")
        return inner

    def _index(self) -> str:
        """Bracket index: a literal, or a generator variable to be filled in
        during case-arm elaboration.  Consumes through the closing bracket."""
        tok = self.next()
        if tok.type not in ("num", "ident"):
            raise SyntaxError("expected index number or generator variable",
                              tok.line, tok.col)
        self.expect("]")
        return str(tok.value)

    def arm(self) -> list[tuple[int, Stmt]]:
        tok = self.peek()
        if tok.type == "kw" and tok.value == "for":
            self.next()
            var = self.expect("ident", "generator variable").value
            self.expect_kw("in")
            lo = self.expect("num").value
            self.expect("..")
            hi = self.expect("num").value
            if hi < lo:
                raise SyntaxError("generator range upper bound below lower",
                                  tok.line, tok.col)
            self.expect("{")
            body = self.stmt()
            self.expect("}")
            return [(k, _substitute(body, str(var), k)) for k in range(lo, hi + 1)]
        value = self.expect("num", "case arm value").value
        self.expect(":")
        return [(int(value), self.block())]

    # -- expressions

    def expr(self, level: int = 0) -> Expr:
        if level == len(_BIN_LEVELS):
            return self.unary()
        pos = self.pos()
        left = self.expr(level + 1)
        while self.peek().type in _BIN_LEVELS[level]:
            op = self.next().type
            right = self.expr(level + 1)
            left = BinOp(_BIN_FN[op], left, right, pos)
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.type == "-":
            self.next()
            return UnOp("neg", self.unary(), Pos(tok.line, tok.col))
        if tok.type == "~":
            self.next()
            return UnOp("not", self.unary(), Pos(tok.line, tok.col))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.next()
        pos = Pos(tok.line, tok.col)
        if tok.type == "num":
            return Num(int(tok.value), pos)
        if tok.type == "ident":
            name = str(tok.value)
            if self.peek().type == "[":
                self.next()
                name = f"{name}[{self._index()}]"
            return Name(name, pos)
        if tok.type == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise SyntaxError(f"unexpected token {tok.value!r} in expression",
                          tok.line, tok.col)


def _substitute(node, var: str, value: int):
    """Replace generator variable references by the literal ``value``."""
    if isinstance(node, Name):
        if node.ident == var:
            return Num(value, node.pos)
        if f"[{var}]" in node.ident:
            return Name(node.ident.replace(f"[{var}]", f"[{value}]"), node.pos)
        return node
    if isinstance(node, Num):
        return node
    if isinstance(node, BinOp):
        return replace(node, a=_substitute(node.a, var, value),
                       b=_substitute(node.b, var, value))
    if isinstance(node, UnOp):
        return replace(node, a=_substitute(node.a, var, value))
    if isinstance(node, Skip):
        return node
    if isinstance(node, Assign):
        return replace(node, expr=_substitute(node.expr, var, value))
    if isinstance(node, Send):
        return replace(node, chan=_subst_name(node.chan, var, value),
                       expr=_substitute(node.expr, var, value))
    if isinstance(node, Receive):
        return replace(node, chan=_subst_name(node.chan, var, value))
    if isinstance(node, Seq):
        return replace(node, parts=tuple(_substitute(p, var, value) for p in node.parts))
    if isinstance(node, Par):
        return replace(node, branches=tuple(_substitute(p, var, value)
                                            for p in node.branches))
    if isinstance(node, LoopStmt):
        return replace(node, body=_substitute(node.body, var, value))
    if isinstance(node, WhileStmt):
        return replace(node, cond=_substitute(node.cond, var, value),
                       body=_substitute(node.body, var, value))
    if isinstance(node, IfStmt):
        return replace(node, cond=_substitute(node.cond, var, value),
                       then=_substitute(node.then, var, value),
                       els=_substitute(node.els, var, value))
    if isinstance(node, CaseStmt):
        return replace(node, sel=_substitute(node.sel, var, value),
                       arms=tuple((v, _substitute(s, var, value)) for v, s in node.arms))
    raise TypeError(f"unknown node {node!r}")


def _subst_name(name: str, var: str, value: int) -> str:
    return name.replace(f"[{var}]", f"[{value}]")


# ---------------------------------------------------------------------------
# Static checks

class _Checker:
    def __init__(self, mod: SourceModule):
        self.mod = mod
        self.ports = {p.name: p for p in mod.ports}
        self.widths: dict[int, int] = {}
        # site counts: name -> list of positions
        self.var_writes: dict[str, list[Pos]] = {v: [] for v in mod.vars}
        self.var_reads: dict[str, list[Pos]] = {v: [] for v in mod.vars}
        self.chan_sends: dict[str, list[Pos]] = {c: [] for c in mod.chans}
        self.chan_recvs: dict[str, list[Pos]] = {c: [] for c in mod.chans}
        for p in mod.ports:
            if p.dir == "in":
                self.chan_recvs[p.name] = []
            else:
                self.chan_sends[p.name] = []

    def run(self) -> None:
        names = list(self.mod.vars) + list(self.mod.chans) + list(self.ports)
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SyntaxError(f"name declared twice: {sorted(dupes)[0]}")
        self.check_stmt(self.mod.body, top=True)
        for name, sites in self.chan_sends.items():
            if len(sites) != 1:
                kind = "channel" if name in self.mod.chans else "output port"
                raise ParConflict(
                    f"{kind} {name} needs exactly one send site, found {len(sites)}")
        for name, sites in self.chan_recvs.items():
            if len(sites) != 1:
                kind = "channel" if name in self.mod.chans else "input port"
                raise ParConflict(
                    f"{kind} {name} needs exactly one consuming site, found {len(sites)}")
        for name, sites in self.var_writes.items():
            if not sites:
                raise UndeclaredName(f"variable {name} is never written")
        for name, sites in self.var_reads.items():
            if not sites:
                raise UndeclaredName(f"variable {name} is never read")
        self.mod.widths = self.widths

    # Effects of a statement, for the Par conflict rule.
    def check_stmt(self, st: Stmt, top: bool = False) -> tuple[set, set]:
        writes: set[str] = set()
        sends: set[str] = set()
        if isinstance(st, Skip):
            pass
        elif isinstance(st, Assign):
            if st.var not in self.mod.vars:
                raise UndeclaredName(f"assignment to undeclared variable {st.var}",
                                     st.pos.line, st.pos.col)
            w = self.expr_width(st.expr, self.mod.vars[st.var])
            if w != self.mod.vars[st.var]:
                raise SyntaxError(
                    f"width {w} expression assigned to {st.var}:{self.mod.vars[st.var]}",
                    st.pos.line, st.pos.col)
            self.var_writes[st.var].append(st.pos)
            writes.add(st.var)
        elif isinstance(st, Send):
            width = self._chan_width(st.chan, st.pos, sending=True)
            w = self.expr_width(st.expr, width)
            if w != width:
                raise SyntaxError(f"width {w} expression sent on {st.chan}:{width}",
                                  st.pos.line, st.pos.col)
            self.chan_sends[st.chan].append(st.pos)
            sends.add(st.chan)
        elif isinstance(st, Receive):
            width = self._chan_width(st.chan, st.pos, sending=False)
            if st.var not in self.mod.vars:
                raise UndeclaredName(f"receive into undeclared variable {st.var}",
                                     st.pos.line, st.pos.col)
            if self.mod.vars[st.var] != width:
                raise SyntaxError(
                    f"receive {st.chan}:{width} into {st.var}:{self.mod.vars[st.var]}",
                    st.pos.line, st.pos.col)
            self.chan_recvs[st.chan].append(st.pos)
            self.var_writes[st.var].append(st.pos)
            writes.add(st.var)
        elif isinstance(st, Seq):
            for part in st.parts:
                w, s = self.check_stmt(part)
                writes |= w
                sends |= s
        elif isinstance(st, Par):
            claimed_w: dict[str, int] = {}
            claimed_s: dict[str, int] = {}
            for k, br in enumerate(st.branches):
                w, s = self.check_stmt(br)
                for name in w:
                    if name in claimed_w:
                        raise ParConflict(
                            f"variable {name} written by two parallel branches",
                            st.pos.line, st.pos.col)
                    claimed_w[name] = k
                for name in s:
                    if name in claimed_s:
                        raise ParConflict(
                            f"channel {name} sent by two parallel branches",
                            st.pos.line, st.pos.col)
                    claimed_s[name] = k
                writes |= w
                sends |= s
        elif isinstance(st, LoopStmt):
            if not top:
                raise SyntaxError("loop is only allowed as the outermost statement",
                                  st.pos.line, st.pos.col)
            w, s = self.check_stmt(st.body)
            writes |= w
            sends |= s
        elif isinstance(st, WhileStmt):
            if self.expr_width(st.cond, 1) != 1:
                raise SyntaxError("while condition must have width 1",
                                  st.pos.line, st.pos.col)
            w, s = self.check_stmt(st.body)
            writes |= w
            sends |= s
        elif isinstance(st, IfStmt):
            if self.expr_width(st.cond, 1) != 1:
                raise SyntaxError("if condition must have width 1",
                                  st.pos.line, st.pos.col)
            for branch in (st.then, st.els):
                w, s = self.check_stmt(branch)
                writes |= w
                sends |= s
        elif isinstance(st, CaseStmt):
            k = self.expr_width(st.sel, None)
            if len(st.arms) < 2:
                raise SyntaxError("case needs at least two arms",
                                  st.pos.line, st.pos.col)
            seen_vals: set[int] = set()
            for value, arm in st.arms:
                if value in seen_vals:
                    raise SyntaxError(f"duplicate case arm value {value}",
                                      st.pos.line, st.pos.col)
                seen_vals.add(value)
                if value >= (1 << k):
                    raise SyntaxError(
                        f"case arm value {value} does not fit selector width {k}",
                        st.pos.line, st.pos.col)
                w, s = self.check_stmt(arm)
                writes |= w
                sends |= s
        else:
            raise TypeError(f"unknown statement {st!r}")
        return writes, sends

    def _chan_width(self, name: str, pos: Pos, sending: bool) -> int:
        if name in self.mod.chans:
            return self.mod.chans[name]
        port = self.ports.get(name)
        if port is None:
            raise UndeclaredName(f"undeclared channel {name}", pos.line, pos.col)
        if sending and port.dir != "out":
            raise SyntaxError(f"cannot send on input port {name}", pos.line, pos.col)
        if not sending and port.dir != "in":
            raise SyntaxError(f"cannot receive from output port {name}",
                              pos.line, pos.col)
        return port.width

    def expr_width(self, e: Expr, context: Optional[int]) -> int:
        w = self._width_of(e, context)
        self.widths[id(e)] = w
        return w

    def _width_of(self, e: Expr, context: Optional[int]) -> int:
        if isinstance(e, Num):
            w = context if context is not None else max(1, e.value.bit_length())
            if e.value >= (1 << w):
                raise SyntaxError(f"literal {e.value} does not fit width {w}",
                                  e.pos.line, e.pos.col)
            return w
        if isinstance(e, Name):
            if e.ident in self.mod.vars:
                self.var_reads[e.ident].append(e.pos)
                return self.mod.vars[e.ident]
            if e.ident in self.mod.chans:
                self.chan_recvs[e.ident].append(e.pos)
                return self.mod.chans[e.ident]
            port = self.ports.get(e.ident)
            if port is not None:
                if port.dir != "in":
                    raise SyntaxError(f"output port {e.ident} read in expression",
                                      e.pos.line, e.pos.col)
                self.chan_recvs[e.ident].append(e.pos)
                return port.width
            raise UndeclaredName(f"undeclared name {e.ident}", e.pos.line, e.pos.col)
        if isinstance(e, UnOp):
            w = self.expr_width(e.a, context)
            return w
        if isinstance(e, BinOp):
            if e.op in ("eq", "ne", "lt", "gt", "le", "ge"):
                wa = self.expr_width(e.a, None)
                wb = self.expr_width(e.b, wa)
                if isinstance(e.a, Num) and not isinstance(e.b, Num):
                    wa = self.expr_width(e.a, wb)
                if wa != wb:
                    raise SyntaxError(f"comparison of widths {wa} and {wb}",
                                      e.pos.line, e.pos.col)
                return 1
            if e.op in ("shl", "shr"):
                wa = self.expr_width(e.a, context)
                self.expr_width(e.b, max(1, wa.bit_length()))
                return wa
            wa = self.expr_width(e.a, context)
            wb = self.expr_width(e.b, context if not isinstance(e.b, Num) else wa)
            if isinstance(e.a, Num) and not isinstance(e.b, Num):
                wa = self.expr_width(e.a, wb)
            if wa != wb:
                raise SyntaxError(f"operands of widths {wa} and {wb}",
                                  e.pos.line, e.pos.col)
            return max(wa, wb)
        raise TypeError(f"unknown expression {e!r}")


def parse(text: str) -> SourceModule:
    """Parse and check a source module; raises SyntaxError, UndeclaredName or
    ParConflict with position information on bad input."""
    mod = _Parser(tokenize(text)).module()
    # A top-level body that is not already a loop repeats forever, matching
    # the activation model of generated top-level modules.
    if not isinstance(mod.body, LoopStmt):
        mod.body = LoopStmt(mod.body, Pos(0, 0))
    _Checker(mod).run()
    return mod
