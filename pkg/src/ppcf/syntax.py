"""Abstract syntax, parser, printer and type checker for probabilistic PCF.

Terms are the usual PCF constructs over a single ground type ``nat``,
extended with a binary coin ``dice(r)`` (exact rational bias), a strict
``let`` on naturals, and cost marks ``mark[l] M`` that are transparent to
typing but counted by the labelled operational semantics.

The concrete grammar::

    term  :=  \\x:T. term
           |  let x = term in term
           |  ifz term then term else term
           |  item item*                      (application, left assoc)
    item  :=  succ item | pred item | fix item | mark[l] item | atom
    atom  :=  0 | 1 | 2 | ...
           |  dice(p/q) | dice(0.1)
           |  x
           |  (term)
    type  :=  nat | type -> type              (-> right assoc)

Prefix operators may also take an unparenthesised lambda, which extends
as far right as possible.  ``#`` starts a comment running to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Union

__all__ = [
    "Type", "Nat", "Arrow", "NAT",
    "Term", "Num", "Succ", "Pred", "Var", "Dice", "Let", "Ifz",
    "App", "Lam", "Fix", "Mark",
    "PpcfError", "PpcfSyntaxError", "PpcfTypeError",
    "num", "loop", "free_vars", "all_names", "labels_of", "subst",
    "parse_term", "parse_type", "to_text", "type_to_text",
    "typecheck", "make_mq",
]


class PpcfError(Exception):
    """Base class for errors raised by this package."""


class PpcfSyntaxError(PpcfError):
    pass


class PpcfTypeError(PpcfError):
    pass


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class Nat:
    def __str__(self) -> str:
        return "nat"


@dataclass(frozen=True)
class Arrow:
    dom: "Type"
    cod: "Type"

    def __str__(self) -> str:
        return type_to_text(self)


Type = Union[Nat, Arrow]
NAT = Nat()


# ---------------------------------------------------------------------------
# terms

@dataclass(frozen=True)
class Num:
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise PpcfSyntaxError(f"numeral must be nonnegative, got {self.n}")


@dataclass(frozen=True)
class Succ:
    arg: "Term"


@dataclass(frozen=True)
class Pred:
    arg: "Term"


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Dice:
    rate: Fraction

    def __post_init__(self) -> None:
        r = self.rate
        if not isinstance(r, Fraction):
            object.__setattr__(self, "rate", Fraction(r))
            r = self.rate
        if not (0 <= r <= 1):
            raise PpcfSyntaxError(f"dice rate must lie in [0,1], got {r}")


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class Ifz:
    scrut: "Term"
    zero: "Term"
    pos: "Term"


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Lam:
    name: str
    ty: Type
    body: "Term"


@dataclass(frozen=True)
class Fix:
    arg: "Term"


@dataclass(frozen=True)
class Mark:
    body: "Term"
    label: str


Term = Union[Num, Succ, Pred, Var, Dice, Let, Ifz, App, Lam, Fix, Mark]

_NUM_CACHE: dict[int, Num] = {}


def num(n: int) -> Num:
    """Interned numerals; the machine churns through small ones."""
    t = _NUM_CACHE.get(n)
    if t is None:
        t = _NUM_CACHE[n] = Num(n)
    return t


def loop(ty: Type) -> Fix:
    """The always-divergent term at ``ty``: fix (\\x:ty. x)."""
    return Fix(Lam("x", ty, Var("x")))


def is_loop(t: Term) -> bool:
    return (
        type(t) is Fix
        and type(t.arg) is Lam
        and type(t.arg.body) is Var
        and t.arg.body.name == t.arg.name
    )


def free_vars(t: Term) -> frozenset[str]:
    cls = type(t)
    if cls is Var:
        return frozenset((t.name,))
    if cls in (Num, Dice):
        return frozenset()
    if cls is Succ or cls is Pred:
        return free_vars(t.arg)
    if cls is Fix:
        return free_vars(t.arg)
    if cls is Mark:
        return free_vars(t.body)
    if cls is App:
        return free_vars(t.fun) | free_vars(t.arg)
    if cls is Lam:
        return free_vars(t.body) - {t.name}
    if cls is Let:
        return free_vars(t.bound) | (free_vars(t.body) - {t.name})
    if cls is Ifz:
        return free_vars(t.scrut) | free_vars(t.zero) | free_vars(t.pos)
    raise TypeError(f"not a term: {t!r}")


def all_names(t: Term) -> frozenset[str]:
    """Every variable name occurring in t, free or bound."""
    cls = type(t)
    if cls is Var:
        return frozenset((t.name,))
    if cls in (Num, Dice):
        return frozenset()
    if cls is Succ or cls is Pred or cls is Fix:
        return all_names(t.arg)
    if cls is Mark:
        return all_names(t.body)
    if cls is App:
        return all_names(t.fun) | all_names(t.arg)
    if cls is Lam:
        return all_names(t.body) | {t.name}
    if cls is Let:
        return all_names(t.bound) | all_names(t.body) | {t.name}
    if cls is Ifz:
        return all_names(t.scrut) | all_names(t.zero) | all_names(t.pos)
    raise TypeError(f"not a term: {t!r}")


def labels_of(t: Term) -> frozenset[str]:
    cls = type(t)
    if cls is Mark:
        return labels_of(t.body) | {t.label}
    if cls in (Num, Dice, Var):
        return frozenset()
    if cls is Succ or cls is Pred or cls is Fix:
        return labels_of(t.arg)
    if cls is App:
        return labels_of(t.fun) | labels_of(t.arg)
    if cls is Lam:
        return labels_of(t.body)
    if cls is Let:
        return labels_of(t.bound) | labels_of(t.body)
    if cls is Ifz:
        return labels_of(t.scrut) | labels_of(t.zero) | labels_of(t.pos)
    raise TypeError(f"not a term: {t!r}")


def subst(t: Term, name: str, repl: Term) -> Term:
    """t with repl for free occurrences of name.  repl must be closed,
    so no capture is possible; binders shadowing name stop the walk."""
    cls = type(t)
    if cls is Var:
        return repl if t.name == name else t
    if cls in (Num, Dice):
        return t
    if cls is Succ:
        a = subst(t.arg, name, repl)
        return t if a is t.arg else Succ(a)
    if cls is Pred:
        a = subst(t.arg, name, repl)
        return t if a is t.arg else Pred(a)
    if cls is Fix:
        a = subst(t.arg, name, repl)
        return t if a is t.arg else Fix(a)
    if cls is Mark:
        b = subst(t.body, name, repl)
        return t if b is t.body else Mark(b, t.label)
    if cls is App:
        f = subst(t.fun, name, repl)
        a = subst(t.arg, name, repl)
        return t if (f is t.fun and a is t.arg) else App(f, a)
    if cls is Lam:
        if t.name == name:
            return t
        b = subst(t.body, name, repl)
        return t if b is t.body else Lam(t.name, t.ty, b)
    if cls is Let:
        b = subst(t.bound, name, repl)
        if t.name == name:
            return t if b is t.bound else Let(t.name, b, t.body)
        c = subst(t.body, name, repl)
        return t if (b is t.bound and c is t.body) else Let(t.name, b, c)
    if cls is Ifz:
        s = subst(t.scrut, name, repl)
        z = subst(t.zero, name, repl)
        p = subst(t.pos, name, repl)
        if s is t.scrut and z is t.zero and p is t.pos:
            return t
        return Ifz(s, z, p)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# tokenizer

_KEYWORDS = frozenset(
    ["succ", "pred", "dice", "let", "in", "ifz", "then", "else",
     "fix", "mark", "nat"])

_SYMBOLS = ("->", "\\", ":", ".", "(", ")", "[", "]", "=", "/")


@dataclass(frozen=True)
class _Tok:
    kind: str          # num | dec | ident | kw | sym | eof
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, bol = 0, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            bol = i
            continue
        if c in " \t\r":
            i += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        col = i - bol + 1
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
                toks.append(_Tok("dec", src[i:j], line, col))
            else:
                toks.append(_Tok("num", src[i:j], line, col))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            word = src[i:j]
            toks.append(_Tok("kw" if word in _KEYWORDS else "ident",
                             word, line, col))
            i = j
            continue
        two = src[i:i + 2]
        if two == "->":
            toks.append(_Tok("sym", "->", line, col))
            i += 2
            continue
        if c in "\\:.()[]=/":
            toks.append(_Tok("sym", c, line, col))
            i += 1
            continue
        raise PpcfSyntaxError(f"line {line}:{col}: stray character {c!r}")
    toks.append(_Tok("eof", "", line, n - bol + 1))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str) -> None:
        t = self.peek()
        where = f"line {t.line}:{t.col}"
        got = "end of input" if t.kind == "eof" else repr(t.text)
        raise PpcfSyntaxError(f"{where}: {msg}, got {got}")

    def expect(self, kind: str, text: str) -> _Tok:
        t = self.peek()
        if t.kind != kind or t.text != text:
            self.fail(f"expected {text!r}")
        return self.next()

    def at(self, kind: str, text: str) -> bool:
        t = self.peek()
        return t.kind == kind and t.text == text

    # -- types ------------------------------------------------------------

    def type_(self) -> Type:
        left = self.type_atom()
        if self.at("sym", "->"):
            self.next()
            return Arrow(left, self.type_())
        return left

    def type_atom(self) -> Type:
        t = self.peek()
        if t.kind == "kw" and t.text == "nat":
            self.next()
            return NAT
        if t.kind == "sym" and t.text == "(":
            self.next()
            ty = self.type_()
            self.expect("sym", ")")
            return ty
        self.fail("expected a type")
        raise AssertionError

    # -- terms ------------------------------------------------------------

    def term(self) -> Term:
        t = self.peek()
        if t.kind == "sym" and t.text == "\\":
            self.next()
            name = self.ident()
            self.expect("sym", ":")
            ty = self.type_()
            self.expect("sym", ".")
            return Lam(name, ty, self.term())
        if t.kind == "kw" and t.text == "let":
            self.next()
            name = self.ident()
            self.expect("sym", "=")
            bound = self.term()
            self.expect("kw", "in")
            return Let(name, bound, self.term())
        if t.kind == "kw" and t.text == "ifz":
            self.next()
            scrut = self.term()
            self.expect("kw", "then")
            zero = self.term()
            self.expect("kw", "else")
            return Ifz(scrut, zero, self.term())
        return self.app()

    def app(self) -> Term:
        t = self.item()
        while self.starts_item():
            t = App(t, self.item())
        return t

    def starts_item(self) -> bool:
        t = self.peek()
        if t.kind in ("num", "ident"):
            return True
        if t.kind == "sym" and t.text == "(":
            return True
        if t.kind == "kw" and t.text in ("succ", "pred", "fix", "mark", "dice"):
            return True
        return False

    def operand(self) -> Term:
        # prefix operators accept a trailing lambda without parentheses
        if self.at("sym", "\\"):
            return self.term()
        return self.item()

    def item(self) -> Term:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "succ":
                self.next()
                return Succ(self.operand())
            if t.text == "pred":
                self.next()
                return Pred(self.operand())
            if t.text == "fix":
                self.next()
                return Fix(self.operand())
            if t.text == "mark":
                self.next()
                self.expect("sym", "[")
                label = self.ident()
                self.expect("sym", "]")
                return Mark(self.operand(), label)
            if t.text == "dice":
                self.next()
                self.expect("sym", "(")
                rate = self.rational()
                self.expect("sym", ")")
                return Dice(rate)
        return self.atom()

    def atom(self) -> Term:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return num(int(t.text))
        if t.kind == "ident":
            self.next()
            return Var(t.text)
        if t.kind == "sym" and t.text == "(":
            self.next()
            body = self.term()
            self.expect("sym", ")")
            return body
        self.fail("expected a term")
        raise AssertionError

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            self.fail("expected an identifier")
        return self.next().text

    def rational(self) -> Fraction:
        t = self.peek()
        if t.kind == "dec":
            self.next()
            return Fraction(t.text)
        if t.kind == "num":
            self.next()
            p = int(t.text)
            if self.at("sym", "/"):
                self.next()
                qt = self.peek()
                if qt.kind != "num":
                    self.fail("expected a denominator")
                q = int(self.next().text)
                if q == 0:
                    self.fail("zero denominator")
                return Fraction(p, q)
            return Fraction(p)
        self.fail("expected a rational")
        raise AssertionError


def parse_term(src: str) -> Term:
    p = _Parser(src)
    t = p.term()
    if p.peek().kind != "eof":
        p.fail("trailing input")
    return t


def parse_type(src: str) -> Type:
    p = _Parser(src)
    ty = p.type_()
    if p.peek().kind != "eof":
        p.fail("trailing input")
    return ty


# ---------------------------------------------------------------------------
# printer

def type_to_text(ty: Type) -> str:
    if type(ty) is Nat:
        return "nat"
    dom = type_to_text(ty.dom)
    if type(ty.dom) is Arrow:
        dom = f"({dom})"
    return f"{dom} -> {type_to_text(ty.cod)}"


_ATOM, _ITEM, _APP, _TERM = range(4)


def _print(t: Term, level: int) -> str:
    cls = type(t)
    if cls is Num:
        return str(t.n)
    if cls is Var:
        return t.name
    if cls is Dice:
        return f"dice({t.rate})"
    if cls is Succ:
        s, need = f"succ {_print(t.arg, _ATOM)}", _ITEM
    elif cls is Pred:
        s, need = f"pred {_print(t.arg, _ATOM)}", _ITEM
    elif cls is Fix:
        s, need = f"fix {_print(t.arg, _ATOM)}", _ITEM
    elif cls is Mark:
        s, need = f"mark[{t.label}] {_print(t.body, _ATOM)}", _ITEM
    elif cls is App:
        s, need = f"{_print(t.fun, _APP)} {_print(t.arg, _ITEM)}", _APP
    elif cls is Lam:
        s = f"\\{t.name}:{type_to_text(t.ty)}. {_print(t.body, _TERM)}"
        need = _TERM
    elif cls is Let:
        s = (f"let {t.name} = {_print(t.bound, _TERM)} "
             f"in {_print(t.body, _TERM)}")
        need = _TERM
    elif cls is Ifz:
        s = (f"ifz {_print(t.scrut, _TERM)} then {_print(t.zero, _TERM)} "
             f"else {_print(t.pos, _TERM)}")
        need = _TERM
    else:
        raise TypeError(f"not a term: {t!r}")
    return s if need <= level else f"({s})"


def to_text(t: Term) -> str:
    """Concrete syntax that parses back to the same tree."""
    return _print(t, _TERM)


# ---------------------------------------------------------------------------
# type checker

def typecheck(t: Term, ctx: Optional[Mapping[str, Type]] = None) -> Type:
    """Type of t under ctx, or raise PpcfTypeError."""
    return _check(t, dict(ctx) if ctx else {})


def _check(t: Term, ctx: dict[str, Type]) -> Type:
    cls = type(t)
    if cls is Num:
        return NAT
    if cls is Var:
        ty = ctx.get(t.name)
        if ty is None:
            raise PpcfTypeError(f"unbound variable {t.name!r}")
        return ty
    if cls is Dice:
        return NAT
    if cls is Succ or cls is Pred:
        _want(t.arg, NAT, ctx, "argument of succ/pred")
        return NAT
    if cls is Mark:
        return _check(t.body, ctx)
    if cls is Lam:
        saved = ctx.get(t.name)
        ctx[t.name] = t.ty
        body = _check(t.body, ctx)
        _restore(ctx, t.name, saved)
        return Arrow(t.ty, body)
    if cls is App:
        fun = _check(t.fun, ctx)
        if type(fun) is not Arrow:
            raise PpcfTypeError(
                f"cannot apply a term of type {fun} in {to_text(t)}")
        _want(t.arg, fun.dom, ctx, "operand")
        return fun.cod
    if cls is Fix:
        ty = _check(t.arg, ctx)
        if type(ty) is not Arrow or ty.dom != ty.cod:
            raise PpcfTypeError(
                f"fix needs a term of type s -> s, found {ty}")
        return ty.dom
    if cls is Let:
        _want(t.bound, NAT, ctx, "let binding")
        saved = ctx.get(t.name)
        ctx[t.name] = NAT
        body = _check(t.body, ctx)
        _restore(ctx, t.name, saved)
        return body
    if cls is Ifz:
        _want(t.scrut, NAT, ctx, "ifz scrutinee")
        zero = _check(t.zero, ctx)
        pos = _check(t.pos, ctx)
        if zero != pos:
            raise PpcfTypeError(
                f"ifz branches disagree: {zero} versus {pos}")
        return zero
    raise TypeError(f"not a term: {t!r}")


def _want(t: Term, ty: Type, ctx: dict[str, Type], what: str) -> None:
    found = _check(t, ctx)
    if found != ty:
        raise PpcfTypeError(f"{what} must have type {ty}, found {found} "
                            f"in {to_text(t)}")


def _restore(ctx: dict[str, Type], name: str, saved: Optional[Type]) -> None:
    if saved is None:
        ctx.pop(name, None)
    else:
        ctx[name] = saved


# ---------------------------------------------------------------------------
# the test family from the expected-runtime example

def make_mq(q) -> Term:
    """The recursive coin program of bias q, of type nat -> nat.

    On a coin showing 0 (probability q) the function calls itself twice
    on its argument and returns 0 only if both calls do; otherwise it
    tests its argument twice the same way.  Convergence probability and
    expected number of argument uses have closed forms, which makes the
    family a good oracle for the semantic derivative machinery.
    """
    q = Fraction(q)
    omega = loop(NAT)

    def gate(scrut: Term) -> Term:
        return Ifz(scrut, Ifz(scrut, num(0), omega), omega)

    f, x = Var("f"), Var("x")
    body = Ifz(Dice(q), gate(App(f, x)), gate(x))
    return Fix(Lam("f", Arrow(NAT, NAT), Lam("x", NAT, body)))
