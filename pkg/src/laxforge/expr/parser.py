"""Precedence-climbing parser for the expression grammar.

Grammar (whitespace ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom ("^" unary)?              right associative
    atom    := INT | "(" expr ")" | "I"
             | ("sqrt" | "exp" | "log") "(" expr ")"
             | "Int" "[" expr ";" NAME "]" ("(" args ")")?
             | NAME ("[" INT "]")? ("_" SUFFIX)? ("(" args ")")?

A name that resolves to a field or function in the :class:`Signature` is a
jet; the suffix after ``_`` is split greedily into that function's parameter
names (``U_z1z1z2``).  Any other name is a symbol.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (Expr, FuncSym, I, KernelError, Symbol, Substituter, as_expr,
                   diff, exp, integral, log, power, sqrt)
from .signature import Signature, standard_signature


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.message = message
        self.offset = offset


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z][A-Za-z0-9]*(?:\[\d+\])?(?:_[A-Za-z0-9]+)?)
  | (?P<op>[-+*/^()\[\];,])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", len(text[:i].encode()))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Token(kind, m.group(), len(text[:i].encode())))
        i = m.end()
    toks.append(Token("end", "", len(text.encode())))
    return toks


def split_suffix(suffix: str, params: tuple[str, ...]) -> list[str] | None:
    """Greedy split of a derivative suffix into parameter names."""
    out = []
    names = sorted(params, key=len, reverse=True)
    i = 0
    while i < len(suffix):
        for p in names:
            if suffix.startswith(p, i):
                out.append(p)
                i += len(p)
                break
        else:
            return None
    return out


def apply_func(f: FuncSym, wrt: list[str], args: tuple[Expr, ...] | None) -> Expr:
    """Derivative of ``f`` (in the named parameters) evaluated at ``args``."""
    e = f()
    for p in wrt:
        e = diff(e, p)
    if args is None:
        return e
    mapping = {}
    for p, a in zip(f.params, args):
        s = a.as_symbol()
        if s is None or s.name != p:
            mapping[Symbol.make(p)] = a
    if not mapping:
        return e
    return Substituter(symbols=mapping).expr(e)


class Parser:
    def __init__(self, text: str, sig: Signature):
        self.text = text
        self.sig = sig
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.take()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.pos)
        return t

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            t = self.take()
            rhs = self.unary()
            if t.text == "*":
                e = e * rhs
            else:
                if rhs.is_zero_structural():
                    raise ParseError("division by zero", t.pos)
                e = e / rhs
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.take()
            return -self.unary()
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().text == "^":
            t = self.take()
            ex = self.unary()
            q = ex.const_value()
            if q is None:
                raise ParseError("exponent must be a rational constant", t.pos)
            try:
                return power(base, q)
            except (KernelError, ZeroDivisionError) as err:
                raise ParseError(str(err), t.pos) from None
        return base

    def args(self) -> tuple[Expr, ...]:
        self.expect("(")
        out = [self.expr()]
        while self.peek().text == ",":
            self.take()
            out.append(self.expr())
        self.expect(")")
        return tuple(out)

    def atom(self) -> Expr:
        t = self.take()
        if t.kind == "int":
            return Expr.const(int(t.text))
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind != "name":
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos)
        name = t.text
        if name == "I":
            return I
        if name in ("sqrt", "exp", "log") and self.peek().text == "(":
            (arg,) = self._single_arg(name, t)
            try:
                return {"sqrt": sqrt, "exp": exp, "log": log}[name](arg)
            except KernelError as err:
                raise ParseError(str(err), t.pos) from None
        if name == "Int" and self.peek().text == "[":
            return self.integral(t)
        stem, _, suffix = name.partition("_")
        f = self.sig.lookup(stem)
        if f is None:
            if suffix or "[" in stem:
                raise ParseError(f"unknown field {stem!r}", t.pos)
            if self.peek().text == "(":
                raise ParseError(f"unknown function {stem!r}", t.pos)
            if stem in self.sig.constants:
                return self.sig.constants[stem]
            return Expr.atom(Symbol.make(stem))
        wrt = split_suffix(suffix, f.params) if suffix else []
        if wrt is None:
            raise ParseError(f"{suffix!r} is not a derivative of {stem}{f.params}", t.pos)
        args = None
        if self.peek().text == "(":
            p = self.peek().pos
            args = self.args()
            if len(args) != len(f.params):
                raise ParseError(f"{stem} expects {len(f.params)} arguments, got {len(args)}", p)
        return apply_func(f, wrt, args)

    def _single_arg(self, name, t):
        args = self.args()
        if len(args) != 1:
            raise ParseError(f"{name} expects 1 argument, got {len(args)}", t.pos)
        return args

    def integral(self, t: Token) -> Expr:
        self.expect("[")
        body = self.expr()
        self.expect(";")
        v = self.take()
        if v.kind != "name":
            raise ParseError("expected integration variable", v.pos)
        self.expect("]")
        e = integral(body, v.text)
        if self.peek().text == "(":
            p = self.peek().pos
            args = self.args()
            atom = e.as_atom()
            if atom is None:
                raise ParseError("applied integral of zero", p)
            f = atom.fsym
            if len(args) != len(f.params):
                raise ParseError(f"Int expects {len(f.params)} arguments, got {len(args)}", p)
            e = apply_func(f, [], args)
        return e


def parse(text: str, sig: Signature | None = None) -> Expr:
    """Parse ``text`` into a canonical :class:`Expr`."""
    return Parser(text, sig if sig is not None else standard_signature()).parse()


def parse_many(texts, sig: Signature | None = None) -> list[Expr]:
    return [parse(t, sig) for t in texts]


__all__ = ["parse", "parse_many", "ParseError", "tokenize", "split_suffix", "as_expr"]
