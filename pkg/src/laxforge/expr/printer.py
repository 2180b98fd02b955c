"""Text rendering of canonical expressions in the input grammar."""

from __future__ import annotations

from .core import (ConstPow, Expr, ExpAtom, Func, I_ATOM, LogAtom, Rational,
                   SumPow, Symbol, ordered_terms)


def _rat(q: Rational) -> str:
    if type(q) is int:
        return str(q)
    return f"{q.numerator}/{q.denominator}"


def deriv_suffix(atom: Func) -> str:
    return "".join(p * k for p, k in zip(atom.fsym.params, atom.deriv))


def atom_str(a) -> str:
    if a is I_ATOM:
        return "I"
    if isinstance(a, Symbol):
        return a.name
    if isinstance(a, ConstPow):
        return str(a.base)
    if isinstance(a, Func):
        f = a.fsym
        if f.kind == "integral":
            head = f"Int[{to_str(f.integrand)}; {f.var}]"
            if a.at_params():
                return head
            return head + "(" + ", ".join(to_str(x) for x in a.args) + ")"
        suffix = deriv_suffix(a)
        head = f.name + ("_" + suffix if suffix else "")
        if f.kind == "field" and a.at_params():
            return head
        return head + "(" + ", ".join(to_str(x) for x in a.args) + ")"
    if isinstance(a, ExpAtom):
        return f"exp({to_str(a.arg)})"
    if isinstance(a, LogAtom):
        return f"log({to_str(a.arg)})"
    if isinstance(a, SumPow):
        return f"({to_str(a.base)})"
    raise TypeError(a)


def _factor_str(a, e: Rational) -> str:
    s = atom_str(a)
    if e == 1:
        return s
    ex = _rat(e)
    if type(e) is not int or e < 0:
        ex = f"({ex})"
    return f"{s}^{ex}"


def mono_str(m: tuple) -> str:
    items = sorted(m, key=lambda ae: ae[0].sort_key())
    return "*".join(_factor_str(a, e) for a, e in items)


def to_str(e: Expr) -> str:
    terms = ordered_terms(e)
    if not terms:
        return "0"
    parts = []
    for i, (m, c) in enumerate(terms):
        neg = c < 0
        mag = -c if neg else c
        if not m:
            body = _rat(mag)
        else:
            ms = mono_str(m)
            if mag == 1:
                body = ms
            elif type(mag) is int:
                body = f"{mag}*{ms}"
            else:
                body = f"{mag.numerator}/{mag.denominator}*{ms}" if mag.numerator != 1 \
                    else f"{ms}/{mag.denominator}"
        if i == 0:
            parts.append("-" + body if neg else body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


def to_latex(e: Expr) -> str:
    """Light-weight LaTeX rendering used in report tables."""
    s = to_str(e)
    s = s.replace("*", " ").replace("lam", r"\lambda").replace("Lam", r"\Lambda")
    return s
