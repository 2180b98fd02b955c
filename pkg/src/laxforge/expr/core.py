"""Exact expression kernel.

An :class:`Expr` is stored in a flat canonical form: a finite sum of terms
``coeff * prod(atom ** exponent)`` with rational (``int``/``Fraction``)
coefficients and rational exponents.  Everything that is not a sum or a
product lives in an :class:`Atom`:

* :class:`Symbol` -- independent variables and constant parameters,
* :class:`ImagUnit` -- ``I`` (exponent is kept in ``{0, 1}``),
* :class:`ConstPow` -- irrational powers of positive integers such as ``2^(1/2)``,
* :class:`Func` -- applications of a :class:`FuncSym` (fields, arbitrary
  functions, antiderivative markers), with a derivative multi-index,
* :class:`ExpAtom`, :class:`LogAtom` -- ``exp`` of a primitive monomial and
  ``log`` of a non-monomial expression,
* :class:`SumPow` -- a sum raised to a negative integer power.

Positive integer powers of sums are always expanded, so two expressions that
are equal as polynomials in their atoms have identical term maps.  Quotients
by sums are *not* cancelled; equality of such expressions is decided by
:func:`laxforge.expr.zero.is_zero`.

Fractional exponents of symbols and jets follow the positive-real convention
``(x^a)^b = x^(a*b)``.
"""

from __future__ import annotations

import itertools
import threading
from fractions import Fraction
from functools import cmp_to_key
from typing import Iterable, Mapping, Union

Rational = Union[int, Fraction]

_lock = threading.RLock()
_serial = itertools.count()


class KernelError(ValueError):
    """Raised for operations outside the kernel's decidable fragment."""


def qnorm(x) -> Rational:
    """Normalise an int/Fraction/str so integral values are plain ints."""
    if type(x) is int:
        return x
    if type(x) is Fraction:
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, bool):
        return int(x)
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else x


def _qkey(q: Rational) -> tuple[int, int]:
    if type(q) is int:
        return (q, 1)
    return (q.numerator, q.denominator)


def iroot(a: int, d: int) -> int | None:
    """Exact integer d-th root of a >= 0, or None."""
    if a < 0:
        return None
    if a < 2 or d == 1:
        return a
    r = int(round(a ** (1.0 / d))) if a < 2**1000 else 1 << (a.bit_length() // d)
    # newton refinement for large values
    for _ in range(200):
        if r <= 0:
            r = 1
        nr = ((d - 1) * r + a // r ** (d - 1)) // d
        if abs(nr - r) <= 1:
            break
        r = nr
    for c in (r - 1, r, r + 1):
        if c >= 0 and c**d == a:
            return c
    return None


def rational_root(q: Rational, d: int) -> Rational | None:
    """Exact d-th root of a non-negative rational, or None."""
    q = Fraction(q)
    if q < 0:
        return None
    num = iroot(q.numerator, d)
    den = iroot(q.denominator, d)
    if num is None or den is None:
        return None
    return qnorm(Fraction(num, den))


# --------------------------------------------------------------------- atoms


class Atom:
    """Interned leaf of the expression tree."""

    __slots__ = ("_id", "_skey", "_hash")
    _table: dict = {}
    special = False  # atoms whose exponents need folding after products

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)

    @classmethod
    def _intern(cls, key, builder):
        with _lock:
            atom = Atom._table.get(key)
            if atom is None:
                atom = object.__new__(cls)
                atom._id = next(_serial)
                atom._skey = None
                atom._hash = hash(key)
                builder(atom)
                Atom._table[key] = atom
            return atom

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        from .printer import atom_str

        return f"<{type(self).__name__} {atom_str(self)}>"

    def sort_key(self) -> tuple:
        if self._skey is None:
            self._skey = self._make_skey()
        return self._skey

    def _make_skey(self) -> tuple:  # pragma: no cover - abstract
        raise NotImplementedError


class ImagUnit(Atom):
    __slots__ = ()
    special = True

    def _make_skey(self):
        return (0,)


class Symbol(Atom):
    __slots__ = ("name",)

    @staticmethod
    def make(name: str) -> "Symbol":
        def build(a):
            a.name = name

        return Symbol._intern(("S", name), build)

    def _make_skey(self):
        return (1, self.name)


class ConstPow(Atom):
    """Irrational power of an integer base > 1; exponent kept in (0, 1)."""

    __slots__ = ("base",)
    special = True

    @staticmethod
    def make(base: int) -> "ConstPow":
        def build(a):
            a.base = base

        return ConstPow._intern(("C", base), build)

    def _make_skey(self):
        return (2, self.base)


class FuncSym:
    """A named function of declared parameters.

    ``kind`` is ``"field"`` for jet fields (printed as ``u_xx``),
    ``"function"`` for arbitrary functions (printed as ``A1(y)``) and
    ``"integral"`` for antiderivative markers.  ``rules`` maps a parameter
    name to the template expression (in the parameter symbols) of the
    partial derivative with respect to that parameter.
    """

    kind_rank = {"field": 3, "function": 4, "integral": 5}

    def __init__(self, name: str, params: Iterable[str], kind: str = "function",
                 rules: Mapping[str, "Expr"] | None = None):
        self.name = name
        self.params = tuple(params)
        if kind not in self.kind_rank:
            raise ValueError(f"unknown FuncSym kind {kind!r}")
        self.kind = kind
        self.rules: dict[str, Expr] = {}
        self._pcache: dict = {}
        for k, v in (rules or {}).items():
            self.set_rule(k, v)

    def set_rule(self, param: str, template) -> None:
        if param not in self.params:
            raise KernelError(f"{self.name} has no parameter {param!r}")
        self.rules[param] = as_expr(template)
        self._pcache.clear()
        _dcache.clear()

    def rule(self, k: int):
        return self.rules.get(self.params[k])

    def param_symbols(self) -> tuple["Expr", ...]:
        return tuple(Expr.atom(Symbol.make(p)) for p in self.params)

    def __call__(self, *args) -> "Expr":
        """Apply to arguments (defaults to the parameter symbols)."""
        if not args:
            args = self.param_symbols()
        if len(args) != len(self.params):
            raise KernelError(f"{self.name} expects {len(self.params)} arguments, got {len(args)}")
        return Expr.atom(Func.make(self, (0,) * len(self.params), tuple(as_expr(a) for a in args)))

    def jet(self, *names: str) -> "Expr":
        """Jet of this field at its own parameters, e.g. ``u.jet('x', 'x')``."""
        e = self()
        for n in names:
            e = diff(e, n)
        return e

    def __repr__(self):
        return f"FuncSym({self.name!r}, {self.params!r}, {self.kind!r})"


class Func(Atom):
    __slots__ = ("fsym", "deriv", "args")

    @staticmethod
    def make(fsym: FuncSym, deriv: tuple, args: tuple) -> "Func":
        args = tuple(a.interned() for a in args)

        def build(a):
            a.fsym = fsym
            a.deriv = deriv
            a.args = args

        return Func._intern(("F", id(fsym), deriv, args), build)

    def is_jet(self) -> bool:
        """True when applied to its own parameter symbols."""
        if self.fsym.kind != "field":
            return False
        for p, a in zip(self.fsym.params, self.args):
            s = a.as_symbol()
            if s is None or s.name != p:
                return False
        return True

    def at_params(self) -> bool:
        for p, a in zip(self.fsym.params, self.args):
            s = a.as_symbol()
            if s is None or s.name != p:
                return False
        return True

    def _make_skey(self):
        f = self.fsym
        return (f.kind_rank[f.kind], f.name, f.params, self.deriv,
                tuple(a.sort_key() for a in self.args))


class ExpAtom(Atom):
    __slots__ = ("arg",)

    @staticmethod
    def make(arg: "Expr") -> "ExpAtom":
        arg = arg.interned()

        def build(a):
            a.arg = arg

        return ExpAtom._intern(("E", arg), build)

    def _make_skey(self):
        return (6, self.arg.sort_key())


class LogAtom(Atom):
    __slots__ = ("arg",)

    @staticmethod
    def make(arg: "Expr") -> "LogAtom":
        arg = arg.interned()

        def build(a):
            a.arg = arg

        return LogAtom._intern(("L", arg), build)

    def _make_skey(self):
        return (7, self.arg.sort_key())


class SumPow(Atom):
    """A sum with leading coefficient 1, carried with negative integer exponents."""

    __slots__ = ("base",)

    @staticmethod
    def make(base: "Expr") -> "SumPow":
        base = base.interned()

        def build(a):
            a.base = base

        return SumPow._intern(("P", base), build)

    def _make_skey(self):
        return (8, self.base.sort_key())


I_ATOM = ImagUnit._intern(("I",), lambda a: None)


# ----------------------------------------------------------------- monomials

def _by_id(pair):
    return pair[0]._id


def _fold_special(d: dict, atoms) -> Rational:
    """Reduce I and ConstPow exponents in-place; return coefficient factor."""
    coeff: Rational = 1
    for a in atoms:
        e = d.get(a)
        if e is None:
            continue
        if a is I_ATOM:
            if type(e) is not int:
                raise KernelError("fractional power of I")
            k = e % 4
            if k >= 2:
                coeff = -coeff
            if k % 2:
                d[a] = 1
            else:
                del d[a]
        elif isinstance(a, ConstPow):
            fl = e.numerator // e.denominator if type(e) is Fraction else e
            if fl:
                coeff = coeff * Fraction(a.base) ** fl
                rest = qnorm(e - fl)
                if rest:
                    d[a] = rest
                else:
                    del d[a]
    return qnorm(coeff)


def mono_mul(m1: tuple, m2: tuple) -> tuple[tuple, Rational]:
    if not m1:
        return m2, 1
    if not m2:
        return m1, 1
    d = dict(m1)
    special = None
    for a, e in m2:
        s = d.get(a)
        if s is None:
            d[a] = e
        else:
            s = s + e
            if s == 0:
                del d[a]
            else:
                d[a] = s if type(s) is int else qnorm(s)
            if a.special:
                special = (special or []) + [a]
    coeff: Rational = 1
    if special:
        coeff = _fold_special(d, special)
    return tuple(sorted(d.items(), key=_by_id)), coeff


# ---------------------------------------------------------------- expressions


def _add_into(d: dict, m: tuple, c) -> None:
    s = d.get(m)
    if s is None:
        d[m] = c
    else:
        s = s + c
        if s:
            d[m] = s if type(s) is int else qnorm(s)
        else:
            del d[m]


class Expr:
    """Immutable canonical expression (see module docstring)."""

    __slots__ = ("_t", "_h", "_sk", "__weakref__")
    _intern_table: dict = {}

    def __init__(self, terms: dict | None = None):
        self._t = terms if terms is not None else {}
        self._h = None
        self._sk = None

    # construction --------------------------------------------------------
    @staticmethod
    def const(q) -> "Expr":
        q = qnorm(q)
        return Expr({(): q}) if q else Expr()

    @staticmethod
    def atom(a: Atom, e: Rational = 1) -> "Expr":
        if a is I_ATOM or isinstance(a, ConstPow):
            d = {a: qnorm(e)}
            c = _fold_special(d, [a])
            return Expr({tuple(d.items()): c})
        return Expr({((a, qnorm(e)),): 1})

    @staticmethod
    def symbol(name: str) -> "Expr":
        return Expr.atom(Symbol.make(name))

    def interned(self) -> "Expr":
        with _lock:
            return Expr._intern_table.setdefault(self, self)

    # inspection ------------------------------------------------------------
    @property
    def terms(self) -> dict:
        return self._t

    def is_zero_structural(self) -> bool:
        return not self._t

    def is_const(self) -> bool:
        return not self._t or (len(self._t) == 1 and () in self._t)

    def const_value(self) -> Rational | None:
        if not self._t:
            return 0
        if len(self._t) == 1 and () in self._t:
            return self._t[()]
        return None

    def as_symbol(self) -> Symbol | None:
        if len(self._t) == 1:
            ((m, c),) = self._t.items()
            if c == 1 and len(m) == 1 and m[0][1] == 1 and isinstance(m[0][0], Symbol):
                return m[0][0]
        return None

    def as_atom(self) -> Atom | None:
        if len(self._t) == 1:
            ((m, c),) = self._t.items()
            if c == 1 and len(m) == 1 and m[0][1] == 1:
                return m[0][0]
        return None

    def is_monomial(self) -> bool:
        return len(self._t) == 1

    def atoms(self, recursive: bool = False) -> set:
        out: set = set()
        stack = [self]
        seen = set()
        while stack:
            e = stack.pop()
            for m in e._t:
                for a, _ in m:
                    if a in out:
                        continue
                    out.add(a)
                    if recursive:
                        for sub in atom_children(a):
                            if id(sub) not in seen:
                                seen.add(id(sub))
                                stack.append(sub)
        return out

    def free_symbols(self) -> set[str]:
        return {a.name for a in self.atoms(recursive=True) if isinstance(a, Symbol)}

    def __len__(self):
        return len(self._t)

    # value semantics -----------------------------------------------------
    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._t.items()))
        return self._h

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                return self._t == Expr.const(other)._t
            return NotImplemented
        return self._t == other._t

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __bool__(self):
        raise TypeError("truth value of Expr is ambiguous; use is_zero()")

    def sort_key(self) -> tuple:
        if self._sk is None:
            self._sk = tuple(sorted((mono_skey(m), _qkey(c)) for m, c in self._t.items()))
        return self._sk

    def __repr__(self):
        from .printer import to_str

        return f"Expr({to_str(self)!r})"

    def __str__(self):
        from .printer import to_str

        return to_str(self)

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        if not other._t:
            return self
        if not self._t:
            return other
        if len(other._t) > len(self._t):
            a, b = other, self
        else:
            a, b = self, other
        d = dict(a._t)
        for m, c in b._t.items():
            _add_into(d, m, c)
        return Expr(d)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self._t.items()})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            q = qnorm(other)
            if not q:
                return Expr()
            if q == 1:
                return self
            return Expr({m: qnorm(c * q) for m, c in self._t.items()})
        other = as_expr(other)
        if not self._t or not other._t:
            return Expr()
        d: dict = {}
        for m1, c1 in self._t.items():
            for m2, c2 in other._t.items():
                m, f = mono_mul(m1, m2)
                _add_into(d, m, qnorm(c1 * c2 * f))
        return Expr(d)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero constant")
            return self * qnorm(Fraction(1) / Fraction(other))
        return self * power(as_expr(other), -1)

    def __rtruediv__(self, other):
        return as_expr(other) * power(self, -1)

    def __pow__(self, q):
        if isinstance(q, Expr):
            v = q.const_value()
            if v is None:
                raise KernelError("symbolic exponents are not supported")
            q = v
        return power(self, qnorm(q))

    # calculus ------------------------------------------------------------
    def diff(self, var, times: int = 1) -> "Expr":
        return diff(self, var, times)

    def subs(self, rules) -> "Expr":
        return substitute(self, rules)


ZERO = Expr()
ONE = Expr.const(1)
I = Expr.atom(I_ATOM)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    if isinstance(x, Atom):
        return Expr.atom(x)
    if isinstance(x, str):
        from .parser import parse

        return parse(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def atom_children(a: Atom) -> tuple:
    if isinstance(a, Func):
        if a.fsym.kind == "integral":
            return a.args + (a.fsym.integrand,)
        return a.args
    if isinstance(a, (ExpAtom, LogAtom)):
        return (a.arg,)
    if isinstance(a, SumPow):
        return (a.base,)
    return ()


# --------------------------------------------------------------- term order

def mono_skey(m: tuple) -> tuple:
    return tuple(sorted((a.sort_key(), _qkey(e)) for a, e in m))


def _mono_cmp(m1: tuple, m2: tuple) -> int:
    """Graded reverse-lexicographic comparison (1 if m1 > m2)."""
    d1 = sum(e for a, e in m1 if a is not I_ATOM)
    d2 = sum(e for a, e in m2 if a is not I_ATOM)
    if d1 != d2:
        return 1 if d1 > d2 else -1
    e1 = {a.sort_key(): e for a, e in m1}
    e2 = {a.sort_key(): e for a, e in m2}
    for k in sorted(set(e1) | set(e2), reverse=True):
        x, y = e1.get(k, 0), e2.get(k, 0)
        if x != y:
            return 1 if x < y else -1
    return 0


mono_order_key = cmp_to_key(_mono_cmp)


def ordered_terms(e: Expr) -> list[tuple[tuple, Rational]]:
    """Terms sorted leading-first."""
    return sorted(e._t.items(), key=lambda mc: mono_order_key(mc[0]), reverse=True)


def leading_term(e: Expr) -> tuple[tuple, Rational]:
    if not e._t:
        raise KernelError("zero has no leading term")
    best = None
    for m, c in e._t.items():
        if best is None or _mono_cmp(m, best[0]) > 0:
            best = (m, c)
    return best


def term_expr(m: tuple, c: Rational = 1) -> Expr:
    return Expr({m: c}) if c else Expr()


# ------------------------------------------------------------------- powers


def _int_pow_const(c: Rational, q: Rational) -> Expr:
    """c ** q for a nonzero rational c and rational q."""
    if type(q) is int:
        return Expr.const(Fraction(c) ** q)
    out = ONE
    if c < 0:
        twice = q * 2
        if Fraction(twice).denominator != 1:
            raise KernelError(f"({c})^({q}) is not representable")
        out = Expr.atom(I_ATOM, int(twice))
        c = -c
    c = Fraction(c)
    r = rational_root(c, q.denominator)
    if r is not None:
        return out * Expr.const(Fraction(r) ** q.numerator)
    for base, sign in ((c.numerator, 1), (c.denominator, -1)):
        for prime, mult in _factor(base):
            out = out * Expr.atom(ConstPow.make(prime), qnorm(sign * mult * q))
    return out


def _factor(m: int) -> list[tuple[int, int]]:
    """Prime factorisation by trial division; a large cofactor is kept whole."""
    out = []
    p = 2
    while p * p <= m and p < 100000:
        k = 0
        while m % p == 0:
            m //= p
            k += 1
        if k:
            out.append((p, k))
        p += 1 if p == 2 else 2
    if m > 1:
        out.append((m, 1))
    return out


def power(e: Expr, q: Rational) -> Expr:
    if q == 1:
        return e
    if q == 0:
        return ONE
    if not e._t:
        if q > 0:
            return ZERO
        raise ZeroDivisionError("zero to a non-positive power")
    if len(e._t) == 1:
        ((m, c),) = e._t.items()
        out = _int_pow_const(c, q) if c != 1 else ONE
        d: dict = {}
        special = []
        for a, ea in m:
            ne = qnorm(ea * q)
            if isinstance(a, SumPow) and type(ne) is not int:
                raise KernelError("fractional power of a sum")
            d[a] = ne
            if a.special:
                special.append(a)
        f = _fold_special(d, special) if special else 1
        return out * Expr({tuple(sorted(d.items(), key=_by_id)): f})
    if type(q) is int and q > 0:
        result = ONE
        base = e
        k = q
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result
    if type(q) is not int:
        raise KernelError("fractional power of a sum is not supported")
    # negative integer power of a sum: normalise leading coefficient to 1
    _, lc = leading_term(e)
    base = e * qnorm(Fraction(1) / Fraction(lc)) if lc != 1 else e
    return Expr.const(Fraction(lc) ** q) * Expr.atom(SumPow.make(base), q)


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` from its terms through the arithmetic.

    Every constructor returns canonical forms, so this is the identity on
    any ``Expr``; it exists to state and test that property.
    """
    total = Expr()
    for m, c in e.terms.items():
        t = Expr.const(c)
        for a, ea in m:
            t = t * _rebuild_atom(a, ea)
        total = total + t
    return total


def _rebuild_atom(a: Atom, ea) -> Expr:
    if isinstance(a, SumPow):
        return power(simplify(a.base), ea)
    if isinstance(a, ExpAtom):
        return power(exp(simplify(a.arg)), ea)
    if isinstance(a, LogAtom):
        return power(log(simplify(a.arg)), ea)
    if isinstance(a, Func):
        a = Func.make(a.fsym, a.deriv, tuple(simplify(x) for x in a.args))
    return Expr.atom(a, ea)


def cancel_mul(e: Expr, s: Expr) -> Expr:
    """Multiply ``e`` by the sum ``s`` cancelling ``s^(-k)`` factors exactly."""
    if len(s._t) < 2:
        return e * s
    _, lc = leading_term(s)
    base = (s * qnorm(Fraction(1) / Fraction(lc))).interned()
    key = ("P", base)
    atom = Atom._table.get(key)
    if atom is None:
        return e * s
    out: dict = {}
    plain: dict = {}
    for m, c in e._t.items():
        idx = next((i for i, (a, _) in enumerate(m) if a is atom), None)
        if idx is None:
            plain[m] = c
            continue
        a, ea = m[idx]
        ne = ea + 1
        nm = m[:idx] + m[idx + 1:] if ne == 0 else m[:idx] + ((a, ne),) + m[idx + 1:]
        _add_into(out, nm, qnorm(c * lc))
    rest = Expr(plain) * s
    for m, c in rest._t.items():
        _add_into(out, m, c)
    return Expr(out)


def sqrt(e) -> Expr:
    return power(as_expr(e), Fraction(1, 2))


def exp(e) -> Expr:
    e = as_expr(e)
    out = ONE
    for m, c in e._t.items():
        if len(m) == 1 and isinstance(m[0][0], LogAtom) and m[0][1] == 1:
            out = out * power(m[0][0].arg, c)
            continue
        out = out * Expr.atom(ExpAtom.make(Expr({m: 1})), c)
    return out


def log(e) -> Expr:
    e = as_expr(e)
    if not e._t:
        raise KernelError("log(0)")
    if len(e._t) > 1:
        return Expr.atom(LogAtom.make(e))
    ((m, c),) = e._t.items()
    out = ZERO
    if c != 1:
        if c < 0:
            raise KernelError("log of a negative constant")
        out = out + Expr.atom(LogAtom.make(Expr.const(c)))
    for a, ea in m:
        if isinstance(a, ExpAtom):
            out = out + a.arg * ea
        elif a is I_ATOM:
            raise KernelError("log of I")
        else:
            out = out + Expr.atom(LogAtom.make(Expr.atom(a))) * ea
    return out


# ----------------------------------------------------------- integral marks


class IntegralSym(FuncSym):
    """Antiderivative marker ``Int[f; s]``.

    Parameters are ``s`` followed by the other free symbols of ``f``.  The
    derivative in ``s`` is ``f``; derivatives in the other parameters pass
    under the integral sign.
    """

    _table: dict = {}

    def __init__(self, integrand: Expr, var: str):
        others = sorted(integrand.free_symbols() - {var})
        super().__init__("Int", (var, *others), kind="integral")
        self.integrand = integrand
        self.var = var

    @staticmethod
    def make(integrand: Expr, var: str) -> "IntegralSym":
        integrand = integrand.interned()
        with _lock:
            key = (integrand, var)
            sym = IntegralSym._table.get(key)
            if sym is None:
                sym = IntegralSym(integrand, var)
                IntegralSym._table[key] = sym
            return sym

    def rule(self, k: int):
        p = self.params[k]
        r = self.rules.get(p)
        if r is None:
            if k == 0:
                r = self.integrand
            else:
                r = integral(diff(self.integrand, p), self.var)
            self.rules[p] = r
        return r


def integral(f, var: str) -> Expr:
    """Opaque antiderivative ``Int[f; var]`` applied at its own parameters."""
    f = as_expr(f)
    if not f._t:
        return ZERO
    sym = IntegralSym.make(f, var)
    return Expr.atom(Func.make(sym, (0,) * len(sym.params), sym.param_symbols()))


# -------------------------------------------------------------- derivatives

_dcache: dict = {}


def _template_partial(f: FuncSym, deriv: tuple, k: int) -> Expr:
    key = (deriv, k)
    r = f._pcache.get(key)
    if r is None:
        r = f.rule(k)
        for p, cnt in zip(f.params, deriv):
            for _ in range(cnt):
                r = derivative(r, Symbol.make(p))
        f._pcache[key] = r
    return r


def _bind_params(template: Expr, fsym: FuncSym, args: tuple) -> Expr:
    mapping = {}
    for p, a in zip(fsym.params, args):
        s = a.as_symbol()
        if s is None or s.name != p:
            mapping[Symbol.make(p)] = a
    if not mapping:
        return template
    return Substituter(symbols=mapping).expr(template)


def partial(atom: Func, k: int) -> Expr:
    """Partial derivative of a function application in its k-th argument."""
    f = atom.fsym
    if f.rule(k) is not None:
        t = _template_partial(f, atom.deriv, k)
        return _bind_params(t, f, atom.args)
    deriv = list(atom.deriv)
    deriv[k] += 1
    return Expr.atom(Func.make(f, tuple(deriv), atom.args))


def _datom(a: Atom, wrt: Atom, opaque: bool) -> Expr:
    if a is wrt:
        return ONE
    key = (a, wrt, opaque)
    r = _dcache.get(key)
    if r is not None:
        return r
    if isinstance(a, (Symbol, ImagUnit, ConstPow)):
        r = ZERO
    elif isinstance(a, Func):
        if opaque and a.is_jet():
            r = ZERO
        else:
            r = ZERO
            for k, arg in enumerate(a.args):
                da = derivative(arg, wrt, opaque)
                if da._t:
                    r = r + partial(a, k) * da
    elif isinstance(a, ExpAtom):
        da = derivative(a.arg, wrt, opaque)
        r = Expr.atom(a) * da if da._t else ZERO
    elif isinstance(a, LogAtom):
        da = derivative(a.arg, wrt, opaque)
        r = da * power(a.arg, -1) if da._t else ZERO
    elif isinstance(a, SumPow):
        r = derivative(a.base, wrt, opaque)
    else:  # pragma: no cover
        raise KernelError(f"cannot differentiate {a!r}")
    _dcache[key] = r
    return r


def derivative(e: Expr, wrt: Atom, opaque_jets: bool = False) -> Expr:
    """Derivative of ``e`` with respect to an atom.

    With ``wrt`` a :class:`Symbol` this is the total derivative: jets and
    function applications are differentiated by the chain rule through their
    arguments.  With ``opaque_jets`` set, field jets are independent
    coordinates (the explicit partial of jet-space calculus).
    """
    out: dict = {}
    for m, c in e._t.items():
        for i, (a, ea) in enumerate(m):
            da = _datom(a, wrt, opaque_jets)
            if not da._t:
                continue
            if ea == 1:
                rest = m[:i] + m[i + 1:]
            else:
                ne = ea - 1
                rest = m[:i] + ((a, ne if type(ne) is int else qnorm(ne)),) + m[i + 1:]
            k = c * ea
            for m2, c2 in da._t.items():
                mm, f = mono_mul(rest, m2)
                _add_into(out, mm, qnorm(k * c2 * f))
    return Expr(out)


def _var_atom(var) -> Atom:
    if isinstance(var, Atom):
        return var
    if isinstance(var, str):
        return Symbol.make(var)
    if isinstance(var, Expr):
        a = var.as_atom()
        if a is None:
            raise KernelError("can only differentiate with respect to an atom")
        return a
    raise TypeError(var)


def diff(e, var, times: int = 1) -> Expr:
    """Total derivative with respect to an independent variable (by name)."""
    e = as_expr(e)
    a = _var_atom(var)
    for _ in range(times):
        e = derivative(e, a)
    return e


def diff_multi(e: Expr, names: Iterable[str]) -> Expr:
    for n in names:
        e = diff(e, n)
    return e


# ------------------------------------------------------------- substitution


class Substituter:
    """Simultaneous substitution of symbols, atoms and whole functions.

    ``symbols`` maps :class:`Symbol` to Expr (also inside function
    arguments); ``atoms`` maps exact atoms (e.g. one jet) to Expr;
    ``funcs`` maps a :class:`FuncSym` to a template in its parameter symbols
    and rewrites every application and derivative of it (derivative
    closure).
    """

    def __init__(self, symbols=None, atoms=None, funcs=None):
        self.symbols = symbols or {}
        self.atoms = atoms or {}
        self.funcs = funcs or {}
        self._acache: dict = {}
        self._pcache: dict = {}
        self._ecache: dict = {}

    def atom(self, a: Atom) -> Expr | None:
        try:
            return self._acache[a]
        except KeyError:
            pass
        r = None
        if a in self.atoms:
            r = self.atoms[a]
        elif isinstance(a, Symbol):
            r = self.symbols.get(a)
        elif isinstance(a, Func):
            f = a.fsym
            args = tuple(self.expr(x) for x in a.args)
            changed = any(x is not y for x, y in zip(args, a.args))
            if f in self.funcs:
                t = self.funcs[f]
                for p, cnt in zip(f.params, a.deriv):
                    for _ in range(cnt):
                        t = derivative(t, Symbol.make(p))
                r = _bind_params(t, f, args)
            elif f.kind == "integral" and (self.atoms or self.funcs):
                sub = Substituter(atoms=self.atoms, funcs=self.funcs)
                integrand = sub.expr(f.integrand)
                if integrand is not f.integrand:
                    inner = integral(integrand, f.var)
                    r = _bind_params(inner, f, args) if changed else inner
                elif changed:
                    r = Expr.atom(Func.make(f, a.deriv, args))
            elif changed:
                r = Expr.atom(Func.make(f, a.deriv, args))
        elif isinstance(a, ExpAtom):
            arg = self.expr(a.arg)
            if arg is not a.arg:
                r = exp(arg)
        elif isinstance(a, LogAtom):
            arg = self.expr(a.arg)
            if arg is not a.arg:
                r = log(arg)
        elif isinstance(a, SumPow):
            base = self.expr(a.base)
            if base is not a.base:
                r = base
        self._acache[a] = r
        return r

    def _pow(self, a: Atom, r: Expr, e) -> Expr:
        key = (a, e)
        p = self._pcache.get(key)
        if p is None:
            p = power(r, e)
            self._pcache[key] = p
        return p

    def expr(self, e: Expr) -> Expr:
        cached = self._ecache.get(id(e))
        if cached is not None and cached[0] is e:
            return cached[1]
        out: dict = {}
        changed = False
        for m, c in e._t.items():
            keep = []
            factors = []
            for a, ea in m:
                r = self.atom(a)
                if r is None:
                    keep.append((a, ea))
                else:
                    factors.append(self._pow(a, r, ea))
            if not factors:
                _add_into(out, m, c)
                continue
            changed = True
            t = Expr({tuple(keep): c})
            for f in factors:
                t = t * f
                if not t._t:
                    break
            for m2, c2 in t._t.items():
                _add_into(out, m2, c2)
        result = Expr(out) if changed else e
        self._ecache[id(e)] = (e, result)
        return result


def substitute(e, rules: Mapping) -> Expr:
    """Simultaneous substitution.

    Keys may be symbol names, :class:`Symbol`/:class:`Func` atoms, single
    atom expressions, or :class:`FuncSym` objects (whose value is a template
    in the parameter symbols; derivatives are substituted by differentiating
    the template).
    """
    e = as_expr(e)
    symbols, atoms, funcs = {}, {}, {}
    for k, v in rules.items():
        v = as_expr(v)
        if isinstance(k, str):
            k = Symbol.make(k)
        elif isinstance(k, Expr):
            a = k.as_atom()
            if a is None:
                raise KernelError(f"substitution key {k} is not a single atom")
            k = a
        if isinstance(k, FuncSym):
            target = funcs
        elif isinstance(k, Symbol):
            target = symbols
        elif isinstance(k, Atom):
            target = atoms
        else:
            raise TypeError(f"bad substitution key {k!r}")
        if k in target and target[k] != v:
            raise KernelError(f"conflicting rules for {k!r}")
        target[k] = v
    if not (symbols or atoms or funcs):
        return e
    return Substituter(symbols, atoms, funcs).expr(e)


def coefficient(e: Expr, atom: Atom, exponent: Rational = 1) -> Expr:
    """Sum of the terms containing ``atom^exponent``, with that factor removed."""
    out: dict = {}
    for m, c in e._t.items():
        for i, (a, ea) in enumerate(m):
            if a is atom:
                if ea == exponent:
                    _add_into(out, m[:i] + m[i + 1:], c)
                break
        else:
            if exponent == 0:
                _add_into(out, m, c)
    return Expr(out)


def collect(e: Expr, atoms: Iterable[Atom]) -> dict[tuple, Expr]:
    """Group ``e`` by the exponents of the given atoms.

    Returns ``{(exp_1, ..., exp_k): coefficient}``.
    """
    atoms = list(atoms)
    idx = {a: i for i, a in enumerate(atoms)}
    groups: dict[tuple, dict] = {}
    for m, c in e._t.items():
        key = [0] * len(atoms)
        rest = []
        for a, ea in m:
            i = idx.get(a)
            if i is None:
                rest.append((a, ea))
            else:
                key[i] = ea
        _add_into(groups.setdefault(tuple(key), {}), tuple(rest), c)
    return {k: Expr(v) for k, v in groups.items() if v}
