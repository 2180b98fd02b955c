"""Equality oracle: structural test first, exact random evaluation second.

Every atom of an expression is treated as an independent coordinate and
sampled at a rational point.  Rational exponents are handled by sampling the
atom as ``s**L`` where ``L`` is the lcm of the exponent denominators with
which it occurs, so that every power evaluates exactly.  Such atoms (and the
spectral parameters) are sampled positive.  Values live in the Gaussian
rationals, which makes ``I`` exact as well.

Sums raised to negative powers are evaluated from their base; a vanishing
denominator triggers a resample of the whole point.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .core import (Atom, ConstPow, Expr, ExpAtom, Func, I_ATOM, SumPow,
                   Symbol, leading_term, term_expr, power)

POSITIVE_NAMES = frozenset({"lam", "Lam"})
MAX_RESAMPLE = 50


class EvaluationError(ArithmeticError):
    """Evaluation hit a pole at every resampling attempt."""


class GaussRat:
    """Exact complex number with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, o):
        return GaussRat(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return GaussRat(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        if isinstance(o, GaussRat):
            return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        return GaussRat(self.re * o, self.im * o)

    def inverse(self):
        d = self.re * self.re + self.im * self.im
        if d == 0:
            raise ZeroDivisionError("GaussRat inverse of zero")
        return GaussRat(self.re / d, -self.im / d)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = GaussRat(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __eq__(self, o):
        return isinstance(o, GaussRat) and self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*I"
        return f"{self.re} + {self.im}*I"

    __repr__ = __str__


def _is_positive_atom(a: Atom) -> bool:
    if isinstance(a, Symbol):
        return a.name in POSITIVE_NAMES
    if isinstance(a, Func):
        return a.fsym.name in POSITIVE_NAMES and not any(a.deriv)
    return isinstance(a, (ExpAtom, ConstPow))


def exponent_scales(e: Expr) -> dict[Atom, int]:
    """lcm of exponent denominators per atom, looking inside sum powers."""
    scales: dict[Atom, int] = {}
    stack = [e]
    seen = set()
    while stack:
        x = stack.pop()
        for m in x.terms:
            for a, ea in m:
                d = ea.denominator if type(ea) is Fraction else 1
                scales[a] = math.lcm(scales.get(a, 1), d)
                if isinstance(a, SumPow) and id(a.base) not in seen:
                    seen.add(id(a.base))
                    stack.append(a.base)
    return scales


@dataclass
class Point:
    """A sample point: base values ``s`` with atom value ``s**scale``."""

    base: dict
    scale: dict

    def assignment(self) -> dict[str, str]:
        from .printer import atom_str

        out = {}
        for a, s in self.base.items():
            if a is I_ATOM:
                continue
            L = self.scale.get(a, 1)
            v = s ** L if L != 1 else s
            out[atom_str(a)] = str(v)
        return dict(sorted(out.items()))


class Evaluator:
    """Evaluate expressions at one point in an arbitrary number domain."""

    def __init__(self, point: Point, one, imag):
        self.point = point
        self.one = one
        self.imag = imag
        self._pow: dict = {}
        self._sum: dict = {}

    def atom_power(self, a: Atom, ea):
        key = (a, ea)
        v = self._pow.get(key)
        if v is not None:
            return v
        if a is I_ATOM:
            v = self.imag ** int(ea)
        elif isinstance(a, SumPow):
            b = self._sum.get(a)
            if b is None:
                b = self.value(a.base)
                self._sum[a] = b
            if _is_zero_value(b):
                raise ZeroDivisionError("denominator vanished")
            v = b ** int(ea)
        else:
            L = self.point.scale.get(a, 1)
            k = ea * L
            if type(k) is Fraction:
                if k.denominator != 1:
                    raise ArithmeticError(f"unscaled fractional power {ea}")
                k = k.numerator
            v = self.point.base[a] ** k
        self._pow[key] = v
        return v

    def value(self, e: Expr):
        total = self.one * 0
        for m, c in e.terms.items():
            t = self.one * c
            for a, ea in m:
                t = t * self.atom_power(a, ea)
            total = total + t
        return total


def _is_zero_value(v) -> bool:
    if isinstance(v, GaussRat):
        return v.is_zero()
    return v == 0


def collect_atoms(e: Expr) -> list[Atom]:
    out = set()
    stack = [e]
    seen = set()
    while stack:
        x = stack.pop()
        for m in x.terms:
            for a, _ in m:
                out.add(a)
                if isinstance(a, SumPow) and id(a.base) not in seen:
                    seen.add(id(a.base))
                    stack.append(a.base)
    return sorted(out, key=lambda a: a.sort_key())


def rational_point(atoms, scales, rng: random.Random) -> Point:
    base = {}
    for a in atoms:
        if a is I_ATOM:
            continue
        positive = scales.get(a, 1) > 1 or _is_positive_atom(a)
        num = rng.randint(1, 97)
        den = rng.randint(1, 13)
        if not positive and rng.random() < 0.5:
            num = -num
        base[a] = GaussRat(Fraction(num, den))
    return Point(base, scales)


def float_point(atoms, scales, rng: random.Random) -> Point:
    base = {}
    for a in atoms:
        if a is I_ATOM:
            continue
        L = scales.get(a, 1)
        if L > 1 or _is_positive_atom(a):
            v = rng.uniform(0.1, 3.0) ** (1.0 / L)
        else:
            v = rng.uniform(-2.0, 2.0)
        base[a] = complex(v)
    return Point(base, scales)


@dataclass
class ZeroVerdict:
    """Outcome of :func:`is_zero`."""

    verdict: str  # "zero-structural" | "probably-zero" | "nonzero"
    trials: int
    seed: int
    witness: dict | None = None
    value: str | None = None
    resamples: int = 0

    @property
    def zero(self) -> bool:
        return self.verdict != "nonzero"

    def __bool__(self):
        return self.zero

    def to_dict(self) -> dict:
        d = {"verdict": self.verdict, "trials": self.trials, "seed": self.seed}
        if self.witness is not None:
            d["witness"] = self.witness
            d["value"] = self.value
        return d


def is_zero(e: Expr, trials: int = 20, seed: int = 0) -> ZeroVerdict:
    """Decide ``e == 0``: structurally, else by exact evaluation at ``trials`` points."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if e.is_zero_structural():
        return ZeroVerdict("zero-structural", 0, seed)
    atoms = collect_atoms(e)
    scales = exponent_scales(e)
    rng = random.Random(seed)
    done = 0
    resamples = 0
    while done < trials:
        point = rational_point(atoms, scales, rng)
        try:
            v = Evaluator(point, GaussRat(1), GaussRat(0, 1)).value(e)
        except ZeroDivisionError:
            resamples += 1
            if resamples > MAX_RESAMPLE * trials:
                raise EvaluationError(f"pole at every resample ({resamples} attempts)") from None
            continue
        if not v.is_zero():
            return ZeroVerdict("nonzero", done + 1, seed, point.assignment(), str(v), resamples)
        done += 1
    return ZeroVerdict("probably-zero", trials, seed, resamples=resamples)


def float_value(e: Expr, point: Point) -> complex:
    return complex(Evaluator(point, complex(1), 1j).value(e))


def proportional(a: Expr, b: Expr, trials: int = 8, seed: int = 0) -> Expr | None:
    """Monomial factor ``c`` with ``a == c*b`` (checked by :func:`is_zero`), else None."""
    if a.is_zero_structural() or b.is_zero_structural():
        return None
    ma, ca = leading_term(a)
    mb, cb = leading_term(b)
    c = term_expr(ma, ca) * power(term_expr(mb, cb), -1)
    if is_zero(a - c * b, trials, seed):
        return c
    return None


# ------------------------------------------------ evaluation modulo rules

@dataclass
class Manifold:
    """Sampling data for an expression restricted to the solutions of a rule set.

    ``principal`` maps each jet eliminated by the rules to its normal form;
    only the remaining ``free`` atoms are sampled, and principal jets get the
    value of their normal form at the same point.
    """

    expr: Expr
    principal: dict
    free: list
    scales: dict

    @classmethod
    def build(cls, e: Expr, reducer) -> "Manifold":
        principal = {}
        for a in collect_atoms(e):
            if isinstance(a, Func):
                r = reducer(Expr.atom(a))
                if r != Expr.atom(a):
                    principal[a] = r
        scales: dict = {}
        free: set = set()
        for part in [e, *principal.values()]:
            for a, L in exponent_scales(part).items():
                scales[a] = math.lcm(scales.get(a, 1), L)
            free.update(collect_atoms(part))
        for a in principal:
            if scales.get(a, 1) != 1:
                raise ArithmeticError(f"eliminated jet {a} occurs with a fractional power")
            free.discard(a)
        return cls(e, principal, sorted(free, key=lambda a: a.sort_key()), scales)

    def evaluate(self, point: Point, one, imag):
        ev = Evaluator(point, one, imag)
        for a, r in self.principal.items():
            point.base[a] = ev.value(r)
        return Evaluator(point, one, imag).value(self.expr)


def is_zero_modulo(e: Expr, reducer, trials: int = 20, seed: int = 0) -> ZeroVerdict:
    """Decide ``e == 0`` on the solution set of a rule system, by sampling.

    ``reducer`` maps an expression to its normal form under the rules.  The
    expression itself is never reduced symbolically: free jets are sampled
    and the eliminated ones evaluated from their normal forms, so the
    cancellation happens in exact arithmetic at each point.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if e.is_zero_structural():
        return ZeroVerdict("zero-structural", 0, seed)
    man = Manifold.build(e, reducer)
    rng = random.Random(seed)
    done = resamples = 0
    while done < trials:
        point = rational_point(man.free, man.scales, rng)
        try:
            v = man.evaluate(point, GaussRat(1), GaussRat(0, 1))
        except ZeroDivisionError:
            resamples += 1
            if resamples > MAX_RESAMPLE * trials:
                raise EvaluationError(f"pole at every resample ({resamples} attempts)") from None
            continue
        if not v.is_zero():
            return ZeroVerdict("nonzero", done + 1, seed, point.assignment(), str(v), resamples)
        done += 1
    return ZeroVerdict("probably-zero", trials, seed, resamples=resamples)
