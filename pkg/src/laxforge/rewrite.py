"""Oriented jet rewrite rules with derivative closure.

A rule ``f_alpha -> rhs`` also rewrites every higher jet ``f_beta`` with
``beta >= alpha`` (componentwise) to ``D^(beta - alpha) rhs``.  A lifted
rule is stated in the function's own parameters and applies to every
application of the function, with the parameters bound to the arguments.  Rules are
tried in list order, which fixes the priority when a jet matches several.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .expr.core import Expr, Func, FuncSym, Substituter, _bind_params, diff


class RewriteBudgetError(RuntimeError):
    """Fixpoint not reached within the rule-application budget."""


@dataclass
class JetRule:
    name: str
    fsym: FuncSym
    wrt: tuple[str, ...]
    rhs: Expr
    lifted: bool = False
    _counts: tuple = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self._counts = tuple(self.wrt.count(p) for p in self.fsym.params)

    def matches(self, atom) -> bool:
        return (isinstance(atom, Func) and atom.fsym is self.fsym
                and (self.lifted or atom.at_params())
                and all(d >= c for d, c in zip(atom.deriv, self._counts)))

    def value(self, atom: Func) -> Expr:
        v = self._cache.get(atom.deriv)
        if v is None:
            v = self.rhs
            for p, d, c in zip(self.fsym.params, atom.deriv, self._counts):
                for _ in range(d - c):
                    v = diff(v, p)
            self._cache[atom.deriv] = v
        if self.lifted:
            return _bind_params(v, self.fsym, atom.args)
        return v

    def lhs(self) -> Expr:
        return self.fsym.jet(*self.wrt)


@dataclass
class RewriteResult:
    expr: Expr
    applications: int
    trace: dict[str, int]


class RewriteSystem:
    def __init__(self, rules: list[JetRule], budget: int = 10_000):
        self.rules = list(rules)
        self.budget = budget

    def without(self, name: str) -> "RewriteSystem":
        return RewriteSystem([r for r in self.rules if r.name != name], self.budget)

    def replaced(self, name: str, rhs: Expr) -> "RewriteSystem":
        rules = [JetRule(r.name, r.fsym, r.wrt, rhs, r.lifted) if r.name == name else r
                 for r in self.rules]
        return RewriteSystem(rules, self.budget)

    def names(self) -> list[str]:
        return [r.name for r in self.rules]

    def reduce(self, e: Expr) -> RewriteResult:
        trace: Counter = Counter()
        total = 0
        while True:
            mapping = {}
            for a in e.atoms(recursive=True):
                if not isinstance(a, Func):
                    continue
                for r in self.rules:
                    if r.matches(a):
                        mapping[a] = r.value(a)
                        trace[r.name] += 1
                        break
            if not mapping:
                return RewriteResult(e, total, dict(sorted(trace.items())))
            total += len(mapping)
            if total > self.budget:
                raise RewriteBudgetError(
                    f"no fixpoint after {total} rule applications (budget {self.budget})")
            e = Substituter(atoms=mapping).expr(e)
