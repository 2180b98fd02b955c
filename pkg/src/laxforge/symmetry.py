"""Lie point symmetries of the spectral problem, checked by prolongation.

A generator ``X = xi1 d_x + xi2 d_y + xi3 d_t + sum eta_f d_f`` is prolonged
to the jets appearing in the Lax equations and applied to them; after the
equations themselves are used to eliminate ``phi_x, psi_x, phi_t, psi_t`` and
``lam_t`` the result has to vanish identically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import Expr, FuncSym, Symbol, derivative, diff, is_zero
from .expr.core import Func
from .expr.signature import (a1_func, an_func, lam_field, phi_field, psi_field,
                             u_field, v_field, w_field)
from .laxpair import LaxPair2p1, build_lax
from .report import CheckRecord, record_from_verdict
from .rewrite import JetRule, RewriteSystem


def sym(name: str) -> Expr:
    return Expr.atom(Symbol.make(name))


def gamma_func(n: int, rule: str = "nonisospectral") -> FuncSym:
    """``gamma(y, t, lam)`` with the derivative rule ``gamma_t = lam^n gamma_y``.

    ``rule="plain"`` declares ``gamma_t = gamma_y`` instead and ``None``
    declares no rule (used to test :func:`check_gamma_condition`).
    """
    g = FuncSym("gamma", ("y", "t", "lam"), "function")
    gy = diff(g(), "y")
    if rule == "nonisospectral":
        g.set_rule("t", sym("lam") ** n * gy)
    elif rule == "plain":
        g.set_rule("t", gy)
    return g


def check_gamma_condition(gamma, n: int, trials: int = 8, seed: int = 0) -> bool:
    """True iff ``gamma_t - lam^n gamma_y`` vanishes with ``lam`` held fixed.

    ``gamma`` is a FuncSym of ``(y, t, lam)`` or an expression in the
    symbols ``y, t, lam``.
    """
    g = gamma() if isinstance(gamma, FuncSym) else gamma
    return is_zero(diff(g, "t") - sym("lam") ** n * diff(g, "y"), trials, seed).zero


@dataclass
class SymmetryParams:
    a2: Expr = field(default_factory=lambda: sym("a2"))
    a3: Expr = field(default_factory=lambda: sym("a3"))
    b2: Expr = field(default_factory=lambda: sym("b2"))
    b3: Expr = field(default_factory=lambda: sym("b3"))
    A1: Expr | None = None
    An: Expr | None = None
    gamma: Expr | None = None

    @staticmethod
    def generic(n: int) -> "SymmetryParams":
        g = gamma_func(n)
        lam = lam_field()()
        return SymmetryParams(A1=a1_func()(), An=an_func()(),
                              gamma=g(sym("y"), sym("t"), lam))

    @staticmethod
    def constants(a2=0, a3=0, b2=0, b3=0) -> "SymmetryParams":
        """Numeric constants, no arbitrary functions."""
        return SymmetryParams(Expr.const(a2), Expr.const(a3), Expr.const(b2), Expr.const(b3),
                              Expr(), Expr(), Expr())


@dataclass
class Generator:
    """Coefficients of a point vector field.

    ``xi`` maps independent variable names to coefficients; ``eta`` maps
    dependent fields (FuncSyms) to coefficients.
    """

    xi: dict
    eta: dict
    labels: dict = field(default_factory=dict)

    def __add__(self, o: "Generator") -> "Generator":
        xi = {k: self.xi.get(k, Expr()) + o.xi.get(k, Expr()) for k in set(self.xi) | set(o.xi)}
        keys = list(self.eta) + [f for f in o.eta if f not in self.eta]
        eta = {f: self.eta.get(f, Expr()) + o.eta.get(f, Expr()) for f in keys}
        return Generator(xi, eta, dict(self.labels))

    def coefficient_names(self) -> list[str]:
        return [f"xi_{v}" for v in self.xi] + [f"eta_{f.name}" for f in self.eta]

    def mutated(self, name: str, factor) -> "Generator":
        xi = dict(self.xi)
        eta = dict(self.eta)
        if name.startswith("xi_"):
            xi[name[3:]] = xi[name[3:]] * factor
        else:
            target = name[4:]
            for f in eta:
                if f.name == target:
                    eta[f] = eta[f] * factor
                    break
            else:
                raise KeyError(name)
        return Generator(xi, eta, dict(self.labels))


def dependent_fields(n: int) -> list[FuncSym]:
    return ([lam_field(), u_field()] + [w_field(j) for j in range(1, n + 1)]
            + [v_field(j) for j in range(1, n + 1)] + [phi_field(), psi_field()])


def make_generator(params: SymmetryParams, n: int) -> Generator:
    if n < 1:
        raise ValueError("n must be a positive integer")
    a2, a3, b2, b3 = params.a2, params.a3, params.b2, params.b3
    A1 = params.A1 if params.A1 is not None else a1_func()()
    An = params.An if params.An is not None else an_func()()
    gamma = params.gamma
    if gamma is None:
        gamma = gamma_func(n)(sym("y"), sym("t"), lam_field()())
    y, t = sym("y"), sym("t")
    xi = {"x": A1, "y": a2 * y + b2, "t": a3 * t + b3}
    eta = {lam_field(): (a2 - a3) * Fraction(1, n) * lam_field()(),
           u_field(): (a3 - a2) * Fraction(1, 2 * n) * u_field()()}
    for j in range(1, n + 1):
        c = ((n - j + 1) * a2 + (j - 1) * a3) * Fraction(1, n)
        eta[w_field(j)] = (diff(A1, "y") if j == 1 else Expr()) - c * w_field(j)()
    for j in range(1, n + 1):
        c = ((2 * (n - j) + 1) * a2 + (2 * j - 1) * a3) * Fraction(1, 2 * n)
        eta[v_field(j)] = (An if j == n else Expr()) - c * v_field(j)()
    eta[phi_field()] = gamma * phi_field()()
    eta[psi_field()] = gamma * psi_field()()
    return Generator(xi, eta)


def _jet_key(atom: Func) -> tuple:
    return atom.deriv


def prolong(gen: Generator, order: int = 2, jets=None) -> dict:
    """Prolonged coefficients ``{jet atom: eta^J}``.

    Uses ``eta^(J,k) = D_k eta^J - sum_m D_k(xi_m) f_(J,m)`` over the
    variables each field depends on.  ``jets`` restricts the output to the
    given jet atoms (all multi-indices up to ``order`` otherwise).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    out = {}
    for f, eta in gen.eta.items():
        params = [p for p in f.params]
        base = f().as_atom()
        out[base] = eta
        frontier = [(base, eta)]
        for _ in range(order):
            nxt = []
            for atom, e in frontier:
                for k, p in enumerate(params):
                    # canonical multi-index: only extend in non-decreasing order
                    last = max((i for i, d in enumerate(atom.deriv) if d), default=-1)
                    if k < last:
                        continue
                    new = diff(e, p)
                    for m, q in enumerate(params):
                        dxi = diff(gen.xi.get(q, Expr()), p)
                        if not dxi.is_zero_structural():
                            new = new - dxi * diff(Expr.atom(atom), q)
                    jet = diff(Expr.atom(atom), p).as_atom()
                    out[jet] = new
                    nxt.append((jet, new))
            frontier = nxt
    if jets is not None:
        return {a: out[a] for a in jets if a in out}
    return out


def prolong_characteristic(gen: Generator, jet: Func) -> Expr:
    """``eta^J = D_J(eta - xi . grad f) + xi . grad f_J`` (independent formula)."""
    f = jet.fsym
    base = f()
    Q = gen.eta[f] - sum((gen.xi.get(p, Expr()) * diff(base, p) for p in f.params), Expr())
    e = Q
    for p, d in zip(f.params, jet.deriv):
        e = diff(e, p, d)
    J = Expr.atom(jet)
    return e + sum((gen.xi.get(p, Expr()) * diff(J, p) for p in f.params), Expr())


def apply_prolonged(gen: Generator, eq: Expr, prolonged: dict) -> Expr:
    """``pr X (eq)`` with jets as independent coordinates."""
    out = Expr()
    for v, c in gen.xi.items():
        d = derivative(eq, Symbol.make(v), opaque_jets=True)
        if not d.is_zero_structural():
            out = out + c * d
    for a in eq.atoms():
        if isinstance(a, Func) and a.is_jet():
            if a not in prolonged:
                raise KeyError(f"missing prolongation for {a}")
            d = derivative(eq, a, opaque_jets=True)
            out = out + prolonged[a] * d
    return out


def on_shell_rules(lax: LaxPair2p1) -> RewriteSystem:
    rules = list(lax.eigen_rules().rules)
    lam = lam_field()
    rules.append(JetRule("lam_t", lam, ("t",), lam() ** lax.n * lam.jet("y")))
    return RewriteSystem(rules)


EQUATION_NAMES = ("phi_x", "psi_x", "phi_t", "psi_t", "lam_law")


def invariance_residuals(gen: Generator, lax: LaxPair2p1, on_shell: bool = True) -> list[Expr]:
    eqs = lax.scalar_equations()
    jets = set()
    for e in eqs:
        jets |= {a for a in e.atoms() if isinstance(a, Func) and a.is_jet()}
    order = max(sum(a.deriv) for a in jets)
    pro = prolong(gen, max(order, 1), jets)
    raw = [apply_prolonged(gen, e, pro) for e in eqs]
    if not on_shell:
        return raw
    rules = on_shell_rules(lax)
    out = []
    for r in raw:
        red = rules.reduce(r).expr
        eliminated = {rl.lhs().as_atom() for rl in rules.rules}
        left = [a for a in red.atoms(recursive=True) if a in eliminated]
        if left:
            raise AssertionError(f"on-shell jets survived substitution: {left}")
        out.append(red)
    return out


def verify_family(n: int, trials: int = 20, seed: int = 42, params: SymmetryParams | None = None,
                  lax: LaxPair2p1 | None = None) -> list[CheckRecord]:
    lax = lax if lax is not None else build_lax(n)
    gen = make_generator(params if params is not None else SymmetryParams.generic(n), n)
    out = []
    t0 = time.perf_counter()
    res = invariance_residuals(gen, lax)
    for name, r in zip(EQUATION_NAMES, res):
        v = is_zero(r, trials, seed)
        out.append(record_from_verdict(f"symmetry n={n} equation={name}", v,
                                       detail={"n": n}, wall_time=time.perf_counter() - t0))
    return out


MUTATION_FACTORS = (("negated", -1), ("doubled", 2))


def mutation_suite(n: int, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Every single-coefficient mutant of the family must leave a nonzero residual."""
    lax = build_lax(n)
    gen = make_generator(SymmetryParams.generic(n), n)
    out = []
    for cname in gen.coefficient_names():
        for label, factor in MUTATION_FACTORS:
            t0 = time.perf_counter()
            mut = gen.mutated(cname, factor)
            res = invariance_residuals(mut, lax)
            verdict = None
            for r in res:
                verdict = is_zero(r, trials, seed)
                if not verdict.zero:
                    break
            out.append(record_from_verdict(f"symmetry mutant n={n} {cname} {label}", verdict,
                                           expect="nonzero", detail={"n": n},
                                           wall_time=time.perf_counter() - t0))
    return out
