"""The 2+1 spectral problem, its zero-curvature residual and the hierarchy.

Eigenfunction ``Psi = (phi, psi)`` satisfies

    Psi_x = M Psi,
    Psi_t = lam^n Psi_y + lam p Psi_x + N Psi,

with ``M = 1/2 [[-1, i sqrt(lam) u], [i sqrt(lam) u, 1]]`` and
``N = (i sqrt(lam)/2) d/dx [[0, q_x - q], [q_x + q, 0]]``,
``p = sum lam^(n-j) w[j]``, ``q = sum lam^(n-j) v[j]``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import I, Expr, Symbol, collect, diff, is_zero, proportional, sqrt, substitute
from .expr.core import Func
from .expr.zero import is_zero_modulo
from .expr.signature import lam_field, phi_field, psi_field, u_field, v_field, w_field
from .report import CheckRecord, record_from_verdict
from .rewrite import JetRule, RewriteSystem

COMPONENTS = ("phi", "psi")


@dataclass
class LaxPair2p1:
    n: int
    M: tuple
    lam_power: Expr
    drift: Expr
    N: tuple
    law: Expr
    p: Expr
    q: Expr

    @property
    def eigen(self):
        return (phi_field(), psi_field())

    def x_rhs(self) -> tuple[Expr, Expr]:
        phi, psi = (f() for f in self.eigen)
        return tuple(self.M[i][0] * phi + self.M[i][1] * psi for i in range(2))

    def t_rhs(self) -> tuple[Expr, Expr]:
        """T-part with Psi_x already eliminated."""
        phi, psi = (f() for f in self.eigen)
        xr = self.x_rhs()
        out = []
        for i, f in enumerate(self.eigen):
            out.append(self.lam_power * f.jet("y") + self.drift * xr[i]
                       + self.N[i][0] * phi + self.N[i][1] * psi)
        return tuple(out)

    def t_rhs_raw(self) -> tuple[Expr, Expr]:
        phi, psi = (f() for f in self.eigen)
        return tuple(self.lam_power * f.jet("y") + self.drift * f.jet("x")
                     + self.N[i][0] * phi + self.N[i][1] * psi
                     for i, f in enumerate(self.eigen))

    def scalar_equations(self) -> list[Expr]:
        """The four scalar Lax equations and the spectral law, each as ``E = 0``."""
        xr = self.x_rhs()
        tr = self.t_rhs_raw()
        eqs = [f.jet("x") - xr[i] for i, f in enumerate(self.eigen)]
        eqs += [f.jet("t") - tr[i] for i, f in enumerate(self.eigen)]
        return eqs + [self.law]

    def eigen_rules(self) -> RewriteSystem:
        xr = self.x_rhs()
        tr = self.t_rhs()
        rules = [JetRule(f"{f.name}_x", f, ("x",), xr[i]) for i, f in enumerate(self.eigen)]
        rules += [JetRule(f"{f.name}_t", f, ("t",), tr[i]) for i, f in enumerate(self.eigen)]
        return RewriteSystem(rules)


def build_lax(n: int) -> LaxPair2p1:
    if n < 1:
        raise ValueError("n must be a positive integer")
    lam = lam_field()()
    u = u_field()()
    p = sum((lam ** (n - j) * w_field(j)() for j in range(1, n + 1)), Expr())
    q = sum((lam ** (n - j) * v_field(j)() for j in range(1, n + 1)), Expr())
    isl = I * sqrt(lam)
    half = Fraction(1, 2)
    M = ((Expr.const(-half), isl * u * half), (isl * u * half, Expr.const(half)))
    qx = diff(q, "x")
    N = ((Expr(), isl * half * diff(qx - q, "x")), (isl * half * diff(qx + q, "x"), Expr()))
    law = lam_field().jet("t") - lam ** n * lam_field().jet("y")
    return LaxPair2p1(n, M, lam ** n, lam * p, N, law, p, q)


def hierarchy_ideal(n: int) -> RewriteSystem:
    """Oriented rules: the hierarchy equations and the spectral law."""
    u = u_field()
    lam = lam_field()
    vn = v_field(n)()
    rules = [JetRule("u_t", u, ("t",), diff(diff(vn, "x", 2) - vn, "x"))]
    for j in range(1, n):
        vj = v_field(j)()
        rules.append(JetRule(f"v[{j}]_xx", v_field(j), ("x", "x"), vj - u() * w_field(j + 1)()))
    rules.append(JetRule("u_y", u, ("y",), -diff(u() * w_field(1)(), "x")))
    for j in range(1, n + 1):
        rules.append(JetRule(f"w[{j}]_x", w_field(j), ("x",), u() * v_field(j).jet("x")))
    rules.append(JetRule("lam_t", lam, ("t",), lam() ** n * lam.jet("y")))
    return RewriteSystem(rules)


def reference_system(n: int) -> list[tuple[str, Expr]]:
    """The spectral law and hierarchy equations, written ``E = 0``."""
    u = u_field()()
    lam = lam_field()
    vn = v_field(n)()
    out = [("lam_t - lam^n*lam_y", lam.jet("t") - lam() ** n * lam.jet("y")),
           ("(v[n]_xx - v[n])_x - u_t", diff(diff(vn, "x", 2) - vn, "x") - u_field().jet("t"))]
    for j in range(1, n):
        vj = v_field(j)()
        out.append((f"v[{j}]_xx - v[{j}] + u*w[{j + 1}]", diff(vj, "x", 2) - vj + u * w_field(j + 1)()))
    out.append(("(u*w[1])_x + u_y", diff(u * w_field(1)(), "x") + u_field().jet("y")))
    for j in range(1, n + 1):
        out.append((f"w[{j}]_x - u*v[{j}]_x", w_field(j).jet("x") - u * v_field(j).jet("x")))
    return out


@dataclass
class Residual:
    """Coefficients ``R[(component, eigenfunction)]`` of the cross-derivative."""

    coeffs: dict
    trace: dict = field(default_factory=dict)


def compatibility_residual(lax: LaxPair2p1) -> Residual:
    elim = lax.eigen_rules()
    xr = lax.x_rhs()
    tr = lax.t_rhs()
    phi, psi = lax.eigen
    basis = [phi().as_atom(), psi().as_atom(), phi.jet("y").as_atom(), psi.jet("y").as_atom()]
    coeffs = {}
    trace = {}
    for i, comp in enumerate(COMPONENTS):
        raw = diff(xr[i], "t") - diff(tr[i], "x")
        red = elim.reduce(raw)
        trace[comp] = red.trace
        groups = collect(red.expr, basis)
        for key in groups:
            if key not in ((1, 0, 0, 0), (0, 1, 0, 0)):
                raise AssertionError(f"residual not linear in (phi, psi): term pattern {key}")
        for k, eig in enumerate(COMPONENTS):
            key = tuple(1 if j == k else 0 for j in range(4))
            coeffs[(comp, eig)] = groups.get(key, Expr())
    return Residual(coeffs, trace)


def verify_zero_curvature(lax: LaxPair2p1, ideal: RewriteSystem | None = None,
                          trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Two records per coefficient: the normal form under the hierarchy rules
    (expected structurally zero) and a sampled check that evaluates the
    unreduced coefficient on the solution set of the rules."""
    ideal = ideal if ideal is not None else hierarchy_ideal(lax.n)
    res = compatibility_residual(lax)
    out = []
    for (comp, eig), c in sorted(res.coeffs.items()):
        t0 = time.perf_counter()
        red = ideal.reduce(c)
        v = is_zero(red.expr, trials, seed)
        out.append(record_from_verdict(
            f"zero-curvature n={lax.n} component={comp} coefficient={eig}", v,
            detail={"n": lax.n, "rules": red.trace, "applications": red.applications},
            wall_time=time.perf_counter() - t0))
        t0 = time.perf_counter()
        v = is_zero_modulo(c, lambda e: ideal.reduce(e).expr, trials, seed)
        out.append(record_from_verdict(
            f"zero-curvature sampled n={lax.n} component={comp} coefficient={eig}", v,
            detail={"n": lax.n}, wall_time=time.perf_counter() - t0))
    return out


def reduce_residual(lax: LaxPair2p1, ideal: RewriteSystem | None = None) -> dict:
    ideal = ideal if ideal is not None else hierarchy_ideal(lax.n)
    res = compatibility_residual(lax)
    return {k: ideal.reduce(c).expr for k, c in res.coeffs.items()}


@dataclass
class HierarchyMatch:
    component: str
    eigen: str
    lam_power: object
    reference: str
    factor: str
    derivative: bool


def _lam_atom():
    return lam_field()().as_atom()


def extract_hierarchy(lax: LaxPair2p1, trials: int = 8, seed: int = 0):
    """Split the residual into equations and match each against the reference.

    Returns ``(equations, matches)`` where ``equations`` are the distinct
    reference equations hit, in reference order.  Raises ``ValueError`` for
    a coefficient that matches no reference equation.
    """
    n = lax.n
    refs = reference_system(n)
    res = compatibility_residual(lax)
    nu = Symbol.make("nu")
    lam_t = lam_field().jet("t")
    defect = {lam_t.as_atom(): lax.lam_power * lam_field().jet("y") + Expr.atom(nu)}
    hits: dict[int, HierarchyMatch] = {}
    matches = []
    for (comp, eig), c in sorted(res.coeffs.items()):
        c = substitute(c, defect)
        by_nu = collect(c, [nu])
        for (k,), part in by_nu.items():
            if k == 1:
                if not part.is_zero_structural():
                    hm = HierarchyMatch(comp, eig, None, refs[0][0], str(part), False)
                    hits.setdefault(0, hm)
                    matches.append(hm)
                continue
            if k != 0:
                raise ValueError(f"spectral-law defect enters nonlinearly in ({comp}, {eig})")
            for (pw,), g in sorted(collect(part, [_lam_atom()]).items(), key=lambda kv: kv[0][0]):
                m = _match(g, refs, trials, seed)
                if m is None:
                    raise ValueError(f"unmatched coefficient of lam^{pw} in ({comp}, {eig}): {g}")
                idx, factor, is_deriv = m
                hm = HierarchyMatch(comp, eig, pw, refs[idx][0], str(factor), is_deriv)
                hits.setdefault(idx, hm)
                matches.append(hm)
    eqs = [refs[i][1] for i in sorted(hits)]
    return eqs, matches


def _match(g: Expr, refs, trials, seed):
    for idx, (_, r) in enumerate(refs):
        for is_deriv, target in ((False, r), (True, diff(r, "x"))):
            f = proportional(g, target, trials, seed)
            if f is not None and _is_constant(f):
                return idx, f, is_deriv
    return None


def _is_constant(e: Expr) -> bool:
    return not any(isinstance(a, Func) for a in e.atoms(recursive=True)) and not (
        e.free_symbols() & {"x", "y", "t"})
