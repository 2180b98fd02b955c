"""Mechanical verification of the reduction cases.

Every check substitutes the case's formulas into a 2+1 object (or into the
reduced Lax pair) and asks the equality oracle whether the difference
vanishes.  Reduced objects are compared with the 2+1 ones by lifting: the
reduced variables are replaced by their expressions in ``(x, y, t)`` and
the two sides must then agree up to a factor free of reduced fields.
"""

from __future__ import annotations

import time
from fractions import Fraction

from ..expr import Expr, Symbol, collect, coefficient, diff, is_zero, substitute, to_str
from ..expr.core import Func, cancel_mul, leading_term, power, term_expr
from ..expr.signature import lam_field, u_field
from ..laxpair import build_lax, reference_system
from ..report import CheckRecord, Report, record_from_verdict
from ..rewrite import JetRule, RewriteSystem
from ..symmetry import Generator, SymmetryParams, make_generator
from .catalog import (CASE_IDS, PARAMS, CaseInstance, Catalog, CatalogError, ReductionCase,
                      load_catalog, reduced_field)

REDUCED_NAMES = ("U", "Phi", "Psi", "Om", "V")
SPACE = {"x", "y", "t"}
# count printed in the source text for non-isospectral reduced problems
PUBLISHED_NONISO_COUNT = 6


class TrivialPatternError(ValueError):
    """The generator's activation pattern selects no reduction."""


def _is_reduced_field(a) -> bool:
    return isinstance(a, Func) and a.fsym.name.split("[")[0] in REDUCED_NAMES


def _reduced_atoms(e: Expr) -> list:
    return sorted({a for a in e.atoms(recursive=True) if _is_reduced_field(a)},
                  key=lambda a: a.sort_key())


def _ratio(a: Expr, b: Expr) -> Expr | None:
    """Leading-term ratio ``lt(a)/lt(b)`` (a monomial), or None if either vanishes."""
    if a.is_zero_structural() or b.is_zero_structural():
        return None
    ma, ca = leading_term(a)
    mb, cb = leading_term(b)
    return term_expr(ma, ca) * power(term_expr(mb, cb), -1)


def _record(name, verdict, case, n, expect="zero", t0=None, **detail):
    detail = {"case": case, "n": n, **detail}
    wall = time.perf_counter() - t0 if t0 is not None else 0.0
    return record_from_verdict(name, verdict, expect, detail, wall)


def _error(name, case, n, message, expect="zero") -> CheckRecord:
    return CheckRecord(name, "error", expect=expect, detail={"case": case, "n": n, "error": message})


def gamma_rule(inst: CaseInstance) -> RewriteSystem:
    """``Gam_z2 -> (Gam PDE)`` at any arguments."""
    return RewriteSystem([JetRule("Gam_z2", inst.gam, ("z2",), inst.gamma_pde, lifted=True)])


def _identified(inst: CaseInstance, e: Expr) -> Expr:
    rules = inst.identifications(e)
    return substitute(e, rules) if rules else e


# ------------------------------------------------------------- side checks

def side_checks(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Spectral law, gamma condition, exponential factor, p/q sums, inverse map, Z1 shape."""
    cid, n = inst.id, inst.n
    out = []
    lam = lam_field()

    t0 = time.perf_counter()
    law = lam.jet("t") - lam() ** n * lam.jet("y")
    out.append(_record(f"{cid} n={n} spectral law", is_zero(inst.substitute_ansatz(law), trials, seed),
                       cid, n, t0=t0, law=to_str(inst.lax.law)))

    t0 = time.perf_counter()
    g = inst.gamma_2p1()
    cond = diff(g, "t") - inst.lam_ansatz ** n * diff(g, "y")
    cond = _identified(inst, gamma_rule(inst).reduce(cond).expr)
    out.append(_record(f"{cid} n={n} gamma condition", is_zero(cond, trials, seed), cid, n, t0=t0,
                       gamma_pde=f"Gam_z2 = {to_str(inst.gamma_pde)}"))

    # E_(w z2) = E_(z2 w) needs the Gam PDE; this is what fixes E_z2 / E
    t0 = time.perf_counter()
    E = inst.E()
    mixed = diff(diff(E, inst.w), "z2") - diff(diff(E, "z2"), inst.w)
    mixed = gamma_rule(inst).reduce(mixed).expr
    out.append(_record(f"{cid} n={n} exponential factor", is_zero(mixed, trials, seed), cid, n, t0=t0,
                       e_z2=f"E_z2/E = {to_str(inst.e_z2)}"))

    from ..expr.signature import v_field, w_field
    lam_a = inst.lam_ansatz
    for label, fam, stored in (("p", w_field, inst.p), ("q", v_field, inst.q)):
        t0 = time.perf_counter()
        total = sum((lam_a ** (n - j) * inst.fields[fam(j)] for j in range(1, n + 1)), Expr())
        out.append(_record(f"{cid} n={n} {label} sum", is_zero(total - stored, trials, seed), cid, n, t0=t0))

    if inst.inverse is not None:
        t0 = time.perf_counter()
        back = substitute(inst.z2, inst.inverse) - Expr.atom(Symbol.make("z2"))
        out.append(_record(f"{cid} n={n} inverse map", is_zero(back, trials, seed), cid, n, t0=t0,
                           inverse={k: to_str(v) for k, v in inst.inverse.items()}))

    t0 = time.perf_counter()
    lax2 = build_lax(n)
    rename = {lam: inst.lam(), u_field(): reduced_field("U")()}
    diffs = Expr()
    for i in range(2):
        for k in range(2):
            d = substitute(lax2.M[i][k], rename) - inst.lax.M[i][k]
            diffs = diffs + d * Expr.atom(Symbol.make(f"m{i}{k}"))
    out.append(_record(f"{cid} n={n} Z1 shape", is_zero(diffs, trials, seed), cid, n, t0=t0))
    return out


# ------------------------------------------------------------- reduced Lax

def _principal(inst: CaseInstance, k: int) -> object:
    eig = inst.lax.eigen[k % 2]
    var = "z1" if k < 2 else "z2"
    return inst.lift(eig.jet(var)).as_atom()


LAX_EQUATIONS = ("phi_x", "psi_x", "phi_t", "psi_t")


def lax_matches(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Substituted 2+1 Lax equations against the lifted reduced equations."""
    cid, n = inst.id, inst.n
    eqs2 = build_lax(n).scalar_equations()[:4]
    eqs1 = inst.lax.equations()
    out = []
    for k, (name, e2, e1) in enumerate(zip(LAX_EQUATIONS, eqs2, eqs1)):
        t0 = time.perf_counter()
        rname = f"{cid} n={n} reduced Lax {name}"
        R = _identified(inst, inst.substitute_ansatz(e2))
        T = inst.lift(e1)
        atom = _principal(inst, k)
        F = _ratio(coefficient(R, atom), coefficient(T, atom))
        if F is None:
            out.append(_error(rname, cid, n, f"principal jet {atom} missing from one side"))
            continue
        bad = _reduced_atoms(F)
        if bad:
            out.append(_error(rname, cid, n, f"prefactor not factorable: {to_str(F)} contains {bad[0]}"))
            continue
        v = is_zero(R - F * T, trials, seed)
        out.append(_record(rname, v, cid, n, t0=t0, factor=to_str(F),
                           target=to_str(e1)))
    return out


def verify_reduced_lax(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    return side_checks(inst, trials, seed) + lax_matches(inst, trials, seed)


# ------------------------------------------------------- reduced hierarchy

def reduced_residual(inst: CaseInstance) -> dict:
    """Cross-derivative of the reduced Lax pair, multiplied by its prefactor.

    Returns ``{(component, eigenfunction): coefficient}``.
    """
    lax = inst.lax
    phi, psi = lax.eigen
    zr = lax.z1_rhs()
    pre = lax.prefactor
    inv = power(pre, -1)
    tr = []
    for i in range(2):
        tr.append((lax.drift * zr[i] + lax.N[i][0] * phi() + lax.N[i][1] * psi()) * inv)
    rules = [JetRule(f"{f.name}_z1", f, ("z1",), zr[i]) for i, f in enumerate(lax.eigen)]
    rules += [JetRule(f"{f.name}_z2", f, ("z2",), tr[i]) for i, f in enumerate(lax.eigen)]
    elim = RewriteSystem(rules)
    basis = [phi().as_atom(), psi().as_atom()]
    out = {}
    for i, comp in enumerate(("phi", "psi")):
        raw = diff(zr[i], "z2") - diff(tr[i], "z1")
        red = elim.reduce(raw).expr
        red = cancel_mul(red, pre) if len(pre.terms) > 1 else red * pre
        groups = collect(red, basis)
        for key in groups:
            if key not in ((1, 0), (0, 1)):
                raise AssertionError(f"reduced residual not linear in (Phi, Psi): {key}")
        out[(comp, "phi")] = groups.get((1, 0), Expr())
        out[(comp, "psi")] = groups.get((0, 1), Expr())
    return out


def _is_constant(e: Expr) -> bool:
    return not any(isinstance(a, Func) for a in e.atoms(recursive=True)) and not (
        e.free_symbols() & (SPACE | {"z1", "z2"}))


def _match(g: Expr, refs, trials, seed):
    for idx, (_, r) in enumerate(refs):
        for is_deriv, target in ((False, r), (True, diff(r, "z1"))):
            f = _ratio(g, target)
            if f is not None and _is_constant(f) and is_zero(g - f * target, trials, seed):
                return idx, f, is_deriv
    return None


def hierarchy_groups(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Split the reduced residual by powers of Lam and match each piece."""
    cid, n = inst.id, inst.n
    refs = inst.hierarchy
    t0 = time.perf_counter()
    res = reduced_residual(inst)
    lam_atom = inst.lam().as_atom()
    out = []
    leaked = set()
    for c in res.values():
        leaked |= c.free_symbols() & SPACE
    out.append(CheckRecord(f"{cid} n={n} residual free of x, y, t", "fail" if leaked else "pass",
                           detail={"case": cid, "n": n, "leaked": sorted(leaked)},
                           wall_time=time.perf_counter() - t0))
    hits = set()
    for (comp, eig), c in sorted(res.items()):
        if c.is_zero_structural():
            continue
        for (pw,), g in sorted(collect(c, [lam_atom]).items(), key=lambda kv: kv[0][0]):
            t0 = time.perf_counter()
            name = f"{cid} n={n} reduced residual ({comp}, {eig}) Lam^{pw}"
            m = _match(g, refs, trials, seed)
            if m is None:
                v = is_zero(g, trials, seed)
                out.append(_record(name, v, cid, n, t0=t0, matched=None, group=to_str(g)[:400]))
                continue
            idx, f, is_deriv = m
            hits.add(idx)
            target = diff(refs[idx][1], "z1") if is_deriv else refs[idx][1]
            v = is_zero(g - f * target, trials, seed)
            out.append(_record(name, v, cid, n, t0=t0, matched=refs[idx][0], factor=to_str(f),
                               z1_derivative=is_deriv))
    missing = [refs[i][0] for i in range(len(refs)) if i not in hits]
    out.append(CheckRecord(f"{cid} n={n} every reduced equation produced",
                           "fail" if missing else "pass",
                           detail={"case": cid, "n": n, "missing": missing}))
    return out


def hierarchy_cross_check(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    """Ansatz substituted into the 2+1 hierarchy equals the lifted reduced hierarchy."""
    cid, n = inst.id, inst.n
    refs = reference_system(n)
    out = []
    t0 = time.perf_counter()
    law = _identified(inst, inst.substitute_ansatz(refs[0][1]))
    out.append(_record(f"{cid} n={n} cross-check {refs[0][0]}", is_zero(law, trials, seed), cid, n, t0=t0))
    for (label, e2), (rlabel, e1) in zip(refs[1:], inst.hierarchy):
        t0 = time.perf_counter()
        name = f"{cid} n={n} cross-check {label}"
        R = _identified(inst, inst.substitute_ansatz(e2))
        T = inst.lift(e1)
        F = _ratio(R, T)
        if F is None or _reduced_atoms(F):
            v = is_zero(R, trials, seed)
            out.append(_record(name, v, cid, n, t0=t0, reduced=rlabel, factor=None))
            if v.zero:
                out[-1] = _error(name, cid, n, "substituted equation vanished identically")
            continue
        v = is_zero(R - F * T, trials, seed)
        out.append(_record(name, v, cid, n, t0=t0, reduced=rlabel, factor=to_str(F)))
    return out


def verify_reduced_hierarchy(inst: CaseInstance, trials: int = 20, seed: int = 42) -> list[CheckRecord]:
    return hierarchy_groups(inst, trials, seed) + hierarchy_cross_check(inst, trials, seed)


# ----------------------------------------------------------- spectrality

def classify_spectrality(case) -> str:
    """``isospectral`` iff the stored law is ``dLam/dz2 = 0``."""
    inst = case if isinstance(case, CaseInstance) else case.instantiate(1)
    return "isospectral" if inst.is_isospectral() else "non-isospectral"


def census(catalog: Catalog | None = None) -> Report:
    catalog = catalog or load_catalog()
    rep = Report("census", {}, catalog_version=catalog.version)
    classes: dict[str, list[str]] = {"non-isospectral": [], "isospectral": []}
    for case in catalog:
        inst = case.instantiate(1)
        cls = classify_spectrality(inst)
        classes[cls].append(case.id)
        rep.add(CheckRecord(f"spectrality {case.id}", "pass",
                            detail={"case": case.id, "class": cls, "law": to_str(inst.lax.law),
                                    "r": None if inst.r is None else str(inst.r)}))
    count = len(classes["non-isospectral"])
    rep.sections["census"] = {
        **classes,
        "non_isospectral_count": count,
        "published_count": PUBLISHED_NONISO_COUNT,
        "discrepancy": count != PUBLISHED_NONISO_COUNT,
        "summary": (f"{count} non-isospectral cases computed "
                    f"({', '.join(classes['non-isospectral'])}); published count "
                    f"{PUBLISHED_NONISO_COUNT}" + (" (discrepancy flagged)"
                                                   if count != PUBLISHED_NONISO_COUNT else "")),
    }
    return rep


# ------------------------------------------------ characteristic reduction

def activation(gen: Generator) -> dict[str, Expr]:
    """``(a2, b2, a3, b3)`` read off ``xi_y = a2*y + b2`` and ``xi_t = a3*t + b3``."""
    out = {}
    for var, (a, b) in (("y", ("a2", "b2")), ("t", ("a3", "b3"))):
        xi = gen.xi.get(var, Expr())
        slope = diff(xi, var)
        rest = xi - slope * Expr.atom(Symbol.make(var))
        for name, val in ((a, slope), (b, rest)):
            if val.free_symbols() & SPACE or any(isinstance(x, Func) for x in val.atoms(recursive=True)):
                raise TrivialPatternError(f"xi_{var} is not of the form a*{var} + b")
            out[name] = val
    return out


def select_case(pattern: dict[str, bool], catalog: Catalog) -> ReductionCase:
    if not any(pattern.values()):
        raise TrivialPatternError("trivial pattern: a2 = b2 = a3 = b3 = 0")
    for case in catalog:
        if all(case.pattern[p] == pattern[p] for p in PARAMS):
            return case
    shown = ", ".join(f"{p}{'!=0' if pattern[p] else '=0'}" for p in PARAMS)
    raise TrivialPatternError(f"pattern ({shown}) is not one of the eight independent reductions")


def _generator_n(gen: Generator) -> int:
    return sum(1 for f in gen.eta if f.name.startswith("w["))


def characteristic_reduce(gen: Generator, catalog: Catalog | None = None, trials: int = 20,
                          seed: int = 42) -> CaseInstance:
    """Select the case for ``gen`` and check its invariants and ansatz.

    The returned instance carries the check records in ``validation``.
    """
    catalog = catalog or load_catalog()
    vals = activation(gen)
    pattern = {p: not vals[p].is_zero_structural() for p in PARAMS}
    case = select_case(pattern, catalog)
    n = _generator_n(gen)
    r = None
    if case.needs_ratio:
        rv = (vals["a3"] * power(vals["a2"], -1)).const_value()
        if rv is None:
            raise CatalogError(f"case {case.id} needs a numeric ratio a3/a2")
        r = Fraction(rv)
    bound = {p: vals[p] for p in PARAMS if pattern[p]}
    inst = case.instantiate(n, r, bound)
    inst.validation = _validate(inst, gen, trials, seed)
    return inst


SAMPLE_VALUES = {"a2": 1, "b2": 2, "a3": 3, "b3": 5}


def case_generator(case: ReductionCase, n: int, r=None) -> Generator:
    """A symmetry generator whose activation pattern selects ``case``.

    Active constants take fixed sample values; for I.1 ``a3 = r*a2``.
    ``A1``, ``An`` and ``gamma`` stay symbolic.
    """
    vals = {p: (SAMPLE_VALUES[p] if case.pattern[p] else 0) for p in PARAMS}
    if case.needs_ratio:
        vals["a3"] = Fraction(case.default_r() if r is None else r) * vals["a2"]
    return make_generator(SymmetryParams(*(Expr.const(vals[p]) for p in ("a2", "a3", "b2", "b3"))),
                          n)


def _validate(inst: CaseInstance, gen: Generator, trials, seed) -> list[CheckRecord]:
    cid, n = inst.id, inst.n

    def X(e):
        return sum((c * diff(e, v) for v, c in gen.xi.items()), Expr())

    out = []
    for label, z in (("z1", inst.z1), ("z2", inst.z2)):
        t0 = time.perf_counter()
        out.append(_record(f"{cid} X({label}) = 0", is_zero(X(z), trials, seed), cid, n, t0=t0))
    gamma = inst.gamma_2p1()
    for f, eta in gen.eta.items():
        t0 = time.perf_counter()
        ident = {a: gamma for a in eta.atoms(recursive=True)
                 if isinstance(a, Func) and a.fsym.name == "gamma"}
        lhs = inst.substitute_ansatz(substitute(eta, ident) if ident else eta)
        res = _identified(inst, lhs - X(inst.fields[f]))
        out.append(_record(f"{cid} X({f.name} - ansatz) = 0", is_zero(res, trials, seed), cid, n, t0=t0))
    return out


__all__ = ["CASE_IDS", "TrivialPatternError", "activation", "census", "characteristic_reduce",
           "classify_spectrality", "hierarchy_cross_check", "hierarchy_groups", "lax_matches",
           "reduced_residual", "select_case", "side_checks", "verify_reduced_hierarchy",
           "verify_reduced_lax", "case_generator"]
