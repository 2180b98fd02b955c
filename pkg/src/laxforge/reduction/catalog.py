"""The eight reduction cases as data, and their instantiation for a given n.

Case formulas are stored as expression strings in a versioned JSON catalog.
Instantiating a case parses them against a signature holding the reduced
fields (``U``, ``Om[j]``, ``V[j]``, ``Phi``, ``Psi`` over ``(z1, z2)``), the
reduced spectral parameter ``Lam(z2)`` with its ODE as derivative rule, the
reduced gamma ``Gam(w, z2)`` and the exponential factor ``E(w, z2)`` of the
eigenfunctions, where ``w`` is ``y`` or ``t`` depending on the case.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..expr import Expr, FuncSym, KernelError, ParseError, Symbol, diff, parse, substitute
from ..expr.core import Func
from ..expr.signature import (Signature, a1_func, an_func, declare, lam_field, phi_field,
                              psi_field, u_field, v_field, w_field)

CASE_IDS = ("I.1", "I.2", "I.3", "II.1", "II.2", "II.3", "III.1", "III.2")
PARAMS = ("a2", "b2", "a3", "b3")
REDUCED_VARS = ("z1", "z2")

_INDEX = re.compile(r"\[([jn0-9+\-* ]+)\]")


class CatalogError(ValueError):
    """Malformed or unknown catalog entry."""


def _int_of(text: str, n: int, j: int | None = None) -> int:
    consts = {"n": n} if j is None else {"n": n, "j": j}
    v = parse(text, Signature(constants=consts)).const_value()
    if v is None or Fraction(v).denominator != 1:
        raise CatalogError(f"index expression {text!r} is not an integer")
    return int(v)


def expand_indices(text: str, n: int, j: int | None = None) -> str:
    """Replace ``[j]``, ``[j+1]``, ``[n]`` ... by concrete integers."""
    return _INDEX.sub(lambda m: f"[{_int_of(m.group(1), n, j)}]", text)


def _j_range(spec, n: int) -> range:
    lo, hi = (_int_of(s, n) for s in spec)
    return range(lo, hi + 1)


# ------------------------------------------------------------------ storage

@dataclass(frozen=True)
class ReductionCase:
    """Raw catalog entry for one case (formulas as strings)."""

    id: str
    data: dict
    common: dict
    catalog_version: str

    @property
    def pattern(self) -> dict[str, bool]:
        return dict(self.data["pattern"])

    @property
    def flags(self) -> list[dict]:
        return list(self.data.get("flags", []))

    @property
    def needs_ratio(self) -> bool:
        return bool(self.data.get("ratio", False))

    @property
    def w(self) -> str:
        return self.data["w"]

    def default_r(self) -> Fraction | None:
        return Fraction(self.data["default_r"]) if self.needs_ratio else None

    def instantiate(self, n: int, r=None, values: dict | None = None,
                    reduced_lax: dict | None = None, hierarchy: dict | None = None) -> "CaseInstance":
        return CaseInstance.build(self, n, r, values, reduced_lax, hierarchy)


@dataclass(frozen=True)
class Catalog:
    version: str
    cases: dict[str, ReductionCase]
    source: str

    def __getitem__(self, cid: str) -> ReductionCase:
        try:
            return self.cases[cid]
        except KeyError:
            raise CatalogError(f"unknown case {cid!r}; known: {', '.join(self.cases)}") from None

    def __iter__(self):
        return iter(self.cases.values())

    def ids(self) -> list[str]:
        return list(self.cases)


def _check_catalog(doc: dict) -> None:
    if doc.get("schema") != "laxforge-reductions":
        raise CatalogError("not a reduction catalog (schema field)")
    cases = doc.get("cases", {})
    if sorted(cases) != sorted(CASE_IDS):
        raise CatalogError(f"catalog must hold exactly the cases {CASE_IDS}, has {sorted(cases)}")
    seen = {}
    for cid, c in cases.items():
        key = tuple(bool(c["pattern"][p]) for p in PARAMS)
        if key in seen:
            raise CatalogError(f"cases {seen[key]} and {cid} share an activation pattern")
        seen[key] = cid


def load_catalog(path: str | Path | None = None) -> Catalog:
    if path is None:
        text = resources.files("laxforge").joinpath("data/reductions.json").read_text()
        source = "builtin"
    else:
        text = Path(path).read_text()
        source = str(path)
    return _catalog_from_text(text, source)


@lru_cache(maxsize=8)
def _catalog_from_text(text: str, source: str) -> Catalog:
    doc = json.loads(text)
    _check_catalog(doc)
    version = str(doc["version"])
    common = doc.get("common", {})
    cases = {cid: ReductionCase(cid, doc["cases"][cid], common, version) for cid in CASE_IDS}
    return Catalog(version, cases, source)


# ------------------------------------------------------------ instantiation

def reduced_field(name: str) -> FuncSym:
    return declare(name, REDUCED_VARS)


def om_field(j: int) -> FuncSym:
    return declare(f"Om[{j}]", REDUCED_VARS)


def vv_field(j: int) -> FuncSym:
    return declare(f"V[{j}]", REDUCED_VARS)


def ahat1_func() -> FuncSym:
    return declare("Ahat1", ("z2",), "function")


def gam_field(w: str) -> FuncSym:
    return declare("Gam", (w, "z2"))


def _sym(name: str) -> Expr:
    return Expr.atom(Symbol.make(name))


@dataclass
class ReducedLax1p1:
    """``Psi_z1 = M Psi`` and ``prefactor Psi_z2 = drift Psi_z1 + N Psi``."""

    n: int
    M: tuple
    prefactor: Expr
    drift: Expr
    N: tuple
    lam: FuncSym
    law: Expr

    @property
    def eigen(self):
        return (reduced_field("Phi"), reduced_field("Psi"))

    def z1_rhs(self) -> tuple[Expr, Expr]:
        phi, psi = (f() for f in self.eigen)
        return tuple(self.M[i][0] * phi + self.M[i][1] * psi for i in range(2))

    def equations(self) -> list[Expr]:
        """The four scalar equations written ``E = 0``."""
        phi, psi = (f() for f in self.eigen)
        out = [f.jet("z1") - r for f, r in zip(self.eigen, self.z1_rhs())]
        for i, f in enumerate(self.eigen):
            out.append(self.prefactor * f.jet("z2") - self.drift * f.jet("z1")
                       - self.N[i][0] * phi - self.N[i][1] * psi)
        return out


@dataclass
class CaseInstance:
    """A case with every formula parsed for one ``n`` (and ``r``)."""

    case: ReductionCase
    n: int
    r: Fraction | None
    values: dict
    sig: Signature
    lam: FuncSym
    E: FuncSym
    gam: FuncSym
    z1: Expr
    z2: Expr
    inverse: dict | None
    lam_ansatz: Expr
    fields: dict            # 2+1 FuncSym -> template in (x, y, t)
    p: Expr
    q: Expr
    P: Expr
    Q: Expr
    xi_w: Expr
    gamma_pde: Expr         # value of Gam_z2, in (w, z2)
    e_z2: Expr              # E_z2 / E as stored
    lax: ReducedLax1p1
    hierarchy: list = field(default_factory=list)   # [(label, Expr)] in reduced variables
    validation: list = field(default_factory=list)  # records from characteristic_reduce
    first_integral: Expr | None = None               # conserved along the Lam-law, in (Lam, z2)

    @property
    def id(self) -> str:
        return self.case.id

    @property
    def w(self) -> str:
        return self.case.w

    @staticmethod
    def build(case: ReductionCase, n: int, r=None, values=None, reduced_lax=None,
              hierarchy=None) -> "CaseInstance":
        if n < 1:
            raise ValueError("n must be a positive integer")
        d = case.data
        if case.needs_ratio:
            r = case.default_r() if r is None else Fraction(r)
        else:
            r = None
        consts = {"n": n}
        if r is not None:
            consts["r"] = r
        values = {k: v for k, v in (values or {}).items() if k in PARAMS}
        consts.update(values)

        w = case.w
        lam = FuncSym("Lam", ("z2",), "field")
        gam = gam_field(w)
        E = FuncSym("E", (w, "z2"), "field")
        U = reduced_field("U")
        funcs = {"U": U, "Phi": reduced_field("Phi"), "Psi": reduced_field("Psi"),
                 "Lam": lam, "Gam": gam, "E": E, "Ahat1": ahat1_func(),
                 "A1": a1_func(), "An": an_func()}
        sig = Signature(funcs, {"Om": om_field, "V": vv_field}, consts)

        def P_(text, j=None):
            s = sig if j is None else sig.extend(constants={"j": j})
            return parse(expand_indices(text, n, j), s)

        Lam = lam()
        P = sum((Lam ** (n - j) * om_field(j)() for j in range(1, n + 1)), Expr())
        Q = sum((Lam ** (n - j) * vv_field(j)() for j in range(1, n + 1)), Expr())
        sig.constants["P"] = P
        sig.constants["Q"] = Q

        lam.set_rule("z2", P_(d["lam_law"]))
        xi_w = P_(d["xi_w"])
        E.set_rule(w, E() * gam() / xi_w)
        e_z2 = P_(d["e_z2"])
        E.set_rule("z2", E() * e_z2)

        z1 = P_(d["z1"])
        z2 = P_(d["z2"])
        inverse = None if d.get("inverse") is None else {k: P_(v) for k, v in d["inverse"].items()}
        lift = {Symbol.make("z1"): z1, Symbol.make("z2"): z2}

        def L(e):
            return substitute(e, lift)

        fields = {lam_field(): L(P_(d["lam"]))}
        entries = list(d["fields"]) + list(case.common.get("fields", []))
        by_name: dict[str, Expr] = {}
        for ent in entries:
            if "range" in ent:
                for j in _j_range(ent["range"], n):
                    by_name[expand_indices(ent["field"], n, j)] = P_(ent["expr"], j)
            else:
                by_name[expand_indices(ent["field"], n)] = P_(ent["expr"])
        targets = {"u": u_field(), "phi": phi_field(), "psi": psi_field()}
        for j in range(1, n + 1):
            targets[f"w[{j}]"] = w_field(j)
            targets[f"v[{j}]"] = v_field(j)
        missing = sorted(set(targets) - set(by_name))
        if missing:
            raise CatalogError(f"case {case.id}: no ansatz for {missing}")
        for name, f in targets.items():
            fields[f] = L(by_name[name])

        rl = reduced_lax or d["reduced_lax"]
        lax = make_reduced_lax(n, lam, P_(rl["prefactor"]), P_(rl["drift"]), Q)

        h = hierarchy or d["hierarchy"]
        hier = [("head", P_(h["head"]))]
        chain = case.common["hierarchy_chain"]
        for j in _j_range(chain["range"], n):
            hier.append((f"chain[{j}]", P_(chain["expr"], j)))
        hier.append(("tail", P_(h["tail"])))
        clos = case.common["hierarchy_closure"]
        for j in _j_range(clos["range"], n):
            hier.append((f"closure[{j}]", P_(clos["expr"], j)))

        first = None
        if d.get("first_integral"):
            try:
                first = P_(d["first_integral"])
            except (ZeroDivisionError, ParseError, KernelError):
                first = None  # e.g. I.1 at r = 1, where the law is trivial
        return CaseInstance(case, n, r, values, sig, lam, E, gam, z1, z2, inverse, fields[lam_field()],
                            fields, L(P_(d["p"])), L(P_(d["q"])), P, Q, xi_w, P_(d["gamma_pde"]),
                            e_z2, lax, hier, first_integral=first)

    def lift(self, e: Expr) -> Expr:
        """Write a reduced-variable expression in ``(x, y, t)``."""
        out = substitute(e, {"z1": self.z1, "z2": self.z2})
        return substitute(out, self.identifications(out))

    def identifications(self, e: Expr) -> dict:
        """``Ahat1(z2(y)) -> A1(y)`` for every application in ``e``."""
        rules = {}
        a1 = a1_func()()
        for a in e.atoms(recursive=True):
            if isinstance(a, Func) and a.fsym is ahat1_func():
                if any(a.deriv):
                    raise CatalogError("derivatives of Ahat1 cannot be identified")
                rules[a] = a1
        return rules

    def gamma_2p1(self) -> Expr:
        """The reduced gamma written in (y, t): ``Gam(w, z2(y, t))``."""
        return substitute(self.gam(), {"z2": self.z2})

    def substitute_ansatz(self, e: Expr) -> Expr:
        return substitute(e, self.fields)

    def is_isospectral(self) -> bool:
        return self.lam.rules["z2"].is_zero_structural()


def make_reduced_lax(n: int, lam: FuncSym, prefactor: Expr, drift: Expr, Q: Expr) -> ReducedLax1p1:
    from ..expr import I, sqrt

    L = lam()
    isl = I * sqrt(L)
    half = Fraction(1, 2)
    U = reduced_field("U")()
    M = ((Expr.const(-half), isl * U * half), (isl * U * half, Expr.const(half)))
    Qz = diff(Q, "z1")
    N = ((Expr(), isl * half * diff(Qz - Q, "z1")), (isl * half * diff(Qz + Q, "z1"), Expr()))
    return ReducedLax1p1(n, M, prefactor, drift, N, lam, lam.rules["z2"])
