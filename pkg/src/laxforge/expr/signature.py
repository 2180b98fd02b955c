"""Registries of named fields and arbitrary functions.

Plain fields (no derivative rules) are interned by ``(name, params, kind)``
so independently built expressions share the same jet atoms.  Functions that
carry derivative rules (Lambda, gamma, the exponential factor of a reduction)
are ordinary :class:`FuncSym` objects registered in a :class:`Signature`.
"""

from __future__ import annotations

import re
import threading
from typing import Callable, Mapping

from .core import Expr, FuncSym, as_expr

_lock = threading.Lock()
_registry: dict[tuple, FuncSym] = {}

SPACE_VARS = ("x", "y", "t")


def declare(name: str, params=SPACE_VARS, kind: str = "field") -> FuncSym:
    """Interned rule-free FuncSym."""
    key = (name, tuple(params), kind)
    with _lock:
        f = _registry.get(key)
        if f is None:
            f = FuncSym(name, params, kind)
            _registry[key] = f
        return f


_INDEXED = re.compile(r"^([A-Za-z][A-Za-z0-9]*)\[(\d+)\]$")


class Signature:
    """Name resolution for the parser.

    ``funcs`` maps a printed name (e.g. ``"u"``, ``"v[2]"``, ``"A1"``) to a
    FuncSym; ``families`` maps the stem of an indexed name to a factory
    ``j -> FuncSym``; ``constants`` binds symbols such as ``n`` to values
    that are substituted while parsing.
    """

    def __init__(self, funcs: Mapping[str, FuncSym] | None = None,
                 families: Mapping[str, Callable[[int], FuncSym]] | None = None,
                 constants: Mapping[str, object] | None = None):
        self.funcs: dict[str, FuncSym] = dict(funcs or {})
        self.families: dict[str, Callable[[int], FuncSym]] = dict(families or {})
        self.constants: dict[str, Expr] = {k: as_expr(v) for k, v in (constants or {}).items()}

    def lookup(self, name: str) -> FuncSym | None:
        f = self.funcs.get(name)
        if f is not None:
            return f
        m = _INDEXED.match(name)
        if m and m.group(1) in self.families:
            return self.families[m.group(1)](int(m.group(2)))
        return None

    def extend(self, funcs=(), constants=None) -> "Signature":
        sig = Signature(self.funcs, self.families, self.constants)
        for f in funcs:
            sig.funcs[f.name] = f
        for k, v in (constants or {}).items():
            sig.constants[k] = as_expr(v)
        return sig

    def with_funcs(self, mapping: Mapping[str, FuncSym]) -> "Signature":
        sig = Signature(self.funcs, self.families, self.constants)
        sig.funcs.update(mapping)
        return sig


def u_field() -> FuncSym:
    return declare("u")


def lam_field() -> FuncSym:
    return declare("lam", ("y", "t"))


def phi_field() -> FuncSym:
    return declare("phi")


def psi_field() -> FuncSym:
    return declare("psi")


def w_field(j: int) -> FuncSym:
    return declare(f"w[{j}]")


def v_field(j: int) -> FuncSym:
    return declare(f"v[{j}]")


def a1_func() -> FuncSym:
    return declare("A1", ("y",), "function")


def an_func() -> FuncSym:
    return declare("An", ("y", "t"), "function")


def standard_signature(n: int | None = None) -> Signature:
    """Fields of the 2+1 problem; ``n`` (if given) is bound as a constant."""
    funcs = {f.name: f for f in (u_field(), lam_field(), phi_field(), psi_field(),
                                 a1_func(), an_func())}
    consts = {"n": n} if n is not None else {}
    return Signature(funcs, {"v": v_field, "w": w_field}, consts)
