"""Exact computer-algebra kernel for jet-space expressions."""

from .core import (ONE, ZERO, Expr, FuncSym, I, IntegralSym, KernelError, Substituter,
                   Symbol, as_expr, cancel_mul, coefficient, collect, derivative, diff,
                   exp, integral, leading_term, log, ordered_terms, power, simplify, sqrt,
                   substitute)
from .parser import ParseError, parse
from .printer import to_str
from .signature import Signature, declare, standard_signature
from .zero import ZeroVerdict, is_zero, proportional

__all__ = [
    "ONE", "ZERO", "Expr", "FuncSym", "I", "IntegralSym", "KernelError", "Substituter",
    "Symbol", "as_expr", "cancel_mul", "coefficient", "collect", "derivative", "diff",
    "exp", "integral", "leading_term", "log", "ordered_terms", "power", "simplify", "sqrt",
    "substitute", "ParseError", "parse", "to_str", "Signature", "declare",
    "standard_signature", "ZeroVerdict", "is_zero", "proportional",
]
