import os
import sys
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from laxforge.expr import Expr, I, KernelError, exp, log, parse, power, sqrt, standard_signature

SIG = standard_signature()

LEAF_TEXTS = ["x", "y", "t", "u", "u_x", "u_y", "u_xy", "u_xx", "v[1]", "w[1]_x", "v[2]_t",
              "lam", "lam_y", "A1(y)", "An(y, t)", "phi", "psi_x", "Int[A1(y)/y; y]"]
LEAVES = [parse(s, SIG) for s in LEAF_TEXTS]


def _const():
    return st.fractions(min_value=-5, max_value=5, max_denominator=6).map(Expr.const)


def _leaf():
    return st.one_of(_const(), st.sampled_from(LEAVES), st.just(I),
                     st.just(sqrt(parse("lam", SIG))))


def _combine(children):
    binop = st.tuples(st.sampled_from(["+", "-", "*"]), children, children)
    unop = st.tuples(st.sampled_from(["sq", "inv", "exp", "log"]), children)
    return st.one_of(binop, unop)


def build(tree):
    """Evaluate a random tree through the kernel's arithmetic."""
    if isinstance(tree, Expr):
        return tree
    op = tree[0]
    if op in "+-*":
        a, b = build(tree[1]), build(tree[2])
        return a + b if op == "+" else a - b if op == "-" else a * b
    a = build(tree[1])
    if op == "sq":
        return a * a
    if op == "inv":
        # 1/(3 + a^2) keeps the denominator a sum
        base = Expr.const(3) + a * a
        return power(base, -1) if len(a) <= 3 and not base.is_zero_structural() else a
    if op == "exp":
        if len(a) > 2 or a.is_const():
            return a
        try:
            return exp(a)
        except KernelError:  # exp(c*log(s)) is a fractional power of a sum
            return a
    arg = Expr.const(2) + a * a
    return log(arg) if len(a) <= 2 and not arg.is_const() else a


trees = st.recursive(_leaf(), _combine, max_leaves=6)
exprs = trees.map(build)


@pytest.fixture
def sig():
    return SIG
