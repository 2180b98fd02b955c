"""Property suites for the kernel, 1000 random expressions each."""

import math
from fractions import Fraction

from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from laxforge.expr import diff, parse, simplify, to_str
from laxforge.expr.zero import (Evaluator, GaussRat, collect_atoms, exponent_scales,
                                rational_point)
import random

from conftest import SIG, exprs, trees, build

PROP = settings(max_examples=1000, deadline=None,
                suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
VARS = st.sampled_from(["x", "y", "t"])


@PROP
@given(trees)
def test_simplify_idempotent(tree):
    e = build(tree)
    once = simplify(e)
    assert once == e
    assert simplify(once) == once
    assert hash(simplify(once)) == hash(once)


@PROP
@given(exprs, VARS, VARS)
def test_diff_commutes(e, a, b):
    assert diff(diff(e, a), b) == diff(diff(e, b), a)


@PROP
@given(exprs, exprs, VARS)
def test_leibniz(a, b, v):
    rest = diff(a * b, v) - a * diff(b, v) - b * diff(a, v)
    assert rest.is_zero_structural()


@PROP
@given(exprs)
def test_print_parse_roundtrip(e):
    text = to_str(e)
    assert parse(text, SIG) == e, text


def _point(exprs_, seed):
    atoms = set()
    scales = {}
    for e in exprs_:
        atoms.update(collect_atoms(e))
        for a, L in exponent_scales(e).items():
            scales[a] = math.lcm(scales.get(a, 1), L)
    atoms = sorted(atoms, key=lambda a: a.sort_key())
    return rational_point(atoms, scales, random.Random(seed))


@PROP
@given(exprs, exprs, st.integers(0, 2 ** 16))
def test_evaluation_homomorphism(a, b, seed):
    s, p = a + b, a * b
    point = _point([a, b, s, p], seed)
    ev = Evaluator(point, GaussRat(1), GaussRat(0, 1))
    try:
        va, vb, vs, vp = (ev.value(e) for e in (a, b, s, p))
    except ZeroDivisionError:
        assume(False)
    assert vs == va + vb
    assert vp == va * vb
