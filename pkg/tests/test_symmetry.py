import pytest

from laxforge.expr import Expr, diff, is_zero, parse, standard_signature
from laxforge.expr.signature import lam_field, phi_field, u_field, v_field
from laxforge.laxpair import build_lax
from laxforge.symmetry import (Generator, SymmetryParams, check_gamma_condition, gamma_func,
                               invariance_residuals, make_generator, mutation_suite, prolong,
                               prolong_characteristic, sym, verify_family)

SIG = standard_signature()
U = u_field()


def P(text):
    return parse(text, SIG)


def same(a, b):
    return is_zero(a - b, 10, 0).zero


def gen_u(xi, eta):
    return Generator({k: P(v) for k, v in xi.items()}, {U: P(eta)})


GOLDEN = [
    # (xi, eta_u, {jet: expected})
    ({"x": "1"}, "0", {"u_x": "0", "u_xx": "0", "u_xy": "0"}),
    ({"y": "1"}, "0", {"u_y": "0", "u_yy": "0", "u_xy": "0"}),
    ({"t": "1"}, "0", {"u_t": "0", "u_xt": "0"}),
    ({"x": "x"}, "u", {"u_x": "0", "u_xx": "-u_xx", "u_y": "u_y", "u_xy": "0", "u_yy": "u_yy"}),
    ({"y": "y"}, "-u", {"u_x": "-u_x", "u_y": "-2*u_y", "u_yy": "-3*u_yy", "u_xy": "-2*u_xy"}),
]


@pytest.mark.parametrize("xi,eta,expected", GOLDEN)
def test_golden_prolongations(xi, eta, expected):
    pro = prolong(gen_u(xi, eta), 2)
    for jet, want in expected.items():
        assert same(pro[P(jet).as_atom()], P(want)), jet


@pytest.mark.parametrize("xi,eta", [({"x": "x*y"}, "u^2"), ({"y": "t", "x": "u"}, "x*u_y*0 + y*u"),
                                    ({"t": "y^2", "x": "exp(y)"}, "u*t")])
def test_prolongation_formulas_agree(xi, eta):
    g = gen_u(xi, eta)
    pro = prolong(g, 2)
    for atom, e in pro.items():
        if atom.fsym is U:
            assert same(e, prolong_characteristic(g, atom)), Expr.atom(atom)


def test_prolongation_is_linear():
    g1 = gen_u({"x": "x"}, "u")
    g2 = gen_u({"x": "y^2", "t": "1"}, "x*u")
    p1, p2, p12 = prolong(g1, 2), prolong(g2, 2), prolong(g1 + g2, 2)
    for atom in p12:
        assert same(p12[atom], p1[atom] + p2[atom])


def test_prolong_order_validation():
    with pytest.raises(ValueError):
        prolong(gen_u({"x": "1"}, "0"), 3)


def test_prolong_restricted_to_jets():
    want = [P("u_xy").as_atom()]
    assert list(prolong(gen_u({"x": "x"}, "u"), 2, want)) == want


@pytest.mark.parametrize("n", [1, 2])
def test_family_leaves_spectral_problem_invariant(n):
    recs = verify_family(n, trials=20, seed=42)
    assert len(recs) == 5
    assert all(r.passed and r.verdict in ("zero-structural", "probably-zero") for r in recs)


def test_translations_are_symmetries():
    for b2, b3 in [(1, 0), (0, 1), (2, -3)]:
        recs = verify_family(1, params=SymmetryParams.constants(b2=b2, b3=b3))
        assert all(r.passed for r in recs)


def test_scaling_alone_is_symmetry():
    recs = verify_family(2, params=SymmetryParams.constants(a2=1, a3=3))
    assert all(r.passed for r in recs)


def test_mutation_suite_kills_every_mutant():
    recs = mutation_suite(1)
    # xi_x, xi_y, xi_t and eta for lam, u, w1, v1, phi, psi; two mutants each
    assert len(recs) == 2 * 9
    assert all(r.passed and r.verdict == "nonzero" for r in recs)


def test_wrong_lambda_weight_is_not_a_symmetry():
    lax = build_lax(1)
    g = make_generator(SymmetryParams.constants(a2=1), 1)
    g.eta[lam_field()] = 2 * lam_field()()
    res = invariance_residuals(g, lax)
    assert any(not is_zero(r, 20, 42).zero for r in res)


def test_gamma_condition():
    y, t, lam = sym("y"), sym("t"), sym("lam")
    assert check_gamma_condition(gamma_func(2), 2)
    assert not check_gamma_condition(gamma_func(2, "plain"), 2)
    assert check_gamma_condition(y + lam ** 2 * t, 2)
    assert check_gamma_condition((y + lam * t) ** 3, 1)
    assert not check_gamma_condition(y + t, 2)
    assert not check_gamma_condition(gamma_func(1, None), 1)
    assert check_gamma_condition(Expr.const(5), 3)


def test_gamma_needs_law():
    g = make_generator(SymmetryParams(gamma=sym("y") + sym("t"), A1=Expr(), An=Expr()), 1)
    res = invariance_residuals(g, build_lax(1))
    assert any(not is_zero(r, 20, 42).zero for r in res)


def test_make_generator_examples():
    g = make_generator(SymmetryParams.constants(a2=1), 1)
    assert same(g.xi["y"], sym("y"))
    assert same(g.eta[lam_field()], lam_field()())
    assert same(g.eta[U], -Expr.const(1) / 2 * U())
    assert same(g.eta[v_field(1)], -Expr.const(1) / 2 * v_field(1)())
    gen = make_generator(SymmetryParams.generic(2), 2)
    gamma = gen.eta[phi_field()] * (phi_field()() ** -1)
    assert same(diff(gamma, "x"), Expr())
    with pytest.raises(ValueError):
        make_generator(SymmetryParams.generic(1), 0)
