import copy
import json
from fractions import Fraction

import pytest

from laxforge.expr import Expr, diff, is_zero
from laxforge.expr.core import Func
from laxforge.reduction import (CASE_IDS, CatalogError, TrivialPatternError, case_generator,
                                census, characteristic_reduce, classify_spectrality,
                                load_catalog, verify_reduced_hierarchy, verify_reduced_lax)
from laxforge.symmetry import SymmetryParams, make_generator

CAT = load_catalog()
NONISO = {"I.1", "I.2", "I.3", "II.1", "III.1"}


def consts(a2=0, a3=0, b2=0, b3=0):
    """Numeric constants; A1, An and gamma stay arbitrary."""
    c = Expr.const
    return SymmetryParams(c(a2), c(a3), c(b2), c(b3))


def all_pass(recs):
    return all(r.passed for r in recs), [r.name for r in recs if not r.passed]


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("cid", CASE_IDS)
def test_reduced_lax_and_hierarchy(cid, n):
    inst = CAT[cid].instantiate(n)
    ok, bad = all_pass(verify_reduced_lax(inst) + verify_reduced_hierarchy(inst))
    assert ok, bad


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("cid", CASE_IDS)
def test_characteristic_validation(cid, n):
    inst = characteristic_reduce(case_generator(CAT[cid], n))
    assert inst.id == cid and inst.n == n
    ok, bad = all_pass(inst.validation)
    assert ok and inst.validation, bad


def test_printed_prefactor_is_rejected():
    case = CAT["II.2"]
    printed = next(f for f in case.flags if f["id"] == "prefactor-sign")["printed"]
    inst = case.instantiate(1, reduced_lax=printed)
    assert not all(r.passed for r in verify_reduced_lax(inst))


def test_dropped_tail_term_is_rejected():
    case = CAT["I.1"]
    h = dict(case.data["hierarchy"])
    assert "- r*z2*U_z2" in h["tail"]
    h["tail"] = h["tail"].replace(" - r*z2*U_z2", "")
    inst = case.instantiate(1, hierarchy=h)
    assert not all(r.passed for r in verify_reduced_hierarchy(inst))


def test_pattern_selection():
    g = make_generator(consts(a2=1, a3=1), 1)
    inst = characteristic_reduce(g)
    assert inst.id == "I.1" and inst.r == 1
    assert all(r.passed for r in inst.validation)
    g = make_generator(consts(b2=1, b3=1), 2)
    assert characteristic_reduce(g).id == "II.2"


def test_trivial_pattern():
    with pytest.raises(TrivialPatternError):
        characteristic_reduce(make_generator(SymmetryParams.constants(), 1))


def test_unlisted_pattern():
    with pytest.raises(TrivialPatternError):
        characteristic_reduce(make_generator(SymmetryParams(), 1))


def test_non_numeric_ratio():
    p = SymmetryParams(b2=Expr(), b3=Expr())
    with pytest.raises(CatalogError):
        characteristic_reduce(make_generator(p, 1))


def _write(tmp_path, doc):
    p = tmp_path / "cat.json"
    p.write_text(json.dumps(doc))
    return p


def _raw():
    from importlib import resources
    return json.loads(resources.files("laxforge").joinpath("data/reductions.json").read_text())


def test_mutated_ansatz_fails_validation(tmp_path):
    doc = _raw()
    u = next(f for f in doc["cases"]["I.1"]["fields"] if f["field"] == "u")
    u["expr"] = u["expr"].replace("(r-1)", "(r+1)")
    cat = load_catalog(_write(tmp_path, doc))
    inst = characteristic_reduce(case_generator(cat["I.1"], 1), catalog=cat)
    failed = [r.name for r in inst.validation if not r.passed]
    assert failed == ["I.1 X(u - ansatz) = 0"]


def test_catalog_errors(tmp_path):
    doc = _raw()
    bad = copy.deepcopy(doc)
    bad["schema"] = "other"
    with pytest.raises(CatalogError):
        load_catalog(_write(tmp_path, bad))
    bad = copy.deepcopy(doc)
    del bad["cases"]["III.2"]
    with pytest.raises(CatalogError):
        load_catalog(_write(tmp_path, bad))
    bad = copy.deepcopy(doc)
    bad["cases"]["III.2"]["pattern"] = dict(bad["cases"]["III.1"]["pattern"])
    with pytest.raises(CatalogError):
        load_catalog(_write(tmp_path, bad))
    with pytest.raises(CatalogError):
        CAT["IV.1"]


def test_census():
    rep = census()
    c = rep.sections["census"]
    assert set(c["non-isospectral"]) == NONISO
    assert set(c["isospectral"]) == set(CASE_IDS) - NONISO
    assert c["non_isospectral_count"] == 5 and c["published_count"] == 6
    assert c["discrepancy"] is True
    for cid in CASE_IDS:
        want = "non-isospectral" if cid in NONISO else "isospectral"
        assert classify_spectrality(CAT[cid]) == want


def test_ratio_one_is_isospectral():
    inst = CAT["I.1"].instantiate(1, r=1)
    assert classify_spectrality(inst) == "isospectral"
    assert inst.first_integral is None


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("cid", CASE_IDS)
def test_first_integral_is_conserved(cid, n):
    inst = CAT[cid].instantiate(n)
    assert inst.first_integral is not None
    # Lam carries its law as the z2 derivative rule
    assert is_zero(diff(inst.first_integral, "z2"), 20, 42).zero


@pytest.mark.parametrize("cid", CASE_IDS)
def test_reduced_variables_are_free_of_space_time(cid):
    inst = CAT[cid].instantiate(2)
    for _, eq in inst.hierarchy:
        assert not (eq.free_symbols() & {"x", "y", "t"})
    assert not (inst.lax.law.free_symbols() & {"x", "y", "t"})
    assert {str(v) for v in (inst.lam.params)} == {"z2"}


def test_spectral_matrix_shape():
    inst = CAT["I.3"].instantiate(2)
    M = inst.lax.M
    assert len(M) == 2 and all(len(row) == 2 for row in M)
    assert is_zero(M[0][0] + M[1][1], 5, 0).zero  # traceless
    assert is_zero(M[0][1] - M[1][0], 5, 0).zero
    assert {a.fsym.name for a in M[0][1].atoms() if isinstance(a, Func)} == {"U", "Lam"}


def test_rational_ratio():
    inst = characteristic_reduce(case_generator(CAT["I.1"], 1, Fraction(1, 3)))
    assert inst.r == Fraction(1, 3)
    assert all(r.passed for r in inst.validation)
