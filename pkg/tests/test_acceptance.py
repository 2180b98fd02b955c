"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict; the lines are printed
together at the end of the module (also when run as a script).
"""

import json
import time

import numpy as np
import pytest

from laxforge.cli import main
from laxforge.hierarchy import (GridFunction, antiderivative, check_recursion, derivative,
                                apply_K, fd_K, manufactured_pair)
from laxforge.laxpair import (build_lax, compatibility_residual, extract_hierarchy,
                              hierarchy_ideal, reference_system, verify_zero_curvature)
from laxforge.numeric import (convergence_order, float_eval_modulo, integrate_lambda,
                              lambda_problem)
from laxforge.reduction import (CASE_IDS, census, classify_spectrality, load_catalog,
                                verify_reduced_hierarchy, verify_reduced_lax)
from laxforge.symmetry import mutation_suite, verify_family

import test_expr_properties as props

LINES = {}


def verdict(num, title, ok, detail=""):
    LINES[num] = f"{'PASS' if ok else 'FAIL'} criterion {num}: {title}" + (f" ({detail})" if detail else "")
    assert ok, LINES[num]


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line("")
        for k in sorted(LINES):
            tr.write_line(LINES[k])


def test_criterion_1_zero_curvature():
    worst_float, worst_time, ok = 0.0, 0.0, True
    for n in (1, 2, 3):
        t0 = time.perf_counter()
        lax = build_lax(n)
        recs = verify_zero_curvature(lax, trials=20, seed=42)
        sampled = [r for r in recs if "sampled" in r.name]
        ok &= bool(sampled) and all(r.verdict == "probably-zero" and r.trials >= 20
                                    for r in sampled)
        ok &= all(r.passed for r in recs)
        ideal = hierarchy_ideal(n)
        for res in compatibility_residual(lax).coeffs.values():
            worst_float = max(worst_float, float_eval_modulo(res, lambda e: ideal.reduce(e).expr,
                                                             20, 42))
        worst_time = max(worst_time, time.perf_counter() - t0)
    ok &= worst_float <= 1e-12 and worst_time < 30
    verdict(1, "zero curvature n=1,2,3", ok,
            f"float max residual {worst_float:.1e}, slowest n {worst_time:.1f}s")


def test_criterion_2_hierarchy_extraction():
    ok = True
    for n in (1, 2, 3):
        eqs, matches = extract_hierarchy(build_lax(n))
        ok &= len(eqs) == 2 * n + 2
        ok &= eqs == [e for _, e in reference_system(n)]
        ok &= all(m.factor is not None for m in matches)
    verdict(2, "hierarchy extraction gives 2n+2 reference equations", ok)


def test_criterion_3_symmetry():
    fam = verify_family(1) + verify_family(2)
    muts = mutation_suite(1) + mutation_suite(2)
    killed = sum(r.verdict == "nonzero" for r in muts)
    ok = all(r.passed for r in fam) and killed == len(muts)
    verdict(3, "symmetry family invariance and mutation kill", ok,
            f"{killed}/{len(muts)} mutants killed")


def test_criterion_4_reductions(capsysbinary):
    cat = load_catalog()
    ok = True
    for cid in CASE_IDS:
        for n in (1, 2):
            inst = cat[cid].instantiate(n)
            recs = verify_reduced_lax(inst) + verify_reduced_hierarchy(inst)
            ok &= all(r.passed for r in recs)
            for _, eq in inst.hierarchy:
                ok &= not (eq.free_symbols() & {"x", "y", "t"})
    t0 = time.perf_counter()
    code = main(["reduce", "--all", "--n", "2"])
    sweep = time.perf_counter() - t0
    doc = json.loads(capsysbinary.readouterr().out)
    ok &= code == 0 and doc["passed"] and sweep < 120
    verdict(4, "eight reductions for n=1,2", ok,
            f"reduce --all --n 2: {len(doc['records'])} checks in {sweep:.1f}s")


def test_criterion_5_census():
    noniso = {"I.1", "I.2", "I.3", "II.1", "III.1"}
    cat = load_catalog()
    ok = all((classify_spectrality(cat[c]) == "non-isospectral") == (c in noniso) for c in CASE_IDS)
    c = census().sections["census"]
    ok &= c["non_isospectral_count"] == 5 and c["published_count"] == 6 and c["discrepancy"]
    verdict(5, "spectrality census", ok, c["summary"])


def test_criterion_6_lambda_numerics():
    t = integrate_lambda("I.3", 1, 1.0, (0.0, 0.9), tol=1e-11)
    e1 = max(abs(v - 1 / (1 - z)) for z, v in zip(t.z, t.lam))
    ok = t.complete and e1 <= 1e-8
    t = integrate_lambda("III.1", 2, 1.0, (0.0, 0.99), tol=1e-11)
    e2 = max(abs(v - np.sqrt(1 - z)) for z, v in zip(t.z, t.lam))
    ok &= t.complete and e2 <= 1e-8
    for cid in ("II.2", "II.3", "III.2"):
        t = integrate_lambda(cid, 2, 1.7, (0.0, 5.0))
        ok &= t.complete and all(v == 1.7 for v in t.lam)
    conv = convergence_order(lambda_problem("I.3", 1, 1.0, (0.0, 0.9)), lambda z: 1 / (1 - z))
    ok &= conv.order >= 4
    verdict(6, "spectral-parameter ODE", ok,
            f"I.3 err {e1:.1e}, III.1 err {e2:.1e}, observed order {conv.order:.2f}")


def test_criterion_7_operators():
    N = 256
    f = lambda x: np.exp(np.sin(x)) + np.cos(3 * x)
    g = GridFunction.from_callable(f, N)
    fd = np.max(np.abs(apply_K(g).samples - fd_K(f, g.x, 1e-3)))
    h = GridFunction.from_callable(lambda x: np.exp(np.cos(2 * x)), N)
    rt = np.max(np.abs(antiderivative(derivative(h)).samples - (h.samples - h.mean())))
    u = GridFunction.from_callable(lambda x: 1 + 0.3 * np.cos(x), N)
    rec = 0.0
    for k in (2, 3, 4):
        v1 = GridFunction.from_callable(lambda x: np.sin(k * x) + 0.2 * np.cos((k + 1) * x), N)
        rec = max(rec, check_recursion(u, manufactured_pair(u, v1), v1))
    ok = fd <= 1e-8 and rt <= 1e-12 and rec <= 1e-8
    verdict(7, "periodic operators", ok,
            f"K vs FD {fd:.1e}, round trip {rt:.1e}, recursion {rec:.1e}")


def test_criterion_8_kernel_properties():
    suites = [props.test_simplify_idempotent, props.test_diff_commutes, props.test_leibniz,
              props.test_print_parse_roundtrip]
    failed = []
    for s in suites:
        try:
            s()
        except Exception as e:  # a falsified property
            failed.append(f"{s.__name__}: {type(e).__name__}")
    verdict(8, "kernel property suites (1000 cases each)", not failed, "; ".join(failed))


if __name__ == "__main__":
    import subprocess
    import sys
    sys.exit(subprocess.call([sys.executable, "-m", "pytest", __file__, "-q"]))
