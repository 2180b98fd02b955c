"""Command-line entry point ``laxforge``.

Exit codes: 0 when every check passes, 1 when at least one fails, 2 for
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import hierarchy as ops
from .expr import to_str
from .laxpair import (build_lax, compatibility_residual, extract_hierarchy, hierarchy_ideal,
                      verify_zero_curvature)
from .numeric import closed_form, conserved_check, float_eval_modulo, integrate_lambda
from .reduction import (CASE_IDS, CatalogError, census, characteristic_reduce, case_generator,
                        classify_spectrality, load_catalog, verify_reduced_hierarchy,
                        verify_reduced_lax)
from .report import CheckRecord, Report, emit
from .symmetry import mutation_suite, verify_family

log = logging.getLogger("laxforge")

MAX_N = 4
FLOAT_TOL = 1e-12
SMOKE_WINDOW = (0.0, 0.5)
SMOKE_TOL = 1e-10
OPS_TOL = 1e-8


class UsageError(Exception):
    pass


def _check(name: str, ok: bool, **detail) -> CheckRecord:
    return CheckRecord(name, "pass" if ok else "fail", detail=detail)


# ------------------------------------------------------------------ commands

def cmd_verify_lax(n: int, trials: int, seed: int) -> Report:
    rep = Report("verify-lax", {"n": n, "trials": trials, "seed": seed})
    lax = build_lax(n)
    rep.extend(verify_zero_curvature(lax, trials=trials, seed=seed))
    ideal = hierarchy_ideal(n)
    for (comp, eig), res in sorted(compatibility_residual(lax).coeffs.items()):
        worst = float_eval_modulo(res, lambda e: ideal.reduce(e).expr, trials, seed)
        rep.add(_check(f"zero-curvature float n={n} component={comp} coefficient={eig}",
                       worst <= FLOAT_TOL, n=n, max_abs=worst, tol=FLOAT_TOL))
    eqs, matches = extract_hierarchy(lax, seed=seed)
    rep.add(_check(f"hierarchy extraction n={n}", len(eqs) == 2 * n + 2,
                   n=n, equations=len(eqs), expected=2 * n + 2))
    rep.sections["hierarchy"] = {
        "equations": [to_str(e) for e in eqs],
        "matches": [{"component": m.component, "coefficient": m.eigen,
                     "lam_power": None if m.lam_power is None else str(m.lam_power),
                     "reference": m.reference, "factor": m.factor,
                     "derivative": m.derivative} for m in matches],
    }
    return rep


def cmd_verify_symmetry(n: int, trials: int, seed: int, mutations: bool) -> Report:
    rep = Report("verify-symmetry", {"n": n, "trials": trials, "seed": seed,
                                     "mutations": mutations})
    rep.extend(verify_family(n, trials, seed))
    if mutations:
        rep.extend(mutation_suite(n, trials, seed))
    return rep


def _reduce_case(rep: Report, catalog, cid: str, n: int, r, trials: int, seed: int) -> None:
    case = catalog[cid]
    inst = characteristic_reduce(case_generator(case, n, r), catalog, trials, seed)
    for rec in inst.validation:
        rec.name = f"characteristic {rec.name}"
    rep.extend(inst.validation)
    rep.extend(verify_reduced_lax(inst, trials, seed))
    rep.extend(verify_reduced_hierarchy(inst, trials, seed))
    spectrality = classify_spectrality(inst)
    rep.add(CheckRecord(f"spectrality {cid}", "pass",
                        detail={"case": cid, "n": n, "class": spectrality}))
    traj = integrate_lambda(inst, n, 1.0, SMOKE_WINDOW, SMOKE_TOL, seed=seed)
    drift = conserved_check(inst, n, traj)
    ok = traj.complete and (drift.skipped or drift.drift <= 1e3 * SMOKE_TOL)
    rep.add(_check(f"{cid} lambda smoke run", ok, case=cid, n=n, status=traj.status,
                   accepted=traj.accepted, rejected=traj.rejected,
                   lam_end=traj.lam[-1], drift=drift.drift, notice=drift.notice))
    rep.sections[cid] = {
        "spectrality": spectrality,
        "law": f"dLam/dz2 = {to_str(inst.lax.law)}",
        "r": None if inst.r is None else str(inst.r),
        "first_integral": None if inst.first_integral is None else to_str(inst.first_integral),
        "flags": case.flags,
        "convention": "Lam sampled positive, principal branch of sqrt(Lam)",
    }


def cmd_reduce(cases: list[str], n: int, trials: int, seed: int, catalog, r=None) -> Report:
    params = {"cases": cases, "n": n, "trials": trials, "seed": seed}
    if r is not None:
        params["r"] = str(r)
    rep = Report("reduce", params, catalog_version=catalog.version)
    for cid in cases:
        t0 = time.perf_counter()
        _reduce_case(rep, catalog, cid, n, r if cid == "I.1" else None, trials, seed)
        log.info("reduce %s n=%d: %.2fs", cid, n, time.perf_counter() - t0)
    if len(cases) == len(CASE_IDS):
        rep.sections["census"] = census(catalog).sections["census"]
    return rep


def cmd_solve_lambda(cid: str, n: int, lam0: float, window, tol: float, seed: int, catalog,
                     r=None) -> Report:
    params = {"case": cid, "n": n, "lam0": lam0, "window": list(window), "tol": tol,
              "seed": seed}
    if r is not None:
        params["r"] = str(r)
    rep = Report("solve-lambda", params, catalog_version=catalog.version)
    inst = catalog[cid].instantiate(n, r=r)
    traj = integrate_lambda(inst, n, lam0, window, tol, seed=seed)
    rep.add(_check(f"{cid} integration", traj.complete, case=cid, n=n, status=traj.status,
                   accepted=traj.accepted, rejected=traj.rejected,
                   singularity=traj.singularity))
    drift = conserved_check(inst, n, traj)
    if drift.skipped:
        log.warning(drift.notice)
    else:
        rep.add(_check(f"{cid} first integral drift", drift.drift <= 1e3 * tol, case=cid, n=n,
                       drift=drift.drift))
    exact = closed_form(cid, n, window[0], lam0) if inst.r is None else None
    if exact is not None and traj.complete:
        err = max(abs(v - exact(z)) for z, v in zip(traj.z, traj.lam))
        rep.add(_check(f"{cid} closed form", err <= 1e3 * tol, case=cid, n=n, max_error=err))
    rep.sections["trajectory"] = traj.to_dict()
    return rep


def cmd_ops_check(n: int, grid: int) -> Report:
    rep = Report("ops-check", {"n": n, "grid": grid})
    f = lambda x: np.exp(np.sin(x))
    g = ops.GridFunction.from_callable(f, grid)
    err = float(np.max(np.abs(ops.apply_K(g).samples - ops.fd_K(f, g.x, 1e-3))))
    rep.add(_check("K spectral vs fourth-order differences", err <= OPS_TOL, max_abs=err))
    back = ops.antiderivative(ops.derivative(g))
    err = float(np.max(np.abs(back.samples - (g.samples - g.mean()))))
    rep.add(_check("antiderivative round trip", err <= 1e-12, max_abs=err))
    u = ops.GridFunction.from_callable(lambda x: 1 + 0.3 * np.cos(x), grid)
    for j in range(1, n + 1):
        # frequencies >= 2 keep u * v_x mean-free, so J v is defined
        v = ops.GridFunction.from_callable(
            lambda x, k=j + 1: np.sin(k * x) + 0.2 * np.cos((k + 1) * x), grid)
        prev = ops.manufactured_pair(u, v)
        err = ops.check_recursion(u, prev, v)
        rep.add(_check(f"manufactured pair J v[{j + 1}] = K v[{j}]", err <= OPS_TOL, max_abs=err))
    for rel, ok in ops.symbolic_chain_check(n).items():
        rep.add(_check(f"symbolic chain {rel}", ok, n=n))
    return rep


# ------------------------------------------------------------------ parsing

def _n(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 1 <= n <= MAX_N:
        raise argparse.ArgumentTypeError(f"n must be in 1..{MAX_N}, got {n}")
    return n


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _default_seed() -> int:
    env = os.environ.get("LAXFORGE_SEED")
    if env is None:
        return 42
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"LAXFORGE_SEED must be an integer, got {env!r}") from None


def build_parser(seed: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laxforge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n=True):
        if n:
            sp.add_argument("--n", type=_n, default=1, help=f"hierarchy member, 1..{MAX_N}")
        sp.add_argument("--trials", type=_positive, default=20)
        sp.add_argument("--seed", type=int, default=seed)
        sp.add_argument("--format", choices=("json", "latex", "text"), default="json")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="include wall times in JSON")

    sp = sub.add_parser("verify-lax", help="zero-curvature and hierarchy extraction")
    common(sp)
    sp = sub.add_parser("verify-symmetry", help="point symmetry family and its mutants")
    common(sp)
    sp.add_argument("--mutations", action="store_true")
    sp = sub.add_parser("reduce", help="similarity reductions")
    common(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--case", choices=CASE_IDS)
    g.add_argument("--all", action="store_true")
    sp.add_argument("--catalog", help="case catalog JSON (default: the bundled one)")
    sp.add_argument("--r", type=Fraction, help="ratio a3/a2 for case I.1")
    sp = sub.add_parser("solve-lambda", help="integrate a case's spectral-parameter law")
    common(sp)
    sp.add_argument("--case", choices=CASE_IDS, required=True)
    sp.add_argument("--catalog")
    sp.add_argument("--r", type=Fraction)
    sp.add_argument("--lam0", type=float, default=1.0)
    sp.add_argument("--window", type=float, nargs=2, default=list(SMOKE_WINDOW),
                    metavar=("Z0", "Z1"))
    sp.add_argument("--tol", type=float, default=SMOKE_TOL)
    sp = sub.add_parser("ops-check", help="K and J on a periodic grid")
    common(sp)
    sp.add_argument("--grid", type=int, default=256)
    return p


def run(args) -> Report:
    cmd = args.command
    if cmd == "verify-lax":
        return cmd_verify_lax(args.n, args.trials, args.seed)
    if cmd == "verify-symmetry":
        return cmd_verify_symmetry(args.n, args.trials, args.seed, args.mutations)
    if cmd == "ops-check":
        if args.grid < 16 or args.grid % 2:
            raise UsageError("--grid must be even and >= 16")
        return cmd_ops_check(args.n, args.grid)
    try:
        catalog = load_catalog(args.catalog)
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot load catalog: {e}") from None
    if args.r is not None and args.case not in (None, "I.1") and cmd == "solve-lambda":
        raise UsageError("--r applies to case I.1 only")
    if cmd == "reduce":
        cases = list(CASE_IDS) if args.all else [args.case]
        return cmd_reduce(cases, args.n, args.trials, args.seed, catalog, args.r)
    if cmd == "solve-lambda":
        z0, z1 = args.window
        if not (args.lam0 > 0 and args.tol > 0 and z1 > z0):
            raise UsageError("need lam0 > 0, tol > 0 and an increasing window")
        return cmd_solve_lambda(args.case, args.n, args.lam0, (z0, z1), args.tol, args.seed,
                                catalog, args.r)
    raise UsageError(f"unknown command {cmd}")  # pragma: no cover


def main(argv=None) -> int:
    try:
        parser = build_parser(_default_seed())
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        t0 = time.perf_counter()
        rep = run(args)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    except (UsageError, CatalogError) as e:
        print(f"laxforge: error: {e}", file=sys.stderr)
        return 2
    data = emit(rep, args.format, timing=args.timing)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
