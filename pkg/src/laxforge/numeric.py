"""Floating-point side checks: the reduced spectral-parameter ODE and residual sampling.

The integrator is the Dormand-Prince 5(4) pair with local extrapolation,
written out here so that accepted and rejected steps can be counted and a
fixed-step mode is available for convergence-order measurements.  Every
Lam-law is a scalar ODE ``dLam/dz2 = f(Lam, z2)`` taken from the case
catalog as an expression and evaluated in double precision.
"""

from __future__ import annotations

import cmath
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import Expr, Symbol
from .expr.core import ConstPow, ExpAtom, Func, I_ATOM, LogAtom, SumPow
from .expr.zero import Evaluator, Manifold, collect_atoms, exponent_scales, float_point

BLOWUP_LAM = 1e8
MIN_STEP = 1e-13
MAX_RESAMPLE = 10

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class NumericError(ArithmeticError):
    """A floating-point evaluation failed at every resample."""


def float_eval(e: Expr, env: dict) -> complex:
    """Evaluate ``e`` with ``env`` mapping atoms to numbers.

    Unlike the sampling path, ``exp``, ``log`` and irrational constants are
    evaluated as functions of their arguments.
    """
    total = 0j
    for m, c in e.terms.items():
        t = complex(c.numerator, 0) / c.denominator if isinstance(c, Fraction) else complex(c)
        for a, ea in m:
            t *= _atom_value(a, env) ** float(ea)
        total += t
    return total


def _atom_value(a, env: dict) -> complex:
    if a in env:
        return env[a]
    if a is I_ATOM:
        return 1j
    if isinstance(a, ConstPow):
        return complex(a.base)
    if isinstance(a, ExpAtom):
        return cmath.exp(float_eval(a.arg, env))
    if isinstance(a, LogAtom):
        return cmath.log(float_eval(a.arg, env))
    if isinstance(a, SumPow):
        return float_eval(a.base, env)
    raise KeyError(f"no value for {a!r}")


def _real(v: complex) -> float:
    return v.real if abs(v.imag) <= 1e-12 * max(1.0, abs(v.real)) else math.nan


@dataclass
class OdeProblem:
    """``dLam/dz2 = rhs(Lam, z2)`` with ``Lam(window[0]) = lam0``."""

    rhs: Expr
    lam: Func
    lam0: float
    window: tuple[float, float]
    tol: float = 1e-10
    var: str = "z2"

    def __post_init__(self):
        if not self.lam0 > 0:
            raise ValueError("initial value must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not self.window[1] > self.window[0]:
            raise ValueError("window must be increasing")
        self._z = Symbol.make(self.var)
        self._dens = [a.base for a in collect_atoms(self.rhs) if isinstance(a, SumPow)]

    @property
    def trivial(self) -> bool:
        return self.rhs.is_zero_structural()

    def _env(self, z: float, lam: float) -> dict:
        return {self.lam: complex(lam), self._z: complex(z)}

    def f(self, z: float, lam: float) -> float:
        return _real(float_eval(self.rhs, self._env(z, lam)))

    def denominators(self, z: float, lam: float) -> list[float]:
        env = self._env(z, lam)
        return [_real(float_eval(d, env)) for d in self._dens]


@dataclass
class Trajectory:
    z: list[float]
    lam: list[float]
    accepted: int = 0
    rejected: int = 0
    status: str = "ok"      # ok | blow-up | denominator-zero | step-underflow | max-steps
    singularity: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {"meta": dict(self.meta), "status": self.status, "accepted": self.accepted,
                "rejected": self.rejected, "singularity": self.singularity,
                "points": [[z, v] for z, v in zip(self.z, self.lam)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        d = json.loads(text)
        pts = d["points"]
        return cls([p[0] for p in pts], [p[1] for p in pts], d["accepted"], d["rejected"],
                   d["status"], d["singularity"], d["meta"])


def _stages(p: OdeProblem, z: float, y: float, h: float, k1: float) -> tuple[float, float, list]:
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(p.f(z + _C[i] * h, yi))
    y5 = y + h * sum(b * kj for b, kj in zip(_B5, k))
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return y5, err, k


def _initial_step(p: OdeProblem, f0: float) -> float:
    span = p.window[1] - p.window[0]
    d0, d1 = abs(p.lam0), abs(f0)
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    return min(h, span)


def _sign_change(before: list[float], after: list[float]) -> bool:
    return any(not (b * a > 0) for b, a in zip(before, after))


def integrate(p: OdeProblem, max_steps: int = 200_000) -> Trajectory:
    """Adaptive integration across the window with blow-up detection."""
    z, y = p.window[0], float(p.lam0)
    zend = p.window[1]
    traj = Trajectory([z], [y])
    dens0 = p.denominators(z, y)
    if any(not (abs(d) > 0) for d in dens0):
        traj.status = "denominator-zero"
        traj.singularity = {"kind": "denominator", "z": z}
        return traj
    f0 = p.f(z, y)
    h = _initial_step(p, f0)
    while z < zend:
        if traj.accepted + traj.rejected >= max_steps:
            traj.status = "max-steps"
            return traj
        h = min(h, zend - z)
        if h < MIN_STEP and zend - z > MIN_STEP:
            traj.singularity = _singularity(p, z, y, dens0, "step")
            traj.status = ("denominator-zero" if traj.singularity["kind"] == "denominator"
                           else "step-underflow")
            return traj
        try:
            y5, err, k = _stages(p, z, y, h, f0)
            dens = p.denominators(z + h, y5)
        except (ZeroDivisionError, OverflowError, ValueError):
            y5, err, k, dens = math.nan, math.inf, None, None
        scale = p.tol + p.tol * max(abs(y), abs(y5)) if math.isfinite(y5) else 1.0
        ratio = abs(err) / scale if math.isfinite(err) else math.inf
        if dens is not None and _sign_change(dens0, dens):
            ratio = max(ratio, 10.0)  # never step across a pole of the law
        if ratio <= 1.0:
            z, y = z + h, y5
            f0 = k[-1]
            traj.z.append(z)
            traj.lam.append(y)
            traj.accepted += 1
            if abs(y) > BLOWUP_LAM:
                traj.status = "blow-up"
                traj.singularity = {"kind": "blow-up", "z": z, "lam": y}
                return traj
            fac = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        else:
            traj.rejected += 1
            fac = 0.2 if not math.isfinite(ratio) else max(0.2, 0.9 * ratio ** -0.2)
        h *= fac
    return traj


def _singularity(p: OdeProblem, z: float, y: float, dens0: list[float], kind: str) -> dict:
    dens = p.denominators(z, y)
    rel = [abs(d) / max(1.0, abs(d0)) for d, d0 in zip(dens, dens0)]
    if rel and min(rel) < 1e-4:
        return {"kind": "denominator", "z": z, "lam": y, "denominator": min(rel)}
    return {"kind": kind, "z": z, "lam": y}


def integrate_fixed(p: OdeProblem, steps: int) -> Trajectory:
    """Fixed-step Dormand-Prince (fifth-order solution), for order measurements."""
    z0, z1 = p.window
    h = (z1 - z0) / steps
    y = float(p.lam0)
    traj = Trajectory([z0], [y])
    for i in range(steps):
        z = z0 + i * h
        y, _, _ = _stages(p, z, y, h, p.f(z, y))
        traj.z.append(z0 + (i + 1) * h)
        traj.lam.append(y)
        traj.accepted += 1
    return traj


@dataclass
class ConvergenceResult:
    steps: tuple
    errors: list[float]
    pairwise: list[float]   # log2(e_h / e_(h/2)) per halving
    order: float            # least-squares slope of log(error) against log(1/h)


def convergence_order(p: OdeProblem, exact, steps=(16, 32, 64, 128)) -> ConvergenceResult:
    """Observed order from fixed-step runs with max-norm errors against ``exact``.

    For some laws (``Lam' = Lam^2`` among them) the leading error term changes
    sign along the window, so single halvings scatter around the true order;
    the fitted slope over the whole sequence is the reported order.
    """
    errs = []
    for s in steps:
        t = integrate_fixed(p, s)
        errs.append(max(abs(v - exact(z)) for z, v in zip(t.z, t.lam)))
    pairwise = [math.log(a / b) / math.log(s2 / s1)
                for a, b, s1, s2 in zip(errs, errs[1:], steps, steps[1:])]
    xs = [math.log(s) for s in steps]
    ys = [-math.log(e) for e in errs]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    slope = (sum((x - mx) * (y - my) for x, y in zip(xs, ys))
             / sum((x - mx) ** 2 for x in xs))
    return ConvergenceResult(tuple(steps), errs, pairwise, slope)


# ------------------------------------------------------------ case interface

def _instance(case, n: int, r=None, catalog=None):
    from .reduction.catalog import CaseInstance, ReductionCase, load_catalog

    if isinstance(case, CaseInstance):
        return case
    if isinstance(case, str):
        case = (catalog or load_catalog())[case]
    if not isinstance(case, ReductionCase):
        raise TypeError(f"not a reduction case: {case!r}")
    return case.instantiate(n, r=r)


def lambda_problem(case, n: int, lam0: float, window, tol: float = 1e-10, r=None,
                   catalog=None) -> OdeProblem:
    inst = _instance(case, n, r, catalog)
    return OdeProblem(inst.lam.rules["z2"], inst.lam().as_atom(), float(lam0),
                      (float(window[0]), float(window[1])), float(tol))


def integrate_lambda(case, n: int, lam0: float, window=(0.0, 0.5), tol: float = 1e-10,
                     r=None, catalog=None, seed: int | None = None) -> Trajectory:
    """Integrate the case's Lam-law from ``Lam(window[0]) = lam0``.

    Trajectories that stop early carry a status other than ``"ok"`` and a
    singularity report with a location estimate.
    """
    inst = _instance(case, n, r, catalog)
    p = lambda_problem(inst, n, lam0, window, tol)
    traj = integrate(p)
    traj.meta = {"case": inst.id, "n": inst.n, "tol": p.tol, "seed": seed,
                 "lam0": p.lam0, "window": list(p.window),
                 "r": None if inst.r is None else str(inst.r)}
    return traj


@dataclass
class ConservedResult:
    drift: float | None
    skipped: bool = False
    notice: str = ""


def conserved_check(case, n: int, traj: Trajectory, r=None, catalog=None) -> ConservedResult:
    """Largest deviation of the case's first integral from its initial value."""
    inst = _instance(case, n, r, catalog)
    first = inst.first_integral
    if first is None:
        return ConservedResult(None, True, f"no first integral stored for {inst.id} "
                                           f"(n={inst.n}, r={inst.r})")
    lam, z2 = inst.lam().as_atom(), Symbol.make("z2")
    vals = [_real(float_eval(first, {lam: complex(v), z2: complex(z)}))
            for z, v in zip(traj.z, traj.lam)]
    return ConservedResult(max(abs(v - vals[0]) for v in vals))


def closed_form(case_id: str, n: int, z0: float, lam0: float):
    """Explicit solution of the Lam-law where one follows from the first integral.

    I.3: ``z2 + Lam^-n`` is conserved, so ``Lam = (lam0^-n - (z2 - z0))^(-1/n)``.
    III.1: ``Lam^n + z2`` is conserved, so ``Lam = (lam0^n - (z2 - z0))^(1/n)``.
    Cases with a trivial law stay at ``lam0``.  Returns None otherwise.
    """
    if case_id == "I.3":
        return lambda z: (lam0 ** -n - (z - z0)) ** (-1.0 / n)
    if case_id == "III.1":
        return lambda z: (lam0 ** n - (z - z0)) ** (1.0 / n)
    if case_id in ("II.2", "II.3", "III.2"):
        return lambda z: lam0
    return None


# ------------------------------------------------------------ residual sampling

def float_eval_residual(residual: Expr, samples: int = 20, seed: int = 0) -> float:
    """Max ``|residual|`` over random double-precision points.

    Atoms are independent coordinates as in the exact path: ``lam``, ``Lam``
    and atoms carrying fractional powers in ``(0.1, 3)``, others in
    ``(-2, 2)``.  A sample producing a pole, overflow or NaN is redrawn up to
    ten times.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if residual.is_zero_structural():
        return 0.0
    atoms = collect_atoms(residual)
    scales = exponent_scales(residual)
    return _sample_max(lambda rng: Evaluator(float_point(atoms, scales, rng), complex(1), 1j)
                       .value(residual), samples, seed)


def float_eval_modulo(residual: Expr, reducer, samples: int = 20, seed: int = 0) -> float:
    """Float counterpart of :func:`laxforge.expr.zero.is_zero_modulo`.

    Free jets are sampled as in :func:`float_eval_residual`; jets eliminated
    by the rules take the value of their normal form, so the result measures
    cancellation in double precision.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if residual.is_zero_structural():
        return 0.0
    man = Manifold.build(residual, reducer)
    return _sample_max(lambda rng: man.evaluate(float_point(man.free, man.scales, rng),
                                                complex(1), 1j), samples, seed)


def _sample_max(sample, samples: int, seed: int) -> float:
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(samples):
        for _attempt in range(MAX_RESAMPLE + 1):
            try:
                v = abs(complex(sample(rng)))
            except (ZeroDivisionError, OverflowError):
                continue
            if math.isfinite(v):
                break
        else:
            raise NumericError(f"no finite value after {MAX_RESAMPLE} resamples")
        worst = max(worst, v)
    return worst
