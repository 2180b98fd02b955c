"""Operators K = d^3 - d and J = -d u d^-1 u d on periodic grids.

Functions live on ``[0, L)`` (default ``L = 2*pi``) and are differentiated
spectrally.  ``d^-1`` is the zero-mean periodic antiderivative, so ``J`` is
only defined when ``u * f_x`` has zero mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
MEAN_TOL = 1e-10


class PeriodicityError(ValueError):
    """An antiderivative was requested for data with nonzero mean."""

    def __init__(self, mean: float):
        super().__init__(f"integrand has nonzero mean {mean:.3e}; d^-1 leaves the periodic class")
        self.mean = mean


@dataclass(frozen=True)
class GridFunction:
    samples: np.ndarray
    length: float = TWO_PI

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if len(s) < 16 or len(s) % 2:
            raise ValueError(f"grid size must be even and >= 16, got {len(s)}")
        object.__setattr__(self, "samples", s)

    @property
    def N(self) -> int:
        return len(self.samples)

    @staticmethod
    def grid(N: int, length: float = TWO_PI) -> np.ndarray:
        return np.arange(N) * (length / N)

    @classmethod
    def from_callable(cls, f, N: int, length: float = TWO_PI) -> "GridFunction":
        return cls(f(cls.grid(N, length)), length)

    @property
    def x(self) -> np.ndarray:
        return self.grid(self.N, self.length)

    def like(self, samples) -> "GridFunction":
        return GridFunction(samples, self.length)

    def __add__(self, o):
        return self.like(self.samples + o.samples)

    def __sub__(self, o):
        return self.like(self.samples - o.samples)

    def __mul__(self, o):
        if isinstance(o, GridFunction):
            return self.like(self.samples * o.samples)
        return self.like(self.samples * o)

    __rmul__ = __mul__

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "length": self.length,
                           "samples": [float(v) for v in self.samples]})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        d = json.loads(text)
        g = cls(np.array(d["samples"], dtype=float), float(d["length"]))
        if g.N != d["N"]:
            raise ValueError("sample count does not match N")
        return g


def _wavenumbers(N: int, length: float) -> np.ndarray:
    return np.fft.rfftfreq(N, d=length / N) * TWO_PI


def derivative(f: GridFunction, order: int = 1) -> GridFunction:
    k = _wavenumbers(f.N, f.length)
    mult = (1j * k) ** order
    if order % 2:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative
    return f.like(np.fft.irfft(mult * np.fft.rfft(f.samples), n=f.N))


def antiderivative(g: GridFunction, tol: float = MEAN_TOL) -> GridFunction:
    """Zero-mean periodic antiderivative."""
    m = g.mean()
    if abs(m) > tol:
        raise PeriodicityError(m)
    k = _wavenumbers(g.N, g.length)
    gh = np.fft.rfft(g.samples)
    out = np.zeros_like(gh)
    out[1:] = gh[1:] / (1j * k[1:])
    out[-1] = 0.0
    return g.like(np.fft.irfft(out, n=g.N))


def apply_K(f: GridFunction) -> GridFunction:
    return derivative(f, 3) - derivative(f, 1)


def apply_J(u: GridFunction, f: GridFunction) -> GridFunction:
    inner = antiderivative(u * derivative(f, 1))
    return derivative(u * inner, 1) * -1.0


def invert_K(g: GridFunction, tol: float = MEAN_TOL) -> GridFunction:
    """Zero-mean solution of ``K f = g`` (K's symbol -i k (k^2 + 1) vanishes only at k = 0)."""
    m = g.mean()
    if abs(m) > tol:
        raise PeriodicityError(m)
    k = _wavenumbers(g.N, g.length)
    sym = (1j * k) ** 3 - 1j * k
    gh = np.fft.rfft(g.samples)
    out = np.zeros_like(gh)
    out[1:] = gh[1:] / sym[1:]
    out[-1] = 0.0
    return g.like(np.fft.irfft(out, n=g.N))


def check_recursion(u: GridFunction, v_j: GridFunction, v_j1: GridFunction) -> float:
    """``max |J v_(j+1) - K v_j|``."""
    return (apply_J(u, v_j1) - apply_K(v_j)).norm_inf()


def manufactured_pair(u: GridFunction, v_j1: GridFunction) -> GridFunction:
    """``v_j`` with ``K v_j = J v_(j+1)``."""
    return invert_K(apply_J(u, v_j1))


def fd_K(f, x, h: float) -> np.ndarray:
    """Fourth-order central differences for ``f''' - f'`` of a callable.

    Evaluated in extended precision so that small steps stay accurate.
    """
    x = np.asarray(x, dtype=np.longdouble)
    h = np.longdouble(h)
    fp = lambda k: f(x + k * h)
    d1 = (-fp(2) + 8 * fp(1) - 8 * fp(-1) + fp(-2)) / (12 * h)
    d3 = (-fp(3) + 8 * fp(2) - 13 * fp(1) + 13 * fp(-1) - 8 * fp(-2) + fp(-3)) / (8 * h ** 3)
    return np.asarray(d3 - d1, dtype=float)


def endpoint_residuals(u: GridFunction, v1: GridFunction, vn: GridFunction,
                       u_y: GridFunction, u_t: GridFunction) -> dict[str, float]:
    """Residuals of ``u_y = J v[1]`` and ``u_t = K v[n]``, checked separately."""
    return {"u_y - J v[1]": (u_y - apply_J(u, v1)).norm_inf(),
            "u_t - K v[n]": (u_t - apply_K(vn)).norm_inf()}


def symbolic_chain_check(n: int) -> dict[str, bool]:
    """Check the operator chain against the hierarchy rules symbolically.

    ``d^-1(u v[j]_x)`` is represented by ``w[j]`` (the rule ``w[j]_x = u v[j]_x``
    fixes it up to a constant), so ``J v[j] = -(u w[j])_x``.  Each relation
    ``u_y = J v[1]``, ``J v[j+1] = K v[j]``, ``u_t = K v[n]`` must reduce to
    zero under the hierarchy rules.
    """
    from .expr import diff
    from .expr.signature import u_field, v_field, w_field
    from .laxpair import hierarchy_ideal

    ideal = hierarchy_ideal(n)
    u = u_field()

    def J(j):
        return -diff(u() * w_field(j)(), "x")

    def K(j):
        v = v_field(j)()
        return diff(v, "x", 3) - diff(v, "x")

    rels = {"u_y - J v[1]": u.jet("y") - J(1), "u_t - K v[n]": u.jet("t") - K(n)}
    for j in range(1, n):
        rels[f"J v[{j + 1}] - K v[{j}]"] = J(j + 1) - K(j)
    return {k: ideal.reduce(e).expr.is_zero_structural() for k, e in rels.items()}
