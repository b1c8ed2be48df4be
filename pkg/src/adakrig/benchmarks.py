"""Analytic benchmark functions for emulation experiments.

Every function is exposed on the unit cube: evaluators take normalized
inputs and the three physically parameterized ones (``f7``, ``f8``,
``f11`` and the ``f11`` low-fidelity variant) map to their physical
ranges internally. Four functions come with a cheap low-fidelity
companion for two-fidelity runs.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .doe import TestSet
from .domain import BoxDomain
from .exceptions import DomainError, ParameterError

_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN_A = np.array(
    [
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
    ]
)
_HARTMANN_P = 1e-4 * np.array(
    [
        [3689.0, 1170.0, 2673.0],
        [4699.0, 4387.0, 7470.0],
        [1091.0, 8732.0, 5547.0],
        [381.0, 5743.0, 8828.0],
    ]
)
for _a in (_HARTMANN_ALPHA, _HARTMANN_A, _HARTMANN_P):
    _a.setflags(write=False)


def hartmann_constants():
    """(alpha, A, P) of the three-dimensional Hartmann function."""
    return _HARTMANN_ALPHA, _HARTMANN_A, _HARTMANN_P


@dataclass(frozen=True)
class BenchmarkFn:
    """A named test function with its domain and optional cheap twin.

    ``raw`` evaluates on domain coordinates; use :func:`evaluate` (or
    call the instance) with unit-cube inputs.
    """

    id: str
    name: str
    dim: int
    domain: BoxDomain
    scale: str
    raw: Callable[[np.ndarray], np.ndarray]
    pair_low: Optional[str] = None

    def __call__(self, x):
        return evaluate(self, x)

    @property
    def test_seed(self):
        # Stable across runs and platforms; ties the held-out set to
        # the function rather than to any experiment seed.
        return zlib.crc32(self.id.encode()) & 0x7FFFFFFF


def evaluate(fn: BenchmarkFn, x):
    """Evaluate ``fn`` at unit-cube points ((d,) vector or (m, d) matrix)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != fn.dim:
        raise ParameterError(f"{fn.id} expects {fn.dim}-dimensional input")
    if (X < -1e-12).any() or (X > 1 + 1e-12).any():
        raise DomainError(f"{fn.id} takes unit-cube input")
    out = np.asarray(fn.raw(fn.domain.denormalize(X)), dtype=float)
    return float(out[0]) if scalar else out


def make_test_set(fn: BenchmarkFn, n_test=3000):
    """Uniform random held-out set with the function's fixed seed."""
    rng = np.random.default_rng(fn.test_seed)
    points = rng.random((int(n_test), fn.dim))
    return TestSet(points, evaluate(fn, points))


def _franke(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (
        0.75 * np.exp(-((9 * x1 - 2) ** 2) / 4 - ((9 * x2 - 2) ** 2) / 4)
        + 0.75 * np.exp(-((9 * x1 + 1) ** 2) / 49 - (9 * x2 + 1) / 10)
        + 0.5 * np.exp(-((9 * x1 - 7) ** 2) / 4 - ((9 * x2 - 3) ** 2) / 4)
        - 0.2 * np.exp(-((9 * x1 - 4) ** 2) - ((9 * x2 - 7) ** 2))
    )


def _curved(X):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return (
        4 * (x1 - 2 + 8 * x2 - 8 * x2**2) ** 2
        + (3 - 4 * x2) ** 2
        + 16 * np.sqrt(x3 + 1) * (2 * x3 - 1) ** 2
    )


def _hartmann3(X):
    inner = (_HARTMANN_A[None, :, :] * (X[:, None, :] - _HARTMANN_P[None, :, :]) ** 2).sum(
        axis=2
    )
    return -(_HARTMANN_ALPHA[None, :] * np.exp(-inner)).sum(axis=1)


def _park(X):
    x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    # First term written as (sqrt(x1^2 + c) - x1) / 2, which equals
    # x1/2 (sqrt(1 + c/x1^2) - 1) for x1 > 0 and stays finite at x1 = 0.
    c = (x2 + x3**2) * x4
    return (np.sqrt(x1**2 + c) - x1) / 2 + (x1 + 3 * x4) * np.exp(1 + np.sin(x3))


def _park_low(X):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return (1 + np.sin(x1) / 10) * _park(X) - 2 * x1 + x2**2 + x3**2 + 0.5


def _friedman(X):
    x1, x2, x3, x4, x5 = (X[:, j] for j in range(5))
    return 10 * np.sin(np.pi * x1 * x2) + 20 * (x3 - 0.5) ** 2 + 10 * x4 + 5 * x5


def _gramacy_lee(X):
    x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    return np.exp(np.sin((0.9 * (x1 + 0.48)) ** 10)) + x2 * x3 + x4


def _otl(X):
    b1, b2, f, c1, c2, beta = (X[:, j] for j in range(6))
    vb = 12 * b2 / (b1 + b2)
    bc = beta * (c2 + 9)
    return (
        (vb + 0.74) * bc / (bc + f)
        + 11.35 * f / (bc + f)
        + 0.74 * f * bc / ((bc + f) * c1)
    )


def _piston(X):
    m, s, v0, k, p0, ta, t0 = (X[:, j] for j in range(7))
    a = p0 * s + 19.62 * m - k * v0 / s
    v = s / (2 * k) * (np.sqrt(a**2 + 4 * k * (p0 * v0 / t0) * ta) - a)
    return 2 * np.pi * np.sqrt(m / (k + s**2 * (p0 * v0 / t0) * (ta / v**2)))


def _currin(X):
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="ignore"):
        damp = np.where(x2 > 0, 1.0 - np.exp(-1.0 / (2 * np.where(x2 > 0, x2, 1.0))), 1.0)
    num = 2300 * x1**3 + 1900 * x1**2 + 2092 * x1 + 60
    den = 100 * x1**3 + 500 * x1**2 + 4 * x1 + 20
    return damp * num / den


def _currin_low(X):
    x1, x2 = X[:, 0], X[:, 1]
    up = x2 + 0.05
    down = np.maximum(x2 - 0.05, 0.0)
    total = np.zeros_like(x1)
    for a in (x1 + 0.05, x1 - 0.05):
        for b in (up, down):
            total = total + _currin(np.column_stack([a, b]))
    return total / 4


def _expsine(X):
    x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    return (2.0 / 3.0) * np.exp(x1 + x2) - x4 * np.sin(x3) + x3


def _expsine_low(X):
    return 1.2 * _expsine(X) - 1.0


def _borehole(X):
    tu, hu, hl, r, rw, ln_len, kw, tl = (X[:, j] for j in range(8))
    logr = np.log(r / rw)
    return (
        2 * np.pi * tu * (hu - hl)
        / (logr * (1 + 2 * ln_len * tu / (logr * rw**2 * kw) + tu / tl))
    )


def _borehole_low(X):
    tu, hu, hl, r, rw, ln_len, kw, tl = (X[:, j] for j in range(8))
    logr = np.log(r / rw)
    return (
        5 * tu * (hu - hl)
        / (logr * (1.5 + 2 * ln_len * tu / (logr * rw**2 * kw) + tu / tl))
    )


_OTL_DOMAIN = BoxDomain(
    np.array([50.0, 25.0, 0.5, 1.2, 0.25, 50.0]),
    np.array([150.0, 70.0, 3.0, 2.5, 1.2, 300.0]),
)
_PISTON_DOMAIN = BoxDomain(
    np.array([30.0, 0.005, 0.002, 1000.0, 90000.0, 290.0, 340.0]),
    np.array([60.0, 0.020, 0.010, 5000.0, 110000.0, 296.0, 360.0]),
)
_BOREHOLE_DOMAIN = BoxDomain(
    np.array([63070.0, 990.0, 700.0, 100.0, 0.05, 1120.0, 9855.0, 63.1]),
    np.array([115600.0, 1110.0, 820.0, 50000.0, 0.15, 1680.0, 12045.0, 116.0]),
)


def _unit(d):
    return BoxDomain.unit(d)


FUNCTIONS = {
    fn.id: fn
    for fn in [
        BenchmarkFn("f1", "Franke", 2, _unit(2), "small", _franke),
        BenchmarkFn("f2", "Curved ridge", 3, _unit(3), "small", _curved),
        BenchmarkFn("f3", "Hartmann 3-D", 3, _unit(3), "small", _hartmann3),
        BenchmarkFn("f4", "Park", 4, _unit(4), "small", _park, pair_low="f4l"),
        BenchmarkFn("f5", "Friedman", 5, _unit(5), "medium", _friedman),
        BenchmarkFn("f6", "Gramacy-Lee", 6, _unit(6), "medium", _gramacy_lee),
        BenchmarkFn("f7", "OTL circuit", 6, _OTL_DOMAIN, "medium", _otl),
        BenchmarkFn("f8", "Piston", 7, _PISTON_DOMAIN, "medium", _piston),
        BenchmarkFn("f9", "Currin exponential", 2, _unit(2), "small", _currin, pair_low="f9l"),
        BenchmarkFn("f10", "Exponential-sine", 4, _unit(4), "small", _expsine, pair_low="f10l"),
        BenchmarkFn(
            "f11", "Borehole", 8, _BOREHOLE_DOMAIN, "medium", _borehole, pair_low="f11l"
        ),
        BenchmarkFn("f4l", "Park (low fidelity)", 4, _unit(4), "small", _park_low),
        BenchmarkFn("f9l", "Currin exponential (low fidelity)", 2, _unit(2), "small", _currin_low),
        BenchmarkFn("f10l", "Exponential-sine (low fidelity)", 4, _unit(4), "small", _expsine_low),
        BenchmarkFn(
            "f11l", "Borehole (low fidelity)", 8, _BOREHOLE_DOMAIN, "medium", _borehole_low
        ),
    ]
}


def get(fn_id):
    """Look a benchmark up by id (``f1`` .. ``f11``, lows ``f4l`` etc.)."""
    try:
        return FUNCTIONS[str(fn_id).lower()]
    except KeyError:
        raise ParameterError(f"unknown benchmark function {fn_id!r}") from None


def fidelity_pair(fn_id):
    """(high, low) pair for the functions that have a cheap companion."""
    fn = get(fn_id)
    if fn.pair_low is None:
        raise ParameterError(f"{fn.id} has no low-fidelity companion")
    return fn, FUNCTIONS[fn.pair_low]


def list_functions():
    """Registry summary used by the command-line interface."""
    rows = []
    for fn in FUNCTIONS.values():
        rows.append(
            {
                "id": fn.id,
                "name": fn.name,
                "dim": fn.dim,
                "scale": fn.scale,
                "pair_low": fn.pair_low,
            }
        )
    return rows


def two_gaussian_surface(spike_center=(1 / 3, 1 / 3), spike_width=0.06):
    """Sharp-spike-plus-broad-bump surface on the unit square.

    A narrow Gaussian peak over a broad one: a surface on which a
    criterion that chases large local bias keeps drilling into the
    spike while a variance-weighted criterion moves on. Intended for
    exploitation-vs-exploration comparisons, so it is not part of the
    benchmark registry.
    """
    center = np.asarray(spike_center, dtype=float)

    def raw(X):
        d_spike = ((X - center) ** 2).sum(axis=1)
        d_broad = ((X - np.array([0.8, 0.8])) ** 2).sum(axis=1)
        return np.exp(-d_spike / (2 * spike_width**2)) + 0.5 * np.exp(-d_broad / (2 * 0.3**2))

    return BenchmarkFn("two-gauss", "Two-Gaussian spike", 2, _unit(2), "small", raw)
