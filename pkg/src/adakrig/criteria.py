"""Adaptive sampling criteria built on the squared improvement.

The improvement at x is I(x) = (Z(x) - f(x*))^2 with x* the nearest
design point; I(x)/s^2(x) follows a noncentral chi-square with one
degree of freedom and noncentrality bias^2 / s^2. The criteria are

    vigf = Var[I] = 4 s^2 bias^2 + 2 s^4     (variance of improvement)
    eigf = E[I]   = bias^2 + s^2             (expected improvement-style)
    mse  = s^2                                (plain predictive variance)

Batch selection damps the criterion around already-chosen points with a
repulsion factor 1 - Corr(Z(x), Z(x_u)); two-fidelity selection solves
one continuous argmax per fidelity level and keeps the larger value.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np

from .de import DeConfig, de_maximize
from .domain import DUPLICATE_TOL, Design
from .exceptions import DuplicatePointError, ParameterError
from .gp import GpModel
from .hk import FidelityLevel, HkModel

# Offset reseeding a DE solve that landed on an existing design row.
_RETRY_SEED_OFFSET = 104729


class CriterionKind(enum.Enum):
    VIGF = "vigf"
    EIGF = "eigf"
    MSE = "mse"
    VIGF_HK = "vigf_hk"
    EIGF_HK = "eigf_hk"
    MSE_HK = "mse_hk"

    @property
    def is_hk(self):
        return self in (CriterionKind.VIGF_HK, CriterionKind.EIGF_HK, CriterionKind.MSE_HK)

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ParameterError(f"unknown criterion {name!r}") from None


@dataclass(frozen=True)
class ImprovementStats:
    """Distribution of I(x)/s^2(x): noncentral chi-square, 1 dof."""

    bias: float
    variance: float
    lam: float
    nearest_index: int


def vigf_value(bias, variance):
    """Variance of the squared improvement for given bias and variance."""
    return 4.0 * variance * bias**2 + 2.0 * variance**2


def eigf_value(bias, variance):
    """Expectation of the squared improvement."""
    return bias**2 + variance


def nearest_design_output(design: Design, x):
    """Index and output of the design row nearest to x.

    Distances are Euclidean on normalized coordinates; ties go to the
    lowest row index. Accepts a single point or an (m, d) matrix.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    U = design.domain.normalize(np.atleast_2d(x))
    D = design.normalized_points
    d2 = ((U[:, None, :] - D[None, :, :]) ** 2).sum(axis=2)
    idx = d2.argmin(axis=1)
    if scalar:
        return int(idx[0]), float(design.outputs[idx[0]])
    return idx, design.outputs[idx]


def _bias_variance(model: GpModel, x):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    mean, var = model.predict_mean_var(X)
    _, fstar = nearest_design_output(model.design, X)
    return mean - fstar, var, scalar


def improvement_stats(model: GpModel, x):
    """Bias, variance and noncentrality of the improvement at one point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("improvement_stats takes a single d-vector")
    idx, fstar = nearest_design_output(model.design, x)
    mean, var = model.predict_mean_var(x)
    bias = mean - fstar
    if var > 0:
        lam = bias**2 / var
    else:
        lam = 0.0 if bias == 0 else np.inf
    return ImprovementStats(bias=bias, variance=var, lam=lam, nearest_index=idx)


def vigf(model: GpModel, x):
    """Variance of improvement at x ((d,) vector or (m, d) matrix)."""
    bias, var, scalar = _bias_variance(model, x)
    out = vigf_value(bias, var)
    return float(out[0]) if scalar else out


def eigf(model: GpModel, x):
    """Expected improvement-style criterion at x."""
    bias, var, scalar = _bias_variance(model, x)
    out = eigf_value(bias, var)
    return float(out[0]) if scalar else out


def mse_criterion(model: GpModel, x):
    """Predictive-variance criterion at x."""
    return model.predict_var(x)


_SINGLE = {
    CriterionKind.VIGF: vigf,
    CriterionKind.EIGF: eigf,
    CriterionKind.MSE: mse_criterion,
}


def evaluate_criterion(model: GpModel, kind, x):
    """Dispatch a single-fidelity criterion by kind."""
    kind = CriterionKind.parse(kind)
    if kind.is_hk:
        raise ParameterError(f"{kind.value} needs a fidelity level; use criterion_hk")
    return _SINGLE[kind](model, x)


def repulsion(model: GpModel, x, x_u):
    """One minus the posterior correlation between Z(x) and Z(x_u).

    Zero at x_u itself, approaching one where the posterior
    decorrelates. Where either variance vanishes (design rows) the
    correlation is taken as one, so the factor shuts the area off.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    x_u = np.asarray(x_u, dtype=float)
    cov = model.predict_cov(X, x_u[None, :])[:, 0]
    s2x = model.predict_var(X)
    s2u = model.predict_var(x_u)
    denom = np.sqrt(s2x * s2u)
    eps = 1e-12 * max(model.params.process_variance, 1e-300)
    corr = np.where(denom > eps, cov / np.where(denom > eps, denom, 1.0), 1.0)
    out = np.maximum(1.0 - corr, 0.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BatchSelection:
    points: np.ndarray
    values: np.ndarray


def _too_close(x, design: Design, chosen):
    if design.min_normalized_distance_to(x) <= DUPLICATE_TOL:
        return True
    u = design.domain.normalize(x)
    for prev in chosen:
        if np.linalg.norm(u - design.domain.normalize(prev)) <= DUPLICATE_TOL:
            return True
    return False


def _argmax_with_retry(objective, domain, config, dup_check):
    res = de_maximize(objective, domain, config, vectorized=True)
    if not dup_check(res.x):
        return res
    retry = replace(config, seed=config.seed + _RETRY_SEED_OFFSET)
    res = de_maximize(objective, domain, retry, vectorized=True)
    if dup_check(res.x):
        raise DuplicatePointError("criterion argmax landed on an existing point twice")
    return res


def select_next(model: GpModel, kind, config: DeConfig = None):
    """Single next point: continuous argmax of the criterion.

    Returns a BatchSelection with one row. A selection that duplicates
    a design row is retried once with a fresh DE seed.
    """
    kind = CriterionKind.parse(kind)
    config = config or DeConfig()

    def objective(X):
        return evaluate_criterion(model, kind, X)

    res = _argmax_with_retry(
        objective,
        model.design.domain,
        config,
        lambda x: _too_close(x, model.design, []),
    )
    return BatchSelection(points=res.x[None, :], values=np.array([res.value]))


def select_batch(model: GpModel, q, config: DeConfig = None):
    """Batch of q points by iterated repulsion-damped criterion.

    The first point maximizes vigf; each later point maximizes vigf
    times the accumulated repulsion factors of the points already in
    the batch. Points are pairwise distinct and distinct from the
    design.
    """
    if q < 1:
        raise ParameterError("q must be at least 1")
    config = config or DeConfig()
    chosen = []
    values = []

    def objective(X):
        v = vigf(model, X)
        for xu in chosen:
            v = v * repulsion(model, X, xu)
        return v

    for j in range(q):
        cfg = replace(config, seed=config.seed + j)
        res = _argmax_with_retry(
            objective,
            model.design.domain,
            cfg,
            lambda x: _too_close(x, model.design, chosen),
        )
        chosen.append(res.x)
        values.append(res.value)
    return BatchSelection(points=np.array(chosen), values=np.array(values))


def criterion_hk(model: HkModel, x, level, kind):
    """Two-fidelity criterion at x for a prospective evaluation level.

    The bias always comes from the hierarchical mean against the
    nearest high-fidelity output; only the variance depends on the
    level.
    """
    kind = CriterionKind.parse(kind)
    if not kind.is_hk:
        raise ParameterError(f"{kind.value} is single-fidelity; use evaluate_criterion")
    level = FidelityLevel(level)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    var = model.predict_var_level(X, level)
    if kind is CriterionKind.MSE_HK:
        out = var
    else:
        mean = model.predict_mean(X)
        _, fstar = nearest_design_output(model.design, X)
        bias = mean - fstar
        if kind is CriterionKind.VIGF_HK:
            out = vigf_value(bias, var)
        else:
            out = eigf_value(bias, var)
    return float(out[0]) if scalar else out


def select_next_hk(model: HkModel, kind, config: DeConfig = None):
    """Next point and fidelity level for a two-fidelity run.

    One continuous argmax per level; the larger criterion value wins
    and ties break toward LOW (the cheaper evaluation).
    """
    kind = CriterionKind.parse(kind)
    if not kind.is_hk:
        raise ParameterError(f"{kind.value} is single-fidelity")
    config = config or DeConfig()
    results = {}
    for offset, level in enumerate((FidelityLevel.LOW, FidelityLevel.HIGH)):
        design = model.low.design if level is FidelityLevel.LOW else model.design

        def objective(X, level=level):
            return criterion_hk(model, X, level, kind)

        results[level] = _argmax_with_retry(
            objective,
            model.domain,
            replace(config, seed=config.seed + offset),
            lambda x, d=design: _too_close(x, d, []),
        )
    level = (
        FidelityLevel.LOW
        if results[FidelityLevel.LOW].value >= results[FidelityLevel.HIGH].value
        else FidelityLevel.HIGH
    )
    res = results[level]
    return res.x, level, res.value


def criterion_surface_csv(path, model, kind, points, level=None):
    """Evaluate a criterion on given points and write x_1..x_d,value rows."""
    kind = CriterionKind.parse(kind)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if kind.is_hk:
        if level is None:
            raise ParameterError("two-fidelity criteria need a level")
        values = criterion_hk(model, points, level, kind)
    else:
        values = evaluate_criterion(model, kind, points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(points.shape[1])] + ["value"])
        for row, val in zip(points, values):
            writer.writerow([repr(v) for v in row] + [repr(float(val))])
