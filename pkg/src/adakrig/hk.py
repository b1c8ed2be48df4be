"""Two-fidelity hierarchical kriging.

The low-fidelity surrogate's posterior mean serves as the (scaled)
trend of the high-fidelity model: a GP is fitted to the high-fidelity
data with trend basis m_low(x) in place of the constant, giving

    mean(x) = beta * m_low(x) + k(x)' K^-1 (y - beta * F)
    var(x)  = k0(x,x) - k(x)' K^-1 k(x)
              + (m_low(x) - k(x)' K^-1 F)^2 / (F' K^-1 F)

with F the low mean evaluated at the high-fidelity design. As in
``gp``, caches live on the correlation scale.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .de import DeConfig, de_maximize
from .domain import BoxDomain, Design
from .exceptions import (
    DegenerateTrendError,
    IllConditionedDesignError,
    InvalidDesignError,
    ParameterError,
)
from .gp import (
    DEFAULT_NUGGET,
    LENGTHSCALE_HI,
    LENGTHSCALE_LO,
    SQRT3,
    VAR_CLAMP_REL,
    FitConfig,
    GpModel,
    KernelParams,
    _chol_with_escalation,
    _cross_corr,
)


class FidelityLevel(enum.IntEnum):
    LOW = 1
    HIGH = 2


def _hk_gls_pieces(L, y, F):
    """Trend scale and residual solves for a fixed correlation factor."""
    inv_y = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
    inv_F = solve_triangular(L.T, solve_triangular(L, F, lower=True), lower=False)
    gram = float(F @ inv_F)
    if not (np.isfinite(gram) and gram > 0):
        raise DegenerateTrendError("low-fidelity trend basis has zero information")
    beta = float(F @ inv_y) / gram
    alpha = inv_y - beta * inv_F
    sigma2 = float((y - beta * F) @ alpha) / y.shape[0]
    return beta, alpha, inv_F, gram, max(sigma2, 0.0)


@dataclass(frozen=True)
class HkModel:
    """Fitted two-fidelity model (low GP plus high-level residual GP)."""

    low: GpModel
    design: Design
    params: KernelParams
    beta_hat: float
    trend: np.ndarray
    chol_corr: np.ndarray
    corr_alpha: np.ndarray
    corr_inv_trend: np.ndarray

    @property
    def dim(self):
        return self.design.dim

    @property
    def domain(self):
        return self.design.domain

    def _queries(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise ParameterError("query points must be d-vectors")
        return self.design.domain.normalize(X), X, scalar

    def predict_mean(self, x):
        """Hierarchical-kriging posterior mean at x."""
        Uq, X, scalar = self._queries(x)
        rx = _cross_corr(self.design.normalized_points, Uq, self.params.lengthscales)
        out = self.beta_hat * self.low.predict_mean(X) + rx.T @ self.corr_alpha
        return float(out[0]) if scalar else out

    def predict_var(self, x):
        """High-level predictive variance (trend uncertainty included)."""
        Uq, X, scalar = self._queries(x)
        rx = _cross_corr(self.design.normalized_points, Uq, self.params.lengthscales)
        V = solve_triangular(self.chol_corr, rx, lower=True)
        quad = np.einsum("ij,ij->j", V, V)
        t = self.low.predict_mean(X) - rx.T @ self.corr_inv_trend
        gram = float(self.trend @ self.corr_inv_trend)
        s2 = self.params.process_variance
        var = s2 * (1.0 - quad) + s2 * t * t / gram
        floor = -VAR_CLAMP_REL * s2
        if (var < floor).any():
            raise IllConditionedDesignError(
                f"predictive variance {var.min():.3e} below clamp floor {floor:.3e}"
            )
        var = np.maximum(var, 0.0)
        return float(var[0]) if scalar else var

    def predict_var_level(self, x, level):
        """Variance tied to evaluating at a fidelity level.

        LOW scales the low model's variance by beta^2 (the factor the
        trend enters the high-level mean with); HIGH is ``predict_var``.
        """
        level = FidelityLevel(level)
        if level is FidelityLevel.LOW:
            x = np.asarray(x, dtype=float)
            return self.beta_hat**2 * self.low.predict_var(x)
        return self.predict_var(x)

    def update(self, x, y, level, refit=False, fit_config=None, nugget=DEFAULT_NUGGET):
        """Model with one extra observation at the given fidelity level.

        Adding a low-fidelity point cascades: the low model absorbs the
        point, then the trend vector, its scale and the high-level
        caches are rebuilt. ``refit`` controls hyperparameter
        re-estimation at the touched levels.
        """
        level = FidelityLevel(level)
        if level is FidelityLevel.LOW:
            new_low = self.low.update(x, y, refit=refit, fit_config=fit_config, nugget=nugget)
            if refit:
                return fit_hk(
                    new_low,
                    self.design,
                    nugget=nugget,
                    config=fit_config,
                    initial_lengthscales=self.params.lengthscales,
                )
            return build_hk(new_low, self.design, self.params)
        new_design = self.design.append(x, y)
        if refit:
            return fit_hk(
                self.low,
                new_design,
                nugget=nugget,
                config=fit_config,
                initial_lengthscales=self.params.lengthscales,
            )
        return build_hk(self.low, new_design, self.params)

    def to_dict(self):
        return {
            "low": self.low.to_dict(),
            "design": self.design.to_dict(),
            "kernel": self.params.to_dict(),
            "beta_hat": self.beta_hat,
        }

    @classmethod
    def from_dict(cls, doc):
        low = GpModel.from_dict(doc["low"])
        return build_hk(
            low, Design.from_dict(doc["design"]), KernelParams.from_dict(doc["kernel"])
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_domains(low: GpModel, high_design: Design):
    a, b = low.design.domain, high_design.domain
    if not (np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper)):
        raise InvalidDesignError("low and high fidelity designs must share one domain")


def build_hk(low: GpModel, high_design: Design, params: KernelParams):
    """Hierarchical model with explicit high-level hyperparameters."""
    _check_domains(low, high_design)
    if params.lengthscales.shape != (high_design.dim,):
        raise ParameterError("lengthscales must have one entry per input dimension")
    F = np.atleast_1d(low.predict_mean(high_design.points))
    U = high_design.normalized_points
    R = _cross_corr(U, U, params.lengthscales)
    L, eta = _chol_with_escalation(R, params.nugget)
    if eta != params.nugget:
        params = replace(params, nugget=eta)
    beta, alpha, inv_F, _, _ = _hk_gls_pieces(L, high_design.outputs, F)
    return HkModel(low, high_design, params, beta, F, L, alpha, inv_F)


def fit_hk(
    low: GpModel,
    high_design: Design,
    nugget=DEFAULT_NUGGET,
    config: FitConfig = None,
    initial_lengthscales=None,
):
    """Estimate high-level lengthscales by concentrated likelihood.

    Mirrors ``gp.fit_gp`` with the constant trend replaced by the low
    model's posterior mean at the high-fidelity points; the trend scale
    and process variance are profiled out.
    """
    _check_domains(low, high_design)
    if high_design.n < 2:
        raise InvalidDesignError("fitting requires at least two design points")
    config = config or FitConfig()
    d = high_design.dim
    U = high_design.normalized_points
    y = high_design.outputs
    F = np.atleast_1d(low.predict_mean(high_design.points))
    n = high_design.n
    diffs = np.abs(U[:, None, :] - U[None, :, :])
    log_box = BoxDomain(
        np.full(d, math.log(LENGTHSCALE_LO)), np.full(d, math.log(LENGTHSCALE_HI))
    )

    def objective(z):
        h = (SQRT3 * diffs) * np.exp(-z)
        R = np.prod((1.0 + h) * np.exp(-h), axis=2)
        try:
            L, _ = _chol_with_escalation(R, nugget)
            _, _, _, _, sigma2 = _hk_gls_pieces(L, y, F)
        except (IllConditionedDesignError, DegenerateTrendError):
            return -1e300
        logdet = 2.0 * float(np.log(np.diag(L)).sum())
        return -0.5 * (n * math.log(max(sigma2, 1e-300)) + logdet + n)

    x0 = None
    if initial_lengthscales is not None:
        x0 = np.log(
            np.clip(np.asarray(initial_lengthscales, float), LENGTHSCALE_LO, LENGTHSCALE_HI)
        )
    de = DeConfig(
        population_size=config.resolve_population(d),
        generations=config.generations,
        seed=config.seed,
    )
    best = None
    for start in range(max(config.n_starts, 1)):
        res = de_maximize(
            objective,
            log_box,
            replace(de, seed=de.seed + start),
            x0=x0 if start == 0 else None,
        )
        if best is None or res.value > best.value:
            best = res
    ell = np.exp(best.x)
    R = _cross_corr(U, U, ell)
    L, eta = _chol_with_escalation(R, nugget)
    beta, alpha, inv_F, _, sigma2 = _hk_gls_pieces(L, y, F)
    params = KernelParams(ell, sigma2, eta)
    return HkModel(low, high_design, params, beta, F, L, alpha, inv_F)
