"""Gaussian-process regression with a constant trend (ordinary kriging).

The correlation model is a tensor-product Matern 3/2 with one
lengthscale per input dimension. Lengthscales are estimated by
maximizing the concentrated log-likelihood (trend coefficient and
process variance profiled out) with differential evolution over
log-lengthscale space.

All linear algebra runs on inputs normalized to the unit cube and on
the correlation scale, so a zero fitted process variance (constant
outputs) stays well defined. Covariance-scale quantities are recovered
by multiplying with the process variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .de import DeConfig, de_maximize
from .domain import BoxDomain, Design
from .exceptions import (
    DomainError,
    IllConditionedDesignError,
    InvalidDesignError,
    ParameterError,
)

SQRT3 = math.sqrt(3.0)

DEFAULT_NUGGET = 1e-8
MAX_NUGGET = 1e-4

# Lengthscale box on normalized coordinates: [1e-3, 10] times the unit width.
LENGTHSCALE_LO = 1e-3
LENGTHSCALE_HI = 10.0

# Predictive variances in [-VAR_CLAMP_REL * sigma^2, 0) clamp to zero;
# anything lower signals a broken factorization.
VAR_CLAMP_REL = 1e-8

_CHUNK = 512


def matern32_corr(x, x2, lengthscales):
    """Tensor-product Matern 3/2 correlation between two points.

    prod_j (1 + sqrt(3) h_j) exp(-sqrt(3) h_j) with
    h_j = |x_j - x2_j| / lengthscale_j.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    ell = np.atleast_1d(np.asarray(lengthscales, dtype=float))
    if x.shape != x2.shape or x.shape != ell.shape:
        raise ParameterError("x, x2 and lengthscales must share one dimension d")
    if not (ell > 0).all():
        raise ParameterError("lengthscales must be positive")
    h = SQRT3 * np.abs(x - x2) / ell
    return float(np.prod((1.0 + h) * np.exp(-h)))


def _cross_corr(A, B, ell):
    """Correlation matrix between row sets A (a, d) and B (b, d)."""
    a = A.shape[0]
    if a * B.shape[0] * A.shape[1] <= 4_000_000:
        h = (SQRT3 / ell) * np.abs(A[:, None, :] - B[None, :, :])
        return np.prod((1.0 + h) * np.exp(-h), axis=2)
    out = np.empty((a, B.shape[0]))
    for start in range(0, a, _CHUNK):
        stop = min(start + _CHUNK, a)
        h = (SQRT3 / ell) * np.abs(A[start:stop, None, :] - B[None, :, :])
        out[start:stop] = np.prod((1.0 + h) * np.exp(-h), axis=2)
    return out


def _chol_with_escalation(R, nugget):
    """Cholesky of R + eta I, escalating eta tenfold up to MAX_NUGGET."""
    eta = nugget
    n = R.shape[0]
    while True:
        try:
            L = cholesky(R + eta * np.eye(n), lower=True)
            return L, eta
        except LinAlgError:
            if eta >= MAX_NUGGET:
                raise IllConditionedDesignError(
                    f"correlation matrix not factorizable at jitter {eta:g}"
                ) from None
            eta = min(eta * 10.0, MAX_NUGGET) if eta > 0 else 1e-12


@dataclass(frozen=True)
class KernelParams:
    """Kernel hyperparameters on normalized [0, 1]^d coordinates.

    ``nugget`` is the relative jitter added to the correlation diagonal,
    so the covariance diagonal carries nugget * process_variance.
    """

    lengthscales: np.ndarray
    process_variance: float
    nugget: float = DEFAULT_NUGGET

    def __post_init__(self):
        ell = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        ell.setflags(write=False)
        object.__setattr__(self, "lengthscales", ell)
        if not (np.isfinite(ell).all() and (ell > 0).all()):
            raise ParameterError("lengthscales must be positive finite reals")
        if not (np.isfinite(self.process_variance) and self.process_variance >= 0):
            raise ParameterError("process_variance must be a non-negative real")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise ParameterError("nugget must be a non-negative real")

    def to_dict(self):
        return {
            "lengthscales": self.lengthscales.tolist(),
            "process_variance": self.process_variance,
            "nugget": self.nugget,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            np.asarray(doc["lengthscales"], float),
            float(doc["process_variance"]),
            float(doc["nugget"]),
        )


@dataclass(frozen=True)
class FitConfig:
    """Budget for the lengthscale search.

    ``population_size`` of None resolves to max(5 * d, 16). Each start
    runs one DE pass with its own seed; the best start wins.
    """

    population_size: Optional[int] = None
    generations: int = 40
    n_starts: int = 2
    seed: int = 0

    def resolve_population(self, dim):
        return self.population_size if self.population_size is not None else max(5 * dim, 16)


def _gls_pieces(L, y):
    """Trend and residual solves for a fixed correlation factor L."""
    one = np.ones_like(y)
    inv_y = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
    inv_one = solve_triangular(L.T, solve_triangular(L, one, lower=True), lower=False)
    denom = float(one @ inv_one)
    mu = float(one @ inv_y) / denom
    alpha = inv_y - mu * inv_one
    sigma2 = float((y - mu) @ alpha) / y.shape[0]
    return mu, alpha, inv_one, max(sigma2, 0.0)


def _concentrated_loglik_from_chol(L, y):
    n = y.shape[0]
    _, _, _, sigma2 = _gls_pieces(L, y)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return -0.5 * (n * math.log(max(sigma2, 1e-300)) + logdet + n)


def profile_loglik(design: Design, lengthscales, nugget=DEFAULT_NUGGET):
    """Concentrated log-likelihood of a lengthscale vector on a design."""
    U = design.normalized_points
    ell = np.atleast_1d(np.asarray(lengthscales, dtype=float))
    R = _cross_corr(U, U, ell)
    L, _ = _chol_with_escalation(R, nugget)
    return _concentrated_loglik_from_chol(L, design.outputs)


@dataclass(frozen=True)
class GpModel:
    """Fitted GP. Caches live on the correlation scale (see module docs)."""

    design: Design
    params: KernelParams
    mu_hat: float
    chol_corr: np.ndarray
    corr_alpha: np.ndarray
    corr_inv_one: np.ndarray

    @property
    def dim(self):
        return self.design.dim

    def _queries(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise ParameterError("query points must be d-vectors")
        if not self.design.domain.contains(X, atol=1e-9):
            raise DomainError("query point outside the model domain")
        return self.design.domain.normalize(X), scalar

    def _cross(self, Uq):
        return _cross_corr(self.design.normalized_points, Uq, self.params.lengthscales)

    def predict_mean(self, x):
        """Posterior mean at x ((d,) vector or (m, d) matrix)."""
        Uq, scalar = self._queries(x)
        out = self.mu_hat + self._cross(Uq).T @ self.corr_alpha
        return float(out[0]) if scalar else out

    def _var_terms(self, Uq):
        rx = self._cross(Uq)
        V = solve_triangular(self.chol_corr, rx, lower=True)
        quad = np.einsum("ij,ij->j", V, V)
        t = 1.0 - rx.T @ self.corr_inv_one
        denom = float(self.corr_inv_one.sum())
        return rx, quad, t, denom

    def predict_var(self, x):
        """Posterior variance at x, clamped at tiny negative round-off."""
        Uq, scalar = self._queries(x)
        _, quad, t, denom = self._var_terms(Uq)
        s2 = self.params.process_variance
        var = s2 * (1.0 - quad + t * t / denom)
        floor = -VAR_CLAMP_REL * s2
        if (var < floor).any():
            raise IllConditionedDesignError(
                f"predictive variance {var.min():.3e} below clamp floor {floor:.3e}"
            )
        var = np.maximum(var, 0.0)
        return float(var[0]) if scalar else var

    def predict_cov(self, x, x2):
        """Posterior covariance between points of x and points of x2."""
        Uq1, scalar1 = self._queries(x)
        Uq2, scalar2 = self._queries(x2)
        rx1, _, t1, denom = self._var_terms(Uq1)
        rx2 = self._cross(Uq2)
        V1 = solve_triangular(self.chol_corr, rx1, lower=True)
        V2 = solve_triangular(self.chol_corr, rx2, lower=True)
        t2 = 1.0 - rx2.T @ self.corr_inv_one
        r0 = _cross_corr(Uq1, Uq2, self.params.lengthscales)
        cov = self.params.process_variance * (
            r0 - V1.T @ V2 + np.outer(t1, t2) / denom
        )
        if scalar1 and scalar2:
            return float(cov[0, 0])
        return cov

    def predict_mean_var(self, x):
        """Mean and variance in one pass (shares the cross-correlation)."""
        Uq, scalar = self._queries(x)
        rx, quad, t, denom = self._var_terms(Uq)
        mean = self.mu_hat + rx.T @ self.corr_alpha
        s2 = self.params.process_variance
        var = np.maximum(s2 * (1.0 - quad + t * t / denom), 0.0)
        if scalar:
            return float(mean[0]), float(var[0])
        return mean, var

    def update(self, x, y, refit=False, fit_config=None, nugget=DEFAULT_NUGGET):
        """Model conditioned on one extra observation.

        With ``refit`` the hyperparameters are re-estimated from scratch
        (warm-started at the current lengthscales); otherwise they are
        kept and only the factorization is extended.
        """
        new_design = self.design.append(x, y)
        if refit:
            return fit_gp(
                new_design,
                nugget=nugget,
                config=fit_config,
                initial_lengthscales=self.params.lengthscales,
            )
        u_new = new_design.normalized_points[-1]
        r_new = _cross_corr(
            self.design.normalized_points, u_new[None, :], self.params.lengthscales
        )[:, 0]
        l12 = solve_triangular(self.chol_corr, r_new, lower=True)
        d22sq = (1.0 + self.params.nugget) - float(l12 @ l12)
        if d22sq <= 1e-14:
            return build_gp(new_design, self.params)
        n = self.design.n
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = self.chol_corr
        L[n, :n] = l12
        L[n, n] = math.sqrt(d22sq)
        mu, alpha, inv_one, _ = _gls_pieces(L, new_design.outputs)
        return GpModel(new_design, self.params, mu, L, alpha, inv_one)

    def loglik(self):
        """Concentrated log-likelihood of the stored hyperparameters."""
        return _concentrated_loglik_from_chol(self.chol_corr, self.design.outputs)

    def to_dict(self):
        return {
            "design": self.design.to_dict(),
            "kernel": self.params.to_dict(),
            "mu_hat": self.mu_hat,
        }

    @classmethod
    def from_dict(cls, doc):
        return build_gp(Design.from_dict(doc["design"]), KernelParams.from_dict(doc["kernel"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_gp(design: Design, params: KernelParams):
    """Model with explicit hyperparameters (no estimation).

    The stored nugget may exceed the requested one when factorization
    requires escalation.
    """
    if params.lengthscales.shape != (design.dim,):
        raise ParameterError("lengthscales must have one entry per input dimension")
    U = design.normalized_points
    R = _cross_corr(U, U, params.lengthscales)
    L, eta = _chol_with_escalation(R, params.nugget)
    if eta != params.nugget:
        params = replace(params, nugget=eta)
    mu, alpha, inv_one, _ = _gls_pieces(L, design.outputs)
    return GpModel(design, params, mu, L, alpha, inv_one)


def fit_gp(design: Design, nugget=DEFAULT_NUGGET, config: FitConfig = None, initial_lengthscales=None):
    """Estimate lengthscales by concentrated maximum likelihood.

    Trend coefficient and process variance are profiled out, so the
    search runs over log-lengthscales only, within [1e-3, 10] per
    normalized dimension.
    """
    if design.n < 2:
        raise InvalidDesignError("fitting requires at least two design points")
    config = config or FitConfig()
    d = design.dim
    U = design.normalized_points
    y = design.outputs
    diffs = np.abs(U[:, None, :] - U[None, :, :])
    log_box = BoxDomain(
        np.full(d, math.log(LENGTHSCALE_LO)), np.full(d, math.log(LENGTHSCALE_HI))
    )

    def objective(z):
        h = (SQRT3 * diffs) * np.exp(-z)
        R = np.prod((1.0 + h) * np.exp(-h), axis=2)
        try:
            L, _ = _chol_with_escalation(R, nugget)
        except IllConditionedDesignError:
            return -1e300
        return _concentrated_loglik_from_chol(L, y)

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
    mu, alpha, inv_one, sigma2 = _gls_pieces(L, y)
    params = KernelParams(ell, sigma2, eta)
    return GpModel(design, params, mu, L, alpha, inv_one)
