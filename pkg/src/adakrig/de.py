"""Differential evolution (rand/1/bin) for box-constrained maximization.

Deterministic for a fixed seed. Objectives may be plain ``f(x) -> float``
or vectorized ``f(X) -> values`` over an (m, d) matrix; the vectorized
form avoids Python-loop overhead for batched model evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import BoxDomain
from .exceptions import ObjectiveError, ParameterError


@dataclass(frozen=True)
class DeConfig:
    """Settings for ``de_maximize``.

    ``population_size`` of None resolves to max(10 * d, 40) at call time.
    """

    population_size: Optional[int] = None
    generations: int = 200
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise ParameterError("population_size must be at least 4")
        if self.generations < 1:
            raise ParameterError("generations must be at least 1")
        if not 0.0 < self.differential_weight <= 2.0:
            raise ParameterError("differential_weight must lie in (0, 2]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ParameterError("crossover_rate must lie in [0, 1]")

    def resolve_population(self, dim):
        return self.population_size if self.population_size is not None else max(10 * dim, 40)


@dataclass(frozen=True)
class DeResult:
    x: np.ndarray
    value: float
    best_per_gen: np.ndarray
    n_evals: int


def _evaluate(objective, X, vectorized):
    if vectorized:
        vals = np.asarray(objective(X), dtype=float)
        if vals.shape != (X.shape[0],):
            raise ObjectiveError("vectorized objective must return one value per row")
    else:
        vals = np.array([float(objective(x)) for x in X], dtype=float)
    if not np.isfinite(vals).all():
        bad = X[np.flatnonzero(~np.isfinite(vals))[0]]
        raise ObjectiveError(f"objective returned a non-finite value at {bad.tolist()}", x=bad)
    return vals


def _distinct_triples(rng, m):
    """(m, 3) indices, each row distinct from its position and internally."""
    idx = np.arange(m)
    r = rng.integers(0, m, size=(m, 3))
    while True:
        bad = (
            (r[:, 0] == idx)
            | (r[:, 1] == idx)
            | (r[:, 2] == idx)
            | (r[:, 0] == r[:, 1])
            | (r[:, 0] == r[:, 2])
            | (r[:, 1] == r[:, 2])
        )
        if not bad.any():
            return r
        r[bad] = rng.integers(0, m, size=(int(bad.sum()), 3))


def _reflect(X, lower, upper):
    span = upper - lower
    X = np.where(X < lower, 2.0 * lower - X, X)
    X = np.where(X > upper, 2.0 * upper - X, X)
    # A mutant can overshoot by at most F * span, so one reflection lands
    # inside; clip guards against repeated overshoot at extreme F.
    return np.clip(X, lower, upper)


def de_maximize(objective, domain: BoxDomain, config: DeConfig = None, x0=None, vectorized=False):
    """Maximize ``objective`` over ``domain`` with DE/rand/1/bin.

    Parameters
    ----------
    objective : callable
        Maps a d-vector to a float, or an (m, d) matrix to m floats when
        ``vectorized`` is true. Must be finite everywhere in the box.
    domain : BoxDomain
        Search box.
    config : DeConfig, optional
    x0 : array, optional
        A point seeded into the initial population (clipped to the box).
    vectorized : bool
        Whether ``objective`` accepts a matrix of candidates.

    Returns
    -------
    DeResult
        Best point found, its value, the best value after the initial
        population and after each generation, and the evaluation count.
    """
    config = config or DeConfig()
    d = domain.dim
    m = config.resolve_population(d)
    if m < 4:
        raise ParameterError("population must be at least 4")
    rng = np.random.default_rng(config.seed)
    lower, upper = domain.lower, domain.upper

    pop = lower + rng.random((m, d)) * (upper - lower)
    if x0 is not None:
        pop[0] = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fitness = _evaluate(objective, pop, vectorized)
    n_evals = m

    best_per_gen = np.empty(config.generations + 1)
    best_per_gen[0] = fitness.max()

    F = config.differential_weight
    CR = config.crossover_rate
    rows = np.arange(m)
    for gen in range(config.generations):
        r = _distinct_triples(rng, m)
        mutant = pop[r[:, 0]] + F * (pop[r[:, 1]] - pop[r[:, 2]])
        mutant = _reflect(mutant, lower, upper)
        cross = rng.random((m, d)) < CR
        cross[rows, rng.integers(0, d, size=m)] = True
        trial = np.where(cross, mutant, pop)
        trial_fit = _evaluate(objective, trial, vectorized)
        n_evals += m
        improved = trial_fit >= fitness
        pop[improved] = trial[improved]
        fitness[improved] = trial_fit[improved]
        best_per_gen[gen + 1] = fitness.max()

    best = int(np.argmax(fitness))
    return DeResult(
        x=pop[best].copy(),
        value=float(fitness[best]),
        best_per_gen=best_per_gen,
        n_evals=n_evals,
    )


def random_probe_audit(objective, domain: BoxDomain, candidate, n_probes, seed, vectorized=False):
    """Check a candidate maximizer against uniform random probes.

    Returns True iff ``objective(candidate)`` is at least the objective
    value at every one of ``n_probes`` uniformly sampled points.
    """
    if n_probes < 1:
        raise ParameterError("n_probes must be positive")
    rng = np.random.default_rng(seed)
    probes = domain.lower + rng.random((int(n_probes), domain.dim)) * domain.widths
    probe_vals = _evaluate(objective, probes, vectorized)
    cand = np.atleast_2d(np.asarray(candidate, dtype=float))
    cand_val = _evaluate(objective, cand, vectorized)[0]
    return bool(cand_val >= probe_vals.max())
