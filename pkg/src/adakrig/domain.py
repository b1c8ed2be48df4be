"""Rectangular domains and evaluated designs.

All model internals work on coordinates normalized to the unit cube; a
``BoxDomain`` carries the affine map between user coordinates and that
cube, and a ``Design`` pairs points inside a domain with their observed
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainError, DuplicatePointError, InvalidDesignError

# Two normalized points closer than this are treated as the same point.
DUPLICATE_TOL = 1e-9


def _as_readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower_j, upper_j]`` in d dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_readonly(np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", _as_readonly(np.atleast_1d(self.upper)))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise InvalidDesignError("lower and upper must be 1-D arrays of equal length")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise InvalidDesignError("domain bounds must be finite")
        if not (self.lower < self.upper).all():
            raise InvalidDesignError("each lower bound must be strictly below its upper bound")

    @classmethod
    def unit(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def widths(self):
        return self.upper - self.lower

    def normalize(self, x):
        """Map points from the box to [0, 1]^d."""
        return (np.asarray(x, dtype=float) - self.lower) / self.widths

    def denormalize(self, u):
        """Map points from [0, 1]^d back to the box."""
        return self.lower + np.asarray(u, dtype=float) * self.widths

    def contains(self, x, atol=1e-12):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return bool(
            (x >= self.lower - atol).all() and (x <= self.upper + atol).all()
        )

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["lower"], float), np.asarray(doc["upper"], float))


@dataclass(frozen=True)
class Design:
    """Evaluated points: an n x d matrix inside ``domain`` plus n outputs."""

    domain: BoxDomain
    points: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        out = np.atleast_1d(np.asarray(self.outputs, dtype=float))
        object.__setattr__(self, "points", _as_readonly(pts))
        object.__setattr__(self, "outputs", _as_readonly(out))
        if self.points.ndim != 2 or self.points.shape[1] != self.domain.dim:
            raise InvalidDesignError("points must be an n x d matrix matching the domain")
        if self.outputs.shape != (self.points.shape[0],):
            raise InvalidDesignError("outputs must be a vector with one entry per point")
        if not np.isfinite(self.points).all():
            raise InvalidDesignError("design points must be finite")
        if not np.isfinite(self.outputs).all():
            raise InvalidDesignError("design outputs must be finite")
        if not self.domain.contains(self.points):
            raise DomainError("design points must lie inside the domain")
        if self.n >= 2:
            u = self.domain.normalize(self.points)
            d2 = _pairwise_sq_dists(u)
            if d2.min() <= DUPLICATE_TOL**2:
                raise DuplicatePointError("design contains duplicate rows")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.domain.dim

    @cached_property
    def normalized_points(self):
        return _as_readonly(self.domain.normalize(self.points))

    def min_normalized_distance_to(self, x):
        """Smallest normalized Euclidean distance from x to any design row."""
        u = self.domain.normalize(np.asarray(x, dtype=float))
        diff = self.normalized_points - u
        return float(np.sqrt((diff * diff).sum(axis=1).min()))

    def append(self, x, y):
        """Return a new design with one extra (point, output) pair."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise InvalidDesignError("new point must be a d-vector")
        if self.min_normalized_distance_to(x) <= DUPLICATE_TOL:
            raise DuplicatePointError("new point duplicates an existing design row")
        return Design(
            self.domain,
            np.vstack([self.points, x[None, :]]),
            np.append(self.outputs, float(y)),
        )

    def to_dict(self):
        return {
            "domain": self.domain.to_dict(),
            "points": self.points.tolist(),
            "outputs": self.outputs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            BoxDomain.from_dict(doc["domain"]),
            np.asarray(doc["points"], float),
            np.asarray(doc["outputs"], float),
        )


def _pairwise_sq_dists(u):
    """Squared Euclidean distances with +inf on the diagonal."""
    sq = (u * u).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (u @ u.T)
    np.fill_diagonal(d2, np.inf)
    return np.maximum(d2, 0.0)
