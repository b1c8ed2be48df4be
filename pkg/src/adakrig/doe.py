"""Space-filling designs and accuracy metrics.

Maximin Latin hypercube sampling via local column-swap search, the
normalized root-mean-square error used to score emulators, and the
L2 star discrepancy in Warnock's closed form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import BoxDomain, Design, _pairwise_sq_dists
from .exceptions import ConstantOutputsError, DomainError, InvalidDesignError, ParameterError


@dataclass(frozen=True)
class TestSet:
    """Held-out points in the unit cube with their true outputs."""

    points: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        out = np.atleast_1d(np.asarray(self.outputs, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "outputs", out)
        if out.shape != (pts.shape[0],):
            raise InvalidDesignError("outputs must be a vector with one entry per point")

    @property
    def n(self):
        return self.points.shape[0]


def random_lhs(n, d, rng):
    """Plain Latin hypercube: one point uniform in each row stratum."""
    X = np.empty((n, d))
    for j in range(d):
        X[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return X


def lhs_maximin(n, d, seed, sweeps=10_000):
    """Latin hypercube improved toward a maximin design.

    Starts from a random LHS and performs ``sweeps`` random swaps of
    two elements within one column (which preserves the stratification),
    keeping a swap only when it increases the minimum pairwise distance.
    """
    if n < 1 or d < 1:
        raise ParameterError("n and d must be positive")
    rng = np.random.default_rng(seed)
    X = random_lhs(n, d, rng)
    if n < 2:
        return X
    D2 = _pairwise_sq_dists(X)
    cur_min = D2.min()
    for _ in range(int(sweeps)):
        c = int(rng.integers(d))
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        col = X[:, c]
        # Swapping X[i,c] and X[j,c] changes only distances touching
        # rows i and j; the (i, j) distance itself is unchanged.
        row_i = D2[i] - (col[i] - col) ** 2 + (col[j] - col) ** 2
        row_j = D2[j] - (col[j] - col) ** 2 + (col[i] - col) ** 2
        row_i[i] = row_i[j] = np.inf
        row_j[i] = row_j[j] = np.inf
        touched = min(row_i.min(), row_j.min(), D2[i, j])
        if touched <= cur_min:
            continue
        masked = D2.copy()
        masked[i, :] = masked[:, i] = np.inf
        masked[j, :] = masked[:, j] = np.inf
        new_min = min(masked.min(), touched)
        if new_min > cur_min:
            X[i, c], X[j, c] = X[j, c], X[i, c]
            row_i[j] = row_j[i] = D2[i, j]
            D2[i, :] = D2[:, i] = row_i
            D2[j, :] = D2[:, j] = row_j
            D2[i, i] = D2[j, j] = np.inf
            cur_min = new_min
    return X


def min_pairwise_distance(points):
    """Smallest Euclidean distance between two rows."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        raise ParameterError("need at least two points")
    return float(np.sqrt(_pairwise_sq_dists(points).min()))


def nrmse(predict_mean, test: TestSet):
    """Root-mean-square error normalized by the output range of the test set."""
    out_range = float(test.outputs.max() - test.outputs.min())
    if out_range == 0.0:
        raise ConstantOutputsError("test outputs are constant; nrmse undefined")
    pred = np.asarray(predict_mean(test.points), dtype=float)
    if pred.shape != (test.n,):
        raise ParameterError("predictor must return one value per test point")
    rmse = float(np.sqrt(np.mean((pred - test.outputs) ** 2)))
    return rmse / out_range


def discrepancy_l2(points):
    """L2 star discrepancy of points in [0, 1]^d (Warnock's closed form)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = P.shape
    if n < 1:
        raise ParameterError("need at least one point")
    if (P < 0).any() or (P > 1).any():
        raise DomainError("discrepancy requires points inside the unit cube")
    term1 = 3.0**-d
    term2 = (2.0 ** (1 - d) / n) * np.prod(1.0 - P**2, axis=1).sum()
    cross = np.prod(1.0 - np.maximum(P[:, None, :], P[None, :, :]), axis=2).sum()
    term3 = cross / n**2
    return float(np.sqrt(max(term1 - term2 + term3, 0.0)))


def write_points_csv(path, points, outputs=None):
    """Write points (and optionally outputs, as a final y column) as CSV."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    header = [f"x{j + 1}" for j in range(points.shape[1])]
    if outputs is not None:
        outputs = np.atleast_1d(np.asarray(outputs, dtype=float))
        header.append("y")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in enumerate(points):
            rec = [repr(v) for v in row]
            if outputs is not None:
                rec.append(repr(outputs[i]))
            writer.writerow(rec)


def read_points_csv(path):
    """Read a CSV written by ``write_points_csv``.

    Returns (points, outputs); outputs is None when the file has no
    y column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    has_y = bool(header) and header[-1] == "y"
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise InvalidDesignError(f"no data rows in {path}")
    if has_y:
        return data[:, :-1], data[:, -1]
    return data, None


def write_design_csv(path, design: Design):
    write_points_csv(path, design.points, design.outputs)


def read_design_csv(path, domain: BoxDomain = None):
    points, outputs = read_points_csv(path)
    if outputs is None:
        raise InvalidDesignError("design CSV must carry a y column")
    if domain is None:
        domain = BoxDomain.unit(points.shape[1])
    return Design(domain, points, outputs)


def write_test_set_csv(path, test: TestSet):
    write_points_csv(path, test.points, test.outputs)


def read_test_set_csv(path):
    points, outputs = read_points_csv(path)
    if outputs is None:
        raise InvalidDesignError("test-set CSV must carry a y column")
    return TestSet(points, outputs)
