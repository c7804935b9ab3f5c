"""Pareto dominance, nondominated filtering and the finite front-maximality check."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import EmptyPool, LengthMismatch
from .objectives import ObjectiveVector

TIE_TOL = 1e-12


def _vec(a):
    return np.asarray(a.values if isinstance(a, ObjectiveVector) else a, float)


def dominates(a, b, tol=TIE_TOL) -> bool:
    """a <= b componentwise with at least one strict improvement (minimization).

    Components closer than ``tol`` count as ties."""
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"objective vectors of length {a.size} and {b.size}")
    diff = b - a
    return bool(np.all(diff >= -tol) and np.any(diff > tol))


@dataclass(frozen=True, eq=False)
class EvaluatedDesign:
    shape: object  # Shape, or any hashable coefficient carrier
    objectives: ObjectiveVector
    provenance: dict = field(default_factory=dict)

    @property
    def coefficients(self):
        c = getattr(self.shape, "coefficients", self.shape)
        return tuple(float(x) for x in np.atleast_1d(c))


class DesignPool:
    """Finite list of evaluated designs without duplicate coefficient vectors.

    Later duplicates are dropped; insertion order is kept."""

    def __init__(self, designs: Iterable[EvaluatedDesign] = ()):
        self._designs = []
        seen = set()
        for d in designs:
            key = d.coefficients
            if key in seen:
                continue
            seen.add(key)
            self._designs.append(d)

    @classmethod
    def from_values(cls, values, coefficients=None):
        """Pool from raw objective rows; coefficients default to the row index."""
        values = np.atleast_2d(np.asarray(values, float))
        coeffs = range(len(values)) if coefficients is None else coefficients
        return cls(EvaluatedDesign(c if np.ndim(c) else (float(c),), ObjectiveVector(tuple(v)))
                   for c, v in zip(coeffs, values))

    @property
    def designs(self):
        return tuple(self._designs)

    def __len__(self):
        return len(self._designs)

    def __iter__(self):
        return iter(self._designs)

    def __getitem__(self, i):
        return self._designs[i]

    def objective_matrix(self):
        if not self._designs:
            return np.zeros((0, 0))
        return np.array([d.objectives.values for d in self._designs])

    def subset(self, idx):
        return DesignPool(self._designs[i] for i in idx)


def nondominated_mask(Y, tol=TIE_TOL):
    """Boolean mask of rows of Y not dominated by any other row (vectorized O(n^2))."""
    Y = np.asarray(Y, float)
    n = len(Y)
    mask = np.ones(n, bool)
    for i in range(n):
        diff = Y[i] - Y  # row j dominates i iff all diff >= -tol and some diff > tol
        dom = np.all(diff >= -tol, axis=1) & np.any(diff > tol, axis=1)
        mask[i] = not dom.any()
    return mask


def nondominated_set(pool: DesignPool) -> DesignPool:
    if len(pool) == 0:
        raise EmptyPool("nondominated set of an empty pool")
    return pool.subset(np.flatnonzero(nondominated_mask(pool.objective_matrix())))


def front_maximality_check(pool: DesignPool) -> bool:
    """Every dominated design is dominated by some member of the nondominated set."""
    if len(pool) == 0:
        return True
    Y = pool.objective_matrix()
    nd = nondominated_mask(Y)
    front = Y[nd]
    for y in Y[~nd]:
        if not any(dominates(f, y) for f in front):
            return False
    return True


def write_front_csv(path, pool: DesignPool):
    """Rows: shape_id, J_1..J_l, is_nondominated."""
    Y = pool.objective_matrix()
    nd = nondominated_mask(Y) if len(pool) else np.zeros(0, bool)
    labels = pool[0].objectives.labels if len(pool) else ()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape_id", *labels, "is_nondominated"])
        for i, (y, flag) in enumerate(zip(Y, nd)):
            w.writerow([i, *[repr(float(v)) for v in y], int(flag)])
