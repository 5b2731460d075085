"""Exact metrics between finite-support task distributions.

Only exact solvers, only small supports: the theorem reproductions in the
adversary and inference modules assert equalities to 1e-12, which entropic
or sampled approximations would pollute. Wasserstein distances are solved as
the finite transportation linear program; the ground metric is validated on
load (symmetry, zero diagonal, triangle inequality over the support).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .ecologies import TaskDistribution
from .errors import FamilyMismatchError, InvalidMetricError, SupportTooLargeError

WASSERSTEIN_SUPPORT_CAP = 64


@dataclass(frozen=True)
class GroundMetric:
    """Symmetric pairwise distances over task ids, validated on construction."""

    pairwise: Mapping[tuple[str, str], float]

    def __post_init__(self) -> None:
        ids = sorted({i for pair in self.pairwise for i in pair})
        for a, b in self.pairwise:
            d = self.pairwise[(a, b)]
            if d < 0:
                raise InvalidMetricError(f"negative distance d({a},{b}) = {d}")
            if a == b and d != 0.0:
                raise InvalidMetricError(f"nonzero diagonal d({a},{a}) = {d}")
            if self.pairwise.get((b, a), d) != d:
                raise InvalidMetricError(f"asymmetric distances for ({a},{b})")
        for a in ids:
            for b in ids:
                for c in ids:
                    dab, dbc, dac = self.distance(a, b), self.distance(b, c), self.distance(a, c)
                    if dac > dab + dbc + 1e-9:
                        raise InvalidMetricError(
                            f"triangle inequality violated: d({a},{c}) > d({a},{b}) + d({b},{c})"
                        )

    def distance(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        if (a, b) in self.pairwise:
            return float(self.pairwise[(a, b)])
        if (b, a) in self.pairwise:
            return float(self.pairwise[(b, a)])
        raise InvalidMetricError(f"missing ground distance for ({a!r}, {b!r})")

    @staticmethod
    def from_pairs(pairs: Sequence[tuple[str, str, float]]) -> "GroundMetric":
        table: dict[tuple[str, str], float] = {}
        for a, b, d in pairs:
            table[(a, b)] = float(d)
            table[(b, a)] = float(d)
        return GroundMetric(table)

    @staticmethod
    def discrete(ids: Sequence[str]) -> "GroundMetric":
        """The 0/1 metric: distance 1 between distinct atoms."""
        table: dict[tuple[str, str], float] = {}
        for a in ids:
            for b in ids:
                table[(a, b)] = 0.0 if a == b else 1.0
        return GroundMetric(table)


def _merged_support(mu1: TaskDistribution, mu2: TaskDistribution) -> list[str]:
    if mu1.family_id != mu2.family_id:
        raise FamilyMismatchError(
            f"distributions over different families: {mu1.family_id!r} vs {mu2.family_id!r}"
        )
    ids = {t.id for t in mu1.support} | {t.id for t in mu2.support}
    return sorted(ids)


def tv_distance(mu1: TaskDistribution, mu2: TaskDistribution) -> float:
    """Total variation distance: half the L1 gap over the merged support."""
    ids = _merged_support(mu1, mu2)
    w1, w2 = mu1.as_mapping(), mu2.as_mapping()
    return 0.5 * sum(abs(w1.get(i, 0.0) - w2.get(i, 0.0)) for i in ids)


def mixture_tv_bound(eta: float) -> float:
    """Analytic TV bound for the small-mass mixture (1-eta)*mu + eta*dirac."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0,1]")
    return eta


def wasserstein(
    mu1: TaskDistribution,
    mu2: TaskDistribution,
    ground: GroundMetric,
    p: int = 1,
) -> float:
    """Exact p-Wasserstein distance via the transportation linear program."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    ids = _merged_support(mu1, mu2)
    if len(ids) > WASSERSTEIN_SUPPORT_CAP:
        raise SupportTooLargeError(
            f"merged support {len(ids)} exceeds the exact cap {WASSERSTEIN_SUPPORT_CAP}"
        )
    w1map, w2map = mu1.as_mapping(), mu2.as_mapping()
    a = np.array([w1map.get(i, 0.0) for i in ids])
    b = np.array([w2map.get(i, 0.0) for i in ids])
    n = len(ids)
    cost = np.array([[ground.distance(x, y) ** p for y in ids] for x in ids])

    # transportation LP: minimize <P, cost> s.t. row sums a, column sums b
    c = cost.reshape(-1)
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * n)
        row[i * n : (i + 1) * n] = 1.0
        a_eq.append(row)
        b_eq.append(a[i])
    for j in range(n - 1):  # last column constraint is redundant
        col = np.zeros(n * n)
        col[j::n] = 1.0
        a_eq.append(col)
        b_eq.append(b[j])
    result = linprog(c, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs")
    if not result.success:  # pragma: no cover - marginals always feasible
        raise RuntimeError(f"transport LP failed: {result.message}")
    value = max(0.0, float(result.fun))
    return value ** (1.0 / p)
