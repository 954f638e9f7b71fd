"""Exception hierarchy.

Every rejection names the first violated axiom and carries the offending
indices, so callers (and the CLI) can report precisely what failed.
ValidationError means bad input; BudgetError means the requested exact
computation is too large for the configured budget.
"""

from __future__ import annotations


class EqboxError(Exception):
    """Base class for all library errors."""


class ValidationError(EqboxError):
    """Input violates a structural or metric axiom."""


class NonSymmetric(ValidationError):
    def __init__(self, i: int, j: int):
        super().__init__(f"dist[{i}][{j}] != dist[{j}][{i}]")
        self.i, self.j = i, j


class NonZeroDiagonal(ValidationError):
    def __init__(self, i: int):
        super().__init__(f"dist[{i}][{i}] != 0")
        self.i = i


class TriangleViolation(ValidationError):
    def __init__(self, i: int, j: int, k: int):
        super().__init__(f"dist[{i}][{j}] > dist[{i}][{k}] + dist[{k}][{j}]")
        self.i, self.j, self.k = i, j, k


class DuplicatePoint(ValidationError):
    def __init__(self, i: int, j: int):
        super().__init__(f"dist[{i}][{j}] = 0 for distinct points {i}, {j}")
        self.i, self.j = i, j


class ZeroMass(ValidationError):
    def __init__(self, i: int):
        super().__init__(f"mass[{i}] <= 0 (measures must have full support)")
        self.i = i


class MassNotNormalized(ValidationError):
    def __init__(self, total: float):
        super().__init__(f"mass sums to {total!r}, expected 1")
        self.total = total


class LengthMismatch(ValidationError):
    pass


class KappaOutOfRange(ValidationError):
    def __init__(self, kappa: float):
        super().__init__(f"kappa = {kappa!r} outside (0, 1)")
        self.kappa = kappa


class MarginalMismatch(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class SpaceMismatch(ValidationError):
    pass


class NotPermutation(ValidationError):
    def __init__(self, perm):
        super().__init__(f"{perm!r} is not a permutation of the point indices")
        self.perm = perm


class NotIsometry(ValidationError):
    def __init__(self, perm, i: int, j: int):
        super().__init__(f"map does not preserve dist[{i}][{j}]")
        self.perm, self.i, self.j = perm, i, j


class NotMeasurePreserving(ValidationError):
    def __init__(self, perm, i: int):
        super().__init__(f"map does not preserve mass[{i}]")
        self.perm, self.i = perm, i


class EmptyRelation(ValidationError):
    pass


class LipschitzViolation(ValidationError):
    def __init__(self, i: int, j: int):
        super().__init__(f"|f[{i}] - f[{j}]| > dist[{i}][{j}]")
        self.i, self.j = i, j


class GridIncompatible(ValidationError):
    pass


class BudgetError(EqboxError):
    """The exact computation exceeds the configured budget."""


class TooLarge(BudgetError):
    def __init__(self, n: int, limit: int, what: str = "instance"):
        super().__init__(f"{what} has size {n}, exact budget is {limit}")
        self.n, self.limit = n, limit


class BudgetExceeded(BudgetError):
    pass
