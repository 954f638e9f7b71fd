"""Finite metric measure spaces.

A space is a finite point set with a symmetric distance matrix satisfying
the metric axioms and a full-support probability vector.  On top of that
this module provides:

  * the Ky Fan metric between real vectors: the smallest eps >= 0 with
    mu(|f - g| > eps) <= eps, and its version for point maps,
  * partial diameters diam(nu; -kappa): the shortest closed interval
    carrying mass at least 1 - kappa of a finite real distribution,
  * the kappa-observable diameter, as a certified lower bound from a
    finite family of 1-Lipschitz functions and as a grid brute force.

Inputs are rejected, never repaired; all metric axiom checks use an
absolute tolerance of 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicatePoint,
    GridIncompatible,
    KappaOutOfRange,
    LengthMismatch,
    LipschitzViolation,
    MassNotNormalized,
    NonSymmetric,
    NonZeroDiagonal,
    TooLarge,
    TriangleViolation,
    ZeroMass,
)

AXIOM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteMMSpace:
    """A finite metric space with a full-support probability measure."""

    labels: tuple[str, ...]
    dist: np.ndarray
    mass: np.ndarray

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def diam(self) -> float:
        return float(self.dist.max())

    def ball_mass(self, i: int, r: float) -> float:
        """Measure of the closed ball of radius r around point i."""
        return float(self.mass[self.dist[i] <= r].sum())

    def same_points(self, other: "FiniteMMSpace") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.mass, other.mass)
        )


@dataclass(frozen=True)
class LipFunction:
    """A real vector on a space's points obeying the 1-Lipschitz constraint.

    No gauge is pinned: functions differing by a constant are distinct
    objects, and the Ky Fan metric sees the difference.
    """

    space: FiniteMMSpace
    values: np.ndarray


def validate_space(labels, dist, mass, *, tol: float = AXIOM_TOL) -> FiniteMMSpace:
    """Check all axioms of a finite mm-space and freeze the result.

    Raises a ValidationError subclass naming the first violated axiom:
    NonSymmetric, NonZeroDiagonal, DuplicatePoint, TriangleViolation,
    ZeroMass or MassNotNormalized.
    """
    labels = tuple(str(x) for x in labels)
    dist = np.array(dist, dtype=float)
    mass = np.array(mass, dtype=float)
    n = len(labels)
    if dist.shape != (n, n):
        raise LengthMismatch(f"dist has shape {dist.shape}, expected {(n, n)}")
    if mass.shape != (n,):
        raise LengthMismatch(f"mass has shape {mass.shape}, expected {(n,)}")

    bad = np.argwhere(np.abs(dist - dist.T) > tol)
    if bad.size:
        i, j = map(int, bad[0])
        raise NonSymmetric(i, j)
    for i in range(n):
        if abs(dist[i, i]) > tol:
            raise NonZeroDiagonal(i)
    off = np.argwhere((dist <= tol) & ~np.eye(n, dtype=bool))
    if off.size:
        i, j = map(int, off[0])
        raise DuplicatePoint(i, j)
    # dist[i,j] <= dist[i,k] + dist[k,j] for all triples
    for k in range(n):
        bad = np.argwhere(dist > dist[:, [k]] + dist[[k], :] + tol)
        if bad.size:
            i, j = map(int, bad[0])
            raise TriangleViolation(i, j, k)

    for i in range(n):
        if mass[i] <= 0:
            raise ZeroMass(i)
    total = float(mass.sum())
    if abs(total - 1.0) > tol:
        raise MassNotNormalized(total)

    dist.setflags(write=False)
    mass.setflags(write=False)
    return FiniteMMSpace(labels=labels, dist=dist, mass=mass)


def lip_check(space: FiniteMMSpace, values, *, tol: float = AXIOM_TOL) -> LipFunction:
    """Validate the 1-Lipschitz constraint and wrap the values."""
    values = np.array(values, dtype=float)
    if values.shape != (space.n,):
        raise LengthMismatch(f"values has shape {values.shape}, expected {(space.n,)}")
    bad = np.argwhere(np.abs(values[:, None] - values[None, :]) > space.dist + tol)
    if bad.size:
        i, j = map(int, bad[0])
        raise LipschitzViolation(i, j)
    values.setflags(write=False)
    return LipFunction(space=space, values=values)


def ky_fan(f, g, mu) -> float:
    """Ky Fan distance: min eps >= 0 with mu(|f - g| > eps) <= eps.

    Exact for finite vectors.  The minimum is attained either at a value
    of |f - g| or at a cumulative tail mass, so scanning those candidates
    after sorting is lossless.
    """
    f = np.asarray(f, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    if f.shape != g.shape or f.shape != mu.shape:
        raise LengthMismatch(
            f"ky_fan got shapes {f.shape}, {g.shape}, mass {mu.shape}"
        )
    if f.size == 0:
        return 0.0
    diff = np.abs(f - g)
    order = np.argsort(-diff, kind="stable")
    d_sorted = diff[order]
    cum = np.cumsum(mu[order])
    # Candidate t keeps the top t differences above the threshold: the
    # threshold must cover the (t+1)-th largest value and the mass of the
    # top t.  Every candidate is feasible; the smallest is the distance.
    values = np.append(d_sorted, 0.0)
    masses = np.concatenate(([0.0], cum))
    return float(np.maximum(values, masses).min())


def ky_fan_batch(diffs: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Vectorized ky_fan of |diffs| against zero, along the last axis.

    diffs has shape (..., c) and mu shape (c,); returns shape (...).
    """
    diffs = np.abs(diffs)
    order = np.argsort(-diffs, axis=-1, kind="stable")
    d_sorted = np.take_along_axis(diffs, order, axis=-1)
    m_sorted = np.broadcast_to(mu, diffs.shape)
    m_sorted = np.take_along_axis(m_sorted, order, axis=-1)
    cum = np.cumsum(m_sorted, axis=-1)
    pad = d_sorted.shape[:-1] + (1,)
    values = np.concatenate([d_sorted, np.zeros(pad)], axis=-1)
    masses = np.concatenate([np.zeros(pad), cum], axis=-1)
    return np.maximum(values, masses).min(axis=-1)


def ky_fan_map(g, h, space: FiniteMMSpace) -> float:
    """Ky Fan distance between two point maps: dKF of x -> d(g(x), h(x))."""
    g = np.asarray(g, dtype=int)
    h = np.asarray(h, dtype=int)
    if g.shape != (space.n,) or h.shape != (space.n,):
        raise LengthMismatch("maps must have one image per point")
    disp = space.dist[g, h]
    return ky_fan(disp, np.zeros_like(disp), space.mass)


def partial_diameter(values, masses, kappa: float) -> float:
    """diam(nu; -kappa): length of the shortest closed interval with
    nu-mass at least 1 - kappa.

    For finitely many atoms an optimal interval has atom endpoints, so a
    scan over endpoint pairs is exact.
    """
    if not 0.0 < kappa < 1.0:
        raise KappaOutOfRange(kappa)
    values = np.asarray(values, dtype=float).ravel()
    masses = np.asarray(masses, dtype=float).ravel()
    if values.shape != masses.shape:
        raise LengthMismatch("atom values and masses differ in length")
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = masses[order]
    pre = np.concatenate(([0.0], np.cumsum(w)))
    need = 1.0 - kappa - 1e-12  # absorb float summation noise
    n = v.size
    best = math.inf
    j = 0
    for i in range(n):
        if j < i:
            j = i
        while j < n and pre[j + 1] - pre[i] < need:
            j += 1
        if j == n:
            break
        best = min(best, v[j] - v[i])
    if best is math.inf:
        # total mass itself falls short of 1 - kappa; the whole line is optimal
        best = float(v[-1] - v[0]) if n else 0.0
    return float(best)


def pushforward(values, mass):
    """Atoms of the image distribution of a point function."""
    values = np.asarray(values, dtype=float).ravel()
    mass = np.asarray(mass, dtype=float).ravel()
    uniq, inv = np.unique(values, return_inverse=True)
    sums = np.zeros_like(uniq)
    np.add.at(sums, inv, mass)
    return uniq, sums


def lip_candidates(space: FiniteMMSpace, *, samples: int = 64, seed: int = 0) -> np.ndarray:
    """A finite family of 1-Lipschitz functions: all distance functions
    d(x_i, .) plus seeded samples of the Lipschitz polytope.

    Random samples are drawn by pushing random offset vectors through the
    tight extension c -> min_i (c_i + d(x_i, .)), which is always
    1-Lipschitz and reaches every 1-Lipschitz function for some offsets.
    """
    rows = [space.dist[i] for i in range(space.n)]
    if samples > 0 and space.n > 1:
        rng = np.random.default_rng(seed)
        offs = rng.uniform(0.0, space.diam, size=(samples, space.n))
        rows.extend(np.min(offs[:, None, :] + space.dist[None, :, :], axis=2))
    return np.array(rows)


def obs_diam_lower(
    space: FiniteMMSpace, kappa: float, *, samples: int = 64, seed: int = 0
) -> float:
    """Certified lower bound for the kappa-observable diameter.

    Maximizes diam(f_* mass; -kappa) over the finite candidate family of
    lip_candidates.  Every candidate is 1-Lipschitz, so the result never
    exceeds the true supremum.
    """
    if not 0.0 < kappa < 1.0:
        raise KappaOutOfRange(kappa)
    if space.n == 1:
        return 0.0
    best = 0.0
    for f in lip_candidates(space, samples=samples, seed=seed):
        uniq, sums = pushforward(f, space.mass)
        best = max(best, partial_diameter(uniq, sums, kappa))
    return best


def obs_diam_oracle(
    space: FiniteMMSpace,
    kappa: float,
    grid: float,
    *,
    max_points: int = 5,
) -> float:
    """Brute force the kappa-observable diameter over a value grid.

    Enumerates every 1-Lipschitz vector with f[0] = 0 and the remaining
    values in multiples of `grid`, which covers the supremum to within a
    Lipschitz rounding error of (n - 1) * grid.
    """
    if not 0.0 < kappa < 1.0:
        raise KappaOutOfRange(kappa)
    if space.n > max_points:
        raise TooLarge(space.n, max_points, "obs_diam_oracle space")
    if grid <= 0:
        raise GridIncompatible(f"grid must be positive, got {grid!r}")
    n = space.n
    if n == 1:
        return 0.0
    dist = space.dist
    axes = []
    for i in range(1, n):
        k = int(math.floor(dist[0, i] / grid + 1e-9))
        axes.append(grid * np.arange(-k, k + 1))

    best = 0.0
    values = np.zeros(n)

    def rec(i: int):
        nonlocal best
        if i == n:
            uniq, sums = pushforward(values, space.mass)
            got = partial_diameter(uniq, sums, kappa)
            if got > best:
                best = got
            return
        for val in axes[i - 1]:
            ok = True
            for j in range(i):
                if abs(val - values[j]) > dist[i, j] + 1e-9:
                    ok = False
                    break
            if ok:
                values[i] = val
                rec(i + 1)

    rec(1)
    return best
