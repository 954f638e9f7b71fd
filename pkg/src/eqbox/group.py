"""Measure-preserving isometric actions of finite groups.

An action is stored as the full set of permutations of the point indices,
closed under composition and inverse, each preserving the distance matrix
and the mass vector.  From an action we derive:

  * the quotient space (points are orbits, distance is the least distance
    between orbits, mass is pushed forward),
  * thick parts {x : mass(closed ball of radius r at x) > v},
  * automorphism groups by backtracking over distance and mass compatible
    assignments,
  * candidate limit groups: conjugating a group through a correspondence
    relation and rounding each conjugate to the nearest automorphism of
    the target space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import Relation, relation_dom
from .errors import (
    BudgetExceeded,
    EmptyRelation,
    NotIsometry,
    NotMeasurePreserving,
    NotPermutation,
    SizeMismatch,
    TooLarge,
    ValidationError,
)
from .mmspace import AXIOM_TOL, FiniteMMSpace, validate_space

Perm = tuple[int, ...]


@dataclass(frozen=True)
class MMAction:
    """A finite group of mass- and distance-preserving permutations."""

    space: FiniteMMSpace
    elements: tuple[Perm, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def identity(self) -> Perm:
        return tuple(range(self.space.n))

    def element_arrays(self) -> list[np.ndarray]:
        return [np.array(p, dtype=int) for p in self.elements]


def trivial_action(space: FiniteMMSpace) -> MMAction:
    return MMAction(space, (tuple(range(space.n)),))


def _compose(p: Perm, q: Perm) -> Perm:
    """(p after q)(i) = p[q[i]]."""
    return tuple(p[j] for j in q)


def _inverse(p: Perm) -> Perm:
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


def _check_element(space: FiniteMMSpace, p: Perm, tol: float) -> None:
    arr = np.array(p, dtype=int)
    moved = space.dist[np.ix_(arr, arr)]
    bad = np.argwhere(np.abs(moved - space.dist) > tol)
    if bad.size:
        i, j = map(int, bad[0])
        raise NotIsometry(p, i, j)
    bad = np.argwhere(np.abs(space.mass[arr] - space.mass) > tol)
    if bad.size:
        raise NotMeasurePreserving(p, int(bad[0][0]))


def validate_action(
    space: FiniteMMSpace,
    permutations,
    *,
    tol: float = AXIOM_TOL,
    max_order: int = 10_000,
) -> MMAction:
    """Close the given permutations into a group and verify the axioms.

    Rejects non-permutations, non-isometries and non-measure-preserving
    maps; raises BudgetExceeded if the generated group grows past
    max_order.
    """
    n = space.n
    gens: list[Perm] = []
    for p in permutations:
        p = tuple(int(x) for x in p)
        if sorted(p) != list(range(n)):
            raise NotPermutation(p)
        _check_element(space, p, tol)
        gens.append(p)

    identity = tuple(range(n))
    elements = {identity}
    frontier = [identity] + gens
    while frontier:
        cur = frontier.pop()
        if cur not in elements and cur != identity:
            elements.add(cur)
        for g in gens + [_inverse(cur)]:
            for nxt in (_compose(cur, g), _compose(g, cur)):
                if nxt not in elements:
                    if len(elements) >= max_order:
                        raise BudgetExceeded(
                            f"generated group exceeds {max_order} elements"
                        )
                    elements.add(nxt)
                    frontier.append(nxt)
    for p in elements:
        _check_element(space, p, tol)
    return MMAction(space, tuple(sorted(elements)))


def enumerate_aut(
    space: FiniteMMSpace, *, max_points: int = 10, tol: float = AXIOM_TOL
) -> MMAction:
    """The full group of mass-preserving isometries, by backtracking.

    Point i may map to j only when the mass agrees and all previously
    assigned distances match, so the search tree collapses quickly for
    rigid spaces.
    """
    n = space.n
    if n > max_points:
        raise TooLarge(n, max_points, "automorphism search")
    dist, mass = space.dist, space.mass
    compatible = [
        [j for j in range(n) if abs(mass[j] - mass[i]) <= tol] for i in range(n)
    ]
    found: list[Perm] = []
    image = [-1] * n
    used = [False] * n

    def rec(i: int):
        if i == n:
            found.append(tuple(image))
            return
        for j in compatible[i]:
            if used[j]:
                continue
            ok = True
            for k in range(i):
                if abs(dist[j, image[k]] - dist[i, k]) > tol:
                    ok = False
                    break
            if ok:
                image[i] = j
                used[j] = True
                rec(i + 1)
                used[j] = False
        image[i] = -1

    rec(0)
    return MMAction(space, tuple(sorted(found)))


def orbits(action: MMAction) -> list[tuple[int, ...]]:
    """Group orbits, each sorted, listed by smallest member."""
    n = action.space.n
    seen = [False] * n
    out = []
    for i in range(n):
        if seen[i]:
            continue
        orb = sorted({p[i] for p in action.elements})
        for j in orb:
            seen[j] = True
        out.append(tuple(orb))
    return out


def quotient(action: MMAction) -> tuple[FiniteMMSpace, tuple[int, ...]]:
    """The quotient mm-space and the point -> orbit index map.

    Orbit distance is the least distance between orbit members; orbit mass
    is the sum of member masses.  The result is re-validated: positivity
    across distinct orbits is checked, not assumed.
    """
    space = action.space
    orbs = orbits(action)
    k = len(orbs)
    labels = ["+".join(space.labels[i] for i in orb) for orb in orbs]
    dist = np.zeros((k, k))
    mass = np.zeros(k)
    for a, orb_a in enumerate(orbs):
        mass[a] = space.mass[list(orb_a)].sum()
        for b in range(a + 1, k):
            block = space.dist[np.ix_(orb_a, orbs[b])]
            dist[a, b] = dist[b, a] = float(block.min())
    orbit_map = [0] * space.n
    for a, orb in enumerate(orbs):
        for i in orb:
            orbit_map[i] = a
    return validate_space(labels, dist, mass), tuple(orbit_map)


def thick_part(space: FiniteMMSpace, r: float, v: float) -> frozenset[int]:
    """Points whose closed r-ball carries mass strictly above v."""
    if r < 0:
        raise ValidationError("thick part radius must be >= 0")
    if not 0.0 <= v < 1.0:
        raise ValidationError("thick part threshold must lie in [0, 1)")
    ball = (space.dist <= r) @ space.mass
    return frozenset(int(i) for i in np.flatnonzero(ball > v))


def select_thickness_threshold(space: FiniteMMSpace, eps: float) -> float:
    """The largest half ball-mass v with mass(thick part at (v, eps)) > 1 - eps.

    Candidates are half the finitely many ball masses, scanned in
    descending order; the smallest candidate always succeeds because every
    point lies in its own ball.
    """
    ball = (space.dist <= eps) @ space.mass
    candidates = sorted({float(b) / 2.0 for b in ball}, reverse=True)
    for v in candidates:
        part = thick_part(space, eps, v)
        if space.mass[list(part)].sum() > 1.0 - eps:
            return v
    return candidates[-1]


def conjugate_relation(g: Perm, S: Relation) -> Relation:
    """The relation S o graph(g) o S^{-1} on the second factor.

    Pairs (y, y') such that some (x, y) lies in S and (g(x), y') lies in S.
    """
    heads: dict[int, list[int]] = {}
    for x, y in S.pairs:
        heads.setdefault(x, []).append(y)
    out = set()
    for x, y in S.pairs:
        for yp in heads.get(g[x], ()):
            out.add((y, yp))
    return Relation.of(out, S.m, S.m)


def extract_limit_group(
    Gn: MMAction,
    Y: FiniteMMSpace,
    S: Relation,
    eps: float,
    *,
    aut_Y: MMAction | None = None,
):
    """Round each group element through the correspondence S into Aut(Y).

    For g in the group, the conjugate relation S o g o S^{-1} pairs points
    of Y; the automorphism h minimizing the defect
    max over paired (y, y') of d_Y(h(y), y') is the candidate image of g.
    Returns a list of (g, h, defect, defect <= eps) with ties broken by
    the canonical ordering of Aut(Y).
    """
    if len(S) == 0:
        raise EmptyRelation("cannot extract a limit group through an empty relation")
    if S.n != Gn.space.n or S.m != Y.n:
        raise SizeMismatch(
            f"relation is {S.n} x {S.m}, expected {Gn.space.n} x {Y.n}"
        )
    if aut_Y is None:
        aut_Y = enumerate_aut(Y)
    dY = Y.dist
    rows = []
    for g in Gn.elements:
        rho = conjugate_relation(g, S)
        if len(rho) == 0:
            # g maps the domain of S off itself: nothing to match against
            rows.append((g, aut_Y.identity, 0.0, True))
            continue
        ys = np.array([p[0] for p in rho.sorted_pairs()])
        yps = np.array([p[1] for p in rho.sorted_pairs()])
        best_h = None
        best_defect = np.inf
        for h in aut_Y.elements:
            harr = np.array(h, dtype=int)
            defect = float(dY[harr[ys], yps].max())
            if defect < best_defect - 1e-15:
                best_h, best_defect = h, defect
        rows.append((g, best_h, best_defect, best_defect <= eps))
    return rows
