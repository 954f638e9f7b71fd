"""Couplings, the gluing calculus, relation algebra, Prokhorov metric.

A coupling between two finite measures is a nonnegative matrix with the
measures as row and column sums.  Two couplings sharing a marginal glue
into a three-index measure

    t[i, j, k] = sigma[i, j] * tau[j, k] / muY[j],

whose outer projection defines the composition tau o sigma.  Relations
(finite sets of index pairs) carry the parallel set calculus: composition,
inverse, domain.  The two interact through the mass inequality

    (tau o sigma)(T o S) >= tau(T) + sigma(S) - 1.

The Prokhorov distance between two measures on a common finite metric
space is computed exactly: for each candidate threshold eps taken from the
distance values, a max-flow feasibility test gives the least mass that
must travel farther than eps, and the optimum is the smallest
max(eps, excess mass) over thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Tuple

import numpy as np

from .errors import (
    LengthMismatch,
    MarginalMismatch,
    SizeMismatch,
    ValidationError,
)

MARGINAL_TOL = 1e-10
FLOW_TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """A transport plan with prescribed marginals."""

    plan: np.ndarray
    muX: np.ndarray
    muY: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.plan.shape

    def mass_of(self, pairs: Iterable[tuple[int, int]]) -> float:
        """Total plan mass carried by a set of index pairs."""
        return math.fsum(float(self.plan[i, j]) for i, j in sorted(set(pairs)))


@dataclass(frozen=True)
class Relation:
    """A subset of the product of two index sets."""

    pairs: FrozenSet[Tuple[int, int]]
    n: int
    m: int

    def __post_init__(self):
        for i, j in self.pairs:
            if not (0 <= i < self.n and 0 <= j < self.m):
                raise SizeMismatch(f"pair {(i, j)} outside {self.n} x {self.m}")

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, int]], n: int, m: int) -> "Relation":
        return cls(frozenset((int(i), int(j)) for i, j in pairs), n, m)

    def __len__(self) -> int:
        return len(self.pairs)

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)


def validate_coupling(plan, muX, muY, *, tol: float = MARGINAL_TOL) -> Coupling:
    """Check marginals and nonnegativity, then freeze the plan."""
    plan = np.array(plan, dtype=float)
    muX = np.array(muX, dtype=float)
    muY = np.array(muY, dtype=float)
    if plan.ndim != 2 or plan.shape != (muX.size, muY.size):
        raise LengthMismatch(
            f"plan shape {plan.shape} does not match marginals {muX.size} x {muY.size}"
        )
    if (plan < -tol).any():
        i, j = map(int, np.argwhere(plan < -tol)[0])
        raise ValidationError(f"negative plan entry at ({i}, {j})")
    plan = np.maximum(plan, 0.0)
    rows = plan.sum(axis=1)
    cols = plan.sum(axis=0)
    if np.abs(rows - muX).max() > tol:
        i = int(np.abs(rows - muX).argmax())
        raise MarginalMismatch(f"row {i} sums to {rows[i]!r}, expected {muX[i]!r}")
    if np.abs(cols - muY).max() > tol:
        j = int(np.abs(cols - muY).argmax())
        raise MarginalMismatch(f"column {j} sums to {cols[j]!r}, expected {muY[j]!r}")
    plan.setflags(write=False)
    muX.setflags(write=False)
    muY.setflags(write=False)
    return Coupling(plan=plan, muX=muX, muY=muY)


def diagonal_coupling(mu) -> Coupling:
    """The identity coupling of a measure with itself."""
    mu = np.asarray(mu, dtype=float)
    return validate_coupling(np.diag(mu), mu, mu)


def product_coupling(muX, muY) -> Coupling:
    """The independent coupling muX (x) muY."""
    muX = np.asarray(muX, dtype=float)
    muY = np.asarray(muY, dtype=float)
    return validate_coupling(np.outer(muX, muY), muX, muY)


def support(pi: Coupling, threshold: float = 0.0) -> Relation:
    """Index pairs carrying plan mass above the threshold."""
    if threshold < 0:
        raise ValidationError("support threshold must be >= 0")
    idx = np.argwhere(pi.plan > threshold)
    return Relation.of(map(tuple, idx), *pi.shape)


def glue(sigma: Coupling, tau: Coupling, *, tol: float = MARGINAL_TOL) -> np.ndarray:
    """Glue two couplings sharing their middle marginal.

    Returns the three-index array t with t[i, j, k] =
    sigma[i, j] * tau[j, k] / muY[j].  Projecting out the third (first)
    axis recovers sigma (tau) entrywise.
    """
    if sigma.shape[1] != tau.shape[0]:
        raise SizeMismatch(
            f"middle sizes differ: {sigma.shape[1]} vs {tau.shape[0]}"
        )
    muY = sigma.muY
    if np.abs(muY - tau.muX).max() > tol:
        j = int(np.abs(muY - tau.muX).argmax())
        raise MarginalMismatch(
            f"middle marginal differs at {j}: {muY[j]!r} vs {tau.muX[j]!r}"
        )
    # full support is enforced upstream; rows with muY[j] = 0 contribute 0
    inv = np.where(muY > 0, 1.0 / np.where(muY > 0, muY, 1.0), 0.0)
    return sigma.plan[:, :, None] * (tau.plan * inv[:, None])[None, :, :]


def glue_project(t: np.ndarray, axes: str) -> np.ndarray:
    """Project a glued three-index measure onto a pair of factors."""
    if axes == "12":
        return t.sum(axis=2)
    if axes == "23":
        return t.sum(axis=0)
    if axes == "13":
        return t.sum(axis=1)
    raise ValidationError(f"unknown projection {axes!r}")


def compose_couplings(sigma: Coupling, tau: Coupling, *, tol: float = MARGINAL_TOL) -> Coupling:
    """The composition tau o sigma, a coupling of the outer marginals."""
    if sigma.shape[1] != tau.shape[0]:
        raise SizeMismatch(
            f"middle sizes differ: {sigma.shape[1]} vs {tau.shape[0]}"
        )
    muY = sigma.muY
    if np.abs(muY - tau.muX).max() > tol:
        j = int(np.abs(muY - tau.muX).argmax())
        raise MarginalMismatch(
            f"middle marginal differs at {j}: {muY[j]!r} vs {tau.muX[j]!r}"
        )
    inv = np.where(muY > 0, 1.0 / np.where(muY > 0, muY, 1.0), 0.0)
    plan = sigma.plan @ (tau.plan * inv[:, None])
    return validate_coupling(plan, sigma.muX, tau.muY)


def relation_compose(S: Relation, T: Relation) -> Relation:
    """T o S: pairs (i, k) joinable through a common middle index."""
    if S.m != T.n:
        raise SizeMismatch(f"middle sizes differ: {S.m} vs {T.n}")
    heads: dict[int, list[int]] = {}
    for j, k in T.pairs:
        heads.setdefault(j, []).append(k)
    out = set()
    for i, j in S.pairs:
        for k in heads.get(j, ()):
            out.add((i, k))
    return Relation.of(out, S.n, T.m)


def relation_inverse(S: Relation) -> Relation:
    return Relation.of(((j, i) for i, j in S.pairs), S.m, S.n)


def relation_dom(S: Relation) -> frozenset[int]:
    return frozenset(i for i, _ in S.pairs)


def relation_im(S: Relation) -> frozenset[int]:
    return relation_dom(relation_inverse(S))


def _max_transportable(mu: np.ndarray, nu: np.ndarray, allowed: np.ndarray) -> float:
    """Largest mass routable from mu to nu through allowed cells.

    Breadth-first augmenting paths on the bipartite network; capacities
    are the marginal masses, allowed edges are uncapacitated.  Residuals
    below FLOW_TOL * 1e-2 are treated as exhausted.
    """
    n, m = allowed.shape
    # node ids: source = 0, rows 1..n, cols n+1..n+m, sink n+m+1
    src, snk = 0, n + m + 1
    cap: dict[tuple[int, int], float] = {}
    adj: dict[int, list[int]] = {v: [] for v in range(n + m + 2)}

    def add_edge(u, v, c):
        cap[(u, v)] = cap.get((u, v), 0.0) + c
        cap.setdefault((v, u), 0.0)
        if v not in adj[u]:
            adj[u].append(v)
        if u not in adj[v]:
            adj[v].append(u)

    big = float(mu.sum()) + 1.0
    for i in range(n):
        add_edge(src, 1 + i, float(mu[i]))
    for j in range(m):
        add_edge(1 + n + j, snk, float(nu[j]))
    for i in range(n):
        for j in range(m):
            if allowed[i, j]:
                add_edge(1 + i, 1 + n + j, big)

    eps = FLOW_TOL * 1e-2
    flow = 0.0
    while True:
        parent = {src: src}
        queue = [src]
        while queue and snk not in parent:
            u = queue.pop(0)
            for v in adj[u]:
                if v not in parent and cap[(u, v)] > eps:
                    parent[v] = u
                    queue.append(v)
        if snk not in parent:
            return flow
        # bottleneck along the path
        path = []
        v = snk
        while v != src:
            u = parent[v]
            path.append((u, v))
            v = u
        push = min(cap[e] for e in path)
        for u, v in path:
            cap[(u, v)] -= push
            cap[(v, u)] += push
        flow += push


def prokhorov(mu, nu, D) -> float:
    """Prokhorov distance between two measures on a finite metric space.

    Strassen's characterization: dP(mu, nu) <= eps iff some coupling puts
    mass at most eps on pairs with D > eps.  The optimum lies at
    max(eps, 1 - F(eps)) for a threshold eps among the distance values,
    where F is the max-flow through cells with D <= eps.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    D = np.asarray(D, dtype=float)
    if D.shape != (mu.size, nu.size):
        raise SizeMismatch(
            f"metric shape {D.shape} does not fit measures {mu.size}, {nu.size}"
        )
    # symmetric by construction: canonicalize the argument order
    if tuple(nu) < tuple(mu):
        mu, nu, D = nu, mu, D.T
    thresholds = np.unique(np.concatenate(([0.0], D.ravel())))
    best = math.inf
    for eps in thresholds:
        if eps >= best:
            break
        excess = 1.0 - _max_transportable(mu, nu, D <= eps)
        if excess < FLOW_TOL:  # clamp float residue of the flow sums
            excess = 0.0
        best = min(best, max(float(eps), excess))
    return float(best)


def product_metric(dX, dY) -> np.ndarray:
    """The l2-product metric on the row-major flattened product space."""
    dX = np.asarray(dX, dtype=float)
    dY = np.asarray(dY, dtype=float)
    n, m = dX.shape[0], dY.shape[0]
    out = np.sqrt(
        dX[:, None, :, None] ** 2 + dY[None, :, None, :] ** 2
    ).reshape(n * m, n * m)
    return out
