"""Equivariant box distance between mm-spaces with group actions.

Fix a coupling pi between two spaces.  A self-map gamma of either space
induces a function on ordered pairs of coupled points,

    f_gamma((x1,y1),(x2,y2)) = d(gamma(x1), x2)   (X side)
                               d(gamma(y1), y2)   (Y side),

and the worst discrepancy of two such maps over a subset S of supp pi is
the subset discrepancy d^S.  The coupling discrepancy is the exact optimum

    d^pi(g1, g2) = min over S of max(1 - pi(S), d^S(g1, g2)),

computed losslessly by scanning the finite set of pairwise violation
values as thresholds and solving a maximum-weight independent set on the
conflict graph at each threshold.  The box functional of a coupling is the
Hausdorff distance between the two groups under d^pi; the box distance is
its infimum over couplings, approached from above by a search over
transportation-polytope vertices (box_upper) and exactly on a mass grid by
brute force (box_oracle, with the discretization error reported).

All reported values are labeled: UPPER for certified upper bounds, ORACLE
with an error bar for grid brute force.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .coupling import (
    Coupling,
    Relation,
    product_coupling,
    support,
    validate_coupling,
)
from .errors import (
    BudgetExceeded,
    GridIncompatible,
    SpaceMismatch,
    TooLarge,
)
from .group import MMAction, trivial_action
from .mmspace import FiniteMMSpace

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SideMap:
    """A self-map of one of the two coupled spaces."""

    side: str  # "X" or "Y"
    perm: tuple[int, ...]

    def __post_init__(self):
        if self.side not in ("X", "Y"):
            raise SpaceMismatch(f"side must be 'X' or 'Y', got {self.side!r}")


@dataclass(frozen=True)
class DiscrepancyCertificate:
    """Witness for a coupling discrepancy value.

    value = max(miss, threshold) where miss is the plan mass outside the
    subset and threshold is the subset discrepancy recomputed on it.
    """

    value: float
    subset: Relation
    threshold: float
    miss: float
    exact: bool = True


@dataclass(frozen=True)
class MwisResult:
    mass: float
    vertices: tuple[int, ...]
    exact: bool


@dataclass(frozen=True)
class SearchBudget:
    """Effort knobs for the coupling search; all deterministic via seed."""

    seed: int = 0
    nw_samples: int = 16
    perm_all_cap: int = 4
    perm_samples: int = 8
    refine_steps: int = 40
    mwis_exact: int = 30
    allow_heuristic: bool = True
    dconc_candidates: int = 6
    probe_grid_frac: int = 8
    probe_cap: int = 512
    oracle_table_cap: int = 500_000


@dataclass(frozen=True)
class PairMatch:
    """Best partner and certificate for one group element."""

    g_index: int
    h_index: int
    value: float
    cert: DiscrepancyCertificate


@dataclass(frozen=True)
class BoxPiResult:
    value: float
    row: tuple[PairMatch, ...]  # per element of the first group
    col: tuple[PairMatch, ...]  # per element of the second group
    exact: bool


@dataclass(frozen=True)
class BoundResult:
    value: float
    kind: str  # "UPPER" or "ORACLE"
    err: float
    coupling: Coupling | None
    details: BoxPiResult | None
    seed: int | None = None


# ---------------------------------------------------------------------------
# subset and coupling discrepancies
# ---------------------------------------------------------------------------


def _pair_field(m: SideMap, xs: np.ndarray, ys: np.ndarray,
                X: FiniteMMSpace, Y: FiniteMMSpace) -> np.ndarray:
    """Matrix F[p, q] = d(gamma(first of p), first of q) on support points."""
    perm = np.asarray(m.perm, dtype=int)
    if m.side == "X":
        return X.dist[np.ix_(perm[xs], xs)]
    return Y.dist[np.ix_(perm[ys], ys)]


def subset_discrepancy(
    m1: SideMap, m2: SideMap, S: Relation, X: FiniteMMSpace, Y: FiniteMMSpace
) -> float:
    """Worst discrepancy of two self-maps over ordered pairs of S.

    The empty subset has discrepancy 0 by convention.
    """
    if len(S) == 0:
        return 0.0
    pairs = S.sorted_pairs()
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    F1 = _pair_field(m1, xs, ys, X, Y)
    F2 = _pair_field(m2, xs, ys, X, Y)
    return float(np.abs(F1 - F2).max())


def mwis(weights, edges, *, exact_budget: int = 30, allow_heuristic: bool = False) -> MwisResult:
    """Maximum-weight independent set.

    Exact branch and bound (greedy initial bound, degree-ordered
    branching, lexicographically smallest optimal vertex set) up to
    exact_budget vertices; beyond that a greedy plus swap heuristic when
    allowed, otherwise BudgetExceeded.
    """
    w = [float(x) for x in weights]
    n = len(w)
    nbr = [0] * n
    for u, v in edges:
        if u == v:
            continue
        nbr[u] |= 1 << v
        nbr[v] |= 1 << u
    if n > exact_budget:
        if not allow_heuristic:
            raise BudgetExceeded(
                f"{n} vertices exceed the exact MWIS budget {exact_budget}"
            )
        verts = _mwis_heuristic(w, nbr)
        return MwisResult(math.fsum(w[i] for i in verts), tuple(sorted(verts)), False)
    verts = _mwis_exact(w, nbr)
    return MwisResult(math.fsum(w[i] for i in verts), tuple(sorted(verts)), True)


def _greedy_mwis(w: list[float], nbr: list[int]) -> list[int]:
    n = len(w)
    order = sorted(range(n), key=lambda i: (-w[i], i))
    mask = (1 << n) - 1
    out = []
    for i in order:
        if mask >> i & 1:
            out.append(i)
            mask &= ~(nbr[i] | (1 << i))
    return sorted(out)


def _mwis_heuristic(w: list[float], nbr: list[int]) -> list[int]:
    n = len(w)
    chosen = set(_greedy_mwis(w, nbr))
    for _ in range(2 * n):
        improved = False
        for v in range(n):
            if v in chosen:
                continue
            conflicts = [u for u in chosen if nbr[v] >> u & 1]
            gain = w[v] - math.fsum(w[u] for u in conflicts)
            if gain > TIE_TOL:
                chosen.difference_update(conflicts)
                chosen.add(v)
                improved = True
        if not improved:
            break
    return sorted(chosen)


def _mwis_exact(w: list[float], nbr: list[int]) -> list[int]:
    n = len(w)
    if n == 0:
        return []
    best_set = _greedy_mwis(w, nbr)
    best_mass = math.fsum(w[i] for i in best_set)
    best_tuple = tuple(best_set)

    def popweight(mask: int) -> float:
        total = 0.0
        while mask:
            lsb = mask & -mask
            total += w[lsb.bit_length() - 1]
            mask ^= lsb
        return total

    def rec(mask: int, cur: float, rem: float, verts: list[int]):
        nonlocal best_mass, best_tuple
        if cur + rem < best_mass - TIE_TOL:
            return
        if mask == 0:
            cand = tuple(sorted(verts))
            if cur > best_mass + TIE_TOL or (
                abs(cur - best_mass) <= TIE_TOL and cand < best_tuple
            ):
                best_mass, best_tuple = cur, cand
            return
        # branch on the highest-degree remaining vertex, smallest index first
        pick, pick_deg = -1, -1
        m = mask
        while m:
            lsb = m & -m
            i = lsb.bit_length() - 1
            deg = (nbr[i] & mask).bit_count()
            if deg > pick_deg:
                pick, pick_deg = i, deg
            m ^= lsb
        removed = (nbr[pick] | (1 << pick)) & mask
        rec(mask & ~removed, cur + w[pick], rem - popweight(removed), verts + [pick])
        rec(mask & ~(1 << pick), cur, rem - w[pick], verts)

    full = (1 << n) - 1
    rec(full, 0.0, math.fsum(w), [])
    return list(best_tuple)


def _subset_scan(
    V: np.ndarray, w: np.ndarray, *, exact_budget: int, allow_heuristic: bool
) -> tuple[float, tuple[int, ...], float, float, bool]:
    """Optimize max(missed mass, subset discrepancy) over support subsets.

    V is the matrix of ordered pairwise violations on the support points,
    w their plan masses.  Returns (value, chosen vertex tuple, recomputed
    threshold, missed mass, exact flag).
    """
    s = len(w)
    if s > exact_budget and not allow_heuristic:
        raise TooLarge(s, exact_budget, "coupling support")
    diag = V.diagonal()
    Vsym = np.maximum(V, V.T)
    thresholds = np.unique(np.concatenate(([0.0], V.ravel())))
    best = (1.0, (), 0.0, 1.0)  # empty subset baseline: miss 1, discrepancy 0
    best_value = 1.0
    exact = True
    for eps in thresholds:
        if eps >= best_value:
            break
        alive = np.flatnonzero(diag <= eps)
        if alive.size == 0:
            continue
        sub = Vsym[np.ix_(alive, alive)]
        edges = [
            (int(p), int(q))
            for p, q in zip(*np.nonzero(np.triu(sub > eps, k=1)))
        ]
        res = mwis(
            w[alive], edges, exact_budget=exact_budget, allow_heuristic=allow_heuristic
        )
        exact = exact and res.exact
        chosen = tuple(int(alive[i]) for i in res.vertices)
        if chosen:
            outside = sorted(set(range(s)) - set(chosen))
            miss = min(1.0, max(0.0, math.fsum(float(w[i]) for i in outside)))
        else:
            miss = 1.0
        value = max(miss, float(eps))
        if value < best_value - 1e-15:
            best_value = value
            best = (value, chosen, float(eps), miss)
        if not edges and alive.size == s:
            break  # larger thresholds only raise the candidate value
    value, chosen, eps, miss = best
    if chosen:
        idx = np.array(chosen, dtype=int)
        threshold = float(V[np.ix_(idx, idx)].max())
    else:
        threshold = 0.0
    return max(miss, threshold), chosen, threshold, miss, exact


def coupling_discrepancy(
    m1: SideMap,
    m2: SideMap,
    pi: Coupling,
    X: FiniteMMSpace,
    Y: FiniteMMSpace,
    *,
    exact_budget: int = 30,
    allow_heuristic: bool = False,
) -> DiscrepancyCertificate:
    """Exact optimum of max(1 - pi(S), d^S) over subsets of supp pi."""
    pairs = support(pi).sorted_pairs()
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    w = pi.plan[xs, ys]
    F1 = _pair_field(m1, xs, ys, X, Y)
    F2 = _pair_field(m2, xs, ys, X, Y)
    V = np.abs(F1 - F2)
    value, chosen, threshold, miss, exact = _subset_scan(
        V, w, exact_budget=exact_budget, allow_heuristic=allow_heuristic
    )
    rel = Relation.of((pairs[i] for i in chosen), *pi.shape)
    return DiscrepancyCertificate(
        value=value, subset=rel, threshold=threshold, miss=miss, exact=exact
    )


# ---------------------------------------------------------------------------
# Hausdorff over the two groups
# ---------------------------------------------------------------------------


def _check_coupled(A: MMAction, B: MMAction, pi: Coupling) -> None:
    if pi.shape != (A.space.n, B.space.n):
        raise SpaceMismatch(
            f"coupling shape {pi.shape} does not match spaces "
            f"{A.space.n} x {B.space.n}"
        )


def box_via_coupling(
    A: MMAction,
    B: MMAction,
    pi: Coupling,
    *,
    exact_budget: int = 30,
    allow_heuristic: bool = True,
) -> BoxPiResult:
    """Hausdorff distance between the two groups under the coupling
    discrepancy: every element of either group must be shadowed by one of
    the other within the reported value."""
    _check_coupled(A, B, pi)
    X, Y = A.space, B.space
    pairs = support(pi).sorted_pairs()
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    w = pi.plan[xs, ys]
    fields_G = [
        _pair_field(SideMap("X", g), xs, ys, X, Y) for g in A.elements
    ]
    fields_H = [
        _pair_field(SideMap("Y", h), xs, ys, X, Y) for h in B.elements
    ]
    exact = True
    values = np.empty((len(fields_G), len(fields_H)))
    certs: dict[tuple[int, int], DiscrepancyCertificate] = {}
    for gi, FG in enumerate(fields_G):
        for hj, FH in enumerate(fields_H):
            V = np.abs(FG - FH)
            value, chosen, threshold, miss, ok = _subset_scan(
                V, w, exact_budget=exact_budget, allow_heuristic=allow_heuristic
            )
            exact = exact and ok
            values[gi, hj] = value
            certs[(gi, hj)] = DiscrepancyCertificate(
                value=value,
                subset=Relation.of((pairs[i] for i in chosen), *pi.shape),
                threshold=threshold,
                miss=miss,
                exact=ok,
            )
    row = []
    for gi in range(values.shape[0]):
        hj = int(values[gi].argmin())
        row.append(PairMatch(gi, hj, float(values[gi, hj]), certs[(gi, hj)]))
    col = []
    for hj in range(values.shape[1]):
        gi = int(values[:, hj].argmin())
        col.append(PairMatch(gi, hj, float(values[gi, hj]), certs[(gi, hj)]))
    value = max(
        max((m.value for m in row), default=0.0),
        max((m.value for m in col), default=0.0),
    )
    return BoxPiResult(value=value, row=tuple(row), col=tuple(col), exact=exact)


# ---------------------------------------------------------------------------
# coupling candidates and the upper-bound search
# ---------------------------------------------------------------------------


def northwest_corner(muX, muY, row_order=None, col_order=None) -> Coupling:
    """The northwest-corner vertex of the transportation polytope for the
    given row and column orders."""
    muX = np.asarray(muX, dtype=float)
    muY = np.asarray(muY, dtype=float)
    rows = list(range(muX.size)) if row_order is None else [int(r) for r in row_order]
    cols = list(range(muY.size)) if col_order is None else [int(c) for c in col_order]
    plan = np.zeros((muX.size, muY.size))
    i = j = 0
    a = float(muX[rows[0]])
    b = float(muY[cols[0]])
    while i < len(rows) and j < len(cols):
        move = min(a, b)
        plan[rows[i], cols[j]] += move
        a -= move
        b -= move
        advanced = False
        if a <= 1e-15 and i + 1 <= len(rows):
            i += 1
            if i < len(rows):
                a = float(muX[rows[i]])
            advanced = True
        if b <= 1e-15 and j + 1 <= len(cols):
            j += 1
            if j < len(cols):
                b = float(muY[cols[j]])
            advanced = True
        if not advanced:  # float stalemate: dump the residue and stop
            plan[rows[i], cols[j]] += max(a, b)
            break
    # absorb float residue on the last cell so marginals match exactly
    plan[rows[-1], cols[-1]] += muX.sum() - plan.sum()
    return validate_coupling(plan, muX, muY)


def permutation_coupling(mu, perm) -> Coupling:
    """The deterministic coupling pushing point i to point perm[i]."""
    mu = np.asarray(mu, dtype=float)
    plan = np.zeros((mu.size, mu.size))
    for i, j in enumerate(perm):
        plan[i, j] = mu[i]
    return validate_coupling(plan, mu, plan.sum(axis=0))


def candidate_couplings(muX, muY, budget: SearchBudget) -> list[Coupling]:
    """Deterministic list of starting couplings for the upper-bound search:
    northwest-corner vertices under seeded row/column orders, permutation
    couplings when both measures are uniform of equal size, and the
    product coupling when its support fits the exact solver."""
    muX = np.asarray(muX, dtype=float)
    muY = np.asarray(muY, dtype=float)
    n, m = muX.size, muY.size
    rng = np.random.default_rng(budget.seed)
    out: list[Coupling] = [northwest_corner(muX, muY)]
    uniform = (
        n == m
        and np.allclose(muX, 1.0 / n, atol=1e-12)
        and np.allclose(muY, 1.0 / m, atol=1e-12)
    )
    if uniform:
        if n <= budget.perm_all_cap:
            for perm in itertools.permutations(range(n)):
                out.append(permutation_coupling(muX, perm))
        else:
            out.append(permutation_coupling(muX, tuple(range(n))))
            for _ in range(budget.perm_samples):
                out.append(permutation_coupling(muX, tuple(rng.permutation(n))))
    for _ in range(budget.nw_samples):
        out.append(
            northwest_corner(muX, muY, rng.permutation(n), rng.permutation(m))
        )
    if n * m <= budget.mwis_exact:
        out.append(product_coupling(muX, muY))
    seen = set()
    unique = []
    for c in out:
        key = c.plan.tobytes()
        if key not in seen:
            seen.add(key)
            unique.append(c)
    return unique


def _refine_coupling(pi: Coupling, objective, steps: int, rng) -> tuple[float, Coupling]:
    """Local search along transportation-polytope edges: move the full
    feasible mass around a random 2x2 cycle, keep strict improvements."""
    n, m = pi.shape
    best_val = objective(pi)
    best = pi
    if n < 2 or m < 2:
        return best_val, best
    for _ in range(steps):
        i, k = sorted(rng.choice(n, size=2, replace=False))
        j, l = sorted(rng.choice(m, size=2, replace=False))
        plan = best.plan.copy()
        delta = min(plan[i, j], plan[k, l])
        if delta <= 1e-12:
            delta = -min(plan[i, l], plan[k, j])
            if -delta <= 1e-12:
                continue
        plan[i, j] -= delta
        plan[k, l] -= delta
        plan[i, l] += delta
        plan[k, j] += delta
        cand = validate_coupling(plan, best.muX, best.muY)
        val = objective(cand)
        if val < best_val - 1e-12:
            best_val, best = val, cand
    return best_val, best


def box_upper(A: MMAction, B: MMAction, budget: SearchBudget | None = None) -> BoundResult:
    """Certified upper bound for the equivariant box distance, with the
    witness coupling.  The true distance is the infimum over all
    couplings; any coupling certifies an upper bound, and the search keeps
    the best one found."""
    budget = budget or SearchBudget()

    def objective(pi: Coupling) -> float:
        return box_via_coupling(
            A, B, pi,
            exact_budget=budget.mwis_exact,
            allow_heuristic=budget.allow_heuristic,
        ).value

    rng = np.random.default_rng(budget.seed + 1)
    best_val = math.inf
    best_pi = None
    for pi in candidate_couplings(A.space.mass, B.space.mass, budget):
        val = objective(pi)
        if val < best_val - 1e-15:
            best_val, best_pi = val, pi
    best_val, best_pi = _refine_coupling(best_pi, objective, budget.refine_steps, rng)
    details = box_via_coupling(
        A, B, best_pi,
        exact_budget=budget.mwis_exact,
        allow_heuristic=budget.allow_heuristic,
    )
    return BoundResult(
        value=details.value,
        kind="UPPER",
        err=0.0,
        coupling=best_pi,
        details=details,
        seed=budget.seed,
    )


# ---------------------------------------------------------------------------
# grid oracle
# ---------------------------------------------------------------------------


def _integer_tables(row_units: list[int], col_units: list[int], cap: int):
    """All nonnegative integer matrices with the given margins."""
    n, m = len(row_units), len(col_units)
    table = np.zeros((n, m), dtype=int)
    cols = list(col_units)
    count = 0

    def rec(i: int):
        nonlocal count
        if i == n:
            if all(c == 0 for c in cols):
                count += 1
                if count > cap:
                    raise BudgetExceeded(
                        f"more than {cap} grid couplings; coarsen the grid"
                    )
                yield table.copy()
            return
        # distribute row_units[i] over the m columns bounded by cols
        def fill(j: int, left: int):
            if j == m - 1:
                if left <= cols[j]:
                    table[i, j] = left
                    cols[j] -= left
                    yield from rec(i + 1)
                    cols[j] += left
                    table[i, j] = 0
                return
            upper = min(left, cols[j])
            for k in range(upper + 1):
                table[i, j] = k
                cols[j] -= k
                yield from fill(j + 1, left - k)
                cols[j] += k
            table[i, j] = 0

        yield from fill(0, row_units[i])

    yield from rec(0)


def grid_couplings(muX, muY, grid: float, *, cap: int = 500_000):
    """All couplings whose entries are multiples of the mass grid."""
    muX = np.asarray(muX, dtype=float)
    muY = np.asarray(muY, dtype=float)
    row_units = []
    for v in muX:
        k = v / grid
        if abs(k - round(k)) > 1e-9:
            raise GridIncompatible(f"marginal {v!r} is not a multiple of {grid!r}")
        row_units.append(int(round(k)))
    col_units = []
    for v in muY:
        k = v / grid
        if abs(k - round(k)) > 1e-9:
            raise GridIncompatible(f"marginal {v!r} is not a multiple of {grid!r}")
        col_units.append(int(round(k)))
    for table in _integer_tables(row_units, col_units, cap):
        yield validate_coupling(table * grid, muX, muY)


def box_oracle(
    A: MMAction,
    B: MMAction,
    grid: float,
    *,
    max_cells: int = 12,
    budget: SearchBudget | None = None,
) -> BoundResult:
    """Brute-force minimum of the box functional over the mass grid.

    Exact on the grid; the true infimum lies within err = n * m * grid of
    the reported value because moving one grid unit of mass changes the
    functional by at most the unit through the missed-mass term.
    """
    budget = budget or SearchBudget()
    n, m = A.space.n, B.space.n
    if n * m > max_cells:
        raise TooLarge(n * m, max_cells, "oracle plan")
    best_val = math.inf
    best_pi = None
    best_details = None
    for pi in grid_couplings(
        A.space.mass, B.space.mass, grid, cap=budget.oracle_table_cap
    ):
        details = box_via_coupling(
            A, B, pi, exact_budget=budget.mwis_exact, allow_heuristic=False
        )
        if details.value < best_val - 1e-15:
            best_val = details.value
            best_pi = pi
            best_details = details
    return BoundResult(
        value=best_val,
        kind="ORACLE",
        err=n * m * grid,
        coupling=best_pi,
        details=best_details,
        seed=None,
    )


def box_upper_plain(
    X: FiniteMMSpace, Y: FiniteMMSpace, budget: SearchBudget | None = None
) -> BoundResult:
    """box_upper with trivial groups on both sides."""
    return box_upper(trivial_action(X), trivial_action(Y), budget)
