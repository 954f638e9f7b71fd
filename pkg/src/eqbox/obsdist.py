"""Equivariant observable distance between mm-spaces with group actions.

For a coupling pi, a pair (g, h) of automorphisms and 1-Lipschitz
functions f on X, f' on Y, the twisted comparison

    rho(f, f') = max( dKF_pi(f(x) - f'(y)),  dKF_pi(f(g x) - f'(h y)) )

measures how badly f' shadows f, both directly and after the group twist.
The per-coupling functional rho(g, h) is the Hausdorff distance between
the two full 1-Lipschitz polytopes under this comparison, and the
observable distance takes the Hausdorff distance between the groups and
the infimum over couplings.

The Lipschitz polytopes are infinite even for finite spaces, so two
computables bracket the functional:

  * an oracle on a value grid: both polytopes discretized with the first
    coordinate pinned to 0, crossed with all constant shifts within a
    bounded window (the comparison is invariant under a common shift),
    reported with rounding slack 2 * (n - 1) * grid,
  * an upper bound combining four times the worst certificate value of the
    underlying box-distance subsets with a constructive matching that
    extends probe functions across the coupling by the McShane formula,
    keeping whichever is smaller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxdist import (
    BoundResult,
    DiscrepancyCertificate,
    SearchBudget,
    SideMap,
    _subset_scan,
    candidate_couplings,
    subset_discrepancy,
    support,
)
from .coupling import Coupling, Relation, relation_inverse
from .errors import EmptyRelation, SpaceMismatch, TooLarge
from .group import MMAction, trivial_action
from .mmspace import (
    FiniteMMSpace,
    LipFunction,
    ky_fan,
    ky_fan_batch,
    lip_check,
)

FAMILY_CAP = 200_000


def rho_pair(f: LipFunction, fprime: LipFunction, g, h, pi: Coupling) -> float:
    """The twisted Ky Fan comparison of two Lipschitz functions."""
    g = np.asarray(g, dtype=int)
    h = np.asarray(h, dtype=int)
    n, m = pi.shape
    if f.values.size != n or g.size != n:
        raise SpaceMismatch("f and g must live on the first coupled space")
    if fprime.values.size != m or h.size != m:
        raise SpaceMismatch("f' and h must live on the second coupled space")
    w = pi.plan.ravel()
    fv, fpv = f.values, fprime.values
    d1 = (fv[:, None] - fpv[None, :]).ravel()
    d2 = (fv[g][:, None] - fpv[h][None, :]).ravel()
    zero = np.zeros_like(d1)
    return max(ky_fan(d1, zero, w), ky_fan(d2, zero, w))


def mcshane_extend(f: LipFunction, S: Relation, Y: FiniteMMSpace) -> LipFunction:
    """Tight 1-Lipschitz extension of f across a relation:
    y -> min over (x', y') in S of d_Y(y, y') + f(x')."""
    if len(S) == 0:
        raise EmptyRelation("cannot extend through an empty relation")
    pairs = S.sorted_pairs()
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    vals = (Y.dist[:, ys] + f.values[xs][None, :]).min(axis=1)
    return lip_check(Y, vals)


def lip_grid_family(
    space: FiniteMMSpace,
    grid: float,
    *,
    cap: int = FAMILY_CAP,
    truncate: bool = False,
) -> np.ndarray:
    """All 1-Lipschitz vectors with first value 0 and the rest on the grid.

    Past the cap the enumeration either raises (oracle use, where
    completeness matters) or stops early (probe use)."""
    n = space.n
    dist = space.dist
    if n == 1:
        return np.zeros((1, 1))
    axes = []
    for i in range(1, n):
        k = int(math.floor(dist[0, i] / grid + 1e-9))
        axes.append(grid * np.arange(-k, k + 1))
    rows: list[np.ndarray] = []
    values = np.zeros(n)

    class _Full(Exception):
        pass

    def rec(i: int):
        if i == n:
            if len(rows) >= cap:
                if truncate:
                    raise _Full
                raise TooLarge(len(rows), cap, "Lipschitz grid family")
            rows.append(values.copy())
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

    try:
        rec(1)
    except _Full:
        pass
    return np.array(rows)


@dataclass(frozen=True)
class RhoOracleContext:
    """Cached grid families for one pair of spaces and one grid step.

    Anchors (the constant shifts of the opposite family) are spaced at
    twice the value grid over the hull of attainable offsets: the optimal
    shift lies between the extreme coupled differences, and the combined
    pinned-family plus anchor rounding stays within the reported slack
    2 * (n - 1) * grid."""

    X: FiniteMMSpace
    Y: FiniteMMSpace
    grid: float
    FX: np.ndarray
    FY: np.ndarray
    anchors: np.ndarray

    @property
    def slack(self) -> float:
        return 2.0 * (max(self.X.n, self.Y.n) - 1) * self.grid


def rho_oracle_context(
    X: FiniteMMSpace,
    Y: FiniteMMSpace,
    grid: float,
    *,
    max_points: int = 4,
    cap: int = FAMILY_CAP,
) -> RhoOracleContext:
    if X.n > max_points or Y.n > max_points:
        raise TooLarge(max(X.n, Y.n), max_points, "rho oracle space")
    FX = lip_grid_family(X, grid, cap=cap)
    FY = lip_grid_family(Y, grid, cap=cap)
    amp = X.diam + Y.diam
    step = 2.0 * grid
    k = int(math.ceil(amp / step))
    anchors = step * np.arange(-k, k + 1)
    return RhoOracleContext(X=X, Y=Y, grid=grid, FX=FX, FY=FY, anchors=anchors)


def _kyfan_shared_diffs(T: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Ky Fan values of |T| against zero under every weight row.

    T has shape (..., cells) and is nonnegative; W has shape (P, cells).
    The sort order of the differences is shared across weight rows, so it
    is computed once.  Returns shape (P, ...)."""
    idx = np.argsort(-T, axis=-1, kind="stable")
    d_sorted = np.take_along_axis(T, idx, axis=-1)
    Wb = np.broadcast_to(
        W.reshape((W.shape[0],) + (1,) * (T.ndim - 1) + (W.shape[1],)),
        (W.shape[0],) + T.shape,
    )
    idxb = np.broadcast_to(idx[None], Wb.shape)
    m_sorted = np.take_along_axis(Wb, idxb, axis=-1)
    cum = np.cumsum(m_sorted, axis=-1)
    vals = np.concatenate([d_sorted, np.zeros(T.shape[:-1] + (1,))], axis=-1)
    masses = np.concatenate([np.zeros(cum.shape[:-1] + (1,)), cum], axis=-1)
    return np.maximum(vals[None], masses).min(axis=-1)


def _directed_min_batch(
    FA: np.ndarray,
    FB: np.ndarray,
    anchors: np.ndarray,
    ga: np.ndarray,
    hb: np.ndarray,
    acells: np.ndarray,
    bcells: np.ndarray,
    W: np.ndarray,
    *,
    chunk_elems: int = 4_000_000,
) -> np.ndarray:
    """Per-coupling, per-row minimum of rho over the anchored family.

    Entry (p, a) is min over (b, c) of
    max(dKF_Wp(|FA[a] - FB[b] - c|), dKF_Wp of the twisted term)."""
    A1 = FA[:, acells]
    A2 = FA[:, ga]
    B1 = FB[:, bcells]
    B2 = FB[:, hb]
    P = W.shape[0]
    nA, cells = A1.shape
    out = np.full((P, nA), np.inf)
    nC = anchors.size
    step = max(1, chunk_elems // max(1, P * nA * cells))
    for b in range(FB.shape[0]):
        D1 = A1 - B1[b]
        D2 = A2 - B2[b]
        for c0 in range(0, nC, step):
            shift = anchors[c0 : c0 + step][None, :, None]
            T1 = np.abs(D1[:, None, :] - shift)
            T2 = np.abs(D2[:, None, :] - shift)
            r = np.maximum(_kyfan_shared_diffs(T1, W), _kyfan_shared_diffs(T2, W))
            np.minimum(out, r.min(axis=2), out=out)
    return out


def rho_hausdorff_oracle_batch(
    ctx: RhoOracleContext, g, h, W: np.ndarray
) -> np.ndarray:
    """Grid oracle values, one per weight row of W (couplings flattened
    row-major to cell weights)."""
    g = np.asarray(g, dtype=int)
    h = np.asarray(h, dtype=int)
    n, m = ctx.X.n, ctx.Y.n
    icells = np.repeat(np.arange(n), m)
    jcells = np.tile(np.arange(m), n)
    d1 = _directed_min_batch(
        ctx.FX, ctx.FY, ctx.anchors, g[icells], h[jcells], icells, jcells, W
    ).max(axis=1)
    # sweeping the Y side pinned: rho(fx + c, fy) = rho(fx, fy - c)
    d2 = _directed_min_batch(
        ctx.FY, ctx.FX, ctx.anchors, h[jcells], g[icells], jcells, icells, W
    ).max(axis=1)
    return np.maximum(d1, d2)


def rho_hausdorff_oracle(ctx: RhoOracleContext, g, h, pi: Coupling) -> float:
    """Grid oracle for the Hausdorff distance of the Lipschitz polytopes
    under the twisted comparison; true value within ctx.slack."""
    if pi.shape != (ctx.X.n, ctx.Y.n):
        raise SpaceMismatch("coupling does not match the oracle context")
    return float(rho_hausdorff_oracle_batch(ctx, g, h, pi.plan.ravel()[None])[0])


def _mcshane_rows(F: np.ndarray, xs: np.ndarray, ys: np.ndarray, DY: np.ndarray) -> np.ndarray:
    """Row-wise McShane extension: out[p, y] = min_s DY[y, ys[s]] + F[p, xs[s]]."""
    return (DY[None, :, ys] + F[:, None, xs]).min(axis=2)


def _rho_rows(
    F: np.ndarray,
    Fp: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    pi: Coupling,
) -> np.ndarray:
    """rho for matched rows: F[p] on X against Fp[p] on Y."""
    n, m = pi.shape
    w = pi.plan.ravel()
    icells = np.repeat(np.arange(n), m)
    jcells = np.tile(np.arange(m), n)
    T1 = F[:, icells] - Fp[:, jcells]
    T2 = F[:, g[icells]] - Fp[:, h[jcells]]
    return np.maximum(ky_fan_batch(T1, w), ky_fan_batch(T2, w))


def probe_family(
    space: FiniteMMSpace, grid: float, *, cap: int = 512, seed: int = 0
) -> np.ndarray:
    """Probe functions for the constructive upper bound.

    Distance functions always; at oracle scale also the pinned grid
    family (so the constructive matching dominates the grid oracle up to
    its slack), and on larger spaces seeded samples of the Lipschitz
    polytope through the tight-extension map."""
    rows = [space.dist[i] for i in range(space.n)]
    if space.n <= 4:
        fam = lip_grid_family(space, grid, cap=max(cap, 1), truncate=True)
        if fam.shape[0] > cap:
            step = int(math.ceil(fam.shape[0] / cap))
            fam = fam[::step]
        if fam.size:
            rows.extend(fam)
    else:
        rng = np.random.default_rng([seed, space.n])
        count = min(cap, 64)
        offs = rng.uniform(0.0, space.diam, size=(count, space.n))
        rows.extend(np.min(offs[:, None, :] + space.dist[None, :, :], axis=2))
    return np.array(rows)


def rho_hausdorff_upper(
    g,
    h,
    pi: Coupling,
    X: FiniteMMSpace,
    Y: FiniteMMSpace,
    S: Relation,
    Sp: Relation,
    Spp: Relation,
    gp,
    hp,
    *,
    probe_grid: float | None = None,
    probe_cap: int = 512,
    probes_X: np.ndarray | None = None,
    probes_Y: np.ndarray | None = None,
) -> float:
    """Upper bound for the twisted Lipschitz Hausdorff distance.

    Takes the subsets S, Sp, Spp of supp pi witnessing small box-distance
    discrepancies for (g, h), (gp, id_Y) and (id_X, hp).  Returns the
    smaller of four times the worst witnessed quantity and the value of
    the constructive McShane matching evaluated on probe families.
    """
    g = np.asarray(g, dtype=int)
    h = np.asarray(h, dtype=int)
    id_X = tuple(range(X.n))
    id_Y = tuple(range(Y.n))
    quantities = [
        max(0.0, 1.0 - pi.mass_of(S.pairs)),
        max(0.0, 1.0 - pi.mass_of(Sp.pairs)),
        max(0.0, 1.0 - pi.mass_of(Spp.pairs)),
        subset_discrepancy(SideMap("X", tuple(int(v) for v in g)),
                           SideMap("Y", tuple(int(v) for v in h)), S, X, Y),
        subset_discrepancy(SideMap("X", tuple(int(v) for v in gp)),
                           SideMap("Y", id_Y), Sp, X, Y),
        subset_discrepancy(SideMap("X", id_X),
                           SideMap("Y", tuple(int(v) for v in hp)), Spp, X, Y),
    ]
    eps = max(quantities)
    # the twisted comparison never exceeds 1: the Ky Fan metric is capped
    # by the total mass
    bound = min(4.0 * eps, 1.0)

    pg = probe_grid
    if pg is None:
        pg = max(X.diam, Y.diam, 1e-9) / 8.0
    SSp = Relation.of(S.pairs & Sp.pairs, *pi.shape)
    SSpp = Relation.of(S.pairs & Spp.pairs, *pi.shape)
    if len(SSp) == 0 or len(SSpp) == 0:
        return bound

    pairs1 = SSp.sorted_pairs()
    xs1 = np.array([p[0] for p in pairs1], dtype=int)
    ys1 = np.array([p[1] for p in pairs1], dtype=int)
    FX = probes_X if probes_X is not None else probe_family(X, pg, cap=probe_cap)
    matched_Y = _mcshane_rows(FX, xs1, ys1, Y.dist)
    d1 = _rho_rows(FX, matched_Y, g, h, pi).max()

    inv = relation_inverse(SSpp)
    pairs2 = inv.sorted_pairs()
    ys2 = np.array([p[0] for p in pairs2], dtype=int)
    xs2 = np.array([p[1] for p in pairs2], dtype=int)
    FY = probes_Y if probes_Y is not None else probe_family(Y, pg, cap=probe_cap)
    matched_X = _mcshane_rows(FY, ys2, xs2, X.dist)
    d2 = _rho_rows(matched_X, FY, g, h, pi).max()

    constructive = float(max(d1, d2))
    return min(bound, constructive)


# ---------------------------------------------------------------------------
# Hausdorff over the groups, per coupling and with coupling search
# ---------------------------------------------------------------------------


def _pair_values_and_certs(A: MMAction, B: MMAction, pi: Coupling, budget: SearchBudget):
    from .boxdist import _pair_field  # shared support geometry

    X, Y = A.space, B.space
    pairs = support(pi).sorted_pairs()
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    w = pi.plan[xs, ys]
    FG = [_pair_field(SideMap("X", g), xs, ys, X, Y) for g in A.elements]
    FH = [_pair_field(SideMap("Y", h), xs, ys, X, Y) for h in B.elements]
    values = np.empty((len(FG), len(FH)))
    certs = {}
    for gi, Fg in enumerate(FG):
        for hj, Fh in enumerate(FH):
            V = np.abs(Fg - Fh)
            value, chosen, threshold, miss, ok = _subset_scan(
                V, w,
                exact_budget=budget.mwis_exact,
                allow_heuristic=budget.allow_heuristic,
            )
            values[gi, hj] = value
            certs[(gi, hj)] = DiscrepancyCertificate(
                value=value,
                subset=Relation.of((pairs[i] for i in chosen), *pi.shape),
                threshold=threshold,
                miss=miss,
                exact=ok,
            )
    return values, certs


@dataclass(frozen=True)
class DconcPiResult:
    value: float
    slack: float
    mode: str


def dconc_via_coupling(
    A: MMAction,
    B: MMAction,
    pi: Coupling,
    *,
    mode: str = "upper",
    grid: float | None = None,
    budget: SearchBudget | None = None,
    probes_X: np.ndarray | None = None,
    probes_Y: np.ndarray | None = None,
) -> DconcPiResult:
    """Hausdorff distance between the groups under the per-pair twisted
    Lipschitz functional, by oracle or by upper bound."""
    budget = budget or SearchBudget()
    X, Y = A.space, B.space
    if pi.shape != (X.n, Y.n):
        raise SpaceMismatch("coupling does not match the actions")
    if mode == "oracle":
        if grid is None:
            grid = max(X.diam, Y.diam, 1e-9) / 8.0
        ctx = rho_oracle_context(X, Y, grid)
        vals = np.array(
            [
                [rho_hausdorff_oracle(ctx, g, h, pi) for h in B.elements]
                for g in A.elements
            ]
        )
        value = max(vals.min(axis=1).max(), vals.min(axis=0).max())
        return DconcPiResult(value=float(value), slack=ctx.slack, mode="oracle")
    if mode != "upper":
        raise ValueError(f"unknown mode {mode!r}")

    values, certs = _pair_values_and_certs(A, B, pi, budget)
    id_gi = A.elements.index(tuple(range(X.n)))
    id_hj = B.elements.index(tuple(range(Y.n)))
    gp_i = int(values[:, id_hj].argmin())
    hp_j = int(values[id_gi].argmin())
    Sp = certs[(gp_i, id_hj)].subset
    Spp = certs[(id_gi, hp_j)].subset
    gp = A.elements[gp_i]
    hp = B.elements[hp_j]

    pg = max(X.diam, Y.diam, 1e-9) / budget.probe_grid_frac
    if probes_X is None:
        probes_X = probe_family(X, pg, cap=budget.probe_cap, seed=budget.seed)
    if probes_Y is None:
        probes_Y = probe_family(Y, pg, cap=budget.probe_cap, seed=budget.seed)
    ub = np.empty_like(values)
    for gi, g in enumerate(A.elements):
        for hj, h in enumerate(B.elements):
            ub[gi, hj] = rho_hausdorff_upper(
                g, h, pi, X, Y,
                certs[(gi, hj)].subset, Sp, Spp, gp, hp,
                probe_grid=pg, probe_cap=budget.probe_cap,
                probes_X=probes_X, probes_Y=probes_Y,
            )
    value = max(ub.min(axis=1).max(), ub.min(axis=0).max())
    return DconcPiResult(value=float(value), slack=0.0, mode="upper")


def dconc_upper(
    A: MMAction, B: MMAction, budget: SearchBudget | None = None
) -> BoundResult:
    """Certified upper bound for the equivariant observable distance.

    Reuses the box-distance coupling search: candidates are ranked by the
    cheap box functional and the twisted Lipschitz functional is evaluated
    on the leaders, so the box winner is always among them."""
    from .boxdist import box_via_coupling

    budget = budget or SearchBudget()
    cands = candidate_couplings(A.space.mass, B.space.mass, budget)
    scored = []
    for idx, pi in enumerate(cands):
        r = box_via_coupling(
            A, B, pi,
            exact_budget=budget.mwis_exact,
            allow_heuristic=budget.allow_heuristic,
        )
        scored.append((r.value, idx))
    scored.sort()
    keep = [cands[idx] for _, idx in scored[: max(1, budget.dconc_candidates)]]
    pg = max(A.space.diam, B.space.diam, 1e-9) / budget.probe_grid_frac
    probes_X = probe_family(A.space, pg, cap=budget.probe_cap, seed=budget.seed)
    probes_Y = probe_family(B.space, pg, cap=budget.probe_cap, seed=budget.seed)
    best_val = math.inf
    best_pi = None
    for pi in keep:
        res = dconc_via_coupling(
            A, B, pi, mode="upper", budget=budget,
            probes_X=probes_X, probes_Y=probes_Y,
        )
        if res.value < best_val - 1e-15:
            best_val, best_pi = res.value, pi
    return BoundResult(
        value=best_val,
        kind="UPPER",
        err=0.0,
        coupling=best_pi,
        details=None,
        seed=budget.seed,
    )


def dconc_oracle(
    A: MMAction,
    B: MMAction,
    coupling_grid: float,
    lip_grid: float,
    *,
    budget: SearchBudget | None = None,
) -> BoundResult:
    """Brute force over grid couplings of the per-coupling oracle.

    The Lipschitz-family diff tensors do not depend on the coupling, so
    all grid couplings are evaluated in one batch per pair of group
    elements.  err combines the coupling grid (some grid coupling lies
    within total-variation n*m*grid/2 of the optimum and the functional
    is 2-Lipschitz in the Prokhorov metric) with the family rounding
    slack."""
    from .boxdist import grid_couplings

    budget = budget or SearchBudget()
    X, Y = A.space, B.space
    ctx = rho_oracle_context(X, Y, lip_grid)
    couplings = list(
        grid_couplings(X.mass, Y.mass, coupling_grid, cap=budget.oracle_table_cap)
    )
    W = np.stack([pi.plan.ravel() for pi in couplings])
    vals = np.empty((len(couplings), A.order, B.order))
    for gi, g in enumerate(A.elements):
        for hj, h in enumerate(B.elements):
            vals[:, gi, hj] = rho_hausdorff_oracle_batch(ctx, g, h, W)
    haus = np.maximum(vals.min(axis=2).max(axis=1), vals.min(axis=1).max(axis=1))
    best = int(haus.argmin())
    err = X.n * Y.n * coupling_grid + ctx.slack
    return BoundResult(
        value=float(haus[best]),
        kind="ORACLE",
        err=err,
        coupling=couplings[best],
        details=None,
        seed=None,
    )


def dconc_upper_plain(
    X: FiniteMMSpace, Y: FiniteMMSpace, budget: SearchBudget | None = None
) -> BoundResult:
    return dconc_upper(trivial_action(X), trivial_action(Y), budget)


def dconc_oracle_plain(
    X: FiniteMMSpace,
    Y: FiniteMMSpace,
    coupling_grid: float,
    lip_grid: float,
    *,
    budget: SearchBudget | None = None,
) -> BoundResult:
    return dconc_oracle(
        trivial_action(X), trivial_action(Y), coupling_grid, lip_grid, budget=budget
    )
