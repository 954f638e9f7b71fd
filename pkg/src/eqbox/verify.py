"""Desk-scale verification suite.

Every inequality the library's distances are supposed to satisfy is
checked here on seeded random cases and on a small curated corpus of two-
and three-point spaces where exact grid oracles run.  The suites are the
single implementation behind both `eqbox verify` and the acceptance tests.

Checks are aggregated: one row per property with the worst observed
violation, the allowed slack, and a note with the case count.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .boxdist import (
    SearchBudget,
    SideMap,
    box_oracle,
    box_upper,
    box_upper_plain,
    candidate_couplings,
    coupling_discrepancy,
    grid_couplings,
    northwest_corner,
    product_coupling,
)
from .coupling import (
    Relation,
    compose_couplings,
    glue,
    glue_project,
    product_metric,
    prokhorov,
    relation_compose,
    relation_dom,
    validate_coupling,
)
from .group import MMAction, quotient, trivial_action, validate_action
from .harness import (
    LensConfig,
    gen_cycle,
    gen_gaussian_instance,
    gen_lens_instance,
    run_lens_experiment,
    run_properness_probe,
    run_quotient_convergence,
)
from .mmspace import FiniteMMSpace, ky_fan, ky_fan_map, obs_diam_lower, validate_space
from .obsdist import (
    dconc_oracle,
    dconc_oracle_plain,
    dconc_upper,
    dconc_upper_plain,
)

EXACT = 0.0
FLOAT_SLACK = 1e-12
TRIANGLE_SLACK = 1e-10


@dataclass(frozen=True)
class CheckRow:
    suite: str
    check: str
    passed: bool
    observed: float
    bound: float
    note: str = ""


def _row(suite, check, observed, bound, note="") -> CheckRow:
    return CheckRow(suite, check, bool(observed <= bound), float(observed), float(bound), note)


# ---------------------------------------------------------------------------
# corpus builders
# ---------------------------------------------------------------------------


def two_point(d: float) -> FiniteMMSpace:
    return validate_space(["a", "b"], [[0.0, d], [d, 0.0]], [0.5, 0.5])


def equilateral(side: float) -> FiniteMMSpace:
    d = [[0.0, side, side], [side, 0.0, side], [side, side, 0.0]]
    return validate_space(["a", "b", "c"], d, [1 / 3, 1 / 3, 1 / 3])


def z2_action(space: FiniteMMSpace) -> MMAction:
    return validate_action(space, [[1, 0]])


def rotations3(space: FiniteMMSpace) -> MMAction:
    return validate_action(space, [[1, 2, 0]])


def full_s3(space: FiniteMMSpace) -> MMAction:
    return validate_action(space, [[1, 2, 0], [1, 0, 2]])


def relabel_action(action: MMAction, perm) -> MMAction:
    """The same instance with points renamed by perm (new index -> old)."""
    perm = list(perm)
    inv = [0] * len(perm)
    for new, old in enumerate(perm):
        inv[old] = new
    sp = action.space
    idx = np.array(perm, dtype=int)
    space = validate_space(
        [sp.labels[i] for i in perm],
        sp.dist[np.ix_(idx, idx)],
        sp.mass[idx],
    )
    gens = [
        tuple(inv[g[perm[i]]] for i in range(sp.n)) for g in action.elements
    ]
    return validate_action(space, gens)


def _random_space(rng, n: int) -> FiniteMMSpace:
    pts = rng.uniform(0.0, 1.0, size=(n, 2))
    D = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    mass = rng.uniform(0.1, 1.0, n)
    mass /= mass.sum()
    return validate_space([f"p{i}" for i in range(n)], D, mass)


def _random_measure(rng, n: int) -> np.ndarray:
    m = rng.uniform(0.1, 1.0, n)
    return m / m.sum()


def _random_lipschitz(rng, D: np.ndarray) -> np.ndarray:
    c = rng.uniform(0.0, D.max() if D.size else 1.0, D.shape[0])
    return (c[None, :] + D).min(axis=1)


def _random_coupling(rng, muX, cols: int):
    """A strictly positive coupling: rows are muX[i] times random simplex points."""
    rows = rng.uniform(0.1, 1.0, size=(len(muX), cols))
    rows /= rows.sum(axis=1, keepdims=True)
    plan = muX[:, None] * rows
    return validate_coupling(plan, muX, plan.sum(axis=0))


# ---------------------------------------------------------------------------
# suite 1: coupling calculus
# ---------------------------------------------------------------------------


def suite_coupling(seed: int = 0, cases: int = 500) -> list[CheckRow]:
    rng = np.random.default_rng([seed, 1])
    worst_p12 = worst_p23 = worst_assoc = worst_mass = worst_dom = 0.0
    for _ in range(cases):
        muX = _random_measure(rng, 3)
        sigma = _random_coupling(rng, muX, 3)
        tau = _random_coupling(rng, sigma.muY, 3)
        t = glue(sigma, tau)
        worst_p12 = max(worst_p12, np.abs(glue_project(t, "12") - sigma.plan).max())
        worst_p23 = max(worst_p23, np.abs(glue_project(t, "23") - tau.plan).max())
        ups = _random_coupling(rng, tau.muY, 3)
        left = compose_couplings(compose_couplings(sigma, tau), ups).plan
        right = compose_couplings(sigma, compose_couplings(tau, ups)).plan
        worst_assoc = max(worst_assoc, np.abs(left - right).max())

        S = Relation.of(
            [(i, j) for i in range(3) for j in range(3) if rng.random() < 0.5], 3, 3
        )
        T = Relation.of(
            [(i, j) for i in range(3) for j in range(3) if rng.random() < 0.5], 3, 3
        )
        comp = compose_couplings(sigma, tau)
        TS = relation_compose(S, T)
        lower = tau.mass_of(T.pairs) + sigma.mass_of(S.pairs) - 1.0
        worst_mass = max(worst_mass, lower - comp.mass_of(TS.pairs))
        dom_mass = float(muX[sorted(relation_dom(TS))].sum())
        worst_dom = max(worst_dom, lower - dom_mass)
    note = f"{cases} seeded 3x3x3 chains"
    return [
        _row("coupling", "glue_projection_12", worst_p12, FLOAT_SLACK, note),
        _row("coupling", "glue_projection_23", worst_p23, FLOAT_SLACK, note),
        _row("coupling", "composition_associativity", worst_assoc, FLOAT_SLACK, note),
        _row("coupling", "mass_inequality_composed", worst_mass, FLOAT_SLACK, note),
        _row("coupling", "mass_inequality_domain", worst_dom, FLOAT_SLACK, note),
    ]


# ---------------------------------------------------------------------------
# suite 2: metric axioms
# ---------------------------------------------------------------------------


def _corpus_pairs():
    """Curated action pairs for the subset-discrepancy pseudo-metric checks."""
    x2a, x2b = two_point(1.0), two_point(2.0)
    x3a, x3b = equilateral(1.0), equilateral(2.0)
    return [
        (z2_action(x2a), z2_action(x2b)),
        (z2_action(x2a), rotations3(x3a)),
        (rotations3(x3a), full_s3(x3b)),
    ]


def suite_metric_axioms(seed: int = 0, cases: int = 1000) -> list[CheckRow]:
    rng = np.random.default_rng([seed, 2])
    rows = []

    worst_sym = worst_tri = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 7))
        mu = _random_measure(rng, n)
        f, g, h = rng.uniform(-1.5, 1.5, size=(3, n))
        worst_sym = max(worst_sym, abs(ky_fan(f, g, mu) - ky_fan(g, f, mu)))
        worst_tri = max(
            worst_tri,
            ky_fan(f, h, mu) - ky_fan(f, g, mu) - ky_fan(g, h, mu),
        )
    note = f"{cases} seeded triples"
    rows.append(_row("metric_axioms", "ky_fan_symmetry", worst_sym, EXACT, note))
    rows.append(_row("metric_axioms", "ky_fan_triangle", worst_tri, TRIANGLE_SLACK, note))

    worst_sym = worst_tri = worst_id = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 5))
        X = _random_space(rng, n)
        mu, nu, xi = (_random_measure(rng, n) for _ in range(3))
        d12 = prokhorov(mu, nu, X.dist)
        d23 = prokhorov(nu, xi, X.dist)
        d13 = prokhorov(mu, xi, X.dist)
        worst_sym = max(worst_sym, abs(d12 - prokhorov(nu, mu, X.dist)))
        worst_tri = max(worst_tri, d13 - d12 - d23)
        worst_id = max(worst_id, prokhorov(mu, mu, X.dist))
    rows.append(_row("metric_axioms", "prokhorov_symmetry", worst_sym, EXACT, note))
    rows.append(_row("metric_axioms", "prokhorov_triangle", worst_tri, TRIANGLE_SLACK, note))
    rows.append(_row("metric_axioms", "prokhorov_identity", worst_id, EXACT, note))

    worst_sym = worst_tri = worst_refl = 0.0
    pairs_checked = 0
    for A, B in _corpus_pairs():
        X, Y = A.space, B.space
        pis = [
            northwest_corner(X.mass, Y.mass),
            product_coupling(X.mass, Y.mass),
            northwest_corner(X.mass, Y.mass, rng.permutation(X.n), rng.permutation(Y.n)),
        ]
        maps = [SideMap("X", g) for g in A.elements] + [
            SideMap("Y", h) for h in B.elements
        ]
        for pi in pis:
            k = len(maps)
            vals = np.zeros((k, k))
            for i in range(k):
                for j in range(k):
                    vals[i, j] = coupling_discrepancy(maps[i], maps[j], pi, X, Y).value
            worst_refl = max(worst_refl, float(np.abs(np.diagonal(vals)).max()))
            worst_sym = max(worst_sym, float(np.abs(vals - vals.T).max()))
            tri = vals[:, None, :] - (vals[:, :, None] + vals[None, :, :])
            worst_tri = max(worst_tri, float(tri.max()))
            pairs_checked += 1
    note = f"{pairs_checked} coupled corpus instances, all map triples"
    rows.append(_row("metric_axioms", "coupling_discrepancy_reflexive", worst_refl, EXACT, note))
    rows.append(_row("metric_axioms", "coupling_discrepancy_symmetry", worst_sym, EXACT, note))
    rows.append(_row("metric_axioms", "coupling_discrepancy_triangle", worst_tri, EXACT, note))
    return rows


# ---------------------------------------------------------------------------
# suite 3: lemma checks
# ---------------------------------------------------------------------------


def suite_lemmas(seed: int = 0, cases: int = 1000) -> list[CheckRow]:
    rng = np.random.default_rng([seed, 5])
    rows = []

    worst1 = worst2 = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 7))
        mu = _random_measure(rng, n)
        f = rng.uniform(-1.0, 1.0, n)
        g = rng.uniform(-1.0, 1.0, n)
        dkf = ky_fan(f, g, mu)
        l1 = float(np.abs(f - g) @ mu)
        worst1 = max(worst1, dkf * dkf - l1)
        worst2 = max(worst2, l1 - 3.0 * dkf)  # 2D + 1 with D = 1
    note = f"{cases} seeded cases"
    rows.append(_row("lemmas", "ky_fan_l1_lower", worst1, FLOAT_SLACK, note))
    rows.append(_row("lemmas", "ky_fan_l1_upper_D1", worst2, FLOAT_SLACK, note))

    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 9))
        cyc = gen_cycle(n)
        X = cyc.space
        f = _random_lipschitz(rng, X.dist)
        fp = _random_lipschitz(rng, X.dist)
        g = cyc.elements[int(rng.integers(cyc.order))]
        gp = cyc.elements[int(rng.integers(cyc.order))]
        garr, gparr = np.array(g), np.array(gp)
        lhs = ky_fan(f[garr], fp[gparr], X.mass)
        rhs = ky_fan(f, fp, X.mass) + ky_fan_map(garr, gparr, X)
        worst = max(worst, lhs - rhs)
    rows.append(_row("lemmas", "composition_ky_fan_bound", worst, FLOAT_SLACK, note))

    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 5))
        X = _random_space(rng, n)
        f = _random_lipschitz(rng, X.dist)
        fp = _random_lipschitz(rng, X.dist)
        mu = _random_measure(rng, n)
        nu = _random_measure(rng, n)
        gap = abs(ky_fan(f, fp, mu) - ky_fan(f, fp, nu))
        worst = max(worst, gap - 2.0 * prokhorov(mu, nu, X.dist))
    rows.append(_row("lemmas", "ky_fan_prokhorov_transfer", worst, FLOAT_SLACK, note))
    return rows


# ---------------------------------------------------------------------------
# suite 4: cross-metric inequalities on the oracle corpus
# ---------------------------------------------------------------------------


def suite_cross_metric(seed: int = 0) -> list[CheckRow]:
    rows = []
    x2a, x2b = two_point(1.0), two_point(2.0)
    x3a, x3b = equilateral(1.0), equilateral(2.0)
    budget = SearchBudget(seed=seed)

    # plain box <= 2 * equivariant box, slack from the plain oracle only
    eq_pairs = [
        (z2_action(x2a), z2_action(x2b), 1 / 8),
        (z2_action(x2a), z2_action(x2a), 1 / 8),
        (rotations3(x3a), full_s3(x3b), 1 / 12),
        (rotations3(x3a), rotations3(x3a), 1 / 12),
    ]
    worst = 0.0
    box_values = []
    for A, B, grid in eq_pairs:
        plain = box_oracle(trivial_action(A.space), trivial_action(B.space), grid)
        eq = box_oracle(A, B, grid)
        box_values += [plain, eq]
        worst = max(worst, plain.value - 2.0 * eq.value - plain.err)
    rows.append(
        _row("cross_metric", "plain_box_le_2_eq_box", worst, FLOAT_SLACK,
             f"{len(eq_pairs)} oracle pairs")
    )

    # observable <= 4 * box on the same witness grids
    dc_pairs = [
        (z2_action(x2a), z2_action(x2b), 1 / 8, 1 / 8),
        (z2_action(x2a), trivial_action(x2a), 1 / 8, 1 / 8),
        (rotations3(x3a), full_s3(x3b), 1 / 6, 1.0),
    ]
    worst = 0.0
    dconc_values = []
    for A, B, gc, gf in dc_pairs:
        dc = dconc_oracle(A, B, gc, gf, budget=budget)
        bx = box_oracle(A, B, gc)
        box_values.append(bx)
        dconc_values.append(dc)
        worst = max(worst, dc.value - 4.0 * bx.value - dc.err)
    rows.append(
        _row("cross_metric", "dconc_le_4_box", worst, FLOAT_SLACK,
             f"{len(dc_pairs)} oracle pairs")
    )

    # plain observable <= equivariant observable, pointwise on the same grids
    worst = 0.0
    for A, B, gc, gf in dc_pairs:
        plain = dconc_oracle_plain(A.space, B.space, gc, gf, budget=budget)
        eq = dconc_oracle(A, B, gc, gf, budget=budget)
        worst = max(worst, plain.value - eq.value)
    rows.append(
        _row("cross_metric", "plain_dconc_le_eq_dconc", worst, FLOAT_SLACK,
             f"{len(dc_pairs)} oracle pairs")
    )

    # box <= 1 universally
    worst = 0.0
    checked = 0
    for res in box_values:
        worst = max(worst, res.value - 1.0)
        checked += 1
    rng = np.random.default_rng([seed, 6])
    for _ in range(5):
        X = _random_space(rng, int(rng.integers(2, 5)))
        Y = _random_space(rng, int(rng.integers(2, 5)))
        res = box_upper_plain(X, Y, SearchBudget(seed=seed, nw_samples=4, refine_steps=5))
        worst = max(worst, res.value - 1.0)
        checked += 1
    rows.append(
        _row("cross_metric", "box_le_1", worst, FLOAT_SLACK, f"{checked} values")
    )
    return rows


# ---------------------------------------------------------------------------
# suite 5: nondegeneracy probe
# ---------------------------------------------------------------------------


def suite_nondegeneracy(seed: int = 0) -> list[CheckRow]:
    rows = []
    budget = SearchBudget(seed=seed)
    x2a, x2b = two_point(1.0), two_point(2.0)
    x3a, x3b = equilateral(1.0), equilateral(2.0)

    iso_pairs = [
        ("two_point_z2_relabeled",
         z2_action(x2a), relabel_action(z2_action(x2a), [1, 0]), 1 / 8, 1 / 8),
        ("two_point_wide_z2_relabeled",
         z2_action(x2b), relabel_action(z2_action(x2b), [1, 0]), 1 / 8, 1 / 4),
    ]
    worst_box = worst_dc = 0.0
    for name, A, B, gc, gf in iso_pairs:
        bx = box_oracle(A, B, gc)
        dc = dconc_oracle(A, B, gc, gf, budget=budget)
        worst_box = max(worst_box, bx.value - bx.err)
        worst_dc = max(worst_dc, dc.value - dc.err)
    rows.append(
        _row("nondegeneracy", "isomorphic_box_within_slack", worst_box, FLOAT_SLACK,
             f"{len(iso_pairs)} relabeled pairs")
    )
    rows.append(
        _row("nondegeneracy", "isomorphic_dconc_within_slack", worst_dc, FLOAT_SLACK,
             f"{len(iso_pairs)} relabeled pairs")
    )

    iso3 = relabel_action(rotations3(x3a), [2, 0, 1])
    bx3 = box_oracle(rotations3(x3a), iso3, 1 / 12)
    rows.append(
        _row("nondegeneracy", "isomorphic_box3_within_slack",
             bx3.value - bx3.err, FLOAT_SLACK, "three-point rotation pair")
    )

    # non-isomorphic: oracle must exceed twice its own error bar
    noniso_box = [
        ("2pt_scale", z2_action(x2a), z2_action(x2b), 1 / 32),
        ("2pt_group", z2_action(x2a), trivial_action(x2a), 1 / 32),
        ("2pt_plain_scale", trivial_action(x2a), trivial_action(x2b), 1 / 32),
        ("3pt_scale_plain", trivial_action(x3a), trivial_action(x3b), 1 / 36),
        ("3pt_group", rotations3(x3a), trivial_action(x3a), 1 / 24),
    ]
    worst_margin = -math.inf
    for name, A, B, gc in noniso_box:
        bx = box_oracle(A, B, gc)
        worst_margin = max(worst_margin, 2.0 * bx.err - bx.value)
    rows.append(
        CheckRow("nondegeneracy", "nonisomorphic_box_beyond_2slack",
                 worst_margin < 0, float(worst_margin), 0.0,
                 f"{len(noniso_box)} pairs, margin = 2*err - value")
    )

    noniso_dc = [
        ("2pt_group", z2_action(x2a), trivial_action(x2a), 1 / 64, 1 / 16),
        ("2pt_group_wide", z2_action(x2b), trivial_action(x2b), 1 / 64, 1 / 16),
    ]
    worst_margin = -math.inf
    for name, A, B, gc, gf in noniso_dc:
        dc = dconc_oracle(A, B, gc, gf, budget=budget)
        worst_margin = max(worst_margin, 2.0 * dc.err - dc.value)
    rows.append(
        CheckRow("nondegeneracy", "nonisomorphic_dconc_beyond_2slack",
                 worst_margin < 0, float(worst_margin), 0.0,
                 f"{len(noniso_dc)} pairs, margin = 2*err - value")
    )
    return rows


# ---------------------------------------------------------------------------
# suite 6: pinned oracle values
# ---------------------------------------------------------------------------


def suite_pinned(seed: int = 0) -> list[CheckRow]:
    rows = []
    x2a, x2b = two_point(1.0), two_point(2.0)
    budget = SearchBudget(seed=seed)

    scale = box_oracle(trivial_action(x2a), trivial_action(x2b), 1 / 8)
    rows.append(
        _row("pinned", "box_oracle_two_point_scale_is_half",
             abs(scale.value - 0.5), FLOAT_SLACK, "grid 1/8")
    )
    group = box_oracle(z2_action(x2a), trivial_action(x2a), 1 / 8)
    rows.append(
        _row("pinned", "box_oracle_two_point_group_is_one",
             abs(group.value - 1.0), FLOAT_SLACK, "grid 1/8")
    )
    up_scale = box_upper_plain(x2a, x2b, budget)
    rows.append(
        _row("pinned", "box_upper_matches_oracle_scale",
             abs(up_scale.value - 0.5), FLOAT_SLACK, "")
    )
    up_group = box_upper(z2_action(x2a), trivial_action(x2a), budget)
    rows.append(
        _row("pinned", "box_upper_matches_oracle_group",
             abs(up_group.value - 1.0), FLOAT_SLACK, "")
    )

    # the shared witness coupling ties the two functionals together
    bx = box_upper(z2_action(x2a), z2_action(x2b), budget)
    dc = dconc_upper(z2_action(x2a), z2_action(x2b), budget)
    rows.append(
        _row("pinned", "dconc_upper_le_4_box_upper",
             dc.value - 4.0 * bx.value, 1e-9, "shared coupling search")
    )
    return rows


# ---------------------------------------------------------------------------
# suite 7: quotient theorems on the cycle corpus
# ---------------------------------------------------------------------------


def _cycle_subgroup(n: int, step: int) -> MMAction:
    cyc = gen_cycle(n)
    rot = [(i + step) % n for i in range(n)]
    return validate_action(cyc.space, [rot])


def suite_quotient(seed: int = 0) -> list[CheckRow]:
    budget = SearchBudget(seed=seed, nw_samples=8, refine_steps=10, perm_samples=4)
    target = gen_cycle(8)
    seq = [gen_cycle(4), gen_cycle(6), gen_cycle(8), _cycle_subgroup(8, 2)]
    report = run_quotient_convergence(seq, target, kappa=0.1, budget=budget)

    eq = report.values("eq_box_upper")
    qt = report.values("quot_box_upper")
    worst_order = max(q - e for q, e in zip(qt, eq))
    margins = report.values("conc_quot_margin")
    worst_margin = -min(margins)
    rows = [
        _row("quotient", "quot_box_le_eq_box", worst_order, 1e-9,
             f"{len(eq)} corpus rows"),
        _row("quotient", "conc_quot_margin_nonnegative", worst_margin, EXACT,
             f"{len(margins)} corpus rows, kappa = 0.1"),
    ]

    # identical pair: every reported distance must vanish
    same = run_quotient_convergence([gen_cycle(6)], gen_cycle(6), kappa=0.1, budget=budget)
    vals = [
        abs(v)
        for metric in ("eq_box_upper", "eq_dconc_upper", "quot_box_upper", "quot_dconc_upper")
        for v in same.values(metric)
    ]
    rows.append(
        _row("quotient", "identical_pair_distances_vanish", max(vals), FLOAT_SLACK,
             "constant sequence")
    )
    return rows


# ---------------------------------------------------------------------------
# suite 8: properness probe
# ---------------------------------------------------------------------------


def _scaled_cycle(n: int, factor: float) -> MMAction:
    cyc = gen_cycle(n)
    space = validate_space(cyc.space.labels, cyc.space.dist * factor, cyc.space.mass)
    return validate_action(space, [list(p) for p in cyc.elements])


def suite_properness(seed: int = 0) -> list[CheckRow]:
    budget = SearchBudget(seed=seed, nw_samples=8, refine_steps=10)
    rows = []

    cyc4 = gen_cycle(4)
    report, groups = run_properness_probe([cyc4, cyc4], cyc4.space, budget=budget)
    defects = report.values("properness_max_defect")
    orders = report.values("limit_group_order")
    ok_const = max(defects) <= FLOAT_SLACK and all(o == 4.0 for o in orders)
    expected = all(set(g.elements) == set(cyc4.elements) for g in groups)
    rows.append(
        CheckRow("properness", "constant_cycle_recovers_z4",
                 ok_const and expected, max(defects), FLOAT_SLACK,
                 f"orders {orders}")
    )

    two = z2_action(two_point(1.0))
    report, groups = run_properness_probe([two, two], two.space, budget=budget)
    ok = (
        max(report.values("properness_max_defect")) <= FLOAT_SLACK
        and all(g.order == 2 for g in groups)
    )
    rows.append(
        CheckRow("properness", "constant_two_point_recovers_z2", ok,
                 max(report.values("properness_max_defect")), FLOAT_SLACK, "")
    )

    triv = trivial_action(gen_cycle(4).space)
    report, groups = run_properness_probe([triv], triv.space, budget=budget)
    rows.append(
        CheckRow("properness", "trivial_group_stays_trivial",
                 groups[0].order == 1, float(groups[0].order), 1.0, "")
    )

    seq = [_scaled_cycle(4, 1.0 + 0.2 / (k + 1)) for k in range(3)]
    report, groups = run_properness_probe(seq, cyc4.space, budget=budget)
    defects = report.values("properness_max_defect")
    nonincreasing = all(a >= b - 1e-12 for a, b in zip(defects, defects[1:]))
    orders_ok = all(g.order == 4 for g in groups)
    rows.append(
        CheckRow("properness", "shrinking_cycle_defects_nonincreasing",
                 nonincreasing and orders_ok, max(defects), 1.0,
                 f"defects {defects}")
    )
    return rows


# ---------------------------------------------------------------------------
# suite 9: lens trend
# ---------------------------------------------------------------------------


def suite_lens(seed: int = 0) -> list[CheckRow]:
    rows = []
    sample_counts = (2, 3, 4)
    seeds = (seed, seed + 1, seed + 2)
    js = (2, 3)
    n_of_j = {2: 1, 3: 2}
    a = (1.0, 0.7, 0.5)
    budget_kw = dict(nw_samples=8, refine_steps=10, perm_samples=4)

    monotone_seeds = 0
    worst_quot = -math.inf
    for s in seeds:
        per_count = []
        for samples in sample_counts:
            cfg = LensConfig(
                js=js, n_of_j=n_of_j, a=a, samples=samples, K=3, N=2, seed=s
            )
            rep = run_lens_experiment(cfg, budget=SearchBudget(seed=s, **budget_kw))
            eq = rep.values("eq_box_upper")
            qt = rep.values("quot_box_upper")
            worst_quot = max(worst_quot, max(q - e for q, e in zip(qt, eq)))
            per_count.append(eq[-1])  # largest j row
        if all(a_ >= b_ - 1e-12 for a_, b_ in zip(per_count, per_count[1:])):
            monotone_seeds += 1
    rows.append(
        CheckRow("lens", "eq_box_nonincreasing_in_samples",
                 monotone_seeds >= 2, float(monotone_seeds), 2.0,
                 f"{monotone_seeds}/3 seeds monotone over samples {sample_counts}")
    )
    rows.append(
        _row("lens", "quot_box_le_eq_box", worst_quot, 1e-9,
             f"{len(seeds) * len(sample_counts) * len(js)} rows")
    )
    return rows


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

SUITES = {
    "coupling": suite_coupling,
    "metric_axioms": suite_metric_axioms,
    "lemmas": suite_lemmas,
    "cross_metric": suite_cross_metric,
    "nondegeneracy": suite_nondegeneracy,
    "pinned": suite_pinned,
    "quotient": suite_quotient,
    "properness": suite_properness,
    "lens": suite_lens,
}


def run_suites(names, seed: int = 0) -> list[CheckRow]:
    rows: list[CheckRow] = []
    for name in names:
        rows.extend(SUITES[name](seed))
    return rows


def write_report(rows: list[CheckRow], out_dir: str, seed: int) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "verify_report.csv")
    lines = ["suite,check,passed,observed,bound,note"]
    for r in rows:
        note = r.note.replace(",", ";")
        lines.append(
            f"{r.suite},{r.check},{int(r.passed)},{r.observed!r},{r.bound!r},{note}"
        )
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    json_path = os.path.join(out_dir, "verify_report.json")
    payload = {
        "seed": seed,
        "all_passed": all(r.passed for r in rows),
        "checks": [
            {
                "suite": r.suite,
                "check": r.check,
                "passed": r.passed,
                "observed": r.observed,
                "bound": r.bound,
                "note": r.note,
            }
            for r in rows
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, json_path]


def run_all(seed: int = 0, out_dir: str | None = None) -> tuple[list[CheckRow], bool]:
    rows = run_suites(SUITES.keys(), seed)
    if out_dir is not None:
        write_report(rows, out_dir, seed)
    return rows, all(r.passed for r in rows)
