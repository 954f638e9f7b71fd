"""Instance generators, convergence experiments, report emission.

Generators produce exact permutation actions: every sampled base point is
closed up into a full group orbit, and the distance matrix is averaged
over the orbit (with a sorted, order-independent sum) so that the group
acts by bit-exact isometries.  The infinite objects are approximated
explicitly: the circle group by a cyclic group of order K and the
infinite-dimensional Gaussian space by a truncation to N complex
coordinates, both recorded in every output row.

Reports are plain rows (instance, metric, value, bound kind, err, seed,
wall time) emitted as CSV, JSON and a simple SVG line chart.  Emitted
files are byte-stable for a fixed seed and configuration; wall times are
zeroed in the files and kept only in memory.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boxdist import BoundResult, SearchBudget, box_upper, box_upper_plain
from .errors import BudgetExceeded, EmptyRelation, ValidationError
from .group import MMAction, extract_limit_group, quotient, validate_action
from .mmspace import FiniteMMSpace, obs_diam_lower, validate_space
from .obsdist import dconc_upper, dconc_upper_plain


@dataclass(frozen=True)
class ReportRow:
    instance: str
    metric: str
    value: float
    kind: str  # UPPER or ORACLE
    err: float
    seed: int
    wall_ms: float = 0.0


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, *args, **kwargs):
        self.rows.append(ReportRow(*args, **kwargs))

    def values(self, metric: str) -> list[float]:
        return [r.value for r in self.rows if r.metric == metric]


@dataclass(frozen=True)
class LensConfig:
    """Configuration for the ellipsoid-orbit and Gaussian instances."""

    js: tuple[int, ...]
    n_of_j: dict[int, int]
    a: tuple[float, ...]
    samples: int = 8
    K: int = 8
    N: int = 3
    seed: int = 0
    a_of_j: dict[int, tuple[float, ...]] | None = None
    point_budget: int = 96

    def axes_for(self, j: int) -> np.ndarray:
        dim = self.n_of_j[j]
        if self.a_of_j is not None and j in self.a_of_j:
            a = np.asarray(self.a_of_j[j], dtype=float)
        else:
            a = np.asarray(self.a[:dim], dtype=float)
        if a.size < dim:
            raise ValidationError(
                f"need {dim} axis values for j={j}, got {a.size}"
            )
        a = a[:dim]
        if (a <= 0).any():
            raise ValidationError("axes must be positive")
        return a

    @classmethod
    def from_dict(cls, d: dict) -> "LensConfig":
        js = tuple(int(j) for j in d["js"])
        n_raw = d["n_of_j"]
        if isinstance(n_raw, dict):
            n_of_j = {int(k): int(v) for k, v in n_raw.items()}
        else:
            n_of_j = {j: int(v) for j, v in zip(js, n_raw)}
        a_of_j = None
        if d.get("a_of_j") is not None:
            a_of_j = {int(k): tuple(map(float, v)) for k, v in d["a_of_j"].items()}
        return cls(
            js=js,
            n_of_j=n_of_j,
            a=tuple(float(x) for x in d["a"]),
            samples=int(d.get("samples", 8)),
            K=int(d.get("K", 8)),
            N=int(d.get("N", 3)),
            seed=int(d.get("seed", 0)),
            a_of_j=a_of_j,
            point_budget=int(d.get("point_budget", 96)),
        )


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_cycle(n: int, kind: str = "geodesic") -> MMAction:
    """n uniform points on a circle of circumference 1 with the rotation
    action; distances along the arc or through the chord."""
    if n < 1:
        raise ValidationError("cycle needs at least one point")
    labels = [f"c{i}" for i in range(n)]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = min((i - j) % n, (j - i) % n)
            if kind == "geodesic":
                dist[i, j] = k / n
            elif kind == "chord":
                dist[i, j] = math.sin(math.pi * k / n) / math.pi
            else:
                raise ValidationError(f"unknown cycle kind {kind!r}")
    space = validate_space(labels, dist, np.full(n, 1.0 / n))
    if n == 1:
        return validate_action(space, [])
    rot = [(i + 1) % n for i in range(n)]
    return validate_action(space, [rot])


def _rotate_complex(points: np.ndarray, theta: float) -> np.ndarray:
    """Rotate every complex coordinate pair (re, im) by theta."""
    re = points[:, 0::2]
    im = points[:, 1::2]
    c, s = math.cos(theta), math.sin(theta)
    out = np.empty_like(points)
    out[:, 0::2] = re * c - im * s
    out[:, 1::2] = re * s + im * c
    return out


def orbit_closure_instance(
    base: np.ndarray, order: int, prefix: str
) -> MMAction:
    """Close base points into full cyclic orbits with an exact action.

    Point (b, k) is base point b rotated k times by 2*pi/order; the
    generator advances k.  The distance matrix is the orbit average of the
    Euclidean one, summed in sorted order so the action is bit-exact."""
    s = base.shape[0]
    pts = np.empty((s * order, base.shape[1]))
    for k in range(order):
        pts[k::order] = _rotate_complex(base, 2.0 * math.pi * k / order)
    # index (b, k) -> b * order + k
    N = s * order
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    gen = np.array(
        [b * order + (k + 1) % order for b in range(s) for k in range(order)]
    )
    if order > 1:
        perm = np.arange(N)
        stack = []
        for _ in range(order):
            stack.append(D[np.ix_(perm, perm)])
            perm = gen[perm]
        stack = np.sort(np.stack(stack), axis=0)
        D = stack.sum(axis=0) / order
        np.fill_diagonal(D, 0.0)
    labels = [f"{prefix}{b}r{k}" for b in range(s) for k in range(order)]
    space = validate_space(labels, D, np.full(N, 1.0 / N))
    if order == 1:
        return validate_action(space, [])
    return validate_action(space, [gen.tolist()])


def gen_lens_instance(cfg: LensConfig, j: int) -> MMAction:
    """Sampled ellipsoid in C^n(j) with the cyclic rotation action.

    Base points are drawn uniformly on the unit sphere and pushed through
    the axis scaling alpha_i = a_i * sqrt(n(j)); the order-j orbit of each
    base point is included so the action is an exact permutation."""
    if cfg.samples * j > cfg.point_budget:
        raise BudgetExceeded(
            f"samples * j = {cfg.samples * j} exceeds budget {cfg.point_budget}"
        )
    dim = cfg.n_of_j[j]
    axes = cfg.axes_for(j) * math.sqrt(dim)
    rng = np.random.default_rng([cfg.seed, 7, j])
    base = rng.normal(size=(cfg.samples, 2 * dim))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    base[:, 0::2] *= axes
    base[:, 1::2] *= axes
    return orbit_closure_instance(base, j, f"e{j}_")


def gen_gaussian_instance(cfg: LensConfig) -> MMAction:
    """Truncated Gaussian space with the order-K cyclic rotation action.

    The first N complex coordinates carry independent centered Gaussians
    of standard deviation a_i per real part; the circle action is
    approximated by Z_K orbits of the sampled points."""
    if cfg.samples * cfg.K > cfg.point_budget:
        raise BudgetExceeded(
            f"samples * K = {cfg.samples * cfg.K} exceeds budget {cfg.point_budget}"
        )
    a = np.asarray(cfg.a[: cfg.N], dtype=float)
    if a.size < cfg.N:
        raise ValidationError(f"need {cfg.N} axis values, got {a.size}")
    rng = np.random.default_rng([cfg.seed, 11])
    base = rng.normal(size=(cfg.samples, 2 * cfg.N))
    base[:, 0::2] *= a
    base[:, 1::2] *= a
    return orbit_closure_instance(base, cfg.K, "g_")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _run_jobs(jobs):
    threads = int(os.environ.get("EQBOX_THREADS", "1") or "1")
    if threads <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def run_quotient_convergence(
    seq: list[MMAction],
    target: MMAction,
    *,
    kappa: float = 0.1,
    budget: SearchBudget | None = None,
) -> ExperimentReport:
    """Compare equivariant distances upstairs with plain distances between
    the quotients, and evaluate the concentration margin

        sqrt(3 (D_kappa + 1) dconc_eq) + kappa - dconc(X/G, Y/H),

    with D_kappa taken from the certified observable-diameter lower bound
    (a lower bound shrinks the right-hand side, so a pass is conservative).
    """
    budget = budget or SearchBudget()
    report = ExperimentReport(meta={"kappa": kappa, "seed": budget.seed})
    Yq, _ = quotient(target)
    obs_Y = obs_diam_lower(target.space, kappa, seed=budget.seed)

    def one(idx_action):
        idx, action = idx_action
        t0 = time.perf_counter()
        rows = []
        name = f"row{idx}[n={action.space.n},|G|={action.order}]"
        eq_box = box_upper(action, target, budget)
        eq_dc = dconc_upper(action, target, budget)
        Xq, _ = quotient(action)
        q_box = box_upper_plain(Xq, Yq, budget)
        q_dc = dconc_upper_plain(Xq, Yq, budget)
        d_kappa = max(obs_diam_lower(action.space, kappa, seed=budget.seed), obs_Y)
        margin = (
            math.sqrt(3.0 * (d_kappa + 1.0) * eq_dc.value) + kappa - q_dc.value
        )
        wall = (time.perf_counter() - t0) * 1000.0
        for metric, res in (
            ("eq_box_upper", eq_box),
            ("eq_dconc_upper", eq_dc),
            ("quot_box_upper", q_box),
            ("quot_dconc_upper", q_dc),
        ):
            rows.append(
                ReportRow(name, metric, res.value, res.kind, res.err, budget.seed, wall)
            )
        rows.append(
            ReportRow(name, "conc_quot_margin", margin, "UPPER", 0.0, budget.seed, wall)
        )
        return rows

    for rows in _run_jobs([lambda p=(i, a): one(p) for i, a in enumerate(seq)]):
        report.rows.extend(rows)
    return report


def run_lens_experiment(
    cfg: LensConfig, *, budget: SearchBudget | None = None
) -> ExperimentReport:
    """Equivariant box bounds between sampled ellipsoid orbits and the
    truncated Gaussian instance, with quotient bounds alongside."""
    budget = budget or SearchBudget(seed=cfg.seed)
    report = ExperimentReport(
        meta={"seed": cfg.seed, "K": cfg.K, "N": cfg.N, "samples": cfg.samples}
    )
    gauss = gen_gaussian_instance(cfg)
    gauss_q, _ = quotient(gauss)

    def one(j):
        t0 = time.perf_counter()
        lens = gen_lens_instance(cfg, j)
        eq = box_upper(lens, gauss, budget)
        lens_q, _ = quotient(lens)
        qb = box_upper_plain(lens_q, gauss_q, budget)
        wall = (time.perf_counter() - t0) * 1000.0
        name = f"j={j},K={cfg.K},N={cfg.N},samples={cfg.samples}"
        return [
            ReportRow(name, "eq_box_upper", eq.value, eq.kind, eq.err, cfg.seed, wall),
            ReportRow(name, "quot_box_upper", qb.value, qb.kind, qb.err, cfg.seed, wall),
        ]

    for rows in _run_jobs([lambda jj=j: one(jj) for j in cfg.js]):
        report.rows.extend(rows)
    return report


def run_properness_probe(
    seq: list[MMAction],
    Y: FiniteMMSpace,
    *,
    budget: SearchBudget | None = None,
) -> tuple[ExperimentReport, list[MMAction]]:
    """Extract candidate limit groups inside Aut(Y) along the sequence.

    For each term a witness coupling and subset for the plain box distance
    to Y are computed, every group element is conjugated through the
    subset and rounded to the nearest automorphism of Y, and the matched
    automorphisms are closed into a subgroup.  Reports the maximal
    matching defect and the extracted group order per term."""
    budget = budget or SearchBudget()
    report = ExperimentReport(meta={"seed": budget.seed})
    groups: list[MMAction] = []
    for idx, action in enumerate(seq):
        t0 = time.perf_counter()
        plain = box_upper_plain(action.space, Y, budget)
        cert = plain.details.row[0].cert
        if len(cert.subset) == 0:
            raise EmptyRelation(
                f"witness subset for term {idx} is empty; instances too far apart"
            )
        rows = extract_limit_group(action, Y, cert.subset, plain.value)
        matched = [h for (_, h, _, _) in rows]
        limit_group = validate_action(Y, matched)
        groups.append(limit_group)
        max_defect = max((defect for (_, _, defect, _) in rows), default=0.0)
        wall = (time.perf_counter() - t0) * 1000.0
        name = f"row{idx}[n={action.space.n},|G|={action.order}]"
        report.add(name, "plain_box_upper", plain.value, "UPPER", 0.0, budget.seed, wall)
        report.add(name, "properness_max_defect", max_defect, "ORACLE", 0.0, budget.seed, wall)
        report.add(
            name, "limit_group_order", float(limit_group.order), "ORACLE", 0.0,
            budget.seed, wall,
        )
    return report, groups


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

_CSV_HEADER = "instance,metric,value,kind,err,seed,wall_ms"
_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: ExperimentReport, formats, base_path: str) -> list[str]:
    """Write the report as CSV, JSON and SVG next to base_path.

    Wall times are zeroed in the files so that repeated runs with the same
    seed and configuration are byte-identical."""
    written = []
    rows = report.rows
    if "csv" in formats:
        path = base_path + ".csv"
        lines = [_CSV_HEADER]
        for r in rows:
            lines.append(
                f"{r.instance},{r.metric},{_fmt(r.value)},{r.kind},{_fmt(r.err)},{r.seed},0"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        written.append(path)
    if "json" in formats:
        path = base_path + ".json"
        payload = {
            "meta": report.meta,
            "rows": [
                {
                    "instance": r.instance,
                    "metric": r.metric,
                    "value": r.value,
                    "kind": r.kind,
                    "err": r.err,
                    "seed": r.seed,
                    "wall_ms": 0,
                }
                for r in rows
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if "svg" in formats:
        path = base_path + ".svg"
        with open(path, "w") as fh:
            fh.write(_render_svg(rows))
        written.append(path)
    return written


def _render_svg(rows: list[ReportRow]) -> str:
    metrics: dict[str, list[float]] = {}
    for r in rows:
        metrics.setdefault(r.metric, []).append(r.value)
    width, height, pad = 640, 400, 48
    values = [v for vs in metrics.values() for v in vs]
    lo = min(values, default=0.0)
    hi = max(values, default=1.0)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{pad - 10}" font-size="12">{"%.6g" % hi}</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="12">{"%.6g" % lo}</text>',
    ]
    for ci, (metric, vs) in enumerate(sorted(metrics.items())):
        color = _SVG_COLORS[ci % len(_SVG_COLORS)]
        n = len(vs)
        pts = []
        for i, v in enumerate(vs):
            x = pad + (width - 2 * pad) * (i / max(1, n - 1))
            y = height - pad - (height - 2 * pad) * ((v - lo) / (hi - lo))
            pts.append(f"{x:.2f},{y:.2f}")
        parts.append(
            f'<polyline fill="none" stroke="{color}" points="{" ".join(pts)}"/>'
        )
        parts.append(
            f'<text x="{width - pad - 180}" y="{pad + 16 * ci}" font-size="12" '
            f'fill="{color}">{metric}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
