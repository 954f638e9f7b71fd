"""Command-line interface.

Verbs: validate, aut, quotient, box, dconc, experiment, verify.
Exit codes: 0 success, 2 validation failure, 3 budget exhaustion.
EQBOX_THREADS caps experiment parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import io as eqio
from .boxdist import SearchBudget, box_oracle, box_upper
from .errors import BudgetError, ValidationError
from .group import enumerate_aut, quotient
from .harness import LensConfig, emit_report, run_lens_experiment, run_properness_probe, run_quotient_convergence, gen_cycle
from .obsdist import dconc_oracle, dconc_upper
from .verify import SUITES, run_suites, write_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


def _budget_from_args(args) -> SearchBudget:
    k = args.budget
    return SearchBudget(
        seed=args.seed,
        nw_samples=k,
        perm_samples=max(4, k // 2),
        refine_steps=2 * k,
    )


def _cmd_validate(args) -> int:
    action = eqio.load_instance(args.file, use_group=True)
    print(
        json.dumps(
            {
                "ok": True,
                "points": action.space.n,
                "group_order": action.order,
                "diameter": action.space.diam,
            }
        )
    )
    return EXIT_OK


def _cmd_aut(args) -> int:
    action = eqio.load_instance(args.file, use_group=False)
    aut = enumerate_aut(action.space)
    print(json.dumps({"order": aut.order, "elements": [list(p) for p in aut.elements]}))
    return EXIT_OK


def _cmd_quotient(args) -> int:
    action = eqio.load_instance(args.file, use_group=True)
    qspace, orbit_map = quotient(action)
    print(
        json.dumps(
            {"space": eqio.space_to_dict(qspace), "orbit_map": list(orbit_map)}
        )
    )
    return EXIT_OK


def _cmd_distance(args, which: str) -> int:
    A = eqio.load_instance(args.A, use_group=args.eq)
    B = eqio.load_instance(args.B, use_group=args.eq)
    out: dict = {"seed": args.seed, "eq": bool(args.eq)}
    if args.oracle:
        if which == "box":
            res = box_oracle(A, B, args.grid)
            out.update(value=res.value, kind=res.kind, err=res.err)
            if res.coupling is not None:
                out["witness_coupling"] = eqio.coupling_to_dict(res.coupling)
        else:
            lip_grid = max(A.space.diam, B.space.diam, 1e-9) / 8.0
            res = dconc_oracle(A, B, args.grid, lip_grid)
            out.update(value=res.value, kind=res.kind, err=res.err, lip_grid=lip_grid)
            if res.coupling is not None:
                out["witness_coupling"] = eqio.coupling_to_dict(res.coupling)
    else:
        budget = _budget_from_args(args)
        if which == "box":
            res = box_upper(A, B, budget)
            out.update(value=res.value, kind=res.kind, err=res.err)
            out["witness_coupling"] = eqio.coupling_to_dict(res.coupling)
            out["certificates"] = [
                {
                    "g": m.g_index,
                    "h": m.h_index,
                    "value": m.value,
                    "threshold": m.cert.threshold,
                    "missed_mass": m.cert.miss,
                    "subset_size": len(m.cert.subset),
                    "exact": m.cert.exact,
                }
                for m in res.details.row + res.details.col
            ]
        else:
            res = dconc_upper(A, B, budget)
            out.update(value=res.value, kind=res.kind, err=res.err)
            out["witness_coupling"] = eqio.coupling_to_dict(res.coupling)
    print(json.dumps(out))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    with open(args.config) as fh:
        cfg_doc = json.load(fh)
    seed = int(cfg_doc.get("seed", 0))
    budget = SearchBudget(
        seed=seed,
        nw_samples=int(cfg_doc.get("nw_samples", 8)),
        refine_steps=int(cfg_doc.get("refine_steps", 10)),
        perm_samples=int(cfg_doc.get("perm_samples", 4)),
    )
    if args.kind == "lens":
        cfg = LensConfig.from_dict(cfg_doc)
        report = run_lens_experiment(cfg, budget=budget)
    elif args.kind == "quotient":
        ns = cfg_doc.get("cycle_sizes", [4, 6, 8])
        target = gen_cycle(int(cfg_doc.get("target_size", max(ns))))
        report = run_quotient_convergence(
            [gen_cycle(int(n)) for n in ns],
            target,
            kappa=float(cfg_doc.get("kappa", 0.1)),
            budget=budget,
        )
    elif args.kind == "properness":
        ns = cfg_doc.get("cycle_sizes", [4, 4])
        Y = gen_cycle(int(cfg_doc.get("target_size", ns[0]))).space
        report, _ = run_properness_probe(
            [gen_cycle(int(n)) for n in ns], Y, budget=budget
        )
    else:
        raise ValidationError(f"unknown experiment {args.kind!r}")
    written = emit_report(
        report, ("csv", "json", "svg"), os.path.join(args.out, args.kind)
    )
    print(json.dumps({"written": written, "rows": len(report.rows)}))
    return EXIT_OK


def _cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    rows = run_suites(names, args.seed)
    if args.out:
        write_report(rows, args.out, args.seed)
    failed = [r for r in rows if not r.passed]
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.suite}.{r.check} observed={r.observed:.3g} bound={r.bound:.3g}")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_OK if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eqbox",
        description="Box and observable distances between finite metric "
        "measure spaces with group actions",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="validate a space or action file")
    sp.add_argument("file")
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("aut", help="enumerate the automorphism group")
    sp.add_argument("file")
    sp.set_defaults(func=_cmd_aut)

    sp = sub.add_parser("quotient", help="quotient space of an action")
    sp.add_argument("file")
    sp.set_defaults(func=_cmd_quotient)

    for verb in ("box", "dconc"):
        sp = sub.add_parser(verb, help=f"{verb} distance between two instances")
        sp.add_argument("A")
        sp.add_argument("B")
        sp.add_argument("--eq", action="store_true", help="use the group actions")
        sp.add_argument("--oracle", action="store_true", help="grid brute force")
        sp.add_argument("--grid", type=float, default=0.125, help="mass grid step")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget", type=int, default=16, help="search effort")
        sp.set_defaults(func=lambda a, v=verb: _cmd_distance(a, v))

    sp = sub.add_parser("experiment", help="run a convergence experiment")
    sp.add_argument("kind", choices=("lens", "quotient", "properness"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("verify", help="run the verification suites")
    sp.add_argument("--suite", default="all", choices=["all", *SUITES])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="directory for the report files")
    sp.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
