"""Command-line front end: verification, inspection, codegen, and sweeps.

Exit codes: 0 success, 1 check/simulation failure, 2 usage or config error.
Output defaults to the current directory, overridable with GKPNET_OUTDIR.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, codes, decoder, engine, noise, splitters
from . import macronet as mn

RATIO_DB = 10.95  # -10 log10(2 eps) at which the term ratios are quoted
INSPECT_NNZ_GUARD = 10**7


def _out_path(name: str | None) -> Path | None:
    if name is None:
        return None
    path = Path(name)
    if not path.is_absolute():
        path = Path(os.environ.get("GKPNET_OUTDIR", ".")) / path
    return path


def _fmt12(x: float) -> str:
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# verify


def _verify_splitters(max_n: int, report: list) -> bool:
    ok = True
    for kind in splitters.KINDS:
        sizes = []
        for n in range(2, max_n + 1):
            if kind == "two_pow" and (n & (n - 1)) != 0:
                continue
            red = splitters.reduce_splitter(splitters.build_splitter(kind, n))
            good = red.canonical
            ok &= good
            sizes.append({"n": n, "zeta": red.zeta, "canonical": good})
        report.append({"check": f"splitter:{kind}", "sizes": sizes})
    return ok


def _verify_noiseless(code: str, d: int, trials: int, report: list) -> bool:
    cfg = engine.SimConfig(
        code=code, distance=d, epsilons=(0.0,), trials=trials, seed=0
    )
    pipe = engine.build_pipeline(cfg)
    res = engine.run_point(pipe, cfg, 0, 0.0)
    ok = res.failures == 0 and res.defect_totals == (0, 0)
    report.append(
        {
            "check": "noiseless",
            "code": code,
            "distance": d,
            "trials": trials,
            "failures": res.failures,
            "defects": list(res.defect_totals),
        }
    )
    return ok


def _verify_ratios(report: list) -> bool:
    eps = 10 ** (-RATIO_DB / 10.0) / 2.0
    expected = {3: 2.01, 4: 3.82, 5: 5.43}
    rows = []
    ok = True
    for n, want in expected.items():
        ratio = noise.flip_prob(n * eps) / (n * noise.flip_prob(2.0 * eps))
        good = abs(ratio - want) <= 0.02
        ok &= good
        rows.append({"n": n, "ratio": ratio, "expected": want, "pass": good})
    report.append({"check": "ratios", "db": RATIO_DB, "rows": rows})
    return ok


def _verify_kmat(report: list) -> bool:
    ok = True
    rows = []
    for kind in splitters.KINDS:
        for n in (3, 4, 5):
            if kind == "two_pow" and (n & (n - 1)) != 0:
                continue
            red = splitters.reduce_splitter(splitters.build_splitter(kind, n))
            good = red.canonical
            ok &= good
            rows.append({"kind": kind, "n": n, "pass": good})
    report.append({"check": "kmat", "rows": rows})
    return ok


def cmd_verify(args) -> int:
    report: list = []
    all_selected = not (args.splitters or args.noiseless or args.ratios or args.kmat)
    ok = True
    if args.splitters or all_selected:
        ok &= _verify_splitters(args.max_n, report)
    if args.noiseless or all_selected:
        ok &= _verify_noiseless(args.code, args.d, args.trials, report)
    if args.ratios or all_selected:
        ok &= _verify_ratios(report)
    if args.kmat or all_selected:
        ok &= _verify_kmat(report)
    for entry in report:
        status = "ok"
        if entry["check"] == "ratios":
            status = " ".join(
                f"{r['ratio']:.3f}" for r in entry["rows"]
            ) + ("" if all(r["pass"] for r in entry["rows"]) else "  FAIL")
        elif entry["check"] == "noiseless":
            status = (
                f"{entry['failures']} failures, defects {entry['defects']}"
                + ("" if entry["failures"] == 0 else "  FAIL")
            )
        print(f"verify {entry['check']}: {status}")
    if args.json:
        path = _out_path(args.json)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"pass": ok, "report": report}, fh, indent=2)
            fh.write("\n")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# inspect


def _load_graph(path: str) -> mn.TargetGraph:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return mn.TargetGraph.from_edges(
        int(data["num_nodes"]), [tuple(e) for e in data["edges"]]
    )


def cmd_inspect(args) -> int:
    dump: dict = {"version": __version__}
    if args.splitter is not None:
        sched = splitters.build_splitter(args.splitter, args.n)
        red = splitters.reduce_splitter(sched)
        dump["splitter"] = {
            "kind": args.splitter,
            "n": args.n,
            "angles": [
                {"modes": [a, b], "theta": _fmt12(theta)}
                for layer in sched.layers
                for (a, b, theta) in layer
            ],
            "reduced": {
                "central": red.central,
                "zeta": _fmt12(red.zeta),
                "weights": [_fmt12(w) for w in red.weights],
                "canonical": red.canonical,
            },
        }
    if args.graph is not None:
        graph = _load_graph(args.graph)
        layout = mn.macronize(graph, splitter_kind=args.layout_splitter)
        plan = mn.measurement_plan(layout, args.basis)
        shift = mn.shift_matrix(layout, plan)
        if shift.matrix.nnz > INSPECT_NNZ_GUARD and not args.force:
            print(
                f"error: shift matrix has {shift.matrix.nnz} nonzeros; "
                "pass --force to dump it",
                file=sys.stderr,
            )
            return 1
        coo = shift.matrix.tocoo()
        dump["layout"] = {
            "num_nodes": layout.num_nodes,
            "num_modes": layout.num_modes,
            "node_modes": layout.node_modes,
            "dumbbells": [list(p) for p in layout.dumbbells],
        }
        dump["plan"] = [
            {
                "mode": s.mode,
                "theta": _fmt12(s.theta),
                "rescale": _fmt12(s.rescale),
                "logical_angle": _fmt12(s.logical_angle),
            }
            for s in plan.settings
        ]
        dump["shift_matrix"] = {
            "shape": list(shift.matrix.shape),
            "triplets": [
                [int(r), int(c), _fmt12(v)]
                for r, c, v in zip(coo.row, coo.col, coo.data)
            ],
        }
    if args.splitter is None and args.graph is None:
        print("error: nothing to inspect (use --splitter or --graph)", file=sys.stderr)
        return 2
    text = json.dumps(dump, indent=2) + "\n"
    if args.out:
        with open(_out_path(args.out), "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# codegen


def cmd_codegen(args) -> int:
    if args.family != "toric":
        print(f"error: unknown code family {args.family!r}", file=sys.stderr)
        return 2
    if args.d < 2:
        print("error: toric distance must be >= 2", file=sys.stderr)
        return 2
    code = codes.toric_code(args.d)
    out = _out_path(args.out or f"toric_d{args.d}.code")
    codes.save_code(code, out)
    print(f"wrote {out} (n={code.n} k={code.k} d={code.distance})")
    return 0


# ---------------------------------------------------------------------------
# simulate / sweep


def _config_from_args(args) -> engine.SimConfig:
    data: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    overrides = {
        "code": getattr(args, "code", None),
        "distance": getattr(args, "d", None),
        "splitter": getattr(args, "splitter_kind", None),
        "rounds": getattr(args, "rounds", None),
        "trials": getattr(args, "trials", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "threads", None),
        "binning": getattr(args, "binning", None),
        "convention": getattr(args, "convention", None),
        "csv_path": getattr(args, "out_csv", None),
        "manifest_path": getattr(args, "out_manifest", None),
    }
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    if getattr(args, "epsilon", None) is not None:
        data["epsilons"] = [args.epsilon]
        data.pop("dbs", None)
    elif getattr(args, "db", None) is not None:
        data["dbs"] = [args.db]
        data.pop("epsilons", None)
    cfg = engine.SimConfig.from_dict(data)
    if cfg.workers is None or cfg.workers < 1:
        cfg.workers = os.cpu_count() or 1
    for name in ("csv_path", "manifest_path"):
        val = getattr(cfg, name)
        if val is not None:
            setattr(cfg, name, str(_out_path(val)))
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    results = engine.run_sweep(cfg)
    out = [
        {
            "epsilon": r.epsilon,
            "db": r.db,
            "trials": r.trials,
            "failures": r.failures,
            "p_fail": r.p_fail,
            "ci": [r.ci_low, r.ci_high],
        }
        for r in results
    ]
    print(json.dumps(out, indent=2))
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = _config_from_args(args)
    except FileNotFoundError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    if cfg.csv_path is None:
        cfg.csv_path = str(_out_path("sweep.csv"))
    if cfg.manifest_path is None:
        cfg.manifest_path = str(_out_path("sweep_manifest.json"))
    results = engine.run_sweep(cfg)
    print(f"wrote {cfg.csv_path} ({len(results)} points)")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkpnet", description="Passive GKP cluster-state toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run built-in verification suites")
    p.add_argument("--splitters", action="store_true")
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--ratios", action="store_true")
    p.add_argument("--kmat", action="store_true")
    p.add_argument("--max-n", type=int, default=16)
    p.add_argument("--code", default="toric")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--json", default=None, help="also write a JSON report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="dump layouts, plans, and matrices")
    p.add_argument("--splitter", choices=sorted(splitters.KINDS), default=None)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--graph", default=None, help="target-graph JSON file")
    p.add_argument("--layout-splitter", default="star", choices=sorted(splitters.KINDS))
    p.add_argument("--basis", default="x", choices=["x", "y", "z"])
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("codegen", help="generate css-code v1 files")
    p.add_argument("family")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_codegen)

    for name in ("simulate", "sweep"):
        p = sub.add_parser(name, help=f"{name} a noise grid")
        p.add_argument("--config", default=None, help="config JSON file")
        p.add_argument("--code", default=None)
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--splitter-kind", default=None, choices=sorted(splitters.KINDS))
        p.add_argument("--rounds", type=int, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--db", type=float, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--binning", default=None, choices=sorted(engine.BINNINGS))
        p.add_argument("--convention", default=None, choices=sorted(engine.CONVENTIONS))
        p.add_argument("--out-csv", default=None)
        p.add_argument("--out-manifest", default=None)
        p.set_defaults(func=cmd_simulate if name == "simulate" else cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
