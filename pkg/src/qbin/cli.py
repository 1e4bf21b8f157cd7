"""``qbin`` command line.

Files on disk mirror the trust boundary: the layout file is owner state,
while the stores directory is what the cloud holds (plus its observation
log). Machine-readable output goes to stdout or ``--out``; a short human
summary goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import audit, costmodel
from .binning import MODES, BinLayout, create_bins
from .core import IngestError, Rng, build_metadata, ingest, read_rows, write_ndjson, write_rows
from .executor import execute, execute_naive, plan_query
from .pipeline import DISTRIBUTIONS, WorkloadSpec, bench_summary, generate, run_workload
from .stores import (
    OBSERVATIONS_FILE,
    ObservationLog,
    OwnerKey,
    encrypt_and_upload,
    load_stores,
    save_stores,
)

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_AUDIT = 3
SEED_ENV = "QBIN_SEED"
SECRET_WARNING = "warning: {} is owner secret state; never upload it next to the stores"


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else args.seed


def _parse_value(s: str):
    return int(s) if s.lstrip("-").isdigit() else s


def _load_relation(args):
    return ingest(read_rows(args.data), args.attribute)


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=str)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# --- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    rows = generate(
        args.values,
        args.alpha,
        args.multiplicity,
        args.ns_multiplicity,
        args.associated,
        _seed(args),
        args.attribute,
        args.max_rows,
    )
    write_rows(args.out, rows)
    n_s = sum(r.sensitive for r in rows)
    _say(f"generated {len(rows)} rows ({n_s} sensitive) -> {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    rel = _load_relation(args)
    meta = build_metadata(rel)
    _dump(
        {
            "rows": len(rel.rows),
            "sensitive_rows": len(rel.sensitive_rows),
            "sensitive_values": meta.n_sensitive,
            "nonsensitive_values": meta.n_nonsensitive,
            "associated": len(meta.associated),
            "one_to_one": meta.is_one_to_one(),
            **meta.to_dict(),
        },
        args.out,
    )
    _say(
        f"{len(rel.rows)} rows: |S|={meta.n_sensitive} |NS|={meta.n_nonsensitive} "
        f"associated={len(meta.associated)}"
    )
    return EXIT_OK


def cmd_plan(args) -> int:
    rel = _load_relation(args)
    layout = create_bins(build_metadata(rel), Rng(_seed(args)).child("permutation"), args.mode)
    layout.save(args.layout)
    _say(
        f"{layout.mode} layout: {layout.n_sb} sensitive bins x {layout.n_nsb} non-sensitive bins, "
        f"{layout.total_fakes} fake tuples -> {args.layout}"
    )
    _say(SECRET_WARNING.format(args.layout))
    return EXIT_OK


def cmd_upload(args) -> int:
    rel = _load_relation(args)
    layout = BinLayout.load(args.layout)
    enc, plain = encrypt_and_upload(rel, layout, Rng(_seed(args)).child("upload"), charge=args.charge)
    save_stores(args.stores, enc, plain)
    _say(f"uploaded {enc.size} ciphertexts and {plain.size} plaintext rows -> {args.stores}")
    if Path(args.layout).resolve().parent == Path(args.stores).resolve():
        _say(SECRET_WARNING.format(args.layout))
    return EXIT_OK


def cmd_query(args) -> int:
    layout = BinLayout.load(args.layout)
    key = OwnerKey.from_seed(layout.permutation_seed)
    enc, plain = load_stores(args.stores, args.charge)
    log_path = Path(args.stores) / OBSERVATIONS_FILE
    index = len(ObservationLog.read(log_path)) if log_path.exists() else 0
    log = ObservationLog(log_path)
    w = _parse_value(args.value)
    if args.naive:
        res = execute_naive(w, enc, plain, key, layout.sensitive_counts, log, index)
    else:
        res = execute(plan_query(layout, w, key), enc, plain, key, log, index)
    for r in sorted(res.rows, key=lambda r: r.row_id):
        print(json.dumps(r.to_dict(), sort_keys=True))
    st = res.stats
    _say(
        f"matches={st.matches} fetched={st.enc_fetched}+{st.plain_fetched} "
        f"discarded={st.discarded} bytes={st.bytes_transferred}"
    )
    return EXIT_OK


def _workload_spec(args) -> WorkloadSpec:
    values = ()
    if args.dist == "list":
        if not args.queries:
            raise SystemExit("--dist list needs --queries FILE")
        values = tuple(
            _parse_value(line.strip()) for line in Path(args.queries).read_text().splitlines() if line.strip()
        )
    return WorkloadSpec(args.dist, args.count, args.workload_seed, args.zipf_s, values)


def cmd_workload(args) -> int:
    rel = _load_relation(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(args)
    run = run_workload(
        rel,
        _workload_spec(args),
        args.mode,
        seed,
        naive=args.naive,
        verify=args.verify,
        charge=args.charge,
    )
    write_ndjson(out / "results.ndjson", run.results)
    run.view.save(out / "av.ndjson")
    (out / "bench.json").write_text(json.dumps(bench_summary(run, rel), indent=2, sort_keys=True) + "\n")
    _write_truth(out / "truth.json", run, rel)
    run.layout.save(out / "layout.ndjson")
    save_stores(out / "stores", run.enc, run.plain)
    write_ndjson(out / "stores" / OBSERVATIONS_FILE, (o.to_dict() for o in run.view.observations))
    _say(f"{len(run.queries)} queries on a {run.layout.mode} layout -> {out}")
    _say(SECRET_WARNING.format(out / "layout.ndjson"))
    if args.verify:
        if run.mismatches:
            _say(f"verification FAILED on {len(run.mismatches)} queries: {run.mismatches[:10]}")
            return EXIT_VERIFY
        _say(f"verified {len(run.queries)}/{len(run.queries)} queries")
    return EXIT_OK


def _write_truth(path: Path, run, rel) -> None:
    """Evaluator-only ground truth for the attack simulators."""
    key = OwnerKey.from_seed(run.layout.permutation_seed)
    counts = run.layout.sensitive_counts
    heaviest = max(counts, key=lambda v: (counts[v], str(v)), default=None)
    hot = max(set(run.queries), key=lambda v: (run.queries.count(v), str(v)), default=None)
    ref_of = {c.tag: c.tuple_ref for c in run.enc.rows}

    def refs(v):
        return [ref_of[key.tag(v, k)] for k in range(counts.get(v, 0))]

    truth = {
        "heaviest_value": heaviest,
        "target_refs": refs(heaviest) if heaviest is not None else [],
        "true_counts": [counts.get(w, 0) for w in run.queries],
        "hot_value": hot,
        "hot_ref": (refs(hot) or [None])[0] if hot is not None else None,
        "bin_capacity": max((len(run.layout.sensitive_values(i)) for i in range(run.layout.n_sb)), default=1),
    }
    path.write_text(json.dumps(truth, indent=2, sort_keys=True, default=str) + "\n")


def cmd_audit(args) -> int:
    av = audit.AdversarialView.load(args.av)
    truth = json.loads(Path(args.truth).read_text()) if args.truth else {}
    if args.check == "security":
        if args.graph_csv:
            audit.surviving_graph(av, args.granularity).to_csv(args.graph_csv)
        verdict = audit.check_partitioned_security(av, route=args.route, weighting=args.weighting)
        report = {"check": "security", **verdict.to_dict()}
        failed = not verdict.holds
        _say(
            f"condition 1 {'holds' if verdict.condition1_holds else 'FAILS'}, "
            f"condition 2 {'holds' if verdict.condition2_holds else 'FAILS'}"
        )
    else:
        if args.check == "size":
            rep = audit.size_attack(av, truth.get("target_refs"), trials=args.trials)
        elif args.check == "frequency":
            if "true_counts" not in truth:
                raise SystemExit("frequency check needs --truth with true_counts")
            rep = audit.frequency_count_attack(av, truth["true_counts"], trials=args.trials)
        else:
            rep = audit.workload_skew_attack(
                av, truth.get("hot_ref"), truth.get("bin_capacity"), trials=args.trials
            )
        report = {"check": args.check, **rep.to_dict()}
        failed = rep.success
        _say(f"{args.check} attack {'SUCCEEDS' if rep.success else 'fails'} (advantage {rep.advantage:.4f})")
    _dump(report, args.out)
    return EXIT_AUDIT if failed else EXIT_OK


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def cmd_model(args) -> int:
    if args.calibrate:
        stats = json.loads(Path(args.calibrate).read_text())
        totals = stats.get("totals", stats)
        D = args.D or stats["D"]
        p = costmodel.CostParams(
            stats.get("alpha", args.alphas and _floats(args.alphas)[0] or 0.0),
            D,
            stats.get("ns_values", args.ns),
            args.c_e,
            args.c_p,
            args.c_com,
            stats.get("rho"),
            stats.get("sb_size"),
            stats.get("nsb_size"),
        )
        emp = costmodel.eta_empirical(totals, D, p)
        res = costmodel.eta(p)
        _dump(
            {
                "eta_empirical": emp,
                "eta_simplified": res.eta_simplified,
                "eta_full": res.eta_full,
                "ratio": emp / res.eta_simplified if res.eta_simplified else None,
            },
            args.out,
        )
        return EXIT_OK
    lo, hi, pts = args.gamma_range.split(":")
    gammas = costmodel.log_range(float(lo), float(hi), int(pts))
    rows = costmodel.eta_curve(args.rho, _floats(args.alphas), gammas, args.ns)
    text = costmodel.to_csv(rows, ["gamma", "alpha", "eta"])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    edge = costmodel.break_even_alpha(args.rho, args.ns, gammas[0]) if gammas else float("nan")
    _say(f"{len(rows)} grid points; break-even alpha at gamma={gammas[0] if gammas else 'n/a'}: {edge:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _seed(args)
    if args.data:
        rel = _load_relation(args)
    else:
        rel = ingest(
            generate(args.values, args.alpha, args.multiplicity, args.ns_multiplicity, seed=seed),
            "value",
        )
    run = run_workload(rel, _workload_spec(args), args.mode, seed, naive=args.naive, verify=True, charge=args.charge)
    summary = bench_summary(run, rel)
    p = costmodel.CostParams(
        summary["alpha"],
        summary["D"],
        max(1, summary["ns_values"]),
        args.c_e,
        args.c_p,
        args.c_com,
        summary["rho"] or None,
        summary["sb_size"],
        summary["nsb_size"],
    )
    summary["eta_empirical"] = costmodel.eta_empirical(summary["totals"], summary["D"], p)
    summary["eta_simplified"] = costmodel.eta(p).eta_simplified
    summary["verified"] = run.verified
    _dump(summary, args.out)
    t = summary["totals"]
    _say(
        f"{t['queries']} queries, {t['enc_scanned']} ciphertexts scanned, {t['discarded']} discarded, "
        f"eta_empirical={summary['eta_empirical']:.4f} eta_simplified={summary['eta_simplified']:.4f}"
    )
    return EXIT_OK if run.verified else EXIT_VERIFY


# --- parser ------------------------------------------------------------------


def _add_data(p, required=True) -> None:
    p.add_argument("--data", required=required, help="NDJSON or CSV rows with a 'sensitive' column")
    p.add_argument("--attribute", default="value", help="searchable attribute name")


def _add_workload(p) -> None:
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--zipf-s", type=float, default=1.0)
    p.add_argument("--queries", help="one query value per line, for --dist list")
    p.add_argument("--workload-seed", type=int, default=0)
    p.add_argument("--mode", choices=("auto",) + MODES, default="auto")
    p.add_argument("--naive", action="store_true", help="insecure exact-match baseline")
    p.add_argument("--charge", choices=("scan", "token"), default="scan")


def _add_costs(p) -> None:
    p.add_argument("--c-e", type=float, default=1.0)
    p.add_argument("--c-p", type=float, default=1e-2)
    p.add_argument("--c-com", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qbin", description="Query binning over partitioned data.")
    ap.add_argument("--seed", type=int, default=0, help=f"root seed (overridden by ${SEED_ENV})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--values", type=int, default=20, help="distinct values counted per side")
    p.add_argument("--alpha", type=float, default=0.5, help="share of values that are sensitive")
    p.add_argument("--multiplicity", default="1", help="e.g. 3 or 10..90:10")
    p.add_argument("--ns-multiplicity", default="1")
    p.add_argument("--associated", type=int)
    p.add_argument("--attribute", default="value")
    p.add_argument("--max-rows", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="summarize a dataset into owner metadata")
    _add_data(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plan", help="create the secret bin layout")
    _add_data(p)
    p.add_argument("--mode", choices=("auto",) + MODES, default="auto")
    p.add_argument("--layout", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("upload", help="encrypt and write the stores directory")
    _add_data(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--stores", required=True)
    p.add_argument("--charge", choices=("scan", "token"), default="scan")
    p.set_defaults(func=cmd_upload)

    p = sub.add_parser("query", help="run one selection query")
    p.add_argument("--value", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--stores", required=True)
    p.add_argument("--naive", action="store_true")
    p.add_argument("--charge", choices=("scan", "token"), default="scan")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("workload", help="run a query workload end to end")
    _add_data(p)
    _add_workload(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--verify", action="store_true", help="check every answer against a full scan")
    p.set_defaults(func=cmd_workload)

    p = sub.add_parser("audit", help="audit an adversarial view")
    p.add_argument("--av", required=True)
    p.add_argument("--check", choices=("security", "size", "frequency", "skew"), default="security")
    p.add_argument("--truth", help="evaluator ground truth written by 'workload'")
    p.add_argument("--route", choices=("kernel", "aggregate"), default="kernel")
    p.add_argument("--weighting", choices=audit.WEIGHTINGS, default="layouts")
    p.add_argument("--graph-csv", help="write the surviving-matches edge list here")
    p.add_argument("--granularity", choices=("bins", "values"), default="bins")
    p.add_argument("--trials", type=int, default=audit.TRIALS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("model", help="analytical cost model")
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--gamma-range", default="100:100000:13", help="lo:hi:points, log-spaced")
    p.add_argument("--alphas", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--ns", type=int, default=10_000)
    p.add_argument("--calibrate", help="bench.json with executor counters")
    p.add_argument("--D", type=float)
    _add_costs(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("bench", help="counter benchmark on a generated or given dataset")
    _add_data(p, required=False)
    _add_workload(p)
    p.add_argument("--values", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--multiplicity", default="20")
    p.add_argument("--ns-multiplicity", default="20")
    _add_costs(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, ValueError, FileNotFoundError) as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
