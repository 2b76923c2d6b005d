"""Command-line entry point: build, query, gt, gen-workload, bench, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
Logging verbosity comes from ``WOW_LOG`` (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, invariants, oracle, workload
from .core import HybridDataset, Metric
from .index import IndexFormatError, IndexParams, WindowGraphIndex

log = logging.getLogger("windowgraph")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _landing(value: str) -> int | None:
    if value == "auto":
        return None
    try:
        layer = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a layer number") from None
    if layer < 0:
        raise argparse.ArgumentTypeError("layer must be >= 0")
    return layer


def _int_list(value: str) -> list[int]:
    try:
        return [int(t) for t in value.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="windowgraph", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, attrs_required=True):
        sp.add_argument("--vectors", required=True, help="base vectors (.fvecs/.ivecs/.bvecs)")
        sp.add_argument("--attrs", required=attrs_required, help="one integer attribute per line")
        sp.add_argument("--metric", choices=["l2", "cosine"], default="l2")

    def query_args(sp):
        sp.add_argument("--queries", required=True, help="query vectors (.fvecs)")
        sp.add_argument("--ranges", required=True, help="workload CSV qid,x,y,fraction")
        sp.add_argument("--k", type=int, default=10)

    def search_args(sp):
        sp.add_argument("--no-early-stop", action="store_true")
        sp.add_argument("--landing-layer", type=_landing, default=None, metavar="{auto,N}")

    b = sub.add_parser("build", help="build an index file")
    data_args(b)
    b.add_argument("--m", type=int, default=16)
    b.add_argument("--efc", type=int, default=128, help="construction beam width")
    b.add_argument("--o", type=int, default=4, help="window boosting base")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)

    q = sub.add_parser("query", help="answer a range workload")
    q.add_argument("--index", required=True)
    data_args(q)
    query_args(q)
    q.add_argument("--efs", type=int, default=64)
    search_args(q)

    g = sub.add_parser("gt", help="exact ground truth by pre-filtering")
    data_args(g)
    query_args(g)
    g.add_argument("--out", required=True)

    w = sub.add_parser("gen-workload", help="generate range workloads (and optionally remap/shuffle the data)")
    data_args(w, attrs_required=False)
    w.add_argument("--queries", required=True, help="query vectors (.fvecs)")
    w.add_argument("--fractions", default="mixed", help="'mixed' or comma-separated exponents/fractions, e.g. 0,-3,-6")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--shuffle", type=int, default=None, metavar="SEED", help="reshuffle vector-attribute pairs")
    w.add_argument("--rank-remap", action="store_true", help="replace attributes by their sorted rank")
    w.add_argument("--out", required=True, help="output prefix")

    be = sub.add_parser("bench", help="sweep omega_s and write BenchRecord CSV")
    be.add_argument("--index", required=True)
    data_args(be)
    query_args(be)
    be.add_argument("--efs", type=_int_list, default=[16, 32, 64, 128, 256, 512])
    be.add_argument("--out", required=True)
    search_args(be)

    v = sub.add_parser("verify", help="check structural invariants of an index file")
    v.add_argument("--index", required=True)
    data_args(v)
    return p


# -------------------------------------------------------------------- I/O


def _load_data(args) -> tuple[np.ndarray, np.ndarray]:
    vecs = workload.read_vectors(args.vectors).astype(np.float32)
    if args.attrs:
        attrs = workload.read_attributes(args.attrs)
    else:
        attrs = workload.assign_attributes(len(vecs), "sequential-id") if len(vecs) else np.empty(0, np.int64)
    if len(attrs) != len(vecs):
        raise ValueError(f"{len(vecs)} vectors but {len(attrs)} attributes")
    return vecs, attrs


def _load_index(args, vecs, attrs) -> WindowGraphIndex:
    index = WindowGraphIndex.load(args.index, vecs, attrs)
    if index.metric is not Metric.parse(args.metric):
        log.info("metric taken from index header: %s", index.metric.label)
    return index


def _parse_fractions(text: str) -> list[float] | str:
    if text == "mixed":
        return text
    out = []
    for tok in text.split(","):
        val = float(tok)
        out.append(2.0**val if val <= 0 and float(val).is_integer() and val != 1 else val)
    return out


# --------------------------------------------------------------- commands


def cmd_build(args) -> int:
    vecs, attrs = _load_data(args)
    params = IndexParams(m=args.m, omega_c=args.efc, o=args.o, metric=args.metric, seed=args.seed)
    dim = vecs.shape[1] if vecs.size else 1
    index = WindowGraphIndex(dim, params)
    t0 = time.perf_counter()
    if len(vecs):
        index.insert_many(vecs, attrs, threads=args.threads)
    elapsed = time.perf_counter() - t0
    index.save(args.out)
    report = {"build_seconds": elapsed, "threads": args.threads, **index.structural_stats()}
    Path(str(args.out) + ".report.json").write_text(json.dumps(report, indent=2) + "\n")
    log.info("built %d vectors in %.2fs, top layer %d", index.n, elapsed, index.top)
    return EXIT_OK


def cmd_query(args) -> int:
    vecs, attrs = _load_data(args)
    index = _load_index(args, vecs, attrs)
    wl = workload.RangeWorkload.load(args.ranges, args.queries)
    out = sys.stdout
    for i, (q, r) in enumerate(zip(wl.queries, wl.ranges)):
        found = index.search_knn(
            q, r, args.k, max(args.efs, args.k),
            early_stop=not args.no_early_stop, landing=args.landing_layer,
        )
        for vid, d in found:
            out.write(f"{i} {vid} {d:.6f} {int(attrs[vid])}\n")
    return EXIT_OK


def cmd_gt(args) -> int:
    vecs, attrs = _load_data(args)
    wl = workload.RangeWorkload.load(args.ranges, args.queries)
    ds = HybridDataset.from_arrays(vecs, attrs, args.metric)
    oracle.write_ground_truth(args.out, oracle.ground_truth(ds, wl.queries, wl.ranges, args.k))
    return EXIT_OK


def cmd_gen_workload(args) -> int:
    vecs, attrs = _load_data(args)
    prefix = str(args.out)
    ingest = args.rank_remap or args.shuffle is not None
    if args.rank_remap:
        attrs = workload.rank_remap(attrs)
    if args.shuffle is not None:
        vecs, attrs = workload.shuffle_pairs(vecs, attrs, args.shuffle)
    queries = workload.read_vectors(args.queries).astype(np.float32)
    # validate the workload before writing anything, so errors leave no partial output
    wl = workload.gen_workload(attrs, queries, _parse_fractions(args.fractions), seed=args.seed)
    if ingest:
        workload.write_vectors(prefix + ".base.fvecs", vecs, "fvecs")
        workload.write_attributes(prefix + ".attrs", attrs)
    wl.save(prefix + ".csv", prefix + ".queries.fvecs")
    return EXIT_OK


def cmd_bench(args) -> int:
    vecs, attrs = _load_data(args)
    index = _load_index(args, vecs, attrs)
    wl = workload.RangeWorkload.load(args.ranges, args.queries)
    gold = oracle.ground_truth(index.dataset(), wl.queries, wl.ranges, args.k, exclude=index.deleted)
    ablation = bench.Ablation(early_stop=not args.no_early_stop, landing=args.landing_layer)
    omegas = [w for w in args.efs if w >= args.k]
    if not omegas:
        raise UsageError("no --efs value is >= --k")
    records = bench.run_sweep(index, wl, gold, args.k, omegas, ablation=ablation)
    bench.emit_csv(records, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    vecs, attrs = _load_data(args)
    index = _load_index(args, vecs, attrs)
    problems = invariants.check_all(index)
    for p in problems:
        print(f"FAIL {p.name}: {p.detail}")
    if problems:
        return EXIT_INVARIANT
    print(f"OK {index.n} vectors, {index.num_layers} layers")
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "query": cmd_query,
    "gt": cmd_gt,
    "gen-workload": cmd_gen_workload,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("WOW_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndexFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
