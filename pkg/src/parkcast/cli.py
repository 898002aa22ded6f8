"""parkcast command line: stage-by-stage pipeline over a workspace directory."""

from __future__ import annotations

import argparse
import csv
import sys
from datetime import date, datetime
from pathlib import Path

from parkcast import estimate as est
from parkcast import evaluate as ev
from parkcast.serve import DEFAULT_ESTIMATE_DATE, serve_forever
from parkcast.synthcity import SyntheticCityConfig, generate_synthetic_city
from parkcast.workspace import Workspace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parkcast", description=__doc__)
    parser.add_argument(
        "--workspace", default="workspace", help="workspace directory (default: ./workspace)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse inputs and match amenities to blocks")
    p.add_argument("--occupancy", required=True)
    p.add_argument("--blocks", required=True)
    p.add_argument("--pois", required=True)
    p.add_argument("--amenity-stats", required=True)
    p.add_argument("--basis", choices=("time_spent", "area"), default="time_spent")
    p.add_argument("--merge-distance", type=float, default=100.0)

    p = sub.add_parser("cluster", help="partition blocks into spatial clusters")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--ratio", type=float, default=2.6)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("train", help="aggregate and train per-cluster models")
    p.add_argument("--learner", choices=("gbt", "dt"), default="gbt")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--datapoints", choices=("aggregate", "all"), default="aggregate")
    p.add_argument("--occupancy-mode", choices=("rate", "count"), default="rate")

    p = sub.add_parser("similarity", help="build representations and similarity values")
    p.add_argument("--metric", choices=("cosine", "emd"), required=True)
    p.add_argument("--basis", choices=("time_spent", "area"), default="time_spent")

    p = sub.add_parser("estimate", help="interval table for an unmonitored cluster")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--date", default=DEFAULT_ESTIMATE_DATE.isoformat())
    p.add_argument("--time", default=None, help="HH:MM (default: the 8-time grid)")
    p.add_argument("--metric", choices=("cosine", "emd"), default="cosine")
    p.add_argument("--input-defaults", choices=("computed", "table"), default="computed")

    p = sub.add_parser("evaluate", help="transfer-error and correlation protocol")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--merge-distance", type=float, default=100.0)
    p.add_argument("--basis", choices=("time_spent", "area"), default="time_spent")
    p.add_argument("--datapoints", default="aggregate:aggregate",
                   help="source:target modes, each aggregate or all")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--learner", choices=("gbt", "dt", "both"), default="gbt")
    p.add_argument("--extended", action="store_true",
                   help="also compare all-but-one models with amenity features")

    p = sub.add_parser("synth", help="generate a synthetic city for verification")
    p.add_argument("--blocks", type=int, default=200)
    p.add_argument("--archetypes", type=int, default=3)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out", default=None, help="output directory (default: <workspace>/city)")

    p = sub.add_parser("serve", help="read-only HTTP/JSON API over the workspace")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--date", default=DEFAULT_ESTIMATE_DATE.isoformat())
    p.add_argument("--input-defaults", choices=("computed", "table"), default="computed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    ws = Workspace(args.workspace)
    command = args.command
    if command == "ingest":
        diag = ws.ingest(
            occupancy=args.occupancy,
            blocks=args.blocks,
            pois=args.pois,
            amenity_stats=args.amenity_stats,
            basis=args.basis,
            merge_distance_m=args.merge_distance,
        )
        print(
            f"ingested {diag['records']} records ({diag['row_issues']} row issues), "
            f"{diag['blocks']} blocks, {diag['pois']} POIs "
            f"({diag['pois_without_amenity']} without amenity, "
            f"{diag['pois_unmatched']} unmatched at {args.merge_distance:g} m)"
        )
        if diag["amenities_without_stats"]:
            print(f"warning: no stats for amenities: {', '.join(diag['amenities_without_stats'])}")
        return 0
    if command == "cluster":
        partition = ws.cluster(args.k, args.ratio, args.seed)
        sizes_w = sorted(len(c.block_ids) for c in partition.clusters_with)
        sizes_o = sorted(len(c.block_ids) for c in partition.clusters_without)
        print(
            f"partitioned into {partition.k_with} monitored clusters {sizes_w} "
            f"and {partition.k_without} unmonitored clusters {sizes_o}"
        )
        return 0
    if command == "train":
        models = ws.train(
            "gbt" if args.learner == "gbt" else "decision_tree",
            seed=args.seed,
            datapoints=args.datapoints,
            occupancy_mode=args.occupancy_mode,
        )
        for cid in sorted(models):
            m = models[cid]
            print(f"cluster {cid}: {m.learner} cv_rmse {m.cv_rmse * 100:.2f}% {m.hyperparameters}")
        return 0
    if command == "similarity":
        matrix = ws.build_similarity(args.metric, args.basis)
        print(
            f"wrote {ws.similarity_path(args.metric, args.basis)} "
            f"({len(matrix.source_ids)}x{len(matrix.target_ids)}, "
            f"{matrix.degenerate_pairs} degenerate pairs)"
        )
        return 0
    if command == "estimate":
        day = date.fromisoformat(args.date)
        hours = [int(args.time.split(":")[0])] if args.time else list(est.DEFAULT_HOURS)
        for h in hours:
            table = ws.estimate(
                args.target,
                datetime(day.year, day.month, day.day, h),
                args.metric,
                args.input_defaults,
            )
            print(est.format_table(table))
            print()
        return 0
    if command == "evaluate":
        return _run_evaluate(ws, args)
    if command == "synth":
        out = Path(args.out) if args.out else ws.root / "city"
        config = SyntheticCityConfig(
            n_blocks=args.blocks,
            n_archetypes=args.archetypes,
            days=args.days,
            seed=args.seed,
            noise=args.noise,
        )
        files = generate_synthetic_city(config, out)
        for name, path in files.as_dict().items():
            print(f"{name}: {path}")
        return 0
    if command == "serve":
        serve_forever(
            ws.root,
            port=args.port,
            estimate_date=date.fromisoformat(args.date),
            input_defaults=args.input_defaults,
        )
        return 0
    raise AssertionError(f"unhandled command {command}")


def _run_evaluate(ws: Workspace, args) -> int:
    src_mode, _, tgt_mode = args.datapoints.partition(":")
    tgt_mode = tgt_mode or src_mode
    for mode in (src_mode, tgt_mode):
        if mode not in ("aggregate", "all"):
            print(f"invalid --datapoints mode {mode!r}", file=sys.stderr)
            return 2
    learners = ("gbt", "decision_tree") if args.learner == "both" else (
        "gbt" if args.learner == "gbt" else "decision_tree",
    )
    blocks, pois = ws.load_blocks_pois()
    records = ws.load_records()
    stats = ws.load_stats(args.basis)
    result = ev.evaluate_city(
        blocks,
        records,
        pois,
        stats,
        k=args.k,
        merge_distance_m=args.merge_distance,
        basis=args.basis,
        seed=args.seed,
        datapoints=(src_mode, tgt_mode),
        learners=learners,
        run_extended=args.extended,
    )
    out_dir = ws.root / "evaluation"
    out_dir.mkdir(parents=True, exist_ok=True)
    for learner, matrix in result.transfer.items():
        path = out_dir / f"transfer_errors_{learner}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id", "target_id", "rmse_pct"])
            for (s, t) in sorted(matrix.errors):
                writer.writerow([s, t, f"{matrix.errors[(s, t)]:.4f}"])
        print(f"wrote {path}")
    corr_path = out_dir / "correlations.csv"
    with corr_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["learner", "k", "merge_distance", "basis", "datapoints",
             "cosine", "rank_cosine", "emd", "rank_emd", "excluded"]
        )
        for learner, report in result.correlations.items():
            writer.writerow(
                [
                    learner, args.k, f"{args.merge_distance:g}", args.basis,
                    f"{src_mode}:{tgt_mode}",
                ]
                + [
                    "" if report.means[c] is None else f"{report.means[c]:.4f}"
                    for c in report.COEFFICIENTS
                ]
                + [sum(report.excluded.values())]
            )
            means = {c: report.means[c] for c in report.COEFFICIENTS}
            print(f"{learner}: {means}")
    print(f"wrote {corr_path}")
    if result.fractions:
        frac_path = out_dir / "best_fractions.csv"
        with frac_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["learner", "fraction"])
            for learner in sorted(result.fractions):
                writer.writerow([learner, f"{result.fractions[learner]:.4f}"])
        print(f"wrote {frac_path}")
    if result.extended:
        ext_path = out_dir / "extended_models.csv"
        with ext_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["held_out_cluster", "base_rmse_pct", "extended_rmse_pct"])
            for cid in sorted(result.extended.per_cluster):
                base, extd = result.extended.per_cluster[cid]
                writer.writerow([cid, f"{base:.4f}", f"{extd:.4f}"])
            writer.writerow(["mean", f"{result.extended.mean_base:.4f}",
                             f"{result.extended.mean_extended:.4f}"])
        print(f"wrote {ext_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
