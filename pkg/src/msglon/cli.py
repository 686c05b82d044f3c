"""Command-line pipeline: generate / lon / validate-boa / ns / bench / analyze.

Configuration precedence is flag > config file > built-in default; flags all
default to "unset" so the merge is explicit. Every subcommand writes a
manifest carrying its fully merged configuration, which is sufficient to
reproduce the outputs byte for byte. ``--plot`` renders PNG figures next to
the delimited outputs.

Exit codes: 0 success, 2 usage, 3 validation (bad inputs or data), 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analysis, fileio, gd
from . import landscape as ls
from . import lon as lon_mod
from .bench import BenchProtocol, summarize
from .errors import CapabilityError, IoError, ValidationError
from .rng import stream_int

OUT_ENV = "MSGLON_OUT"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

DEFAULTS: dict[str, dict] = {
    "generate": {"d": 2, "m": None, "seed": 0, "kind": "random", "count": 1,
                 "out_dir": "instances"},
    "lon": {"s": None, "r": None, "seed": 0, "which": "escape", "out_dir": "lon",
            "plot": False},
    "validate-boa": {"d": 2, "count": 10, "m": None, "eta": 0.01, "steps": 2000,
                     "starts_per_dim": 5000, "center_tol": 1e-3, "seed": 0,
                     "out_dir": "boa", "plot": False},
    "ns": {"mode": "ns", "d": 2, "m": None, "mu": 20, "lam": 100, "t_max": 100,
           "k": 15, "rho_min": 0.05, "alpha_w": 0.1, "alpha_sigma": 0.05,
           "seed": 0, "lon_samples": None, "lon_seed": 0, "out_dir": "corpus",
           "plot": False},
    "bench": {"algorithm": "both", "trials": 31, "budget_per_dim": 1000,
              "success_tol": 1e-2, "success_metric": "euclidean", "seed": 0,
              "out_csv": "performance.csv", "trial_detail": None, "limit": None},
    "analyze": {"performance": None, "out_dir": "analysis", "plot": False,
                "heatmap_metric": "success_rate"},
}


class Log:
    """Line-oriented progress log on stderr; JSON records behind --log-json."""

    def __init__(self, as_json: bool):
        self.as_json = as_json

    def event(self, name: str, **fields):
        if self.as_json:
            print(json.dumps({"event": name, **fields}, sort_keys=True),
                  file=sys.stderr, flush=True)
        else:
            detail = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"[{name}] {detail}".rstrip(), file=sys.stderr, flush=True)


def _merged(section: str, args: argparse.Namespace, file_config: dict) -> dict:
    """flag > config-file section > built-in default, key by key."""
    merged = dict(DEFAULTS[section])
    merged.update(file_config.get(section, {}))
    for key in DEFAULTS[section]:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            merged[key] = value
    return merged


def _out_root(args: argparse.Namespace) -> Path:
    root = args.out if args.out is not None else os.environ.get(OUT_ENV, ".")
    return Path(root)


def _resolve(root: Path, leaf) -> Path:
    leaf = Path(leaf)
    return leaf if leaf.is_absolute() else root / leaf


def _instance_key(instance_id: str) -> int:
    return zlib.crc32(instance_id.encode("utf-8"))


def cmd_generate(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    del jobs
    out_dir = _resolve(root, cfg["out_dir"])
    paths = []
    for i in range(cfg["count"]):
        seed_i = cfg["seed"] + i
        if cfg["kind"] == "random":
            inst = ls.random_instance(cfg["d"], cfg["m"], seed=seed_i)
        else:
            inst = ls.make_archetype(cfg["kind"], cfg["d"], cfg["m"], noise_seed=seed_i)
        path = out_dir / f"instance-d{cfg['d']}-s{seed_i}.json"
        fileio.atomic_write_text(path, inst.to_json())
        paths.append(path)
        log.event("generate.instance", path=str(path), kind=cfg["kind"], seed=seed_i)
    fileio.write_manifest(out_dir / "manifest.json", "generate", cfg)
    log.event("generate.done", count=len(paths), out=str(out_dir))
    return EXIT_OK


def cmd_lon(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    del jobs
    if not cfg.get("instance"):
        raise ValidationError("lon needs --instance pointing at an instance JSON")
    inst_path = _resolve(root, cfg["instance"])
    try:
        text = Path(inst_path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {inst_path}: {exc}") from exc
    instance = ls.MsgInstance.from_json(text)
    out_dir = _resolve(root, cfg["out_dir"])
    lon = lon_mod.build_lon(instance, s=cfg["s"], r=cfg["r"], seed=cfg["seed"])
    graphs = {"escape": lon,
              "monotonic": lon_mod.monotonic_lon(lon)}
    graphs["funnel"] = lon_mod.funnel_lon(graphs["monotonic"])
    wanted = [w.strip() for w in str(cfg["which"]).split(",")]
    unknown = [w for w in wanted if w not in graphs]
    if unknown:
        raise ValidationError(f"unknown LON kinds {unknown}; choose from {sorted(graphs)}")

    for which in wanted:
        path = out_dir / f"lon-{which}.json"
        fileio.atomic_write_text(path, graphs[which].to_json())
        log.event("lon.graph", path=str(path), nodes=graphs[which].num_nodes,
                  edges=len(graphs[which].edges))
        if cfg["plot"]:
            from . import plots

            fig = plots.lon_figure(graphs[which], out_dir / f"lon-{which}.png")
            log.event("lon.figure", path=str(fig))

    features = lon_mod.compute_features(lon)
    feats = features.as_dict()
    instance_id = Path(inst_path).stem
    fileio.write_csv(
        out_dir / "features.csv",
        fileio.FEATURES_CSV_COLUMNS,
        [[instance_id, instance.dim, instance.m, instance.kind, 0, "",
          repr(features.num_nodes / instance.m), repr(features.global_funnel_size),
          *[repr(feats[c]) for c in lon_mod.FEATURE_COLUMNS]]],
    )
    fileio.write_manifest(out_dir / "manifest.json", "lon",
                          {**cfg, "instance": str(cfg["instance"])})
    log.event("lon.done", out=str(out_dir))
    return EXIT_OK


def cmd_validate_boa(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    out_dir = _resolve(root, cfg["out_dir"])
    config = gd.GdConfig(eta=cfg["eta"], max_steps=cfg["steps"],
                         starts_per_dim=cfg["starts_per_dim"],
                         center_tolerance=cfg["center_tol"])

    def one(i: int):
        inst_seed = stream_int(cfg["seed"], "boa-instance", i)
        instance = ls.random_instance(cfg["d"], cfg["m"], seed=inst_seed)
        report = gd.compare_basins(instance, config)
        log.event("boa.instance", index=i, rate=report.difference_rate,
                  fallbacks=report.fallback_count)
        return instance, inst_seed, report

    results = fileio.parallel_map(one, range(cfg["count"]), jobs)
    rows = [
        [i, seed, repr(rep.difference_rate), rep.n_starts, rep.n_disagreements,
         rep.fallback_count, repr(rep.mean_steps)]
        for i, (_, seed, rep) in enumerate(results)
    ]
    fileio.write_csv(out_dir / "difference_rates.csv",
                     ("index", "instance_seed", "difference_rate", "n_starts",
                      "n_disagreements", "fallbacks", "mean_steps"),
                     rows)
    rates = [rep.difference_rate for _, _, rep in results]
    fileio.write_json(out_dir / "summary.json", {
        "count": cfg["count"],
        "d": cfg["d"],
        "median_difference_rate": float(np.median(rates)),
        "max_difference_rate": float(np.max(rates)),
    })
    if cfg["plot"] and cfg["d"] == 2:
        from . import plots

        instance, _, report = results[0]
        starts = ls.sobol_points(instance.dim, config.starts_per_dim * instance.dim)
        disagree = starts[report.gd_assigned != report.analytic_assigned]
        fig = plots.basin_figure(instance, out_dir / "basin-disagreement.png",
                                 disagreements=disagree)
        log.event("boa.figure", path=str(fig))
    fileio.write_manifest(out_dir / "manifest.json", "validate-boa", cfg)
    log.event("boa.done", median=float(np.median(rates)), out=str(out_dir))
    return EXIT_OK


def cmd_ns(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    del jobs
    from .novelty import NsConfig, ns_run, random_baseline

    mode = cfg["mode"]
    if mode not in ("ns", "ns-plus", "random"):
        raise ValidationError(f"unknown mode {mode!r}; choose ns, ns-plus or random")
    config = NsConfig(
        dim=cfg["d"], m=cfg["m"], mu=cfg["mu"], lam=cfg["lam"], t_max=cfg["t_max"],
        k=cfg["k"], rho_min=cfg["rho_min"], alpha_w=cfg["alpha_w"],
        alpha_sigma=cfg["alpha_sigma"], seed=cfg["seed"],
        seed_archetypes=(mode == "ns-plus"), lon_samples=cfg["lon_samples"],
        lon_seed=cfg["lon_seed"],
    )
    log.event("ns.start", mode=mode, total=config.total_solutions)
    result = random_baseline(config) if mode == "random" else ns_run(config)
    out_dir = _resolve(root, cfg["out_dir"])
    fileio.write_corpus(out_dir, result, mode)

    grid = analysis.coverage_of_features([s.features for s in result.solutions],
                                         config.m_effective)
    fileio.write_json(out_dir / "coverage.json", {
        "mode": mode,
        "solutions": len(result.solutions),
        "archive_size": len(result.archive_uids),
        "coverage": grid.coverage,
    })
    if cfg["plot"]:
        from . import plots

        fig = plots.coverage_figure(grid, out_dir / "coverage.png")
        log.event("ns.figure", path=str(fig))
    log.event("ns.done", out=str(out_dir), coverage=grid.coverage,
              archive=len(result.archive_uids))
    return EXIT_OK


def cmd_bench(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    if not cfg.get("corpus"):
        raise ValidationError("bench needs --corpus pointing at a corpus directory")
    corpus_dir = _resolve(root, cfg["corpus"])
    _, records = fileio.read_corpus(corpus_dir)
    if cfg["limit"] is not None:
        records = records[: cfg["limit"]]
    algorithms = ["de", "cmaes"] if cfg["algorithm"] == "both" else [cfg["algorithm"]]
    protocol = BenchProtocol(trials=cfg["trials"], budget_per_dim=cfg["budget_per_dim"],
                             success_tol=cfg["success_tol"], seed=cfg["seed"],
                             success_metric=cfg["success_metric"])

    def one(item):
        idx, rec = item
        out = []
        for algorithm in algorithms:
            from .cmaes import run_cmaes
            from .de import run_de

            seed = stream_int(protocol.seed, f"bench-{algorithm}",
                              _instance_key(rec.instance_id))
            runner = run_de if algorithm == "de" else run_cmaes
            trials = runner(rec.instance, protocol, seed)
            out.append((rec.instance_id, algorithm, trials, summarize(algorithm, trials)))
        if idx % 25 == 0:
            log.event("bench.progress", done=idx, total=len(records))
        return out

    nested = fileio.parallel_map(one, enumerate(records), jobs)
    performances = []
    details = []
    for group in nested:
        for instance_id, algorithm, trials, perf in group:
            performances.append((instance_id, perf))
            details.extend((instance_id, algorithm, t, rec) for t, rec in enumerate(trials))

    out_path = _resolve(root, cfg["out_csv"])
    fileio.write_performance(out_path, performances)
    if cfg["trial_detail"]:
        fileio.write_trials(_resolve(root, cfg["trial_detail"]), details)
    fileio.write_manifest(out_path.with_name(out_path.stem + "-manifest.json"),
                          "bench", {**cfg, "corpus": str(cfg["corpus"])})
    log.event("bench.done", instances=len(records), algorithms=len(algorithms),
              out=str(out_path))
    return EXIT_OK


def cmd_analyze(cfg: dict, root: Path, log: Log, jobs: int | None) -> int:
    del jobs
    if not cfg.get("corpus"):
        raise ValidationError("analyze needs --corpus pointing at a corpus directory")
    corpus_dir = _resolve(root, cfg["corpus"])
    manifest, records = fileio.read_corpus(corpus_dir)
    out_dir = _resolve(root, cfg["out_dir"])
    mode = manifest.get("config", {}).get("mode", "unknown")

    corpus_entries = [
        analysis.CorpusEntry(
            instance_id=rec.instance_id,
            dim=rec.instance.dim,
            m=rec.instance.m,
            kind=mode,
            generation=rec.generation,
            features=rec.features,
        )
        for rec in records
    ]
    performance = (
        fileio.read_performance(_resolve(root, cfg["performance"]))
        if cfg["performance"]
        else {}
    )

    analysis.export_dataset(corpus_entries, performance, out_dir / "dataset.csv")
    dataset = analysis.read_dataset(out_dir / "dataset.csv")

    m = records[0].instance.m if records else 2
    grid = analysis.coverage_of_features([rec.features for rec in records], m)
    fileio.write_json(out_dir / "coverage.json",
                      {"coverage": grid.coverage, "instances": len(records)})

    table = analysis.correlation_table(dataset) if performance else []
    fileio.write_csv(
        out_dir / "correlations.csv",
        ("algorithm", "dim", "feature", "metric", "rho", "n"),
        [[r.algorithm, r.dim, r.feature, r.metric,
          "" if r.rho is None else repr(r.rho), r.n] for r in table],
    )

    if cfg["plot"]:
        from . import plots

        plots.coverage_figure(grid, out_dir / "coverage.png")
        if table:
            plots.correlation_figure(table, out_dir / "correlations.png")
        if performance:
            metric = cfg["heatmap_metric"]
            for algorithm in sorted({alg for (_, alg) in performance}):
                rows = [r for r in dataset if r["algorithm"] == algorithm
                        and r.get(metric) is not None]
                if not rows:
                    continue
                medians = analysis.cell_medians(
                    np.array([r["num_nodes"] for r in rows]),
                    np.array([r["global_funnel_size"] for r in rows]),
                    np.array([r[metric] for r in rows]), m)
                plots.success_heatmap_figure(
                    medians, m, out_dir / f"heatmap-{algorithm}.png",
                    label=f"median {metric}")
    fileio.write_manifest(out_dir / "manifest.json", "analyze",
                          {**cfg, "corpus": str(cfg["corpus"])})
    log.event("analyze.done", out=str(out_dir), rows=len(dataset),
              coverage=grid.coverage)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msglon",
        description="Generate max-of-Gaussians landscapes, build their local optima "
                    "networks analytically, evolve diverse instance sets, and "
                    "benchmark optimizers against network features.",
    )
    parser.add_argument("--out", help=f"output root (default ${OUT_ENV} or .)")
    parser.add_argument("--config", help="JSON config file with per-subcommand sections")
    parser.add_argument("--jobs", type=int, help="parallel workers (results are identical "
                                                 "for any value)")
    parser.add_argument("--log-json", action="store_true", default=None,
                        help="emit machine-readable JSON log lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write landscape instance JSON files")
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=["random", *ls.ARCHETYPE_KINDS])
    p.add_argument("--count", type=int)
    p.add_argument("--out-dir")

    p = sub.add_parser("lon", help="build the LON of one instance")
    p.add_argument("--instance", help="path to an instance JSON")
    p.add_argument("--s", type=int, help="escape samples per optimum")
    p.add_argument("--r", type=float, help="escape sampling radius")
    p.add_argument("--seed", type=int)
    p.add_argument("--which", help="comma list from escape,monotonic,funnel")
    p.add_argument("--out-dir")
    p.add_argument("--plot", action="store_true", default=None)

    p = sub.add_parser("validate-boa", help="compare analytic basins against "
                                            "gradient descent")
    p.add_argument("--d", type=int)
    p.add_argument("--count", type=int, help="number of random instances")
    p.add_argument("--m", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--starts-per-dim", type=int)
    p.add_argument("--center-tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--plot", action="store_true", default=None)

    p = sub.add_parser("ns", help="generate an instance corpus (novelty search "
                                  "or random baseline)")
    p.add_argument("--mode", choices=["ns", "ns-plus", "random"])
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--mu", type=int)
    p.add_argument("--lam", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rho-min", type=float)
    p.add_argument("--alpha-w", type=float)
    p.add_argument("--alpha-sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lon-samples", type=int)
    p.add_argument("--lon-seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--plot", action="store_true", default=None)

    p = sub.add_parser("bench", help="benchmark optimizers over a corpus")
    p.add_argument("--corpus")
    p.add_argument("--algorithm", choices=["de", "cmaes", "both"])
    p.add_argument("--trials", type=int)
    p.add_argument("--budget-per-dim", type=int)
    p.add_argument("--success-tol", type=float)
    p.add_argument("--success-metric", choices=["euclidean", "max"])
    p.add_argument("--seed", type=int)
    p.add_argument("--limit", type=int, help="benchmark only the first N instances")
    p.add_argument("--out", dest="out_csv", help="performance CSV path")
    p.add_argument("--trial-detail", help="optional per-trial CSV path")

    p = sub.add_parser("analyze", help="coverage, correlations, dataset export")
    p.add_argument("--corpus")
    p.add_argument("--performance", help="performance CSV from bench")
    p.add_argument("--heatmap-metric", choices=["success_rate", "conv_time"])
    p.add_argument("--out-dir")
    p.add_argument("--plot", action="store_true", default=None)

    return parser


COMMANDS = {
    "generate": cmd_generate,
    "lon": cmd_lon,
    "validate-boa": cmd_validate_boa,
    "ns": cmd_ns,
    "bench": cmd_bench,
    "analyze": cmd_analyze,
}


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    file_config = fileio.read_json(args.config) if args.config else {}
    log = Log(bool(args.log_json))
    cfg = _merged(args.command, args, file_config)
    for key in ("instance", "corpus"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
        elif key not in cfg:
            cfg[key] = file_config.get(args.command, {}).get(key)
    return COMMANDS[args.command](cfg, _out_root(args), log, args.jobs)


def main(argv=None) -> int:
    try:
        return dispatch(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (ValidationError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
