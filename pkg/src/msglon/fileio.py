"""Artifact I/O: atomic writes, manifests, instance corpora, benchmark CSVs.

All writers go through a temp-file + rename so a crashed run never leaves a
half-written artifact, and no writer embeds timestamps, so identical inputs
produce byte-identical files. A corpus directory holds a manifest, a packed
``instances.jsonl`` (one instance record per line), and a ``features.csv``
summary row per instance.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bench import InstancePerformance, TrialRecord
from .errors import IoError, ValidationError
from .landscape import MsgInstance
from .lon import FEATURE_COLUMNS, LonFeatures
from .novelty import NsConfig, NsResult, Solution

CORPUS_ENTRY_SCHEMA = "msg-corpus-entry/1"
MANIFEST_SCHEMA = "msg-manifest/1"

FEATURES_CSV_COLUMNS = (
    "instance_id",
    "dim",
    "m",
    "kind",
    "generation",
    "parent",
    "phenotype_nodes",
    "phenotype_funnel",
    *FEATURE_COLUMNS,
)

PERFORMANCE_CSV_COLUMNS = ("instance_id", "algorithm", "success_rate", "conv_time", "trials")

TRIALS_CSV_COLUMNS = (
    "instance_id",
    "algorithm",
    "trial",
    "success",
    "evals_used",
    "converged",
    "best_f",
    "repairs",
)


def atomic_write_text(path, text: str) -> Path:
    """Write text via a sibling temp file and an atomic rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def write_json(path, payload: dict) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def write_manifest(path, command: str, config: dict) -> Path:
    """Reproduction manifest: the command plus its full merged configuration."""
    return write_json(path, {"schema": MANIFEST_SCHEMA, "command": command, "config": config})


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return atomic_write_text(path, buf.getvalue())


def instance_id_for(uid: int) -> str:
    return f"i{uid:06d}"


@dataclass(frozen=True)
class CorpusRecord:
    """One corpus line: an instance plus its provenance, phenotype, features."""

    instance_id: str
    generation: int
    parent: int | None
    instance: MsgInstance
    phenotype: np.ndarray
    features: LonFeatures

    def to_dict(self) -> dict:
        return {
            "schema": CORPUS_ENTRY_SCHEMA,
            "instance_id": self.instance_id,
            "generation": self.generation,
            "parent": self.parent,
            "phenotype": [float(v) for v in self.phenotype],
            "features": self.features.as_dict(),
            "instance": self.instance.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusRecord":
        try:
            if data.get("schema") != CORPUS_ENTRY_SCHEMA:
                raise ValidationError(f"unsupported corpus entry schema: {data.get('schema')!r}")
            feats = data["features"]
            return cls(
                instance_id=str(data["instance_id"]),
                generation=int(data["generation"]),
                parent=None if data["parent"] is None else int(data["parent"]),
                instance=MsgInstance.from_dict(data["instance"]),
                phenotype=np.asarray(data["phenotype"], dtype=float),
                features=LonFeatures(
                    num_nodes=int(feats["num_nodes"]),
                    edge_density=float(feats["edge_density"]),
                    num_sinks=int(feats["num_sinks"]),
                    avg_path_opt=float(feats["avg_path_opt"]),
                    avg_path_sinks=float(feats["avg_path_sinks"]),
                    in_strength_opt=float(feats["in_strength_opt"]),
                    in_strength_sinks=float(feats["in_strength_sinks"]),
                    global_funnel_size=float(feats["global_funnel_size"]),
                ),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed corpus entry: {exc}") from exc


def record_from_solution(sol: Solution, config: NsConfig, centers: np.ndarray,
                         kind: str) -> CorpusRecord:
    from .landscape import instance_from_genotype

    instance = instance_from_genotype(centers, sol.weights, sol.sigmas,
                                      seed=config.seed, kind=kind)
    return CorpusRecord(
        instance_id=instance_id_for(sol.uid),
        generation=sol.generation,
        parent=sol.parent,
        instance=instance,
        phenotype=sol.phenotype,
        features=sol.features,
    )


def write_corpus(directory, result: NsResult, mode: str, command: str = "ns") -> Path:
    """Write a run's manifest, packed instance lines, and feature summary CSV."""
    from dataclasses import asdict

    from .landscape import sample_centers

    directory = Path(directory)
    config = result.config
    centers = sample_centers(config.dim, config.m_effective)
    records = [record_from_solution(sol, config, centers, kind=mode)
               for sol in result.solutions]

    lines = "".join(json.dumps(rec.to_dict(), sort_keys=True) + "\n" for rec in records)
    atomic_write_text(directory / "instances.jsonl", lines)

    rows = []
    for rec in records:
        feats = rec.features.as_dict()
        rows.append([
            rec.instance_id,
            rec.instance.dim,
            rec.instance.m,
            mode,
            rec.generation,
            "" if rec.parent is None else rec.parent,
            repr(float(rec.phenotype[0])),
            repr(float(rec.phenotype[1])),
            *[repr(feats[c]) for c in FEATURE_COLUMNS],
        ])
    write_csv(directory / "features.csv", FEATURES_CSV_COLUMNS, rows)

    manifest_config = asdict(config)
    manifest_config["mode"] = mode
    write_manifest(directory / "manifest.json", command, manifest_config)
    return directory


def read_corpus(directory) -> tuple[dict, list[CorpusRecord]]:
    """Read a corpus directory back: (manifest, records)."""
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    records = []
    try:
        with open(directory / "instances.jsonl") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    payload = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(
                        f"instances.jsonl line {line_no} is not valid JSON: {exc}"
                    ) from exc
                records.append(CorpusRecord.from_dict(payload))
    except OSError as exc:
        raise IoError(f"cannot read corpus at {directory}: {exc}") from exc
    return manifest, records


def write_performance(path, performances: list[tuple[str, InstancePerformance]]) -> Path:
    rows = [
        [iid, perf.algorithm, repr(perf.success_rate), repr(perf.conv_time), perf.trials]
        for iid, perf in performances
    ]
    return write_csv(path, PERFORMANCE_CSV_COLUMNS, rows)


def read_performance(path) -> dict[tuple[str, str], InstancePerformance]:
    out: dict[tuple[str, str], InstancePerformance] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != list(PERFORMANCE_CSV_COLUMNS):
                raise ValidationError(f"unexpected performance header: {header}")
            for raw in reader:
                row = dict(zip(PERFORMANCE_CSV_COLUMNS, raw))
                out[(row["instance_id"], row["algorithm"])] = InstancePerformance(
                    algorithm=row["algorithm"],
                    success_rate=float(row["success_rate"]),
                    conv_time=float(row["conv_time"]),
                    trials=int(row["trials"]),
                )
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return out


def write_trials(path, trials: list[tuple[str, str, int, TrialRecord]]) -> Path:
    """Per-trial detail rows: (instance_id, algorithm, trial index, record)."""
    rows = [
        [iid, alg, idx, int(rec.success), rec.evals_used, int(rec.converged),
         repr(rec.best_f), rec.repairs]
        for iid, alg, idx, rec in trials
    ]
    return write_csv(path, TRIALS_CSV_COLUMNS, rows)


def parallel_map(fn, items, jobs: int | None = None) -> list:
    """Order-preserving map, optionally fanned out over a thread pool.

    Work items must be independent and deterministic given their index; the
    output never depends on ``jobs``.
    """
    items = list(items)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
