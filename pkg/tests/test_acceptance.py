"""Acceptance gate for the whole package.

Seven independent checks, each printing one pass/fail line directly to the
terminal (bypassing capture) so a full run reads as a scoreboard. They
exercise the library at its production parameters, so the module takes tens
of minutes; the per-module unit tests cover the same code at toy sizes.

Check 2 also has an optional full-budget variant, enabled by setting
MSGLON_FULL_ACCEPTANCE=1, that runs the complete generation schedule (hours).
"""

import os
import sys
import zlib

import numpy as np
import pytest
from oracles import merge_assign, networkx_features, probe_is_local_optimum

from msglon.analysis import CorpusEntry, correlation_table, coverage_of_features, export_dataset, read_dataset
from msglon.bench import BenchProtocol, measure
from msglon.cmaes import run_cmaes
from msglon.de import run_de
from msglon.fileio import instance_id_for
from msglon.gd import difference_rate
from msglon.landscape import (
    center_rivalry,
    instance_from_genotype,
    make_archetype,
    random_instance,
    sample_centers,
)
from msglon.lon import (
    FEATURE_COLUMNS,
    assign_points,
    build_basins,
    build_lon,
    compute_features,
    funnel_lon,
    monotonic_lon,
)
from msglon.novelty import NsConfig, ns_run, random_baseline
from msglon.rng import stream, stream_int

FULL = os.environ.get("MSGLON_FULL_ACCEPTANCE") == "1"


def _report(capfd, num, name, ok, detail=""):
    suffix = f"  [{detail}]" if detail else ""
    with capfd.disabled():
        print(f"[acceptance {num}] {name}: {'PASS' if ok else 'FAIL'}{suffix}",
              file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# 1. analytic basins against capped gradient descent, production scale


def test_criterion_1_basin_agreement(capfd):
    d2 = [difference_rate(random_instance(2, seed=i)) for i in range(100)]
    d5 = [difference_rate(random_instance(5, seed=i)) for i in range(30)]
    med2 = float(np.median(d2))
    med5 = float(np.median(d5))
    ok = (0.005 <= med2 <= 0.05) and (med5 < 0.015) and (med2 > med5)
    _report(capfd, 1, "gradient-descent vs analytic basins", ok,
            f"median d=2 {med2:.4%} (band 0.5%..5%), d=5 {med5:.4%} (< 1.5%)")
    assert 0.005 <= med2 <= 0.05
    assert med5 < 0.015
    assert med2 > med5


# ---------------------------------------------------------------------------
# 2. coverage ordering of the three generation modes


def _coverage_of(result):
    feats = [s.features for s in result.solutions]
    return coverage_of_features(feats, result.config.m_effective).coverage


def test_criterion_2_coverage_ordering(capfd):
    seeds = range(5)
    cov_ns, cov_plus, cov_rand = [], [], []
    for seed in seeds:
        base = dict(dim=2, mu=20, lam=50, t_max=20, seed=seed)
        cov_ns.append(_coverage_of(ns_run(NsConfig(**base))))
        cov_plus.append(_coverage_of(ns_run(NsConfig(**base, seed_archetypes=True))))
        cov_rand.append(_coverage_of(random_baseline(NsConfig(**base))))
    med_ns = float(np.median(cov_ns))
    med_plus = float(np.median(cov_plus))
    med_rand = float(np.median(cov_rand))
    ok = med_plus > med_ns > med_rand and (med_plus - med_rand) >= 0.1
    _report(capfd, 2, "coverage ordering of generators", ok,
            f"seeded-NS {med_plus:.3f} > NS {med_ns:.3f} > random {med_rand:.3f}")
    assert med_plus > med_ns > med_rand
    assert med_plus - med_rand >= 0.1


@pytest.mark.skipif(not FULL, reason="full-budget run enabled by MSGLON_FULL_ACCEPTANCE=1")
def test_criterion_2_full_budget_coverage(capfd):
    covs = [
        _coverage_of(ns_run(NsConfig(dim=2, seed=seed, seed_archetypes=True)))
        for seed in range(5)
    ]
    med = float(np.median(covs))
    ok = med > 0.7
    _report(capfd, "2-full", "full-budget coverage", ok, f"median {med:.3f} (> 0.7)")
    assert med > 0.7


# ---------------------------------------------------------------------------
# 3. feature/performance correlation signs on a generated corpus


def test_criterion_3_correlation_signs(capfd, tmp_path):
    # Full generation schedule; benchmarking every solution would cost hours,
    # so take an even cross-section of the run (every 20th by uid), which
    # spans all generations and still exceeds 500 instances.
    config = NsConfig(dim=2, mu=20, lam=100, t_max=100, seed=0, seed_archetypes=True)
    result = ns_run(config)
    solutions = result.solutions[::20]
    assert len(solutions) >= 500

    centers = sample_centers(config.dim, config.m_effective)
    protocol = BenchProtocol()  # 31 trials, 2000 evaluations per trial at d=2
    corpus, performance = [], {}
    for sol in solutions:
        iid = instance_id_for(sol.uid)
        inst = instance_from_genotype(centers, sol.weights, sol.sigmas, kind="evolved")
        corpus.append(CorpusEntry(instance_id=iid, dim=2, m=inst.m, kind="ns-plus",
                                  generation=sol.generation, features=sol.features))
        key = zlib.crc32(iid.encode())
        for algorithm in ("de", "cmaes"):
            performance[(iid, algorithm)] = measure(inst, algorithm, protocol,
                                                    instance_id=key)

    path = tmp_path / "dataset.csv"
    export_dataset(corpus, performance, path)
    rows = read_dataset(path)
    assert len(rows) == 2 * len(corpus)  # schema: one row per (instance, algorithm)
    assert all(r["success_rate"] is not None for r in rows)

    table = {
        (r.algorithm, r.feature): r.rho
        for r in correlation_table(rows)
        if r.metric == "success_rate"
    }

    def rho(algorithm, feature):
        value = table[(algorithm, feature)]
        return float("nan") if value is None else value  # nan fails every check

    checks = []
    for algorithm in ("de", "cmaes"):
        checks.append(rho(algorithm, "in_strength_opt") > 0.3)
        checks.append(rho(algorithm, "global_funnel_size") > 0.3)
        checks.append(rho(algorithm, "num_nodes") < 0.0)
    detail = ", ".join(
        f"{a}: strength {rho(a, 'in_strength_opt'):.2f} funnel "
        f"{rho(a, 'global_funnel_size'):.2f} nodes {rho(a, 'num_nodes'):.2f}"
        for a in ("de", "cmaes")
    )
    ok = all(checks)
    _report(capfd, 3, "LON-feature correlation signs", ok,
            f"{len(corpus)} instances; {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------
# 4. exact equivalence with search-based and recursive oracles


def test_criterion_4_oracle_equivalence(capfd):
    classification_errors = 0
    assignment_errors = 0
    for s in range(50):
        inst = random_instance(2, 20, seed=s)
        is_opt, _ = center_rivalry(inst)
        probe = np.array([probe_is_local_optimum(inst, i) for i in range(inst.m)])
        classification_errors += int(np.count_nonzero(is_opt != probe))

        basins = build_basins(inst)
        pts = stream(s, "acceptance-c4").random((1000, 2))
        got = assign_points(inst, basins, pts)
        want = np.fromiter((merge_assign(inst, x) for x in pts), dtype=np.int64)
        assignment_errors += int(np.count_nonzero(got != want))
    ok = classification_errors == 0 and assignment_errors == 0
    _report(capfd, 4, "hill-climb and merge-chain oracles", ok,
            f"{classification_errors} classification / {assignment_errors} "
            f"assignment mismatches over 50 instances x 1000 points")
    assert classification_errors == 0
    assert assignment_errors == 0


# ---------------------------------------------------------------------------
# 5. structural invariants over a large LON population


def _acyclic(nodes, edges):
    out = {n: 0 for n in nodes}
    incoming = {n: [] for n in nodes}
    for src, dst in edges:
        out[src] += 1
        incoming[dst].append(src)
    ready = [n for n, deg in out.items() if deg == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for p in incoming[n]:
            out[p] -= 1
            if out[p] == 0:
                ready.append(p)
    return seen == len(nodes)


def test_criterion_5_graph_invariants(capfd):
    violations = 0
    sizes = (10, 17, 24, 31, 38)
    for i in range(1000):
        inst = random_instance(1 + i % 3, sizes[i % 5], seed=i)
        lon = build_lon(inst, s=120, seed=i)
        mono = monotonic_lon(lon)
        funnel = funnel_lon(mono)
        feats = compute_features(lon)
        for graph in (lon, mono, funnel):
            sums: dict[int, float] = {}
            for (src, _), w in graph.edges.items():
                sums[src] = sums.get(src, 0.0) + w
            if any(total > 1.0 + 1e-9 for total in sums.values()):
                violations += 1
        if not _acyclic(mono.nodes, mono.edges):
            violations += 1
        if feats.num_sinks < 1:
            violations += 1
        if feats.num_sinks == 1 and feats.global_funnel_size != 1.0:
            violations += 1
        if not np.all(np.isfinite(feats.as_array())):
            violations += 1
    ok = violations == 0
    _report(capfd, 5, "graph invariants on 1000 networks", ok,
            f"{violations} violations")
    assert violations == 0


# ---------------------------------------------------------------------------
# 6. protocol invariants: budgets, reruns, archetype sanity


def test_criterion_6_protocol_invariants(capfd):
    # 10,000 trials with hard budget accounting
    protocol = BenchProtocol(trials=100, budget_per_dim=120)
    budget_errors = 0
    trials_total = 0
    for i in range(70):
        inst = random_instance(1, 10, seed=i)
        for rec in run_de(inst, protocol, stream_int(0, "acceptance-c6-de", i)):
            trials_total += 1
            if rec.evals_used > 120 or not (rec.converged or rec.evals_used == 120):
                budget_errors += 1
    for i in range(30):
        inst = random_instance(1, 10, seed=1000 + i)
        for rec in run_cmaes(inst, protocol, stream_int(0, "acceptance-c6-cma", i)):
            trials_total += 1
            if rec.evals_used > 120 or not (rec.converged or rec.evals_used == 120):
                budget_errors += 1
    assert trials_total >= 10_000

    # fixed-seed reruns are bit-identical
    rerun_errors = 0
    cfg = NsConfig(dim=1, m=8, mu=3, lam=4, t_max=2, k=2, lon_samples=60, seed=5)
    a, b = ns_run(cfg), ns_run(cfg)
    if a.archive_uids != b.archive_uids or a.events != b.events:
        rerun_errors += 1
    for x, y in zip(a.solutions, b.solutions):
        if not (
            np.array_equal(x.weights, y.weights)
            and np.array_equal(x.sigmas, y.sigmas)
            and np.array_equal(x.phenotype, y.phenotype)
        ):
            rerun_errors += 1
    inst = random_instance(2, 30, seed=3)
    small = BenchProtocol(trials=5, budget_per_dim=100)
    for runner in (run_de, run_cmaes):
        r1, r2 = runner(inst, small, seed=11), runner(inst, small, seed=11)
        for x, y in zip(r1, r2):
            if not (
                x.evals_used == y.evals_used
                and x.best_f == y.best_f
                and np.array_equal(x.best_x, y.best_x)
                and x.success == y.success
            ):
                rerun_errors += 1

    # the single-peak archetype is essentially always solved
    uni = make_archetype("uni-modal", 2)
    de_rate = measure(uni, "de", BenchProtocol(), instance_id=0).success_rate
    cma_rate = measure(uni, "cmaes", BenchProtocol(), instance_id=0).success_rate
    archetype_ok = de_rate >= 30 / 31 and cma_rate >= 30 / 31

    ok = budget_errors == 0 and rerun_errors == 0 and archetype_ok
    _report(capfd, 6, "budgets, reruns, single-peak success", ok,
            f"{trials_total} trials, {budget_errors} budget violations, "
            f"{rerun_errors} rerun mismatches, single-peak success "
            f"de {de_rate:.3f} / cmaes {cma_rate:.3f}")
    assert budget_errors == 0
    assert rerun_errors == 0
    assert archetype_ok


# ---------------------------------------------------------------------------
# 7. feature computation against an independent graph library


def test_criterion_7_feature_reference(capfd):
    exact_idx = {0, 1, 2, 7}  # counts and exact fractions
    worst = 0.0
    mismatches = 0
    for i in range(100):
        inst = random_instance(1 + i % 3, 15 + (i % 4) * 5, seed=100 + i)
        lon = build_lon(inst, s=150, seed=i)
        got = compute_features(lon).as_array()
        ref = np.array(networkx_features(lon, FEATURE_COLUMNS))
        for j in range(len(FEATURE_COLUMNS)):
            if j in exact_idx:
                if got[j] != ref[j]:
                    mismatches += 1
            else:
                err = abs(got[j] - ref[j])
                worst = max(worst, err)
                if err > 1e-12:
                    mismatches += 1
    ok = mismatches == 0
    _report(capfd, 7, "features vs networkx reference", ok,
            f"{mismatches} mismatches over 100 networks, worst mean error {worst:.2e}")
    assert mismatches == 0
