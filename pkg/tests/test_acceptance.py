"""Acceptance gate: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion. Each test is self-contained and pins its tolerances
explicitly; nothing here is calibrated after the fact.
"""

import csv
import io
import math
import resource
import time

import numpy as np
import pytest

from annealplan.allocation import allocate_grid_oracle, allocate_proportional
from annealplan.cli import main
from annealplan.costs import (
    AnnealingGeometry,
    CostBasis,
    ModelSpec,
    SourceCostModel,
    SourceKind,
    inference_flops_per_token,
    tinygsm_curation_cost,
    tinygsm_mind_curation_cost,
    tokens_per_step,
)
from annealplan.diversity import NgramProfiler, profile_corpus, read_text_token_documents
from annealplan.manifest import UtilityPoint, build_utility_points, loads_manifest
from annealplan.metrics import MetricKind, TaskScore, UtilityDelta, brier_score, utility_delta
from annealplan.scaling import crossover, fit_by_source, fit_log_linear, rank_at_budget
from annealplan.simulate import GroundTruthSource, Scenario, generate_manifest, scenario_rank_flip

GEOM = AnnealingGeometry(batch_size=256, sequence_length=8192, upsample_ratio=0.1)
ZERO = SourceCostModel(kind=SourceKind.ZERO_COST)
FULL_BASIS = CostBasis.CURATION_PLUS_ANNEALING


def _ok(criterion, detail):
    print(f"[criterion {criterion}] PASS - {detail}")


def _cli_csv(capsys, *argv):
    assert main(list(argv)) == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(out)))
    return [dict(zip(rows[0], r)) for r in rows[1:]]


def _points_from(manifest_bytes, basis=FULL_BASIS):
    runset = loads_manifest(manifest_bytes.decode("utf-8"))
    return build_utility_points(runset, None, basis)


def test_criterion_01_cost_exactness(capsys):
    start = time.perf_counter()
    rows = _cli_csv(capsys, "cost", "--preset", "tinygsm", "--tokens", "1.8e9")
    assert float(rows[0]["total_flops"]) == 6.3e20
    assert inference_flops_per_token(ModelSpec(70e9)) * 100e9 == 1.4e22
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _ok(1, f"dataset cost 6.3e20 and 1.4e22 inference check exact in {elapsed:.3f}s")


def test_criterion_02_geometry():
    assert tokens_per_step(GEOM) == (2097152.0, 209715.2)
    total, upsampled = tokens_per_step(GEOM)
    assert total == pytest.approx(2.1e6, rel=0.01)
    assert upsampled == pytest.approx(2.1e5, rel=0.01)
    assert 1000 * upsampled == pytest.approx(2.1e8, rel=0.01)
    assert 36000 * upsampled == pytest.approx(7.5e9, rel=0.01)
    _ok(2, "tokens per step exact; grid endpoints within 1% of 2.1e8 and 7.5e9")


def test_criterion_03_tinygsm_mind_ratio():
    expected = (1 / 3.6) + (2 / 3.6) * (14 / 350)
    for steps in (1, 1000, 36000):
        ratio = tinygsm_mind_curation_cost(steps, GEOM) / tinygsm_curation_cost(steps, GEOM)
        assert ratio == pytest.approx(expected, rel=1e-12)
        assert ratio < 1.0
    _ok(3, f"cost ratio {expected:.6f} reproduced to 1e-12 at steps 1, 1000, 36000")


def test_criterion_04_fit_recovery():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for rep in range(100):
        intercept = float(rng.uniform(-0.1, 0.1))
        slope = float(rng.uniform(-0.01, 0.01))
        scenario = Scenario(
            sources=(GroundTruthSource("probe", intercept, slope, ZERO),),
            baseline_score=1.0,
            rng_seed=rep,
        )
        fit = fit_by_source(_points_from(generate_manifest(scenario)))[0]
        assert fit.intercept == pytest.approx(intercept, rel=1e-9)
        assert fit.slope == pytest.approx(slope, rel=1e-9)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _ok(4, f"100 random noiseless round trips recovered to 1e-9 in {elapsed:.2f}s")


def _fit_line(intercept, slope, source):
    points = [
        UtilityPoint(
            source_id=source,
            steps=i + 1,
            compute=c,
            tokens_upsampled=1e8,
            delta=UtilityDelta(
                value=intercept + slope * math.log(c), metric=MetricKind.BRIER, source_id=source
            ),
            basis=FULL_BASIS,
        )
        for i, c in enumerate((1e18, 1e22))
    ]
    return fit_log_linear(points)


def test_criterion_05_crossover_vs_bisection():
    rng = np.random.default_rng(505)
    checked = 0
    while checked < 100:
        log_c_star = rng.uniform(0.5, 68.5)
        slope_a = rng.uniform(-0.05, 0.05)
        slope_b = rng.uniform(-0.05, 0.05)
        if abs(slope_a - slope_b) < 1e-4:
            continue
        height = rng.uniform(-1, 1)
        fit_a = _fit_line(height - slope_a * log_c_star, slope_a, "a")
        fit_b = _fit_line(height - slope_b * log_c_star, slope_b, "b")

        def diff(log_c):
            return (fit_a.intercept + fit_a.slope * log_c) - (
                fit_b.intercept + fit_b.slope * log_c
            )

        lo, hi = 0.0, math.log(1e30)
        if diff(lo) == 0 or diff(lo) * diff(hi) > 0:
            continue
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if diff(lo) * diff(mid) <= 0:
                hi = mid
            else:
                lo = mid
        oracle = math.exp(0.5 * (lo + hi))
        flip = crossover(fit_a, fit_b)
        assert flip is not None
        assert flip.compute == pytest.approx(oracle, rel=1e-6)
        below = rank_at_budget([fit_a, fit_b], 0.9 * flip.compute)
        above = rank_at_budget([fit_a, fit_b], 1.1 * flip.compute)
        assert below[0].source_id == flip.leader_below
        assert above[0].source_id == flip.leader_above
        assert below[0].source_id != above[0].source_id
        checked += 1
    _ok(5, "100 crossings matched bisection to 1e-6 and flipped the ranking strictly")


def test_criterion_06_rank_flip_reproduction():
    probe = scenario_rank_flip(0)
    true_deltas = [
        probe.true_delta(source, steps)
        for source in probe.sources
        for steps in probe.steps_grid
    ]
    sigma = 0.2 * (max(true_deltas) - min(true_deltas))
    by_id = {s.source_id: s for s in probe.sources}
    best_at_scale = max(
        by_id, key=lambda k: probe.true_delta(by_id[k], probe.steps_grid[-1])
    )

    successes = 0
    for seed in range(50):
        points = _points_from(generate_manifest(scenario_rank_flip(seed, noise_sigma=sigma)))
        smallest = min(p.steps for p in points)
        point_estimate = max(
            (p for p in points if p.steps == smallest), key=lambda p: p.delta.value
        ).source_id
        fits = fit_by_source(points)
        scaling_choice = rank_at_budget(fits, max(p.compute for p in points))[0].source_id
        if point_estimate != scaling_choice and scaling_choice == best_at_scale:
            successes += 1
    assert successes >= 45  # 90% of 50
    _ok(6, f"policies diverged and the fitted choice was right in {successes}/50 noisy runs")


def test_criterion_07_allocation_optimality():
    rng = np.random.default_rng(707)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        fits = [
            _fit_line(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(1e-3, 0.05)), f"s{i}")
            for i in range(n)
        ]
        c_max = float(rng.uniform(1e19, 1e22))
        plan = allocate_proportional(fits, c_max)
        oracle = allocate_grid_oracle(fits, c_max, resolution=200)
        assert oracle.predicted_mixture_utility <= plan.predicted_mixture_utility
        assert math.fsum(plan.assignments.values()) == pytest.approx(c_max, rel=1e-9)
        ratios = [fit.slope / plan.assignments[fit.source_id] for fit in fits]
        assert max(ratios) - min(ratios) <= 1e-9 * max(abs(r) for r in ratios)
    _ok(7, "closed form beat 100 grid enumerations; KKT and budget checks at 1e-9")


def test_criterion_08_metrics_oracles():
    assert brier_score([1, 0, 0, 0], 0) == 0.0
    assert brier_score([0, 1, 0, 0], 0) == 2.0
    assert brier_score([0.25, 0.25, 0.25, 0.25], 0) == 0.75

    rng = np.random.default_rng(808)
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        probs = rng.dirichlet(np.ones(k)).tolist()
        correct = int(rng.integers(0, k))
        reference = 0.0
        for j, p in enumerate(probs):
            reference += (p - (1.0 if j == correct else 0.0)) ** 2
        assert brier_score(probs, correct) == pytest.approx(reference, abs=1e-12)

    for _ in range(1000):
        metric = MetricKind.BRIER if rng.random() < 0.5 else MetricKind.EXACT_MATCH
        hi = metric.value_range[1]
        a = TaskScore("t", metric, float(rng.uniform(0, hi)), 10)
        b = TaskScore("t", metric, float(rng.uniform(0, hi)), 10)
        assert utility_delta(a, b).value == -utility_delta(b, a).value
    _ok(8, "brier matches the loop oracle to 1e-12; exact trivial cases; antisymmetry exact")


def test_criterion_09_diversity_oracles():
    from collections import Counter

    rng = np.random.default_rng(909)
    for _ in range(200):
        docs = [
            rng.integers(0, int(rng.integers(2, 17)), size=int(rng.integers(0, 1000))).tolist()
            for _ in range(int(rng.integers(1, 4)))
        ]
        n_max = int(rng.integers(1, 5))
        profiler = NgramProfiler(n_max)
        for doc in docs:
            profiler.add_document(doc)
        report = profiler.report()
        for n in range(1, n_max + 1):
            oracle = Counter()
            for doc in docs:
                for i in range(len(doc) - n + 1):
                    oracle[tuple(doc[i : i + n])] += 1
            row = report.stats(n)
            assert row.distinct == len(oracle)
            assert row.total == sum(oracle.values())
            assert profiler.counts(n).tolist() == sorted(oracle.values())
            if row.distinct:
                assert row.entropy_bits <= math.log2(row.distinct)

    uniform = profile_corpus([list(range(8)) * 5], 1).stats(1)
    assert uniform.entropy_bits == math.log2(8)
    skewed = profile_corpus([[0] * 9 + [1]], 1).stats(1)
    assert skewed.entropy_bits < 1.0

    doubled = profile_corpus([[1, 2, 1, 3]] * 2, 2)
    single = profile_corpus([[1, 2, 1, 3]], 2)
    assert doubled.stats(2).entropy_bits == single.stats(2).entropy_bits
    _ok(9, "hashed counts matched tuple-map oracles on 200 corpora; entropy bounds hold")


def test_criterion_09b_diversity_performance(tmp_path):
    corpus = tmp_path / "perf_corpus.txt"
    rng = np.random.default_rng(99)
    vocab = np.array([f"w{i}".encode() for i in range(50_000)], dtype=object)
    target = 100 * 1024 * 1024
    written = 0
    with open(corpus, "wb") as handle:
        while written < target:
            words = vocab[rng.integers(0, len(vocab), size=1_000_000)]
            lines = [
                b" ".join(list(words[i : i + 60])) for i in range(0, len(words), 60)
            ]
            block = b"\n".join(lines) + b"\n"
            handle.write(block)
            written += len(block)

    start = time.perf_counter()
    profiler = NgramProfiler(4)
    for document in read_text_token_documents(corpus):
        profiler.add_document(document)
    report = profiler.report()
    elapsed = time.perf_counter() - start
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024**2

    assert report.token_total >= 15_000_000
    assert elapsed < 60.0
    assert peak_gb < 4.0
    _ok("9b", f"{written / 1e6:.0f} MB corpus profiled to n=4 in {elapsed:.1f}s, {peak_gb:.2f} GB peak")


def test_criterion_10_end_to_end_determinism(tmp_path, capsys):
    def pipeline(tag):
        manifest = tmp_path / f"m_{tag}.json"
        outputs = []
        assert main(
            ["simulate", "--scenario", "rank-flip", "--seed", "7", "--noise", "0.005",
             "--out", str(manifest)]
        ) == 0
        outputs.append(manifest.read_bytes())
        for command, extra in (
            ("fit", []),
            ("rank", ["--budget", "1e21"]),
            ("allocate", ["--c-max", "1e21", "--with-oracle"]),
        ):
            out_path = tmp_path / f"{command}_{tag}.csv"
            argv = [command, "--manifest", str(manifest), "--basis", "total",
                    "--out", str(out_path)] + extra
            assert main(argv) == 0
            outputs.append(out_path.read_bytes())
        capsys.readouterr()
        return outputs

    assert pipeline("first") == pipeline("second")
    _ok(10, "simulate | fit | rank | allocate produced byte-identical CSVs twice")
