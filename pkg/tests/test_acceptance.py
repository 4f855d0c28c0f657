"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with -s or check captured output)."""

import contextlib
import json
import math
import time

import jsonschema
import numpy as np
import pytest

from textset import embedstore
from textset.cli import main
from textset.criteria import (
    BEYOND_A,
    BEYOND_B,
    MIDDLE,
    CriteriaConfig,
    SampleEmbeddings,
    eval_c1,
    eval_c3,
    eval_c4,
    eval_projection_criterion,
    norm_ratio_profile,
    oriented_similarity,
)
from textset.dataset import (
    AnnotationRecord,
    MockFusionProvider,
    annotation_stats,
    difference_filter,
    read_samples_jsonl,
    synthesize,
    write_samples_jsonl,
)
from textset.geometry import (
    DegenerateVector,
    angle_between,
    measure,
    normalized_angles,
    plane_basis,
    project,
)

from test_criteria import brute_force_one_condition, brute_force_two_condition

FIVE_SENTENCES = [
    "The storm arrived overnight.",
    "Crews cleared fallen branches from the roads.",
    "Power was restored by early afternoon.",
    "Schools reopened the following day.",
    "Residents praised the quick response.",
]

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["config", "corpus_digest", "entries", "tool_version"],
    "additionalProperties": False,
    "properties": {
        "config": {"type": "object"},
        "corpus_digest": {"type": "string"},
        "tool_version": {"type": "string"},
        "entries": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["model_id", "measure", "criterion", "payload"],
                "additionalProperties": False,
                "properties": {
                    "model_id": {"type": "string"},
                    "measure": {"type": "string"},
                    "criterion": {"type": "string",
                                  "pattern": "^c[1-6]$"},
                    "payload": {"type": "object"},
                },
            },
        },
    },
}


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def test_projection_suite():
    with criterion("projection-suite"):
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        dims = [2] * 333 + [8] * 334 + [4096] * 333
        for i, dim in enumerate(dims):
            x = rng.normal(size=dim)
            y = rng.normal(size=dim)
            v = rng.normal(size=dim)
            basis = plane_basis(x, y)
            proj = project(v, basis)
            resid = v - proj
            assert abs(np.dot(resid, x)) <= 1e-9 * np.linalg.norm(v) * np.linalg.norm(x)
            assert abs(np.dot(resid, y)) <= 1e-9 * np.linalg.norm(v) * np.linalg.norm(y)
            pnorm = np.linalg.norm(proj)
            assert np.linalg.norm(project(proj, basis) - proj) <= 1e-12 * pnorm + 1e-12
            assert pnorm <= np.linalg.norm(v) * (1 + 1e-12) + 1e-12
            ap = normalized_angles(proj, basis, x, y)
            gamma = angle_between(x, y)
            if ap.signed_theta < 0:
                assert ap.t_b - ap.t_a == pytest.approx(1.0, abs=1e-9)
            elif ap.signed_theta > gamma:
                assert ap.t_a - ap.t_b == pytest.approx(1.0, abs=1e-9)
            else:
                assert ap.t_a + ap.t_b == pytest.approx(1.0, abs=1e-9)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"projection suite took {elapsed:.2f}s"


def test_measure_suite():
    with criterion("measure-suite"):
        rng = np.random.default_rng(202)
        start = time.perf_counter()
        for _ in range(10000):
            dim = int(rng.integers(2, 12))
            x = rng.normal(size=dim) * 10.0 ** rng.integers(-2, 3)
            y = rng.normal(size=dim) * 10.0 ** rng.integers(-2, 3)
            cos = measure("cosine", x, y)
            assert -1.0 <= cos <= 1.0
            assert measure("cosine", y, x) == pytest.approx(cos, abs=1e-12)
            assert measure("dot", x, y) == pytest.approx(measure("dot", y, x))
            assert measure("l1", x, y) >= 0.0
            assert measure("l2", x, y) >= 0.0
            try:
                ned = measure("ned", x, y)
            except DegenerateVector:
                continue
            assert 0.0 <= ned <= 1.0 + 1e-12
            assert measure("ned", y, x) == pytest.approx(ned, abs=1e-12)
            assert measure("ned", x, x) == 0.0
            c = float(rng.normal()) * 5.0
            assert measure("ned", x + c, y) == pytest.approx(ned, rel=1e-6,
                                                             abs=1e-9)
        # perfectly anti-correlated pair: centered y = -centered x
        x = np.array([1.0, 2.0, 4.0])
        y = 10.0 - x
        assert measure("ned", x, y) == pytest.approx(1.0)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"measure suite took {elapsed:.2f}s"


def test_epsilon_grid_oracle():
    with criterion("epsilon-grid-oracle"):
        rng = np.random.default_rng(303)
        for fixture in range(50):
            n = int(rng.integers(1, 21))
            count = int(rng.integers(1, 9))
            samples = [SampleEmbeddings(a=rng.normal(size=5),
                                        b=rng.normal(size=5),
                                        target=rng.normal(size=5))
                       for _ in range(n)]
            cfg = CriteriaConfig(epsilon_count=count)
            kind = ("cosine", "dot", "l2", "ned")[fixture % 4]
            t1 = eval_c1(samples, kind, cfg)
            s_ab = [oriented_similarity(kind, s.a, s.b) for s in samples]
            d1 = np.array([oriented_similarity(kind, s.a, s.target) - ab
                           for s, ab in zip(samples, s_ab)])
            d2 = np.array([oriented_similarity(kind, s.b, s.target) - ab
                           for s, ab in zip(samples, s_ab)])
            assert t1.counts == brute_force_two_condition(d1, d2, t1.grid1,
                                                          t1.grid2)
            t3 = eval_c3(samples, kind, cfg)
            e1 = np.array([oriented_similarity(kind, s.a, s.target)
                           - oriented_similarity(kind, s.b, s.target)
                           for s in samples])
            e2 = np.array([oriented_similarity(kind, s.a, s.b)
                           - oriented_similarity(kind, s.b, s.target)
                           for s in samples])
            assert t3.counts == brute_force_two_condition(e1, e2, t3.grid1,
                                                          t3.grid2)
            if kind in ("cosine", "ned"):
                t4 = eval_c4(samples, kind, cfg)
                d = np.array([oriented_similarity(kind, s.a - s.b, s.target)
                              - oriented_similarity(kind, s.a - s.b, s.b)
                              for s in samples])
                assert t4.counts[0] == brute_force_one_condition(d, t4.grid)
        # default grid density
        rng2 = np.random.default_rng(1)
        samples = [SampleEmbeddings(a=rng2.normal(size=4), b=rng2.normal(size=4),
                                    target=rng2.normal(size=4)) for _ in range(5)]
        tally = eval_c1(samples, "cosine")
        assert tally.grid1.count == 132 and tally.grid2.count == 132
        assert tally.n_grid_points == 17424


def test_c1_symmetry_metamorphic():
    with criterion("c1-symmetry"):
        rng = np.random.default_rng(404)
        samples = [SampleEmbeddings(a=rng.normal(size=12), b=rng.normal(size=12),
                                    target=rng.normal(size=12))
                   for _ in range(200)]
        from textset.criteria import fixed_grid
        grid = fixed_grid(-0.4, 0.4, 9)
        for kind in ("cosine", "ned"):
            fwd = eval_c1(samples, kind, grids=(grid, grid))
            swapped = [SampleEmbeddings(a=s.b, b=s.a, target=s.target)
                       for s in samples]
            rev = eval_c1(swapped, kind, grids=(grid, grid))
            assert rev.counts == (fwd.counts[0], fwd.counts[2],
                                  fwd.counts[1], fwd.counts[3])


def test_cosine_scale_invariance_metamorphic():
    with criterion("cosine-scale-invariance"):
        rng = np.random.default_rng(505)
        samples = [SampleEmbeddings(a=rng.normal(size=10), b=rng.normal(size=10),
                                    target=rng.normal(size=10))
                   for _ in range(150)]
        # power-of-two scalars keep the rescaling exact in floating point
        def rescale(s):
            return SampleEmbeddings(
                a=s.a * 2.0 ** int(rng.integers(-8, 9)),
                b=s.b * 2.0 ** int(rng.integers(-8, 9)),
                target=s.target * 2.0 ** int(rng.integers(-8, 9)))

        scaled = [rescale(s) for s in samples]
        base_tally = eval_c1(samples, "cosine")
        scaled_tally = eval_c1(scaled, "cosine")
        assert scaled_tally.counts == base_tally.counts
        assert scaled_tally.cells() == base_tally.cells()
        base_prof = eval_projection_criterion(samples, "overlap")
        scaled_prof = eval_projection_criterion(scaled, "overlap")
        assert [(r.t_a, r.t_b, r.classification) for r in base_prof.records] == \
               [(r.t_a, r.t_b, r.classification) for r in scaled_prof.records]
        assert np.array_equal(base_prof.counts, scaled_prof.counts)


def _in_cone_sample(rng, dim, t, norm_a=1.0, norm_b=1.0, noise=0.3):
    """Sample whose projected target sits at normalized angle t from E_A."""
    x = rng.normal(size=dim)
    y = rng.normal(size=dim)
    basis = plane_basis(x, y)
    gamma = angle_between(x, y)
    theta = t * gamma
    v = math.cos(theta) * basis.b1 + math.sin(theta) * basis.b2
    # out-of-plane noise leaves the projection direction untouched
    off = rng.normal(size=dim)
    off -= np.dot(off, basis.b1) * basis.b1
    off -= np.dot(off, basis.b2) * basis.b2
    a = x / np.linalg.norm(x) * norm_a
    b = y / np.linalg.norm(y) * norm_b
    return SampleEmbeddings(a=a, b=b, target=v + noise * off)


def test_synthetic_geometry_reproduction():
    with criterion("synthetic-geometry"):
        rng = np.random.default_rng(606)
        cfg = CriteriaConfig()
        # C2: all targets strictly inside the cone
        overlap = [_in_cone_sample(rng, 32, float(rng.uniform(0.05, 0.95)))
                   for _ in range(1000)]
        prof_c2 = eval_projection_criterion(overlap, "overlap", cfg)
        assert prof_c2.summary["middle_fraction"] >= 0.99
        # C5: 900 targets inside the theta_D=0.1 cone around A, 100 outside;
        # the reported fraction must equal the constructed one exactly
        diff = [_in_cone_sample(rng, 32, float(rng.uniform(0.0, 0.08)))
                for _ in range(900)]
        diff += [_in_cone_sample(rng, 32, float(rng.uniform(0.15, 0.9)))
                 for _ in range(100)]
        prof_c5 = eval_projection_criterion(diff, "difference", cfg)
        assert prof_c5.summary["near_a_fraction"] == 900 / 1000
        # C6: mid-cone targets with input norms drawn near 1
        union = [_in_cone_sample(rng, 32, float(rng.uniform(0.3, 0.7)),
                                 norm_a=float(rng.uniform(0.96, 1.04)),
                                 norm_b=float(rng.uniform(0.96, 1.04)))
                 for _ in range(1000)]
        ratios = norm_ratio_profile(union, cfg)
        assert ratios.median == pytest.approx(1.0, abs=0.05)
        prof_c6 = eval_projection_criterion(union, "union", cfg)
        assert prof_c6.summary["middle_fraction"] >= 0.99


def test_dataset_pipeline_mock():
    import tempfile
    from pathlib import Path

    with criterion("dataset-pipeline"):
        samples = synthesize([("doc0", FIVE_SENTENCES)], MockFusionProvider())
        assert len(samples) == 27
        ops = [s.op for s in samples]
        assert ops.count("overlap") == 3
        assert ops.count("union") == 6
        assert ops.count("difference") == 18
        for s in samples:
            assert s.ordered == (s.op == "difference")
            if s.op == "difference":
                assert 1 <= s.pattern_id <= 6
        # boundary: cosine exactly 0.25 is rejected (strict less-than);
        # vectors chosen so the cosine is exactly representable
        emb = {"a": [4.0, 0.0], "b": [1.0, math.sqrt(15.0)]}.get
        result = difference_filter(("a", "b"), emb)
        assert result.similarity == 0.25
        assert not result.passed
        with tempfile.TemporaryDirectory() as tmp:
            p1, p2 = Path(tmp) / "r1.jsonl", Path(tmp) / "r2.jsonl"
            write_samples_jsonl(
                synthesize([("doc0", FIVE_SENTENCES)], MockFusionProvider()), p1)
            write_samples_jsonl(
                synthesize([("doc0", FIVE_SENTENCES)], MockFusionProvider()), p2)
            assert p1.read_bytes() == p2.read_bytes()


def test_store_round_trip(tmp_path):
    with criterion("store-round-trip"):
        start = time.perf_counter()
        rng = np.random.default_rng(707)
        specs = [("small", 8, 100), ("medium", 64, 1000), ("big", 4096, 10000)]
        for model_id, dim, count in specs:
            store = embedstore.ModelStore(model_id=model_id, dim=dim)
            vecs = rng.normal(size=(count, dim)).astype(np.float32)
            for i in range(count):
                store.vectors[embedstore.sentence_key(f"s{i}")] = vecs[i]
            path = tmp_path / f"{model_id}.scev"
            embedstore.export_file(store, path)
            back = embedstore.import_file(path)
            assert back.model_id == store.model_id
            assert back.dim == store.dim
            assert set(back.vectors) == set(store.vectors)
            for key in store.vectors:
                assert np.array_equal(back.vectors[key], store.vectors[key])
            path2 = tmp_path / f"{model_id}.again.scev"
            embedstore.export_file(back, path2)
            assert path.read_bytes() == path2.read_bytes()
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"store round-trip took {elapsed:.2f}s"


def test_cli_end_to_end(tmp_path):
    with criterion("cli-end-to-end"):
        corpus = tmp_path / "doc0.txt"
        corpus.write_text("\n".join(FIVE_SENTENCES) + "\n")
        samples_path = tmp_path / "samples.jsonl"
        assert main(["synth", "--corpus", str(corpus), "--out",
                     str(samples_path), "--mock-provider", "--no-filter"]) == 0

        rng = np.random.default_rng(808)
        fixture = embedstore.ModelStore(model_id="fixture", dim=24)
        for s in read_samples_jsonl(samples_path):
            for text in s.sentences():
                if fixture.get(text) is None:
                    fixture.add(text, rng.normal(size=24).astype(np.float32))
        fixture_path = tmp_path / "fixture.scev"
        embedstore.export_file(fixture, fixture_path)

        store_path = tmp_path / "store.scev"
        assert main(["embed", "--import", str(fixture_path),
                     "--out", str(store_path)]) == 0

        summaries = []
        for threads in range(1, 9):
            out_dir = tmp_path / f"out{threads}"
            assert main(["eval", "--samples", str(samples_path),
                         "--store", str(store_path),
                         "--criteria", "c1,c2,c3,c4,c5,c6",
                         "--measures", "cosine,ned",
                         "--threads", str(threads),
                         "--out-dir", str(out_dir)]) == 0
            doc = json.loads((out_dir / "summary.json").read_text())
            jsonschema.validate(doc, SUMMARY_SCHEMA)
            doc["config"]["threads"] = 0
            summaries.append(json.dumps(doc, sort_keys=True))
        assert len(set(summaries)) == 1


def test_annotation_aggregation():
    with criterion("annotation-aggregation"):
        records = [
            AnnotationRecord("o1", "overlap", (2, 2)),
            AnnotationRecord("o2", "overlap", (3, 2)),
            AnnotationRecord("o3", "overlap", (3, 3)),
            AnnotationRecord("o4", "overlap", (3, 4)),
            AnnotationRecord("d1", "difference", (3, 3)),
            AnnotationRecord("d2", "difference", (3, 3, 3)),
            AnnotationRecord("d3", "difference", (2, 4)),
            AnnotationRecord("d4", "difference", (4, 4)),
            AnnotationRecord("u1", "union", (2, 3)),
            AnnotationRecord("u2", "union", (4, 4)),
            AnnotationRecord("u3", "union", (3, 4, 4)),
            AnnotationRecord("u4", "union", (4, 3)),
        ]
        stats = annotation_stats(records)
        # hand-computed over per-sample means:
        # overlap [2.0, 2.5, 3.0, 3.5]; difference [3, 3, 3, 4];
        # union [2.5, 4.0, 11/3, 3.5]
        assert stats["overlap"].mean == 2.75
        assert stats["overlap"].median == 2.75
        assert stats["overlap"].q1 == 2.375
        assert stats["overlap"].q3 == 3.125
        assert stats["difference"].mean == 3.25
        assert stats["difference"].median == 3.0
        assert stats["difference"].q1 == 3.0
        assert stats["difference"].q3 == 3.25
        assert stats["union"].mean == pytest.approx(41 / 12, abs=1e-12)
        assert stats["union"].median == pytest.approx((3.5 + 11 / 3) / 2,
                                                      abs=1e-12)
        assert stats["union"].q1 == pytest.approx(3.25, abs=1e-12)
        assert stats["union"].q3 == pytest.approx(3.75, abs=1e-12)
        # every operator above the satisfactory midpoint
        for op_stats in stats.values():
            assert op_stats.mean > 2.5
