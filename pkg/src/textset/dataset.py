"""Data model and synthesis pipeline for set-like composition samples.

A corpus document is a pre-segmented list of sentences. Every window of three
consecutive sentences yields two fused sentences (via a fusion provider) and
from those a family of overlap / union / difference samples. Difference
samples are gated by a cosine-similarity filter on their underlying input
pair.
"""

from __future__ import annotations

import json
import statistics
import subprocess
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .criteria import EmptyInput, MissingEmbedding
from .geometry import measure

__all__ = [
    "OPERATORS",
    "CompositionSample",
    "SentenceTriple",
    "FusionRequest",
    "FusionResult",
    "AnnotationRecord",
    "ProviderUnavailable",
    "EmptyCompletion",
    "BudgetExceeded",
    "OutOfRangeScore",
    "extract_triples",
    "build_fusion_messages",
    "fuse",
    "MockFusionProvider",
    "HttpFusionProvider",
    "SubprocessFusionProvider",
    "DifferenceFilterResult",
    "difference_filter",
    "assemble_samples",
    "synthesize",
    "write_samples_jsonl",
    "read_samples_jsonl",
    "annotation_stats",
    "OperatorStats",
    "read_annotations",
]

OPERATORS = ("overlap", "difference", "union")

DEFAULT_FILTER_THRESHOLD = 0.25
FUSION_TEMPERATURE = 0.5


class ProviderUnavailable(RuntimeError):
    pass


class EmptyCompletion(RuntimeError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class OutOfRangeScore(ValueError):
    pass


@dataclass(frozen=True)
class SentenceTriple:
    """Three consecutive sentences from one document."""

    s_prev: str
    s_curr: str
    s_next: str
    doc_id: str
    index: int


@dataclass(frozen=True)
class CompositionSample:
    op: str
    a: str
    b: str
    target: str
    ordered: bool
    doc_id: str
    triple_index: int
    pattern_id: int
    filter_sim: float | None = None

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator: {self.op!r}")
        if not (self.a and self.b and self.target):
            raise ValueError("sample texts must be nonempty")
        if self.ordered != (self.op == "difference"):
            raise ValueError("only difference samples are ordered")

    @property
    def sample_id(self) -> str:
        return f"{self.doc_id}:{self.triple_index}:{self.op}:{self.pattern_id}"

    def sentences(self) -> tuple[str, str, str]:
        return (self.a, self.b, self.target)

    def to_json_dict(self) -> dict:
        return {
            "id": self.sample_id,
            "op": self.op,
            "a": self.a,
            "b": self.b,
            "target": self.target,
            "ordered": self.ordered,
            "provenance": {
                "doc_id": self.doc_id,
                "triple_index": self.triple_index,
                "pattern_id": self.pattern_id,
            },
            "filter_sim": self.filter_sim,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CompositionSample":
        prov = obj["provenance"]
        return cls(
            op=obj["op"],
            a=obj["a"],
            b=obj["b"],
            target=obj["target"],
            ordered=obj["ordered"],
            doc_id=prov["doc_id"],
            triple_index=prov["triple_index"],
            pattern_id=prov["pattern_id"],
            filter_sim=obj.get("filter_sim"),
        )


def extract_triples(sentences: Sequence[str], doc_id: str) -> list[SentenceTriple]:
    """Sliding window of width 3, stride 1; short documents yield nothing."""
    return [
        SentenceTriple(sentences[i], sentences[i + 1], sentences[i + 2],
                       doc_id=doc_id, index=i)
        for i in range(max(0, len(sentences) - 2))
    ]


@dataclass(frozen=True)
class FusionRequest:
    a: str
    b: str
    temperature: float = FUSION_TEMPERATURE

    @property
    def max_words(self) -> float:
        # Deliberately a float: odd word sums give a fractional budget, and
        # the prompt interpolates the value as-is.
        return 0.5 * (len(self.a.split()) + len(self.b.split()))


@dataclass(frozen=True)
class FusionResult:
    request: FusionRequest
    text: str
    raw_response: str


def build_fusion_messages(req: FusionRequest) -> list[dict]:
    """Chat messages sent to the fusion model, byte-for-byte."""
    return [
        {"role": "system", "content": "You are a paraphraser."},
        {
            "role": "user",
            "content": f"Fuse the following two sentences in "
                       f"{req.max_words} words: {req.a}\n{req.b}",
        },
    ]


class FusionProvider(Protocol):
    def complete(self, req: FusionRequest) -> str: ...


class MockFusionProvider:
    """Deterministic offline fusion: words of a, then new words of b."""

    def complete(self, req: FusionRequest) -> str:
        seen = set()
        words = []
        for w in req.a.split() + req.b.split():
            key = w.lower().strip(".,;:!?")
            if key not in seen:
                seen.add(key)
                words.append(w.rstrip(".,;:!?"))
        return " ".join(words) + "."


class HttpFusionProvider:
    """POST /fuse {"a","b","max_words","temperature"} -> {"text"}.

    Retries with exponential backoff; a configurable call cap guards against
    runaway spend.
    """

    def __init__(self, url: str, max_retries: int = 3, backoff: float = 0.5,
                 call_budget: int | None = None, timeout: float = 60.0):
        self.url = url.rstrip("/")
        self.max_retries = max_retries
        self.backoff = backoff
        self.call_budget = call_budget
        self.timeout = timeout
        self.calls = 0

    def complete(self, req: FusionRequest) -> str:
        if self.call_budget is not None and self.calls >= self.call_budget:
            raise BudgetExceeded(f"fusion call budget of {self.call_budget} exhausted")
        self.calls += 1
        payload = {"a": req.a, "b": req.b, "max_words": req.max_words,
                   "temperature": req.temperature}
        last_err: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(f"{self.url}/fuse", json=payload,
                                     timeout=self.timeout)
                if resp.status_code == 200:
                    return resp.json().get("text", "")
                last_err = ProviderUnavailable(
                    f"fusion provider returned HTTP {resp.status_code}")
            except requests.RequestException as exc:
                last_err = exc
            time.sleep(self.backoff * (2 ** attempt))
        raise ProviderUnavailable(f"fusion provider unreachable: {last_err}")


class SubprocessFusionProvider:
    """Fusion over a child process speaking JSONL on stdin/stdout."""

    def __init__(self, cmd: Sequence[str]):
        self.cmd = list(cmd)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                    text=True, bufsize=1)
            except OSError as exc:
                raise ProviderUnavailable(f"cannot start provider: {exc}") from exc
        return self._proc

    def complete(self, req: FusionRequest) -> str:
        proc = self._ensure()
        line = json.dumps({"a": req.a, "b": req.b, "max_words": req.max_words,
                           "temperature": req.temperature})
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            out = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProviderUnavailable(f"provider pipe broken: {exc}") from exc
        if not out:
            raise ProviderUnavailable("provider closed its output stream")
        return json.loads(out).get("text", "")

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


def fuse(provider: FusionProvider, req: FusionRequest) -> FusionResult:
    """Run one fusion call, rejecting empty completions."""
    text = provider.complete(req)
    if not text or not text.strip():
        raise EmptyCompletion("fusion provider returned an empty completion")
    return FusionResult(request=req, text=text, raw_response=text)


EmbeddingSource = Callable[[str], "object"]


@dataclass(frozen=True)
class DifferenceFilterResult:
    passed: bool
    similarity: float | None


ALL_PASS_FILTER = DifferenceFilterResult(passed=True, similarity=None)


def difference_filter(pair: tuple[str, str], embedder: EmbeddingSource,
                      threshold: float = DEFAULT_FILTER_THRESHOLD) -> DifferenceFilterResult:
    """Keep the pair iff cosine similarity is strictly below the threshold."""
    va = embedder(pair[0])
    vb = embedder(pair[1])
    if va is None or vb is None:
        missing = pair[0] if va is None else pair[1]
        raise MissingEmbedding(f"no embedding for sentence: {missing[:80]!r}")
    sim = measure("cosine", va, vb)
    return DifferenceFilterResult(passed=sim < threshold, similarity=sim)


def assemble_samples(triple: SentenceTriple, s1: str, s2: str,
                     filter_s1: DifferenceFilterResult = ALL_PASS_FILTER,
                     filter_s2: DifferenceFilterResult = ALL_PASS_FILTER) -> list[CompositionSample]:
    """Build the full sample family for one triple.

    Always: one overlap sample ({s1, s2}, s_curr) and two union samples.
    Difference patterns 1-3 (built on s1) require the (s_prev, s_curr) pair
    to have passed the filter; patterns 4-6 (built on s2) require
    (s_curr, s_next).
    """
    t = triple
    common = dict(doc_id=t.doc_id, triple_index=t.index)
    samples = [
        CompositionSample(op="overlap", a=s1, b=s2, target=t.s_curr,
                          ordered=False, pattern_id=0, **common),
        CompositionSample(op="union", a=t.s_prev, b=t.s_curr, target=s1,
                          ordered=False, pattern_id=1, **common),
        CompositionSample(op="union", a=t.s_curr, b=t.s_next, target=s2,
                          ordered=False, pattern_id=2, **common),
    ]
    if filter_s1.passed:
        sim = filter_s1.similarity
        samples += [
            CompositionSample(op="difference", a=s1, b=t.s_prev, target=t.s_curr,
                              ordered=True, pattern_id=1, filter_sim=sim, **common),
            CompositionSample(op="difference", a=s1, b=t.s_curr, target=t.s_prev,
                              ordered=True, pattern_id=2, filter_sim=sim, **common),
            CompositionSample(op="difference", a=s1, b=s2, target=t.s_prev,
                              ordered=True, pattern_id=3, filter_sim=sim, **common),
        ]
    if filter_s2.passed:
        sim = filter_s2.similarity
        samples += [
            CompositionSample(op="difference", a=s2, b=t.s_curr, target=t.s_next,
                              ordered=True, pattern_id=4, filter_sim=sim, **common),
            CompositionSample(op="difference", a=s2, b=t.s_next, target=t.s_curr,
                              ordered=True, pattern_id=5, filter_sim=sim, **common),
            CompositionSample(op="difference", a=s2, b=s1, target=t.s_next,
                              ordered=True, pattern_id=6, filter_sim=sim, **common),
        ]
    return samples


def synthesize(docs: Iterable[tuple[str, Sequence[str]]], provider: FusionProvider,
               embedder: EmbeddingSource | None = None,
               threshold: float = DEFAULT_FILTER_THRESHOLD,
               on_skip: Callable[[SentenceTriple, Exception], None] | None = None) -> list[CompositionSample]:
    """Run the full synthesis pipeline over (doc_id, sentences) documents.

    A fusion failure skips the whole triple so sample families stay
    consistent. With no embedder, difference samples are emitted unfiltered
    (filter_sim is null).
    """
    out: list[CompositionSample] = []
    for doc_id, sentences in docs:
        for triple in extract_triples(sentences, doc_id):
            try:
                s1 = fuse(provider, FusionRequest(triple.s_prev, triple.s_curr)).text
                s2 = fuse(provider, FusionRequest(triple.s_curr, triple.s_next)).text
            except EmptyCompletion as exc:
                if on_skip is not None:
                    on_skip(triple, exc)
                continue
            if embedder is None:
                f1 = f2 = ALL_PASS_FILTER
            else:
                f1 = difference_filter((triple.s_prev, triple.s_curr),
                                       embedder, threshold)
                f2 = difference_filter((triple.s_curr, triple.s_next),
                                       embedder, threshold)
            out.extend(assemble_samples(triple, s1, s2, f1, f2))
    return out


def write_samples_jsonl(samples: Iterable[CompositionSample], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_samples_jsonl(path) -> list[CompositionSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(CompositionSample.from_json_dict(json.loads(line)))
    return samples


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    operator: str
    scores: tuple[int, ...]

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator: {self.operator!r}")
        if not 2 <= len(self.scores) <= 3:
            raise OutOfRangeScore(
                f"expected 2-3 annotator scores, got {len(self.scores)}")
        for sc in self.scores:
            if not isinstance(sc, int) or not 0 <= sc <= 4:
                raise OutOfRangeScore(f"score {sc!r} outside Likert range 0-4")

    @property
    def mean_score(self) -> float:
        return sum(self.scores) / len(self.scores)


@dataclass(frozen=True)
class OperatorStats:
    mean: float
    median: float
    q1: float
    q3: float
    n: int


def annotation_stats(records: Sequence[AnnotationRecord]) -> dict[str, OperatorStats]:
    """Per-operator statistics over per-sample annotator-mean scores."""
    if not records:
        raise EmptyInput("no annotation records")
    by_op: dict[str, list[float]] = {}
    for r in records:
        by_op.setdefault(r.operator, []).append(r.mean_score)
    stats = {}
    for op, means in sorted(by_op.items()):
        q1, med, q3 = statistics.quantiles(means, n=4, method="inclusive") \
            if len(means) > 1 else (means[0], means[0], means[0])
        stats[op] = OperatorStats(
            mean=statistics.fmean(means),
            median=statistics.median(means),
            q1=q1, q3=q3, n=len(means),
        )
    return stats


def read_annotations(path) -> list[AnnotationRecord]:
    """Read annotation records from JSONL or CSV.

    JSONL lines look like {"sample_id","operator","scores":[ints]}; CSV rows
    are sample_id,operator,scores with scores space-separated.
    """
    import csv

    records = []
    with open(path, encoding="utf-8") as fh:
        first = fh.read(1)
        fh.seek(0)
        if first == "{":
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                records.append(AnnotationRecord(
                    sample_id=obj["sample_id"], operator=obj["operator"],
                    scores=tuple(obj["scores"])))
        else:
            reader = csv.DictReader(fh)
            for row in reader:
                scores = tuple(int(tok) for tok in row["scores"].split())
                records.append(AnnotationRecord(
                    sample_id=row["sample_id"], operator=row["operator"],
                    scores=scores))
    return records
