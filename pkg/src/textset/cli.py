"""Command-line orchestration: synthesize -> embed -> evaluate -> report.

Exit codes: 0 success, 2 configuration error, 3 provider/adapter failure,
4 I/O error, 5 missing embeddings.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import requests

from . import criteria, dataset, embedstore, report
from .criteria import CriteriaConfig, SampleEmbeddings
from .dataset import CompositionSample

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_IO = 4
EXIT_MISSING = 5

ALL_CRITERIA = ("c1", "c2", "c3", "c4", "c5", "c6")

ADAPTER_URL_ENV = "TEXTSET_ADAPTER_URL"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_config_file(path: str) -> dict[str, str]:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliError(f"bad config line: {line!r}", EXIT_CONFIG)
                key, _, value = line.partition("=")
                cfg[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", EXIT_CONFIG)
    return cfg


def _apply_config(args: argparse.Namespace, defaults: dict) -> None:
    # Precedence: explicit flags > config file > built-in defaults. Flags
    # left at None are filled from the config file, then from defaults.
    file_cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            if key in file_cfg:
                raw = file_cfg[key]
                cast = type(default) if default is not None else str
                setattr(args, key, cast(raw) if cast is not bool
                        else raw.lower() in ("1", "true", "yes"))
            else:
                setattr(args, key, default)


def _load_corpus(path: str) -> list[tuple[str, list[str]]]:
    p = Path(path)
    if not p.exists():
        raise CliError(f"corpus not found: {path}", EXIT_IO)
    files = sorted(p.iterdir()) if p.is_dir() else [p]
    docs = []
    for f in files:
        if f.is_dir():
            continue
        if f.suffix == ".jsonl":
            with open(f, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    docs.append((obj["doc_id"], list(obj["sentences"])))
        else:
            sentences = [ln.strip() for ln in f.read_text(encoding="utf-8").splitlines()
                         if ln.strip()]
            docs.append((f.stem, sentences))
    return docs


def cmd_synth(args) -> int:
    docs = _load_corpus(args.corpus)

    if args.mock_provider:
        provider = dataset.MockFusionProvider()
    elif args.provider_cmd:
        provider = dataset.SubprocessFusionProvider(args.provider_cmd.split())
    elif args.provider_url:
        provider = dataset.HttpFusionProvider(args.provider_url,
                                              call_budget=args.call_budget)
    else:
        raise CliError("one of --provider-url, --provider-cmd, --mock-provider "
                       "is required", EXIT_CONFIG)

    embedder = None
    if not args.no_filter:
        if not args.filter_store:
            raise CliError("--filter-store required unless --no-filter is given",
                           EXIT_CONFIG)
        try:
            store = embedstore.import_file(args.filter_store)
        except (OSError, embedstore.StoreError) as exc:
            raise CliError(f"cannot load filter store: {exc}", EXIT_IO)
        embedder = store.get

    skipped = []
    try:
        samples = dataset.synthesize(
            docs, provider, embedder=embedder, threshold=args.threshold,
            on_skip=lambda t, e: skipped.append((t, e)))
    except (dataset.ProviderUnavailable, dataset.BudgetExceeded) as exc:
        raise CliError(f"fusion provider failed: {exc}", EXIT_PROVIDER)
    except criteria.MissingEmbedding as exc:
        raise CliError(f"filter embedding missing: {exc}", EXIT_MISSING)

    try:
        n = dataset.write_samples_jsonl(samples, args.out)
    except OSError as exc:
        raise CliError(f"cannot write samples: {exc}", EXIT_IO)

    counts = {op: 0 for op in dataset.OPERATORS}
    for s in samples:
        counts[s.op] += 1
    for op in dataset.OPERATORS:
        print(f"{op}: {counts[op]}")
    print(f"total: {n} samples written to {args.out}")
    if skipped:
        print(f"skipped {len(skipped)} triples (fusion failures)", file=sys.stderr)
    return EXIT_OK


def _unique_sentences(samples: list[CompositionSample]) -> list[str]:
    seen = set()
    out = []
    for s in samples:
        for text in s.sentences():
            key = embedstore.sentence_key(text)
            if key not in seen:
                seen.add(key)
                out.append(text)
    return out


def cmd_embed(args) -> int:
    if args.import_file:
        try:
            store = embedstore.import_file(args.import_file)
        except (OSError, embedstore.StoreError) as exc:
            raise CliError(f"cannot import store: {exc}", EXIT_IO)
    else:
        adapter_url = args.adapter_url or os.environ.get(ADAPTER_URL_ENV)
        if not adapter_url:
            raise CliError("--adapter-url (or TEXTSET_ADAPTER_URL) or --import "
                           "is required", EXIT_CONFIG)
        if args.samples:
            texts = _unique_sentences(dataset.read_samples_jsonl(args.samples))
        elif args.sentences:
            with open(args.sentences, encoding="utf-8") as fh:
                texts = list(dict.fromkeys(ln.rstrip("\n") for ln in fh if ln.strip()))
        else:
            raise CliError("--samples or --sentences required with --adapter-url",
                           EXIT_CONFIG)
        store = None
        url = adapter_url.rstrip("/") + "/embed"
        for i in range(0, len(texts), args.batch_size):
            batch = texts[i:i + args.batch_size]
            try:
                resp = requests.post(url, json={"model": args.model,
                                                "sentences": batch}, timeout=300)
                resp.raise_for_status()
                body = resp.json()
            except (requests.RequestException, ValueError) as exc:
                raise CliError(f"adapter request failed: {exc}", EXIT_PROVIDER)
            dim = int(body["dim"])
            vectors = body["vectors"]
            if store is None:
                store = embedstore.ModelStore(model_id=args.model, dim=dim)
            elif dim != store.dim:
                raise CliError(f"adapter dim changed between batches: "
                               f"{store.dim} -> {dim}", EXIT_PROVIDER)
            if len(vectors) != len(batch):
                raise CliError("adapter returned wrong vector count", EXIT_PROVIDER)
            for text, vec in zip(batch, vectors):
                store.add(text, vec)
        if store is None:
            raise CliError("no sentences to embed", EXIT_CONFIG)

    try:
        embedstore.export_file(store, args.out)
    except OSError as exc:
        raise CliError(f"cannot write store: {exc}", EXIT_IO)
    print(f"store written: {args.out} (model={store.model_id}, dim={store.dim}, "
          f"count={len(store)})")
    return EXIT_OK


def _resolve_embeddings(samples, store, skip_missing: bool):
    resolved = []
    missing: list[str] = []
    for s in samples:
        vecs = []
        for text in s.sentences():
            v = store.get(text)
            if v is None:
                missing.append(text)
            vecs.append(v)
        if all(v is not None for v in vecs):
            resolved.append(SampleEmbeddings(a=vecs[0], b=vecs[1], target=vecs[2]))
    if missing and not skip_missing:
        uniq = list(dict.fromkeys(missing))
        for text in uniq[:20]:
            print(f"missing embedding: {text[:100]!r}", file=sys.stderr)
        raise CliError(f"{len(uniq)} sentences lack embeddings "
                       f"(use --skip-missing to drop them)", EXIT_MISSING)
    return resolved


def cmd_eval(args) -> int:
    wanted = [c.strip() for c in args.criteria.split(",")]
    for c in wanted:
        if c not in ALL_CRITERIA:
            raise CliError(f"unknown criterion: {c!r}", EXIT_CONFIG)
    measures = [m.strip() for m in args.measures.split(",")]
    from .geometry import MEASURES
    for m in measures:
        if m not in MEASURES:
            raise CliError(f"unknown measure: {m!r}", EXIT_CONFIG)

    cfg = CriteriaConfig(epsilon_count=args.epsilon_count,
                         histogram_bins=args.bins)
    grids = None
    if args.epsilon_range:
        try:
            lo, hi = (float(tok) for tok in args.epsilon_range.split(","))
        except ValueError:
            raise CliError("--epsilon-range expects lo,hi", EXIT_CONFIG)
        fixed = criteria.fixed_grid(lo, hi, cfg.epsilon_count)
        grids = (fixed, fixed)

    try:
        samples = dataset.read_samples_jsonl(args.samples)
        store = embedstore.import_file(args.store)
    except (OSError, embedstore.StoreError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load inputs: {exc}", EXIT_IO)

    by_op: dict[str, list[CompositionSample]] = {op: [] for op in dataset.OPERATORS}
    for s in samples:
        by_op[s.op].append(s)
    embeds = {op: _resolve_embeddings(by_op[op], store, args.skip_missing)
              for op in dataset.OPERATORS}

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_id = store.model_id
    entries: list[dict] = []
    tallies: dict[str, object] = {}

    def need(op: str, crit: str):
        if not embeds[op]:
            print(f"{crit}: no usable {op} samples, skipped", file=sys.stderr)
            return False
        return True

    tasks = []

    def run_tally(crit, fn, op, kinds, **kw):
        for kind in kinds:
            tasks.append((crit, kind, lambda k=kind: fn(embeds[op], k, cfg, **kw)))

    if "c1" in wanted and need("overlap", "c1"):
        run_tally("c1", criteria.eval_c1, "overlap", measures, grids=grids)
    if "c3" in wanted and need("difference", "c3"):
        run_tally("c3", criteria.eval_c3, "difference", measures, grids=grids)
    if "c4" in wanted and need("difference", "c4"):
        c4_kinds = [m for m in measures if m in ("cosine", "ned")]
        run_tally("c4", criteria.eval_c4, "difference", c4_kinds,
                  grid=grids[0] if grids else None)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        futures = [(crit, kind, pool.submit(fn)) for crit, kind, fn in tasks]
        for crit, kind, fut in futures:
            tally = fut.result()
            label = f"{crit}/{model_id}/{kind}"
            tallies[label] = tally
            entries.append({"model_id": model_id, "measure": kind,
                            "criterion": crit,
                            "payload": report.tally_payload(tally)})

    profiles = {}
    proj_specs = [("c2", "overlap"), ("c5", "difference"), ("c6", "union")]
    for crit, op in proj_specs:
        if crit in wanted and need(op, crit):
            profile = criteria.eval_projection_criterion(embeds[op], op, cfg)
            profiles[crit] = profile
            entries.append({"model_id": model_id, "measure": "angle",
                            "criterion": crit, "payload": dict(profile.summary)})
            report.export_histogram(profile, out_dir / f"{crit}_hist.csv")
    if "c6" in wanted and embeds["union"]:
        ratios = criteria.norm_ratio_profile(embeds["union"], cfg)
        entries.append({"model_id": model_id, "measure": "norm_ratio",
                        "criterion": "c6",
                        "payload": {"median": ratios.median,
                                    "comparable_fraction": ratios.comparable_fraction,
                                    "n": ratios.n}})
        report.export_histogram(ratios, out_dir / "c6_norm_ratio.csv")

    if not entries:
        raise CliError("no criteria could be evaluated", EXIT_CONFIG)

    digest = hashlib.sha256(Path(args.samples).read_bytes()).hexdigest()
    doc = report.summary_report(
        entries, corpus_digest=digest,
        config={"criteria": wanted, "measures": measures,
                "epsilon_count": cfg.epsilon_count,
                "epsilon_range": args.epsilon_range,
                "bins": cfg.histogram_bins, "threads": args.threads,
                "skip_missing": bool(args.skip_missing)})
    summary_path = out_dir / "summary.json"
    summary_path.write_text(report.dumps_canonical(doc) + "\n", encoding="utf-8")

    if tallies:
        text, _ = report.render_tally_table(tallies)
        print(text, end="")
    for crit, profile in profiles.items():
        mid = profile.summary.get("middle_fraction")
        line = f"{crit}: classified={profile.summary['n_classified']}"
        if mid is not None:
            line += f" middle={mid:.4f}"
        if "near_a_fraction" in profile.summary and \
                profile.summary["near_a_fraction"] is not None:
            line += f" near_a={profile.summary['near_a_fraction']:.4f}"
        print(line)
    print(f"summary written to {summary_path}")
    return EXIT_OK


def cmd_annotate_stats(args) -> int:
    try:
        records = dataset.read_annotations(args.annotations)
    except OSError as exc:
        raise CliError(f"cannot read annotations: {exc}", EXIT_IO)
    except (dataset.OutOfRangeScore, ValueError, KeyError) as exc:
        raise CliError(f"bad annotation data: {exc}", EXIT_CONFIG)
    try:
        stats = dataset.annotation_stats(records)
    except criteria.EmptyInput as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    if args.json:
        doc = {op: {"mean": s.mean, "median": s.median, "q1": s.q1,
                    "q3": s.q3, "n": s.n} for op, s in stats.items()}
        print(report.dumps_canonical(doc))
    else:
        print(f"{'operator':<12} {'n':>5} {'mean':>7} {'median':>7} "
              f"{'q1':>7} {'q3':>7}")
        for op, s in stats.items():
            print(f"{op:<12} {s.n:>5} {s.mean:>7.3f} {s.median:>7.3f} "
                  f"{s.q1:>7.3f} {s.q3:>7.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textset",
        description="Synthesize set-like sentence composition samples and "
                    "evaluate embedding models against geometric criteria.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize composition samples from a corpus")
    p.add_argument("--corpus", required=True,
                   help="corpus file or directory (text: one sentence per line; "
                        ".jsonl: {'doc_id','sentences'})")
    p.add_argument("--out", required=True, help="output samples JSONL path")
    p.add_argument("--provider-url", help="HTTP fusion provider base URL")
    p.add_argument("--provider-cmd", help="subprocess fusion provider command")
    p.add_argument("--mock-provider", action="store_true",
                   help="deterministic offline fusion (testing)")
    p.add_argument("--filter-store",
                   help="embedding store used by the difference filter")
    p.add_argument("--no-filter", action="store_true",
                   help="emit all difference patterns unfiltered")
    p.add_argument("--threshold", type=float, default=None,
                   help="difference-filter cosine threshold (default 0.25)")
    p.add_argument("--call-budget", type=int, default=None,
                   help="cap on fusion provider calls")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_synth,
                   config_defaults={"threshold": dataset.DEFAULT_FILTER_THRESHOLD})

    p = sub.add_parser("embed", help="build an embedding store")
    p.add_argument("--import", dest="import_file",
                   help="import an existing binary store file")
    p.add_argument("--adapter-url", help="encoder adapter base URL "
                                         f"(or {ADAPTER_URL_ENV})")
    p.add_argument("--samples", help="samples JSONL to collect sentences from")
    p.add_argument("--sentences", help="plain file with one sentence per line")
    p.add_argument("--model", default=None, help="adapter model id")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_embed,
                   config_defaults={"model": "stub", "batch_size": 64})

    p = sub.add_parser("eval", help="evaluate criteria over samples + store")
    p.add_argument("--samples", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--criteria", default=None,
                   help="comma list from c1..c6 (default all)")
    p.add_argument("--measures", default=None,
                   help="comma list from cosine,dot,l1,l2,ned (default cosine)")
    p.add_argument("--epsilon-count", type=int, default=None,
                   help="grid values per epsilon (default 132)")
    p.add_argument("--epsilon-range",
                   help="fixed lo,hi grid range instead of per-run derivation")
    p.add_argument("--bins", type=int, default=None,
                   help="histogram bin count (default 50)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (results independent of this)")
    p.add_argument("--skip-missing", action="store_true",
                   help="drop samples with missing embeddings instead of failing")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_eval, config_defaults={
        "criteria": ",".join(ALL_CRITERIA), "measures": "cosine",
        "epsilon_count": criteria.DEFAULT_EPSILON_COUNT, "bins": 50,
        "threads": 1})

    p = sub.add_parser("annotate-stats",
                       help="aggregate Likert annotation scores per operator")
    p.add_argument("annotations", help="CSV or JSONL annotation file")
    p.add_argument("--json", action="store_true", help="emit JSON")
    p.set_defaults(func=cmd_annotate_stats, config_defaults={})

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, args.config_defaults)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except criteria.MissingEmbedding as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
