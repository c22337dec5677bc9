"""Command-line interface.

Subcommands: ``collect`` (stream a corpus for MWE occurrences), ``build``
(full artifact), ``paraphrase`` (online query against a stored artifact),
``eval`` (P@k over a gold JSONL file), ``inspect`` (dump clusters and
candidates), and ``report`` (figures + TSV tables for an artifact).

The MLM backend is either the deterministic synthetic mock (default for
demos; its construction is saved next to the artifact so later queries reuse
it), a fixture-table mock, or the HTTP sidecar (``--sidecar-url`` or the
``MWELIT_SIDECAR_URL`` environment variable).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import load_pipeline_config
from .corpus import CorpusConfig, collect_sentences, iter_corpus_file, write_records_jsonl
from .errors import MwelitError
from .mlm import SidecarClient, SyntheticBackend, TableBackend
from .pipeline import build_artifact, eval_patk, paraphrase, read_gold_jsonl
from .report import write_artifact_report, write_eval_report
from .store import load_artifact, load_backend_descriptor

SIDECAR_ENV = "MWELIT_SIDECAR_URL"


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("backend")
    group.add_argument(
        "--backend",
        choices=["auto", "synthetic", "fixture", "sidecar"],
        default="auto",
        help="MLM backend (auto: artifact's saved backend, else sidecar env, else synthetic)",
    )
    group.add_argument("--sidecar-url", default=None, help=f"sidecar base URL (or ${SIDECAR_ENV})")
    group.add_argument("--fixture", default=None, help="fixture JSON for the table backend")
    group.add_argument("--markers", default=None, help="topic-marker JSON for the synthetic backend")
    group.add_argument("--dim", type=int, default=16, help="synthetic backend hidden size")
    group.add_argument("--backend-seed", type=int, default=0, help="synthetic backend seed")


def _load_markers(path: str | None) -> dict[str, int]:
    if path is None:
        return {}
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "topics" in obj:
        markers: dict[str, int] = {}
        for topic_index, name in enumerate(sorted(obj["topics"])):
            for word in obj["topics"][name]:
                markers[word] = topic_index
        return markers
    return {k: int(v) for k, v in obj.items()}


def _sidecar_url(args) -> str | None:
    return args.sidecar_url or os.environ.get(SIDECAR_ENV)


def _backend_for_build(args):
    kind = args.backend
    if kind == "auto":
        kind = "sidecar" if _sidecar_url(args) else "synthetic"
    if kind == "sidecar":
        url = _sidecar_url(args)
        if not url:
            raise MwelitError(f"--sidecar-url or ${SIDECAR_ENV} required for the sidecar backend")
        return SidecarClient(url), None
    if kind == "fixture":
        if not args.fixture:
            raise MwelitError("--fixture required for the fixture backend")
        backend = TableBackend.from_json(args.fixture)
        return backend, {"kind": "fixture", "path": str(Path(args.fixture).resolve())}
    backend = SyntheticBackend.from_corpus(
        iter_corpus_file(args.corpus),
        markers=_load_markers(args.markers),
        d=args.dim,
        seed=args.backend_seed,
    )
    return backend, backend.to_descriptor()


def _backend_for_query(args, store: str, mwe: str):
    if args.backend == "sidecar" or (args.backend == "auto" and _sidecar_url(args)):
        url = _sidecar_url(args)
        if not url:
            raise MwelitError(f"--sidecar-url or ${SIDECAR_ENV} required for the sidecar backend")
        return SidecarClient(url)
    if args.backend == "fixture":
        if not args.fixture:
            raise MwelitError("--fixture required for the fixture backend")
        return TableBackend.from_json(args.fixture)
    desc = load_backend_descriptor(store, mwe)
    if desc is None:
        raise MwelitError(
            "artifact has no saved backend; pass --sidecar-url/--fixture or set the environment variable"
        )
    if desc.get("kind") == "synthetic":
        return SyntheticBackend.from_descriptor(desc)
    if desc.get("kind") == "fixture":
        return TableBackend.from_json(desc["path"])
    raise MwelitError(f"unknown saved backend kind {desc.get('kind')!r}")


def _parse_span(text: str) -> tuple[int, int]:
    try:
        start, _, end = text.partition(":")
        return int(start), int(end)
    except ValueError:
        raise MwelitError(f"span must be START:END, got {text!r}") from None


def _cmd_collect(args) -> int:
    config = CorpusConfig(
        max_keep=args.max_keep,
        window_size=args.window_size,
        dedup_overlap_threshold=args.dedup_threshold,
    )
    records = collect_sentences(iter_corpus_file(args.corpus), args.mwe, config)
    if args.out == "-":
        write_records_jsonl(records, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_records_jsonl(records, fh)
    print(f"kept {len(records)} sentences for {args.mwe!r}", file=sys.stderr)
    return 0


def _cmd_build(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "max_keep",
            "eps",
            "min_pts",
            "strategy",
            "mask_count",
            "seed",
        )
        if getattr(args, key) is not None
    }
    config = load_pipeline_config(args.config, overrides)
    backend, descriptor = _backend_for_build(args)
    artifact = build_artifact(
        args.mwe,
        iter_corpus_file(args.corpus),
        backend,
        config,
        store_dir=args.store,
        backend_descriptor=descriptor,
    )
    n_out = int((artifact.model.labels == -1).sum())
    print(
        f"built artifact for {args.mwe!r}: {len(artifact.records)} sentences, "
        f"{artifact.model.n_clusters} clusters, {n_out} outliers, hash {artifact.content_hash[:12]}"
    )
    return 0


def _cmd_paraphrase(args) -> int:
    artifact = load_artifact(args.store, args.mwe)
    backend = _backend_for_query(args, args.store, args.mwe)
    surfaces = paraphrase(args.sentence, _parse_span(args.span), artifact, backend, top_n=args.top)
    for rank, surface in enumerate(surfaces, start=1):
        print(f"{rank}\t{surface}")
    return 0


def _cmd_eval(args) -> int:
    with open(args.gold, encoding="utf-8") as fh:
        gold = read_gold_jsonl(fh)
    mwes = sorted({g.mwe_surface for g in gold})
    artifacts = {}
    for mwe in mwes:
        try:
            artifacts[mwe] = load_artifact(args.store, mwe)
        except MwelitError:
            pass  # eval_patk reports the full missing list
    probe = next((m for m in mwes if m in artifacts), None)
    backend = _backend_for_query(args, args.store, probe) if probe is not None else None
    ks = tuple(int(k) for k in args.ks.split(","))
    results = eval_patk(gold, artifacts, backend, ks=ks)
    for k in sorted(results):
        print(f"P@{k}\t{results[k]:.4f}")
    if args.out:
        paths = write_eval_report(results, args.out)
        print("report: " + ", ".join(str(p) for p in paths), file=sys.stderr)
    return 0


def _cmd_inspect(args) -> int:
    artifact = load_artifact(args.store, args.mwe)
    labels = artifact.model.labels
    if args.json:
        obj = {
            "mwe": artifact.mwe_surface,
            "checkpoint": artifact.checkpoint,
            "sentences": len(artifact.records),
            "eps": artifact.model.params.eps,
            "min_pts": artifact.model.params.min_pts,
            "outliers": int((labels == -1).sum()),
            "clusters": {
                str(cid): {
                    "size": int((labels == cid).sum()),
                    "top": artifact.reranked[cid].surfaces(5),
                }
                for cid in sorted(artifact.reranked)
            },
            "content_hash": artifact.content_hash,
        }
        print(json.dumps(obj, indent=2, ensure_ascii=False))
        return 0
    print(f"MWE: {artifact.mwe_surface!r}  checkpoint: {artifact.checkpoint}")
    print(
        f"sentences: {len(artifact.records)}  eps: {artifact.model.params.eps}  "
        f"min_pts: {artifact.model.params.min_pts}  outliers: {int((labels == -1).sum())}"
    )
    for cid in sorted(artifact.reranked):
        size = int((labels == cid).sum())
        top = ", ".join(artifact.reranked[cid].surfaces(5))
        print(f"cluster {cid} ({size} sentences): {top}")
    print(f"content hash: {artifact.content_hash}")
    return 0


def _cmd_report(args) -> int:
    artifact = load_artifact(args.store, args.mwe)
    paths = write_artifact_report(artifact, args.out)
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mwelit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mwelit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect and sparsify MWE occurrences from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mwe", required=True)
    p.add_argument("--out", default="-", help="output JSONL path, '-' for stdout")
    p.add_argument("--max-keep", type=int, default=300)
    p.add_argument("--window-size", type=int, default=3)
    p.add_argument("--dedup-threshold", type=int, default=4)
    p.set_defaults(func=_cmd_collect)

    p = sub.add_parser("build", help="build the full paraphrase artifact for one MWE")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mwe", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--max-keep", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--min-pts", dest="min_pts", type=int, default=None)
    p.add_argument("--strategy", default=None, choices=["attention", "random_words", "random_consecutive_span", "none"])
    p.add_argument("--mask-count", dest="mask_count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("paraphrase", help="paraphrase an MWE in a new sentence")
    p.add_argument("--store", required=True)
    p.add_argument("--mwe", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--span", required=True, help="character span START:END of the MWE")
    p.add_argument("--top", type=int, default=10)
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_paraphrase)

    p = sub.add_parser("eval", help="matching accuracy P@k against a gold JSONL file")
    p.add_argument("--gold", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--ks", default="1,5,10")
    p.add_argument("--out", default=None, help="directory for the TSV + figure report")
    _add_backend_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="summarize a stored artifact")
    p.add_argument("--store", required=True)
    p.add_argument("--mwe", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("report", help="write figures and TSV tables for an artifact")
    p.add_argument("--store", required=True)
    p.add_argument("--mwe", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MwelitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
