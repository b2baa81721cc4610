"""Command-line entry point wiring the toolkit into reproducible pipelines.

Subcommands: convert, stats, split, train-ner, train-rel, predict, eval,
map-schema, select, curve.  All randomness flows from --seed; identical
arguments over identical inputs produce byte-identical outputs.  Exit codes:
0 success, 1 validation error, 2 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, active, schema_map
from . import corpus as corpus_mod
from . import crf as crf_mod
from . import encoder as encoder_mod
from . import evaluation as eval_mod
from . import relation as rel_mod


class CliParser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the exit-code contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _meta(config: dict, seed: int) -> dict:
    return {"tool_version": __version__, "config": config, "seed": seed}


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_corpus(path: str, strict_labels: bool = True):
    sentences, meta = corpus_mod.load_jsonl(_read(path), strict_labels=strict_labels)
    return sentences, meta


def _effective_config(args, keys: list[str]) -> dict:
    """Config file values overridden by any flag that was actually passed."""
    cfg: dict = {}
    if getattr(args, "config", None):
        loaded = json.loads(_read(args.config))
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: config file must hold a JSON object")
        cfg.update(loaded)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _build_source(kind: str, dim: int, train_sentences, seed: int, embeddings: str | None):
    if kind == "sparse":
        return encoder_mod.SparseFeatureSource(dim=dim)
    if kind == "trainable":
        return encoder_mod.TrainableEmbeddingSource.from_sentences(train_sentences, dim, seed=seed)
    if kind == "store":
        if not embeddings:
            raise ValueError("--source store requires --embeddings")
        return encoder_mod.load_embedding_file(embeddings)
    raise ValueError(f"unknown source {kind!r}")


def _store_if_given(path: str | None):
    return encoder_mod.load_embedding_file(path) if path else None


# ---------------------------------------------------------------------------
# subcommands


def cmd_convert(args) -> int:
    names = sorted(f for f in os.listdir(args.brat) if f.endswith(".txt"))
    if not names:
        raise ValueError(f"no .txt files found in {args.brat}")
    sentences = []
    counters: dict = {}
    for name in names:
        stem = name[: -len(".txt")]
        txt_path = os.path.join(args.brat, name)
        ann_path = os.path.join(args.brat, stem + ".ann")
        ann_text = _read(ann_path) if os.path.exists(ann_path) else ""
        doc = corpus_mod.parse_standoff(
            ann_text,
            _read(txt_path),
            stem,
            byte_offsets=args.byte_offsets,
            strict_labels=not args.keep_labels,
        )
        for warning in doc.warnings:
            print(f"{stem}: {warning}", file=sys.stderr)
        sentences.extend(corpus_mod.sentence_split_and_tokenize(doc, counters))
    for key, value in sorted(counters.items()):
        if value:
            print(f"{key}: {value}", file=sys.stderr)
    config = {"brat": args.brat, "byte_offsets": args.byte_offsets, "keep_labels": args.keep_labels}
    _write(args.out, corpus_mod.dump_jsonl(sentences, meta=_meta(config, args.seed)))
    return 0


def cmd_stats(args) -> int:
    sentences, _ = _load_corpus(args.infile, strict_labels=False)
    stats = corpus_mod.stats_from_sentences(sentences)
    if args.format == "json":
        doc = {"meta": _meta({"in": args.infile}, args.seed), "stats": stats.to_dict()}
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        d = stats.to_dict()
        lines = [f"{key:<12}{d[key]}" for key in ("abstracts", "sentences", "tokens", "entities", "relations")]
        lines.append("entity types:")
        lines.extend(f"  {t:<24}{n}" for t, n in d["entity_types"].items())
        lines.append("relation types:")
        lines.extend(f"  {t:<24}{n}" for t, n in d["relation_types"].items())
        text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_split(args) -> int:
    sentences, _ = _load_corpus(args.infile, strict_labels=False)
    doc_ids: list[str] = []
    for sent in sentences:
        if sent.doc_id not in doc_ids:
            doc_ids.append(sent.doc_id)
    train_ids, dev_ids, test_ids = corpus_mod.split_corpus(doc_ids, args.seed)
    prefix = args.out_prefix or (args.infile[:-6] if args.infile.endswith(".jsonl") else args.infile)
    config = {"in": args.infile}
    for part, ids in (("train", train_ids), ("dev", dev_ids), ("test", test_ids)):
        ids_set = set(ids)
        subset = [s for s in sentences if s.doc_id in ids_set]
        _write(f"{prefix}.{part}.jsonl", corpus_mod.dump_jsonl(subset, meta=_meta(config, args.seed)))
    print(f"train={len(train_ids)} dev={len(dev_ids)} test={len(test_ids)} abstracts", file=sys.stderr)
    return 0


_TRAIN_KEYS = ["lr", "batch_size", "max_epochs", "patience", "dim", "source"]


def cmd_train_ner(args) -> int:
    cfg = _effective_config(args, _TRAIN_KEYS)
    if args.no_boundary:
        cfg["use_boundary"] = False
    cfg.setdefault("source", "trainable")
    cfg.setdefault("dim", 64)
    train_sents, _ = _load_corpus(args.train)
    dev_sents, _ = _load_corpus(args.dev)
    source = _build_source(cfg["source"], cfg["dim"], train_sents, args.seed, args.embeddings)
    train_cfg = {k: v for k, v in cfg.items() if k != "source"}
    model, history = crf_mod.train_ner(train_sents, dev_sents, source, train_cfg, seed=args.seed)
    crf_mod.save_crf(model, args.out)
    if args.log:
        _write(args.log, json.dumps({"meta": _meta(cfg, args.seed), "history": history}, sort_keys=True, indent=2) + "\n")
    if history:
        print(f"epochs={len(history)} best_dev_f1={max(h['dev_f1'] for h in history):.4f}", file=sys.stderr)
    return 0


def cmd_train_rel(args) -> int:
    keys = _TRAIN_KEYS + ["none_ratio", "tau"]
    cfg = _effective_config(args, keys)
    if args.mixer:
        cfg["mixer"] = True
    cfg.setdefault("source", "trainable")
    cfg.setdefault("dim", 64)
    train_sents, _ = _load_corpus(args.train)
    dev_sents, _ = _load_corpus(args.dev)
    source = _build_source(cfg["source"], cfg["dim"], train_sents, args.seed, args.embeddings)
    train_cfg = {k: v for k, v in cfg.items() if k != "source"}
    model, history = rel_mod.train_rel(train_sents, dev_sents, source, train_cfg, seed=args.seed)
    rel_mod.save_rel(model, args.out)
    if args.log:
        _write(args.log, json.dumps({"meta": _meta(cfg, args.seed), "history": history}, sort_keys=True, indent=2) + "\n")
    if history:
        print(f"epochs={len(history)} best_dev_f1={max(h['dev_f1'] for h in history):.4f}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    if not args.ner_model and not args.rel_model:
        raise ValueError("predict needs --ner-model and/or --rel-model")
    sentences, _ = _load_corpus(args.infile)
    store = _store_if_given(args.embeddings)
    out_sentences = []
    prob_lines = []
    ner = crf_mod.load_crf(args.ner_model) if args.ner_model else None
    ner_source = crf_mod.source_for_model(ner, store=store) if ner else None
    rel = rel_mod.load_rel(args.rel_model) if args.rel_model else None
    rel_source = rel_mod.source_for_model(rel, store=store) if rel else None

    for sent in sentences:
        entities = sent.entities
        if ner is not None:
            entities = crf_mod.predict_entities(ner, sent, ner_source)
        relations = []
        if rel is not None:
            preds = rel_mod.predict_relations(sent, entities, rel, rel_source, tau=args.tau)
            for i, p in enumerate(preds, start=1):
                relations.append(corpus_mod.Relation(f"R{i}", p.rtype, p.head, p.tail))
                prob_lines.append(
                    json.dumps(
                        {
                            "doc_id": sent.doc_id,
                            "sent_index": sent.sent_index,
                            "head": p.head,
                            "tail": p.tail,
                            "type": p.rtype,
                            "prob": round(p.prob, 6),
                        },
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                )
        out_sentences.append(
            corpus_mod.AnnotatedSentence(sent.doc_id, sent.sent_index, sent.tokens, entities, relations)
        )

    config = {"ner_model": args.ner_model, "rel_model": args.rel_model, "tau": args.tau}
    _write(args.out, corpus_mod.dump_jsonl(out_sentences, meta=_meta(config, args.seed)))
    if args.rel_probs_out:
        header = json.dumps({"meta": _meta(config, args.seed)}, sort_keys=True, separators=(",", ":"))
        _write(args.rel_probs_out, "\n".join([header] + prob_lines) + "\n")
    return 0


def cmd_eval(args) -> int:
    gold, _ = _load_corpus(args.gold)
    pred, _ = _load_corpus(args.pred)
    gold_by_key = {(s.doc_id, s.sent_index): s for s in gold}
    pred_by_key = {(s.doc_id, s.sent_index): s for s in pred}
    keys = sorted(set(gold_by_key) | set(pred_by_key))
    labeled = not args.unlabeled

    entity_pairs = []
    relation_pairs = []
    for key in keys:
        g = gold_by_key.get(key)
        p = pred_by_key.get(key)
        g_ents = g.entities if g else []
        p_ents = p.entities if p else []
        entity_pairs.append((g_ents, p_ents))
        g_rels = g.relations if g else []
        p_rels = p.relations if p else []
        known = {e.id for e in g_ents} | {e.id for e in p_ents}
        for rel in p_rels:
            eval_mod.relation_prf([], [rel], labeled=True, known_ids=known)
        relation_pairs.append((g_rels, p_rels))

    report = eval_mod.corpus_entity_prf(entity_pairs, regime=args.regime, labeled=labeled)
    if args.breakdown:
        report.per_type = eval_mod.breakdown_by_type(entity_pairs, min_count=args.min_count, regime=args.regime)
    doc = {
        "meta": _meta({"gold": args.gold, "pred": args.pred, "regime": args.regime, "labeled": labeled}, args.seed),
        "entities": report.to_dict(),
    }
    has_relations = any(g or p for g, p in relation_pairs)
    rel_report = None
    if has_relations:
        rel_report = eval_mod.corpus_relation_prf(relation_pairs, labeled=labeled)
        doc["relations"] = rel_report.to_dict()
        if args.breakdown:
            doc["relations"]["per_type"] = eval_mod.breakdown_relations_by_type(
                relation_pairs, min_count=args.min_count, labeled=labeled
            )

    if args.format == "json":
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        text = "entities\n" + eval_mod.report_to_text(report)
        if rel_report is not None:
            text += "\nrelations\n" + eval_mod.report_to_text(rel_report)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_map_schema(args) -> int:
    sentences, _ = _load_corpus(args.infile, strict_labels=False)
    mapping = schema_map.load_mapping(args.mapping)
    mapped, stats = schema_map.apply_mapping(sentences, mapping)
    config = {"in": args.infile, "mapping": args.mapping}
    _write(args.out, corpus_mod.dump_jsonl(mapped, meta=_meta(config, args.seed)))
    stats_doc = {"meta": _meta(config, args.seed), "retention": stats.to_dict()}
    if args.stats_out:
        _write(args.stats_out, json.dumps(stats_doc, sort_keys=True, indent=2) + "\n")
    print(
        f"entities {stats.entities_kept}/{stats.entities_total} ({stats.entity_retention:.2%}) "
        f"relations {stats.relations_kept}/{stats.relations_total} ({stats.relation_retention:.2%})",
        file=sys.stderr,
    )
    return 0


def cmd_select(args) -> int:
    sentences, _ = _load_corpus(args.infile)
    abstracts: dict[str, list] = {}
    for sent in sentences:
        abstracts.setdefault(sent.doc_id, []).append(sent)
    model = source = None
    if args.strategy == "AL":
        if not args.model:
            raise ValueError("AL selection requires --model")
        model = crf_mod.load_crf(args.model)
        source = crf_mod.source_for_model(model, store=_store_if_given(args.embeddings))
    plan = active.select(abstracts, args.strategy, ratio=args.ratio, model=model, source=source, seed=args.seed)
    config = {"in": args.infile, "strategy": args.strategy, "ratio": args.ratio, "model": args.model}
    header = json.dumps({"meta": _meta(config, args.seed)}, sort_keys=True, separators=(",", ":"))
    _write(args.out, header + "\n" + active.worklist_jsonl(plan, sentences))
    print(f"chosen={len(plan.chosen)} cost_tokens={plan.cost_tokens}", file=sys.stderr)
    return 0


def cmd_curve(args) -> int:
    train_sents, _ = _load_corpus(args.train)
    dev_sents, _ = _load_corpus(args.dev)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(range(args.num_seeds))
    cfg = _effective_config(args, ["lr", "batch_size", "max_epochs", "patience"])
    points = []
    for strategy in strategies:
        points.extend(
            active.simulate_curve(
                train_sents,
                dev_sents,
                strategy,
                seeds=seeds,
                ratio=args.ratio,
                cycle_size=args.cycle_size,
                train_config=cfg,
                dim=args.dim,
            )
        )
    config = {
        "train": args.train,
        "dev": args.dev,
        "strategies": strategies,
        "seeds": seeds,
        "ratio": args.ratio,
        "cycle_size": args.cycle_size,
        "dim": args.dim,
        "train_config": cfg,
    }
    comment = json.dumps({"meta": _meta(config, args.seed)}, sort_keys=True, separators=(",", ":"))
    _write(args.out, active.curve_to_csv(points, meta_comment=comment))
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> CliParser:
    parser = CliParser(prog="matie", description=__doc__)
    parser.add_argument("--version", action="version", version=f"matie {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="single seed driving all randomness")
        p.add_argument("--threads", type=int, default=1, help="upper bound on worker parallelism")

    p = sub.add_parser("convert", help="BRAT standoff directory to interchange JSONL")
    p.add_argument("--brat", required=True, help="directory of <id>.txt / <id>.ann pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--byte-offsets", action="store_true", help="treat standoff offsets as UTF-8 byte offsets")
    p.add_argument("--keep-labels", action="store_true", help="keep labels outside the canonical sets verbatim")
    common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="document-level 50/25/25 train/dev/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-prefix")
    common(p)
    p.set_defaults(func=cmd_split)

    def train_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; explicit flags win")
        p.add_argument("--source", choices=["sparse", "trainable", "store"])
        p.add_argument("--dim", type=int)
        p.add_argument("--embeddings", help="TKV1 file for --source store")
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--log", help="write per-epoch training log JSON here")

    p = sub.add_parser("train-ner", help="train the CRF entity tagger")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-boundary", action="store_true", help="disable begin/end boundary scores")
    train_flags(p)
    common(p)
    p.set_defaults(func=cmd_train_ner)

    p = sub.add_parser("train-rel", help="train the anchored relation classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--none-ratio", dest="none_ratio", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--mixer", action="store_true", help="enable the 3-token mixing layer")
    train_flags(p)
    common(p)
    p.set_defaults(func=cmd_train_rel)

    p = sub.add_parser("predict", help="decode entities and/or relations")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ner-model")
    p.add_argument("--rel-model")
    p.add_argument("--embeddings")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--rel-probs-out", help="also write relation probabilities JSONL here")
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--regime", choices=list(eval_mod.REGIMES), default="exact")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--labeled", action="store_true", help="score with type labels (default)")
    group.add_argument("--unlabeled", action="store_true", help="score span-only")
    p.add_argument("--breakdown", action="store_true", help="add per-type rows")
    p.add_argument("--min-count", dest="min_count", type=int, default=20)
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("map-schema", help="relabel a corpus into the canonical schema")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mapping", required=True, help="preset name (syntheses) or mapping spec JSON path")
    p.add_argument("--out", required=True)
    p.add_argument("--stats-out", dest="stats_out")
    common(p)
    p.set_defaults(func=cmd_map_schema)

    p = sub.add_parser("select", help="choose sentences for annotation")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--strategy", choices=list(active.STRATEGIES), required=True)
    p.add_argument("--ratio", type=float, default=0.40)
    p.add_argument("--model", help="crf model file (required for AL)")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("curve", help="simulate annotation learning curves")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--strategies", default="FULL,RAND,AL")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--num-seeds", dest="num_seeds", type=int, default=3)
    p.add_argument("--ratio", type=float, default=0.40)
    p.add_argument("--cycle-size", dest="cycle_size", type=int, default=4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--config")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_curve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("matie: error: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (corpus_mod.ParseError, encoder_mod.EmbeddingFormatError) as exc:
        print(f"matie: format error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"matie: i/o error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"matie: format error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"matie: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
