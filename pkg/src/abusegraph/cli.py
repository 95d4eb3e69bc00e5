"""Command line pipeline: synth -> extract -> embed -> eval / fuse / study.

Every command writes its resolved configuration and a manifest of input and
output checksums next to its outputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .embeddings import METHODS, EmbeddingMatrix, TrainConfig, embed_corpus
from .evaluation import FUSION_STRATEGIES, FoldPlan, LinearHP, fuse, kfold_evaluate
from .features import (GRAPH_FEATURE_NAMES, TEXT_FEATURE_NAMES, capture_analysis,
                       graph_best_features, text_feature_builder, verdict_table)
from .graph import load_graph, save_graph
from .ingest import (ABUSIVE, ExtractionConfig, LexiconScorer, Lexicon, SynthConfig,
                     extract_graph, generate_synthetic_corpus, read_chat_log, write_chat_log)
from .wl import AttributeScheme
from .wsgcn import MasterScheme, WsgcnConfig, train_wsgcn

log = logging.getLogger("abusegraph")

WSGCN_METHODS = ("wsgcn", "wda_wsgcn")
ALL_METHODS = tuple(METHODS) + WSGCN_METHODS


class CliError(Exception):
    pass


def stage_seed(seed: int, stage: str) -> int:
    """Independent per-stage seed derived from the top-level one."""
    ss = np.random.SeedSequence([seed, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0] % (2**31))


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _checksums(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        files = sorted(p.rglob("*")) if p.is_dir() else [p]
        for f in files:
            if f.is_file():
                out[str(f)] = sha256(f)
    return out


def write_provenance(out: Path, command: str, config: dict, inputs, outputs) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config, indent=1, sort_keys=True) + "\n")
    manifest = {
        "version": __version__,
        "command": command,
        "inputs": _checksums(inputs),
        "outputs": _checksums(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


# -- labels and feature tables -----------------------------------------------------

def write_table(path: Path, ids, rows, header) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["id", *header]) + "\n")
        for gid, row in zip(ids, rows):
            fh.write("\t".join([gid, *(repr(float(x)) if not isinstance(x, str) else x for x in row)]) + "\n")


def read_table(path: Path) -> tuple[list[str], list[str], list[list[str]]]:
    if not Path(path).exists():
        raise CliError(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n").split("\t") for ln in fh if ln.strip()]
    if not lines:
        raise CliError(f"{path}: empty table")
    header, rows = lines[0][1:], lines[1:]
    return [r[0] for r in rows], header, [r[1:] for r in rows]


def read_labels(path: Path) -> dict[str, int]:
    ids, _, rows = read_table(path)
    try:
        return {g: int(r[0]) for g, r in zip(ids, rows)}
    except (ValueError, IndexError) as exc:
        raise CliError(f"{path}: bad label row ({exc})") from exc


def load_embedding(path: Path) -> EmbeddingMatrix:
    if not Path(path).exists():
        raise CliError(f"file not found: {path}")
    try:
        return EmbeddingMatrix.load(path)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def aligned(emb: EmbeddingMatrix, labels: dict[str, int]) -> tuple[list[str], np.ndarray, np.ndarray]:
    missing = sorted(set(labels) - set(emb.ids))
    extra = sorted(set(emb.ids) - set(labels))
    if missing or extra:
        parts = []
        if missing:
            parts.append("missing from embedding: " + ", ".join(missing))
        if extra:
            parts.append("without label: " + ", ".join(extra))
        raise CliError("graph ids do not match labels; " + "; ".join(parts))
    ids = sorted(labels)
    return ids, emb.take(ids), np.array([labels[g] for g in ids])


# -- configuration ---------------------------------------------------------------

def _section(cfg: dict, name: str, cls, **overrides):
    values = dict(cfg.get(name, {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise CliError(f"unknown {name} option(s): {', '.join(unknown)}")
    return cls(**values)


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from exc


# -- commands ----------------------------------------------------------------------

def cmd_synth(args, cfg: dict) -> dict:
    kw = dict(cfg.get("synth", {}))
    n = args.n if args.n is not None else kw.pop("n", None)
    kw.pop("n", None)
    kw["seed"] = stage_seed(args.seed, "synth")
    sc = SynthConfig.scaled(n, **kw) if n else _section({"synth": kw}, "synth", SynthConfig)
    convs = generate_synthetic_corpus(sc, Lexicon.load(args.lexicon))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "chatlog.jsonl"
    write_chat_log(convs, path)
    resolved = {"seed": args.seed, "synth": dataclasses.asdict(sc)}
    write_provenance(out, "synth", resolved, [], [path])
    print(f"wrote {len(convs)} conversations to {path}")
    return resolved


def cmd_extract(args, cfg: dict) -> dict:
    if not Path(args.log).exists():
        raise CliError(f"file not found: {args.log}")
    try:
        convs = read_chat_log(args.log)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    ec = _section(cfg, "extract", ExtractionConfig, context_size=args.context,
                  window_size=args.window, scope=args.scope)
    scorer = LexiconScorer(Lexicon.load(args.lexicon))
    out = Path(args.out)
    gdir = out / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    ids, labels, feats = [], [], []
    for c in convs:
        g = extract_graph(c, ec, scorer)
        save_graph(g, gdir / f"{g.id}.json")
        scoped = {s: extract_graph(c, dataclasses.replace(ec, scope=s), scorer) for s in ("Before", "After")}
        scoped["Full"] = extract_graph(c, dataclasses.replace(ec, scope="Full"), scorer)
        feats.append(graph_best_features(scoped["Full"], scoped["Before"], scoped["After"]))
        ids.append(g.id)
        labels.append([str(int(c.label == ABUSIVE))])
    write_table(out / "labels.tsv", ids, labels, ["abusive"])
    write_table(out / "graph_features.tsv", ids, feats, list(GRAPH_FEATURE_NAMES))
    resolved = {"seed": args.seed, "extract": dataclasses.asdict(ec)}
    write_provenance(out, "extract", resolved, [args.log],
                     [gdir, out / "labels.tsv", out / "graph_features.tsv"])
    print(f"extracted {len(ids)} graphs into {gdir}")
    return resolved


def _load_graphs(directory: str):
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"graph directory not found: {directory}")
    files = sorted(d.glob("*.json"))
    if not files:
        raise CliError(f"no graph files in {directory}")
    graphs = []
    for f in files:
        try:
            graphs.append(load_graph(f))
        except (ValueError, KeyError) as exc:
            raise CliError(f"{f}: {exc}") from exc
    return graphs, files


def cmd_embed(args, cfg: dict) -> dict:
    graphs, files = _load_graphs(args.graphs)
    seed = stage_seed(args.seed, "embed")
    t0 = time.perf_counter()
    if args.method in WSGCN_METHODS:
        wc = _section(cfg, "wsgcn", WsgcnConfig, seed=seed,
                      weighted_directed=args.method == "wda_wsgcn")
        scheme = MasterScheme.parse(args.master or cfg.get("master", "plusminus"))
        _, emb = train_wsgcn(graphs, scheme, wc)
        resolved = {"wsgcn": dataclasses.asdict(wc), "master": scheme.value}
    else:
        tc = _section(cfg, "train", TrainConfig, seed=seed, dim=args.dim)
        scheme = AttributeScheme.parse(args.scheme or cfg.get("scheme", "degree"))
        emb = embed_corpus(graphs, args.method, scheme, tc)
        resolved = {"train": dataclasses.asdict(tc), "scheme": str(scheme)}
    emb.meta.pop("seconds", None)  # keep the file byte-reproducible
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.method}.tsv"
    emb.save(path)
    resolved.update(seed=args.seed, method=args.method)
    write_provenance(out, "embed", resolved, files, [path])
    print(f"{args.method}: {len(emb.ids)} graphs, dim {emb.dim}, {time.perf_counter() - t0:.1f}s -> {path}")
    return resolved


def _plan_hp(args, cfg):
    plan = _section(cfg, "folds", FoldPlan, seed=stage_seed(args.seed, "folds"))
    hp = _section(cfg, "linear", LinearHP)
    return plan, hp


def cmd_eval(args, cfg: dict) -> dict:
    labels = read_labels(Path(args.labels))
    plan, hp = _plan_hp(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for p in args.embeddings:
        emb = load_embedding(Path(p))
        _, X, y = aligned(emb, labels)
        rep = kfold_evaluate(X, y, plan, hp, emb.method or Path(p).stem)
        path = out / f"report_{Path(p).stem}.json"
        path.write_text(rep.to_json() + "\n")
        outputs.append(path)
        print(rep.summary_line())
    resolved = {"seed": args.seed, "folds": dataclasses.asdict(plan), "linear": dataclasses.asdict(hp)}
    write_provenance(out, "eval", resolved, [*args.embeddings, args.labels], outputs)
    return resolved


def cmd_fuse(args, cfg: dict) -> dict:
    labels = read_labels(Path(args.labels))
    plan, hp = _plan_hp(args, cfg)
    ea, eb = load_embedding(Path(args.emb_a)), load_embedding(Path(args.emb_b))
    ids, A, y = aligned(ea, labels)
    _, B, _ = aligned(eb, labels)
    ra = kfold_evaluate(A, y, plan, hp, ea.method)
    rb = kfold_evaluate(B, y, plan, hp, eb.method)
    X = fuse(A, B, ra.scores, rb.scores, args.strategy)
    rep = kfold_evaluate(X, y, plan, hp, f"{args.strategy}({ea.method}+{eb.method})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"report_fuse_{args.strategy}.json"
    path.write_text(rep.to_json() + "\n")
    for r in (ra, rb, rep):
        print(r.summary_line())
    resolved = {"seed": args.seed, "strategy": args.strategy,
                "folds": dataclasses.asdict(plan), "linear": dataclasses.asdict(hp)}
    write_provenance(out, "fuse", resolved, [args.emb_a, args.emb_b, args.labels], [path])
    return resolved


def cmd_study(args, cfg: dict) -> dict:
    labels = read_labels(Path(args.labels))
    plan, hp = _plan_hp(args, cfg)
    emb = load_embedding(Path(args.embedding))
    ids, E, y = aligned(emb, labels)
    inputs = [args.embedding, args.labels]
    features = {}
    if args.features:
        fids, header, rows = read_table(Path(args.features))
        index = {g: i for i, g in enumerate(fids)}
        missing = [g for g in ids if g not in index]
        if missing:
            raise CliError("graph ids missing from feature table: " + ", ".join(missing))
        M = np.array([[float(x) for x in rows[index[g]]] for g in ids])
        features.update({name: M[:, j] for j, name in enumerate(header)})
        inputs.append(args.features)
    if args.log:
        convs = {c.id: c for c in read_chat_log(args.log)}
        ordered = [convs[g] for g in ids]
        for j, name in enumerate(TEXT_FEATURE_NAMES):
            features[name] = text_feature_builder(ordered, j)
        inputs.append(args.log)
    if not features:
        raise CliError("study needs --features and/or --log")
    base = kfold_evaluate(E, y, plan, hp).run_f
    verdicts = []
    for name, f in features.items():
        v = capture_analysis(E, f, y, plan, hp, name, baseline_runs=base)
        verdicts.append(v)
        print(v.row())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"verdicts_{Path(args.embedding).stem}.tsv"
    path.write_text(verdict_table({emb.method or Path(args.embedding).stem: verdicts}))
    resolved = {"seed": args.seed, "folds": dataclasses.asdict(plan), "linear": dataclasses.asdict(hp)}
    write_provenance(out, "study", resolved, inputs, [path])
    return resolved


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abusegraph", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON configuration file; flags override its values")
    p.add_argument("--seed", type=int, default=0, help="top-level seed (default 0)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--lexicon", help="sentiment lexicon directory (else $ABUSEGRAPH_LEXICON_DIR)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic annotated chat log")
    s.add_argument("--n", type=int, help="number of conversations (class ratio kept)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="extract conversational graphs from a chat log")
    s.add_argument("log")
    s.add_argument("--context", type=int)
    s.add_argument("--window", type=int)
    s.add_argument("--scope", choices=("Full", "Before", "After"))
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("embed", help="embed a directory of graphs")
    s.add_argument("graphs")
    s.add_argument("--method", choices=ALL_METHODS, default="wda_sg2v_n")
    s.add_argument("--scheme", help="vertex attribute scheme, e.g. degree or distance+target")
    s.add_argument("--master", help="master node scheme for the GCN methods")
    s.add_argument("--dim", type=int)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("eval", help="10-fold evaluation of one or more embeddings")
    s.add_argument("embeddings", nargs="+")
    s.add_argument("--labels", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("fuse", help="evaluate a fusion of two embeddings")
    s.add_argument("emb_a")
    s.add_argument("emb_b")
    s.add_argument("--strategy", choices=FUSION_STRATEGIES, default="early")
    s.add_argument("--labels", required=True)
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("study", help="capture analysis of best features")
    s.add_argument("embedding")
    s.add_argument("--labels", required=True)
    s.add_argument("--features", help="graph feature table written by extract")
    s.add_argument("--log", help="chat log, enables the text features")
    s.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (CliError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"abusegraph {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
