"""Command-line entry point.

Subcommands: build-synthetic, train, eval, ablate, trace, cv.
Exit codes: 0 success, 2 configuration/usage error, 3 data error,
4 internal invariant violation. The HAGE_SEED environment variable overrides
the configured seed; explicit flags win over the config file.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import GraphBundle, load_dataset
from .evaluation import (evaluate, format_comparison, run_ablation,
                         run_cross_validation)
from .graph import GraphFormatError, RelationType, save_graph
from .query import save_samples
from .router import RouterParams, load_router, score_candidates
from .synthetic import SyntheticSpec, generate_synthetic
from .training import (AblationMode, RewardConfig, TrainConfig, save_model_bundle,
                       train)
from .traversal import Terminal, traverse_greedy

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class ConfigError(Exception):
    pass


_SECTION_KEYS = {
    "paths": {"graphs", "samples", "output_dir"},
    "reward": {"r_hit", "lambda_step", "lambda_timeout", "gamma"},
    "train": {"epochs", "eta_router", "eta_edge", "lambda_anchor", "h_max",
              "ablation_mode", "clip_norm", "baseline_beta", "hidden_dim",
              "lambda_mix", "val_fraction"},
    "eval": {"mode", "beam_width", "budget_words", "folds", "val_fraction",
             "test_fraction"},
}
_TOP_KEYS = {"schema_version", "seed", "threads"} | set(_SECTION_KEYS)


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"config schema_version must be {SCHEMA_VERSION}, "
            f"got {doc.get('schema_version')!r}"
        )
    for section, allowed in _SECTION_KEYS.items():
        sub = doc.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown keys in config section {section!r}: {sorted(bad)}")
    return doc


def _resolve_seed(doc: dict, flag_seed) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    env = os.environ.get("HAGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"HAGE_SEED must be an integer, got {env!r}")
    return int(doc.get("seed", 0))


def _train_config(doc: dict, seed: int) -> TrainConfig:
    sub = dict(doc.get("train", {}))
    sub.pop("val_fraction", None)
    try:
        return TrainConfig(seed=seed, **sub)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid train configuration: {exc}")


def _reward_config(doc: dict) -> RewardConfig:
    try:
        return RewardConfig(**doc.get("reward", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid reward configuration: {exc}")


def _load_bundles(doc: dict) -> list[GraphBundle]:
    paths = doc.get("paths", {})
    graphs = paths.get("graphs", [])
    samples = paths.get("samples", [])
    if not graphs:
        raise ConfigError("config paths.graphs must list at least one graph file")
    return load_dataset(graphs, samples)


def _output_dir(doc: dict, flag_out) -> Path:
    out = flag_out or doc.get("paths", {}).get("output_dir")
    if not out:
        raise ConfigError("an output directory is required (paths.output_dir or --output)")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _apply_edge_features(bundles: list[GraphBundle], path: Path) -> None:
    per_graph: dict[str, dict[int, list[float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            per_graph.setdefault(rec["graph"], {})[int(rec["edge"])] = rec["feat"]
    by_name = {b.name: b for b in bundles}
    for name, feats in per_graph.items():
        bundle = by_name.get(name)
        if bundle is None:
            continue
        for eid, row in feats.items():
            bundle.graph.edges[eid].features = np.asarray(row, dtype=float)


def _echo(doc: dict, seed: int) -> dict:
    echo = dict(doc)
    echo["seed"] = seed
    return echo


# -- subcommands -----------------------------------------------------------


def cmd_build_synthetic(args) -> int:
    try:
        spec = SyntheticSpec(
            node_count=args.nodes,
            distractor_out_degree=args.out_degree,
            planted_path_length=args.path_len,
            planted_relation=RelationType.from_label(args.relation),
            target_count=args.targets,
            embedding_dim=args.dim,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    graph, samples = generate_synthetic(spec)
    save_graph(graph, args.out_graph)
    save_samples(samples, args.out_samples)
    print(json.dumps({
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "samples": len(samples),
        "graph_file": args.out_graph,
        "sample_file": args.out_samples,
    }))
    return EXIT_OK


def _split_train_val(bundles: list[GraphBundle], val_fraction: float,
                     seed: int) -> tuple[list[GraphBundle], list[GraphBundle]]:
    if val_fraction <= 0.0:
        return bundles, bundles
    ids = list(dict.fromkeys(s.sample_id for b in bundles for s in b.samples))
    rng = np.random.Generator(np.random.PCG64(seed))
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_val = max(1, int(round(val_fraction * len(order))))
    if n_val >= len(order):
        raise ConfigError("val_fraction leaves no training samples")
    val_ids = set(order[:n_val])

    def subset(keep):
        out = []
        for b in bundles:
            kept = [s for s in b.samples if (s.sample_id in val_ids) == keep]
            if kept:
                out.append(GraphBundle(b.name, b.graph, kept))
        return out

    return subset(False), subset(True)


def cmd_train(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(doc, args.seed)
    cfg = _train_config(doc, seed)
    reward = _reward_config(doc)
    bundles = _load_bundles(doc)
    val_fraction = float(doc.get("train", {}).get("val_fraction", 0.0))
    train_split, val_split = _split_train_val(bundles, val_fraction, seed)
    model = train(train_split, val_split, cfg, reward)
    out = _output_dir(doc, args.output)
    save_model_bundle(model, out)
    (out / "run_config.json").write_text(
        json.dumps(_echo(doc, seed), indent=2) + "\n", encoding="utf-8")
    print(json.dumps({
        "best_epoch": model.best_epoch,
        "best_val_success": model.best_val_success,
        "output_dir": str(out),
    }))
    return EXIT_OK


def cmd_eval(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(doc, args.seed)
    bundles = _load_bundles(doc)
    ckpt = Path(args.checkpoint)
    router_file = ckpt / "router.json"
    if not router_file.exists():
        raise GraphFormatError(f"checkpoint router file not found: {router_file}")
    params = load_router(router_file)
    feats_file = ckpt / "edge_features.jsonl"
    if feats_file.exists():
        _apply_edge_features(bundles, feats_file)
    eval_cfg = doc.get("eval", {})
    cfg = _train_config(doc, seed)
    report = evaluate(
        params, bundles, cfg.h_max,
        mode=eval_cfg.get("mode", "greedy"),
        beam_width=int(eval_cfg.get("beam_width", 3)),
        budget_words=int(eval_cfg.get("budget_words", 512)),
    )
    out = _output_dir(doc, args.output)
    doc_out = {
        "config": _echo(doc, seed),
        "report": report.to_dict(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out / "eval_report.json"
    path.write_text(json.dumps(doc_out, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_ablate(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(doc, args.seed)
    cfg = _train_config(doc, seed)
    reward = _reward_config(doc)
    bundles = _load_bundles(doc)
    try:
        modes = [AblationMode(m.strip()) for m in args.modes.split(",") if m.strip()]
    except ValueError as exc:
        raise ConfigError(f"unknown ablation mode: {exc}")
    if not modes:
        raise ConfigError("at least one ablation mode is required")
    eval_cfg = doc.get("eval", {})
    reports = run_ablation(
        bundles, cfg, reward, modes,
        eval_mode=eval_cfg.get("mode", "greedy"),
        beam_width=int(eval_cfg.get("beam_width", 3)),
        budget_words=int(eval_cfg.get("budget_words", 512)),
    )
    table = format_comparison(reports)
    out = _output_dir(doc, args.output)
    (out / "ablation_report.json").write_text(
        json.dumps({
            "config": _echo(doc, seed),
            "reports": {m.value: r.to_dict() for m, r in reports.items()},
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "ablation_table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def cmd_trace(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(doc, args.seed)
    cfg = _train_config(doc, seed)
    bundles = _load_bundles(doc)
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
        params = load_router(ckpt / "router.json")
        feats = ckpt / "edge_features.jsonl"
        if feats.exists():
            _apply_edge_features(bundles, feats)
    else:
        params = RouterParams.init(bundles[0].graph.d, hidden_dim=cfg.hidden_dim,
                                   lambda_mix=cfg.lambda_mix, seed=seed)
    target = None
    for bundle in bundles:
        for sample in bundle.samples:
            if args.sample_id is None or sample.sample_id == args.sample_id:
                target = (bundle, sample)
                break
        if target:
            break
    if target is None:
        raise GraphFormatError(f"sample id {args.sample_id!r} not found")
    bundle, sample = target
    traj = traverse_greedy(bundle.graph, sample.query, params, cfg.h_max,
                           targets=sample.targets)
    for i, step in enumerate(traj.steps):
        cands = step.candidates
        print(json.dumps({
            "step": i,
            "from": step.from_node,
            "candidates": [
                {"node": cands.node_ids[k],
                 "cos": float(cands.cos_dst[k]),
                 "w": float(cands.weights[k]),
                 "S": float(cands.scores[k]),
                 "p": float(cands.probs[k])}
                for k in range(len(cands))
            ],
            "chosen": cands.node_ids[step.chosen_index],
        }, separators=(",", ":")))
    print(json.dumps({"terminal": traj.terminal.value, "hits": traj.hit_count,
                      "reward": traj.total_reward}, separators=(",", ":")))
    return EXIT_OK


def cmd_cv(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(doc, args.seed)
    cfg = _train_config(doc, seed)
    reward = _reward_config(doc)
    bundles = _load_bundles(doc)
    eval_cfg = doc.get("eval", {})
    result = run_cross_validation(
        bundles, cfg, reward,
        k=int(eval_cfg.get("folds", 5)),
        val_fraction=float(eval_cfg.get("val_fraction", 0.2)),
        eval_mode=eval_cfg.get("mode", "greedy"),
        beam_width=int(eval_cfg.get("beam_width", 3)),
        budget_words=int(eval_cfg.get("budget_words", 512)),
    )
    out = _output_dir(doc, args.output)
    (out / "cv_report.json").write_text(
        json.dumps({
            "config": _echo(doc, seed),
            "result": result,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(result["mean"]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hage",
        description="Weighted multi-relational memory graph with a trainable "
                    "query-conditioned traversal policy.",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap for parallel sections (currently sequential)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-synthetic", help="generate a planted-path benchmark graph")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--path-len", type=int, required=True)
    p.add_argument("--out-degree", type=int, default=3)
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--relation", default="semantic",
                   choices=[r.label for r in RelationType])
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-graph", required=True)
    p.add_argument("--out-samples", required=True)
    p.set_defaults(func=cmd_build_synthetic)

    for name, fn, extra in (
        ("train", cmd_train, ()),
        ("eval", cmd_eval, ("checkpoint",)),
        ("ablate", cmd_ablate, ("modes",)),
        ("trace", cmd_trace, ("checkpoint-opt", "sample-id")),
        ("cv", cmd_cv, ()),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output", default=None)
        if "checkpoint" in extra:
            p.add_argument("--checkpoint", required=True)
        if "checkpoint-opt" in extra:
            p.add_argument("--checkpoint", default=None)
        if "modes" in extra:
            p.add_argument("--modes", default=",".join(m.value for m in AblationMode))
        if "sample-id" in extra:
            p.add_argument("--sample-id", default=None)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as exc:  # internal invariant violation
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
