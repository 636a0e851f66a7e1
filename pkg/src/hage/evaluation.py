"""Sample-level cross-validation, retrieval metrics, ablation orchestration,
and cost accounting.

Queries sharing a sample id always land in the same fold, so no query-level
information crosses a train/test boundary.
"""

from __future__ import annotations

import copy
import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import GraphBundle
from .query import select_anchors
from .router import RouterParams
from .training import (AblationMode, RewardConfig, TrainConfig, TrainedModel,
                       train)
from .traversal import Terminal, synthesize_context, traverse_beam, traverse_greedy

__all__ = [
    "FoldPlan",
    "EvalReport",
    "make_folds",
    "evaluate",
    "run_ablation",
    "run_cross_validation",
    "format_comparison",
]


@dataclass
class FoldPlan:
    """Sample-id to fold assignment. The held-out test share of each fold is
    its fold's samples (about 1/k); ``val_fraction`` of the remainder is used
    for checkpoint selection."""

    k: int
    assignments: dict[str, int]
    val_fraction: float = 0.2
    test_fraction: float = 0.1
    seed: int = 0

    def fold_ids(self, fold: int) -> list[str]:
        return [s for s, f in self.assignments.items() if f == fold]


def make_folds(sample_ids: list[str], k: int = 5, seed: int = 0,
               val_fraction: float = 0.2, test_fraction: float = 0.1) -> FoldPlan:
    """Seeded shuffle of the unique sample ids, then round-robin assignment."""
    unique = list(dict.fromkeys(sample_ids))
    if len(unique) < k:
        raise ValueError(f"need at least {k} distinct sample ids, got {len(unique)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = [unique[i] for i in rng.permutation(len(unique))]
    assignments = {sid: i % k for i, sid in enumerate(order)}
    return FoldPlan(k, assignments, val_fraction, test_fraction, seed)


@dataclass
class EvalReport:
    routing_success: float
    mean_hops: float
    hit_at_budget: float
    mean_context_words: float
    mean_latency_ms: float
    per_intent: dict[str, float]
    per_intent_counts: dict[str, int] = field(default_factory=dict)
    sample_count: int = 0

    def to_dict(self) -> dict:
        return {
            "routing_success": self.routing_success,
            "mean_hops": self.mean_hops,
            "hit_at_budget": self.hit_at_budget,
            "mean_context_words": self.mean_context_words,
            "mean_latency_ms": self.mean_latency_ms,
            "per_intent": dict(self.per_intent),
            "per_intent_counts": dict(self.per_intent_counts),
            "sample_count": self.sample_count,
        }


def evaluate(params: RouterParams, data: list[GraphBundle], h_max: int,
             mode: str = "greedy", beam_width: int = 3,
             budget_words: int = 512) -> EvalReport:
    """Score every sample: success means the traversal visits all of its
    target nodes within the hop budget."""
    if mode not in ("greedy", "beam"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    successes, hop_counts, hit_fracs, word_counts, latencies = [], [], [], [], []
    intent_hits: dict[str, list[int]] = {}
    for bundle in data:
        for sample in bundle.samples:
            t0 = time.perf_counter()
            if mode == "greedy":
                traj = traverse_greedy(bundle.graph, sample.query, params,
                                       h_max, targets=sample.targets)
                visited = set(traj.visited)
                hops = len(traj.steps)
                ok = traj.terminal is Terminal.ALL_TARGETS_FOUND
            else:
                anchors = select_anchors(bundle.graph, sample.query, beam_width)
                visited = traverse_beam(bundle.graph, sample.query, params,
                                        h_max, beam_width, anchors)
                hops = max(len(visited) - 1, 0)
                ok = sample.targets <= visited
            latencies.append((time.perf_counter() - t0) * 1000.0)
            successes.append(ok)
            if ok:
                hop_counts.append(hops)
            hit_fracs.append(len(sample.targets & visited) / len(sample.targets))
            context = synthesize_context(bundle.graph, visited, sample.query,
                                         budget_words)
            word_counts.append(len(context.rendered.split()))
            intent_hits.setdefault(sample.query.intent.label, []).append(int(ok))
    n = len(successes)
    if n == 0:
        raise ValueError("no samples to evaluate")
    return EvalReport(
        routing_success=float(np.mean(successes)),
        mean_hops=float(np.mean(hop_counts)) if hop_counts else 0.0,
        hit_at_budget=float(np.mean(hit_fracs)),
        mean_context_words=float(np.mean(word_counts)),
        mean_latency_ms=float(np.mean(latencies)),
        per_intent={k: float(np.mean(v)) for k, v in intent_hits.items()},
        per_intent_counts={k: len(v) for k, v in intent_hits.items()},
        sample_count=n,
    )


def _clone_bundles(data: list[GraphBundle]) -> list[GraphBundle]:
    clones = copy.deepcopy(data)
    for bundle in clones:
        for e in bundle.graph.edges:
            frozen = np.array(e.features_init, dtype=float)
            frozen.flags.writeable = False
            e.features_init = frozen
    return clones


def _prepare_mode(data: list[GraphBundle], mode: AblationMode) -> None:
    """Reset edge features to the mode's starting point."""
    for bundle in data:
        for e in bundle.graph.edges:
            if mode is AblationMode.STATIC_EDGE:
                e.features = e.primary_relation.one_hot()
            else:
                e.features = e.features_init.copy()


def run_ablation(
    data: list[GraphBundle],
    base_cfg: TrainConfig,
    reward_cfg: RewardConfig = None,
    modes: list[AblationMode] = None,
    val_data: list[GraphBundle] = None,
    eval_data_names: list[str] = None,
    eval_mode: str = "greedy",
    beam_width: int = 3,
    budget_words: int = 512,
) -> dict[AblationMode, EvalReport]:
    """Train and evaluate each named scheme on identical data, seed, and
    configuration; only the trainability gates and feature starting points
    differ between modes."""
    reward_cfg = reward_cfg or RewardConfig()
    modes = modes or list(AblationMode)
    for m in modes:
        if not isinstance(m, AblationMode):
            raise ValueError(f"unknown ablation mode {m!r}")
    reports: dict[AblationMode, EvalReport] = {}
    for mode in modes:
        work = _clone_bundles(data)
        _prepare_mode(work, mode)
        val = work if val_data is None else _clone_bundles(val_data)
        cfg = dataclasses.replace(base_cfg, ablation_mode=mode)
        model = train(work, val, cfg, reward_cfg)
        model.apply_edge_features(work)
        eval_bundles = work if eval_data_names is None else [
            b for b in work if b.name in eval_data_names
        ]
        reports[mode] = evaluate(model.params, eval_bundles, cfg.h_max,
                                 mode=eval_mode, beam_width=beam_width,
                                 budget_words=budget_words)
    return reports


def format_comparison(reports: dict[AblationMode, EvalReport]) -> str:
    """Plain-text aligned comparison table across ablation modes."""
    header = f"{'mode':<18}{'success':>9}{'hit@budget':>12}{'mean_hops':>11}{'words':>8}"
    lines = [header, "-" * len(header)]
    for mode, rep in reports.items():
        lines.append(
            f"{mode.value:<18}{rep.routing_success:>9.3f}{rep.hit_at_budget:>12.3f}"
            f"{rep.mean_hops:>11.2f}{rep.mean_context_words:>8.1f}"
        )
    return "\n".join(lines)


def _subset(data: list[GraphBundle], ids: set[str]) -> list[GraphBundle]:
    out = []
    for bundle in data:
        keep = [s for s in bundle.samples if s.sample_id in ids]
        if keep:
            out.append(GraphBundle(bundle.name, bundle.graph, keep))
    return out


def run_cross_validation(
    data: list[GraphBundle],
    cfg: TrainConfig,
    reward_cfg: RewardConfig = None,
    k: int = 5,
    val_fraction: float = 0.2,
    eval_mode: str = "greedy",
    beam_width: int = 3,
    budget_words: int = 512,
) -> dict:
    """Per-fold train/select/test with sample-level splits; reports per-fold
    metrics and their mean. Every sample id is tested exactly once."""
    reward_cfg = reward_cfg or RewardConfig()
    all_ids = [s.sample_id for b in data for s in b.samples]
    plan = make_folds(all_ids, k=k, seed=cfg.seed, val_fraction=val_fraction)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 1))
    fold_reports = []
    for fold in range(k):
        test_ids = set(plan.fold_ids(fold))
        rest = [sid for sid in dict.fromkeys(all_ids) if sid not in test_ids]
        rest = [rest[i] for i in rng.permutation(len(rest))]
        n_val = max(1, int(round(val_fraction * len(rest))))
        val_ids = set(rest[:n_val])
        train_ids = set(rest[n_val:])
        work = _clone_bundles(data)
        train_split = _subset(work, train_ids)
        val_split = _subset(work, val_ids)
        test_split = _subset(work, test_ids)
        model = train(train_split, val_split, cfg, reward_cfg)
        model.apply_edge_features(work)
        report = evaluate(model.params, test_split, cfg.h_max, mode=eval_mode,
                          beam_width=beam_width, budget_words=budget_words)
        fold_reports.append({"fold": fold, "test_ids": sorted(test_ids),
                             "report": report.to_dict()})
    keys = ("routing_success", "mean_hops", "hit_at_budget",
            "mean_context_words", "mean_latency_ms")
    mean = {key: float(np.mean([fr["report"][key] for fr in fold_reports]))
            for key in keys}
    return {"k": k, "seed": cfg.seed, "folds": fold_reports, "mean": mean}
