"""Episode execution over the memory graph: stochastic rollouts for training,
greedy and beam expansion for inference, and context synthesis.

A visited-node mask is enforced for every mode (sampled, greedy, beam), so no
node is ever revisited within one trajectory or beam path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .graph import MemoryGraph, RelationType, cosine
from .query import QueryContext, TrainingSample, select_start_node
from .router import CandidateSet, RouterParams, score_candidates

__all__ = [
    "Terminal",
    "StepRecord",
    "Trajectory",
    "RetrievedContext",
    "rollout_episode",
    "traverse_greedy",
    "traverse_beam",
    "synthesize_context",
]


class Terminal(Enum):
    ALL_TARGETS_FOUND = "all_targets_found"
    DEAD_END = "dead_end"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class StepRecord:
    from_node: int
    candidates: CandidateSet
    chosen_index: int
    log_prob: float
    reward: float


@dataclass
class Trajectory:
    start_node: int
    steps: list[StepRecord]
    terminal: Terminal
    total_reward: float
    hit_count: int
    ctx: QueryContext = None

    @property
    def visited(self) -> list[int]:
        return [self.start_node] + [
            s.candidates.node_ids[s.chosen_index] for s in self.steps
        ]

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]


def _as_rng(rng: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(rng))


def _run_episode(graph: MemoryGraph, ctx: QueryContext, params: RouterParams,
                 budget: int, targets: frozenset[int], reward_fn,
                 choose) -> Trajectory:
    """Shared episode loop; ``choose(cands) -> index`` sets the action rule."""
    if budget < 1:
        raise ValueError("hop budget must be >= 1")
    start = select_start_node(graph, ctx)
    current = start
    visited = {start}
    found = targets & {start}
    steps: list[StepRecord] = []
    total_reward = 0.0
    if targets and found == targets:
        return Trajectory(start, steps, Terminal.ALL_TARGETS_FOUND, 0.0,
                          len(found), ctx)
    terminal = Terminal.BUDGET_EXHAUSTED
    for t in range(budget):
        cands = score_candidates(graph, current, ctx, params, visited)
        if len(cands) == 0:
            terminal = Terminal.DEAD_END
            break
        idx = choose(cands)
        nxt = cands.node_ids[idx]
        visited.add(nxt)
        new_hits = 1 if (nxt in targets and nxt not in found) else 0
        if new_hits:
            found = found | {nxt}
        done = bool(targets) and found == targets
        timeout = (t == budget - 1) and not done
        reward = reward_fn(new_hits, timeout)
        total_reward += reward
        steps.append(StepRecord(
            from_node=current,
            candidates=cands,
            chosen_index=idx,
            log_prob=float(np.log(cands.probs[idx])),
            reward=reward,
        ))
        current = nxt
        if done:
            terminal = Terminal.ALL_TARGETS_FOUND
            break
    return Trajectory(start, steps, terminal, total_reward, len(found), ctx)


def rollout_episode(graph: MemoryGraph, sample: TrainingSample,
                    params: RouterParams, rng: Union[int, np.random.Generator],
                    budget: int, reward_fn) -> Trajectory:
    """Stochastic rollout: actions sampled from the softmax policy.

    ``reward_fn(new_hits, is_terminal_timeout) -> float`` supplies the shaped
    per-step reward. Deterministic given (graph, sample, params, rng seed).
    """
    gen = _as_rng(rng)

    def choose(cands: CandidateSet) -> int:
        return int(gen.choice(len(cands), p=cands.probs))

    return _run_episode(graph, sample.query, params, budget, sample.targets,
                        reward_fn, choose)


def traverse_greedy(graph: MemoryGraph, ctx: QueryContext, params: RouterParams,
                    budget: int, targets: Optional[frozenset[int]] = None,
                    reward_fn=None) -> Trajectory:
    """Greedy traversal: argmax-probability action, ties to lowest node id."""
    if reward_fn is None:
        reward_fn = lambda hits, timeout: 0.0
    targets = frozenset(targets) if targets else frozenset()

    def choose(cands: CandidateSet) -> int:
        order = sorted(range(len(cands)),
                       key=lambda i: (-cands.scores[i], cands.node_ids[i]))
        return order[0]

    return _run_episode(graph, ctx, params, budget, targets, reward_fn, choose)


@dataclass
class _BeamPath:
    nodes: tuple[int, ...]
    score: float
    finished: bool = False


def traverse_beam(graph: MemoryGraph, ctx: QueryContext, params: RouterParams,
                  budget: int, beam_width: int, anchors: list[int]) -> set[int]:
    """Beam expansion from the given anchors, ranked by summed transition score.

    Each path keeps its own visited set; returns the union of nodes on the
    surviving paths. With beam_width=1 and one anchor this reduces to the
    greedy node set.
    """
    if beam_width < 1:
        raise ValueError("beam width must be >= 1")
    if not anchors:
        raise ValueError("at least one anchor is required")
    frontier = [_BeamPath((a,), 0.0) for a in anchors[:beam_width]]
    for _ in range(budget):
        pool: list[_BeamPath] = []
        any_active = False
        for path in frontier:
            if path.finished:
                pool.append(path)
                continue
            cands = score_candidates(graph, path.nodes[-1], ctx, params,
                                     set(path.nodes))
            if len(cands) == 0:
                pool.append(_BeamPath(path.nodes, path.score, finished=True))
                continue
            any_active = True
            for i in range(len(cands)):
                pool.append(_BeamPath(path.nodes + (cands.node_ids[i],),
                                      path.score + float(cands.scores[i])))
        if not any_active:
            frontier = pool
            break
        pool.sort(key=lambda p: (-p.score, p.nodes))
        frontier = pool[:beam_width]
    out: set[int] = set()
    for path in frontier:
        out.update(path.nodes)
    return out


@dataclass
class RetrievedContext:
    ordered_nodes: list[int]
    ordering: str  # "temporal" | "causal" | "score"
    budget_words: int
    rendered: str


def _causal_order(graph: MemoryGraph, node_ids: list[int]) -> list[int]:
    """Topological order over causal edges among the selected nodes; nodes in
    separate components fall back to timestamp order."""
    selected = set(node_ids)
    succ: dict[int, list[int]] = {n: [] for n in node_ids}
    indeg = {n: 0 for n in node_ids}
    for eid in graph.relation_views[RelationType.CAUSAL]:
        e = graph.edges[eid]
        if e.src in selected and e.dst in selected:
            succ[e.src].append(e.dst)
            indeg[e.dst] += 1
    # Kahn's algorithm; the ready set is kept in (timestamp, id) order so the
    # cross-component fallback is the temporal order.
    ready = sorted((n for n in node_ids if indeg[n] == 0),
                   key=lambda n: (graph.node(n).timestamp, n))
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
        ready.sort(key=lambda n: (graph.node(n).timestamp, n))
    if len(order) < len(node_ids):  # cycle: fall back to timestamps entirely
        order = sorted(node_ids, key=lambda n: (graph.node(n).timestamp, n))
    return order


def synthesize_context(graph: MemoryGraph, nodes: set[int], ctx: QueryContext,
                       budget_words: int) -> RetrievedContext:
    """Order the retrieved nodes per the query intent and render "[ts] content"
    lines until the whitespace-word budget would be exceeded (whole nodes only).
    """
    node_ids = sorted(nodes)
    for n in node_ids:
        if not 0 <= n < graph.node_count:
            raise ValueError(f"unknown node {n}")
    if ctx.intent == RelationType.TEMPORAL:
        ordering = "temporal"
        ordered = sorted(node_ids, key=lambda n: (graph.node(n).timestamp, n))
    elif ctx.intent == RelationType.CAUSAL:
        ordering = "causal"
        ordered = _causal_order(graph, node_ids)
    else:
        ordering = "score"
        ordered = sorted(
            node_ids,
            key=lambda n: (-cosine(ctx.query_embedding, graph.node(n).embedding), n),
        )
    lines: list[str] = []
    used = 0
    for n in ordered:
        node = graph.node(n)
        line = f"[{node.timestamp}] {node.content}"
        words = len(line.split())
        if used + words > budget_words:
            break
        lines.append(line)
        used += words
    return RetrievedContext(ordered, ordering, budget_words, "\n".join(lines))
