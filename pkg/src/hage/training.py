"""Joint optimization of the routing network and edge features: shaped
rewards, discounted returns, REINFORCE with an EMA baseline, anchor
regularization, global-norm gradient clipping, and Adam with asymmetric
learning rates.

Updates are per episode (batch size 1). The baseline is updated with the
undiscounted episode return after that episode's gradient step, so an episode
never cancels itself out of its own advantage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .datasets import GraphBundle
from .graph import RELATION_DIM, MemoryGraph
from .router import RouterGrads, RouterParams, router_backward, save_router
from .traversal import Terminal, Trajectory, rollout_episode, traverse_greedy

__all__ = [
    "AblationMode",
    "RewardConfig",
    "TrainConfig",
    "TrainerState",
    "TrainedModel",
    "step_reward",
    "discounted_returns",
    "update_baseline",
    "accumulate_policy_gradient",
    "anchor_loss_and_grad",
    "optimizer_step",
    "train",
    "save_model_bundle",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class AblationMode(Enum):
    STATIC_EDGE = "static_edge"
    SCORED_EDGE = "scored_edge"
    TRAINABLE_EDGE = "trainable_edge"
    TRAINABLE_ROUTER = "trainable_router"
    FULL = "full"

    @property
    def trains_router(self) -> bool:
        return self in (AblationMode.TRAINABLE_ROUTER, AblationMode.FULL)

    @property
    def trains_edges(self) -> bool:
        return self in (AblationMode.TRAINABLE_EDGE, AblationMode.FULL)


@dataclass
class RewardConfig:
    r_hit: float = 10.0
    lambda_step: float = 0.05
    lambda_timeout: float = 1.0
    gamma: float = 0.99

    def __post_init__(self):
        if self.r_hit <= 0:
            raise ValueError("r_hit must be positive")
        if self.lambda_step < 0 or self.lambda_timeout < 0:
            raise ValueError("penalties must be non-negative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


@dataclass
class TrainConfig:
    epochs: int = 200
    eta_router: float = 1e-3
    eta_edge: float = 1e-4
    lambda_anchor: float = 1.0
    h_max: int = 5
    ablation_mode: AblationMode = AblationMode.FULL
    seed: int = 0
    clip_norm: float = 1.0
    baseline_beta: float = 0.99
    hidden_dim: int = 64
    lambda_mix: float = 0.5

    def __post_init__(self):
        if isinstance(self.ablation_mode, str):
            self.ablation_mode = AblationMode(self.ablation_mode)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eta_edge > self.eta_router:
            raise ValueError(
                "eta_edge must not exceed eta_router (asymmetric learning-rate contract)"
            )
        if not 0.0 <= self.baseline_beta < 1.0:
            raise ValueError("baseline beta must lie in [0, 1)")
        if self.h_max < 1:
            raise ValueError("h_max must be >= 1")


def step_reward(new_hits: int, is_terminal_timeout: bool, cfg: RewardConfig) -> float:
    """Hit bonus minus the per-action step penalty, minus the timeout penalty
    on the final step of budget-exhausted episodes."""
    if new_hits < 0:
        raise ValueError("new_hits must be >= 0")
    r = new_hits * cfg.r_hit - cfg.lambda_step
    if is_terminal_timeout:
        r -= cfg.lambda_timeout
    return r


def discounted_returns(rewards: list[float], gamma: float) -> list[float]:
    """Suffix-discounted returns by reverse accumulation."""
    if not rewards:
        raise ValueError("rewards must be non-empty")
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


@dataclass
class TrainerState:
    baseline: float = 0.0
    beta: float = 0.99
    clip_norm: float = 1.0
    epoch: int = 0
    best_val_success: float = -1.0
    router_m: RouterGrads = None
    router_v: RouterGrads = None
    router_t: int = 0
    edge_m: dict = field(default_factory=dict)   # graph name -> (E, 4) array
    edge_v: dict = field(default_factory=dict)
    edge_t: dict = field(default_factory=dict)

    @classmethod
    def for_run(cls, params: RouterParams, data: list[GraphBundle],
                cfg: TrainConfig) -> "TrainerState":
        state = cls(beta=cfg.baseline_beta, clip_norm=cfg.clip_norm)
        state.router_m = RouterGrads.zeros_like(params)
        state.router_v = RouterGrads.zeros_like(params)
        for bundle in data:
            shape = (bundle.graph.edge_count, RELATION_DIM)
            state.edge_m[bundle.name] = np.zeros(shape)
            state.edge_v[bundle.name] = np.zeros(shape)
            state.edge_t[bundle.name] = 0
        return state


def update_baseline(state: TrainerState, episode_return: float) -> float:
    state.baseline = state.beta * state.baseline + (1.0 - state.beta) * episode_return
    return state.baseline


def accumulate_policy_gradient(
    trajectory: Trajectory, baseline: float, gamma: float,
    params: RouterParams, graph: MemoryGraph,
) -> tuple[RouterGrads, dict[int, np.ndarray]]:
    """Ascent-direction REINFORCE gradients for one trajectory.

    Differentiates each step's log-policy through the softmax and through every
    candidate's structural weight, scaled by the advantage (G_t - baseline).
    Returns router gradients plus per-edge feature gradients for every
    candidate edge that appeared in the trajectory.
    """
    router_grad = RouterGrads.zeros_like(params)
    edge_grads: dict[int, np.ndarray] = {}
    if not trajectory.steps:
        return router_grad, edge_grads
    returns = discounted_returns(trajectory.rewards, gamma)
    lam = params.lambda_mix
    q = trajectory.ctx.query_embedding
    for step, g_t in zip(trajectory.steps, returns):
        advantage = g_t - baseline
        cands = step.candidates
        probs = cands.probs
        for k in range(len(cands)):
            coeff = (1.0 if k == step.chosen_index else 0.0) - probs[k]
            upstream = advantage * coeff * (1.0 - lam)
            if upstream == 0.0:
                continue
            rg, eg = router_backward(params, q, cands.enriched[k], upstream)
            router_grad.add_(rg)
            eid = cands.edge_ids[k]
            if eid in edge_grads:
                edge_grads[eid] += eg
            else:
                edge_grads[eid] = eg
    return router_grad, edge_grads


def anchor_loss_and_grad(
    graph: MemoryGraph, lambda_anchor: float,
) -> tuple[float, np.ndarray]:
    """L2 pull of trained edge features toward their frozen initialization.

    Returns the scalar loss and a dense (E, 4) gradient matrix.
    """
    feats = graph.edge_feature_matrix()
    inits = (np.stack([e.features_init for e in graph.edges])
             if graph.edges else np.zeros((0, RELATION_DIM)))
    drift = feats - inits
    loss = lambda_anchor * float(np.sum(drift ** 2))
    grad = 2.0 * lambda_anchor * drift
    return loss, grad


def clip_global_norm(router_grad: RouterGrads, edge_grad: np.ndarray,
                     clip_norm: float) -> float:
    """Scale all gradients in place so their joint global norm <= clip_norm.
    Returns the pre-clip norm."""
    total = np.sqrt(router_grad.sq_norm() + float(np.sum(edge_grad ** 2)))
    if total > clip_norm and total > 0.0:
        scale = clip_norm / total
        router_grad.scale_(scale)
        edge_grad *= scale
    return float(total)


def _adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray,
                 v: np.ndarray, t: int, eta: float) -> None:
    m *= ADAM_BETA1
    m += (1.0 - ADAM_BETA1) * grad
    v *= ADAM_BETA2
    v += (1.0 - ADAM_BETA2) * grad ** 2
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    param -= eta * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def optimizer_step(
    state: TrainerState, params: RouterParams, graph_name: str,
    graph: MemoryGraph, router_grad: RouterGrads, edge_grad: np.ndarray,
    cfg: TrainConfig,
) -> None:
    """Clip the joint gradient, then apply Adam to whichever parameter groups
    the ablation mode leaves trainable. Gradients are for the minimized loss.
    """
    if edge_grad.shape != (graph.edge_count, RELATION_DIM):
        raise ValueError("edge gradient shape mismatch")
    clip_global_norm(router_grad, edge_grad, state.clip_norm)
    mode = cfg.ablation_mode
    if mode.trains_router:
        state.router_t += 1
        t = state.router_t
        _adam_update(params.W1, router_grad.dW1, state.router_m.dW1,
                     state.router_v.dW1, t, cfg.eta_router)
        _adam_update(params.b1, router_grad.db1, state.router_m.db1,
                     state.router_v.db1, t, cfg.eta_router)
        _adam_update(params.w2, router_grad.dw2, state.router_m.dw2,
                     state.router_v.dw2, t, cfg.eta_router)
        # scalar bias
        state.router_m.db2 = ADAM_BETA1 * state.router_m.db2 + (1 - ADAM_BETA1) * router_grad.db2
        state.router_v.db2 = ADAM_BETA2 * state.router_v.db2 + (1 - ADAM_BETA2) * router_grad.db2 ** 2
        m_hat = state.router_m.db2 / (1.0 - ADAM_BETA1 ** t)
        v_hat = state.router_v.db2 / (1.0 - ADAM_BETA2 ** t)
        params.b2 -= cfg.eta_router * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    if mode.trains_edges and graph.edge_count:
        state.edge_t[graph_name] += 1
        feats = graph.edge_feature_matrix()
        _adam_update(feats, edge_grad, state.edge_m[graph_name],
                     state.edge_v[graph_name], state.edge_t[graph_name],
                     cfg.eta_edge)
        graph.set_edge_features(feats)


@dataclass
class TrainedModel:
    params: RouterParams
    edge_features: dict[str, np.ndarray]  # graph name -> (E, 4)
    log: list[dict]
    best_epoch: int
    best_val_success: float

    def apply_edge_features(self, data: list[GraphBundle]) -> None:
        for bundle in data:
            if bundle.name in self.edge_features:
                bundle.graph.set_edge_features(self.edge_features[bundle.name])


def _greedy_success(data: list[GraphBundle], params: RouterParams, h_max: int) -> float:
    total = sum(len(b.samples) for b in data)
    if total == 0:
        return 0.0
    hits = 0
    for bundle in data:
        for sample in bundle.samples:
            traj = traverse_greedy(bundle.graph, sample.query, params, h_max,
                                   targets=sample.targets)
            if traj.terminal is Terminal.ALL_TARGETS_FOUND:
                hits += 1
    return hits / total


def _mean_drift(data: list[GraphBundle]) -> float:
    norms = []
    for bundle in data:
        for e in bundle.graph.edges:
            norms.append(float(np.linalg.norm(e.features - e.features_init)))
    return float(np.mean(norms)) if norms else 0.0


def _snapshot(params: RouterParams, data: list[GraphBundle]) -> tuple:
    return (params.copy(),
            {b.name: b.graph.edge_feature_matrix().copy() for b in data})


def train(
    train_data: list[GraphBundle],
    val_data: list[GraphBundle],
    cfg: TrainConfig,
    reward_cfg: RewardConfig = None,
    params: RouterParams = None,
) -> TrainedModel:
    """Run the per-episode REINFORCE loop and return the checkpoint with the
    highest validation routing success (ties resolved to the earlier epoch).

    Fully deterministic given (data, cfg, seed); performs no external calls.
    """
    if not train_data or not any(b.samples for b in train_data):
        raise ValueError("training split must be non-empty")
    if not val_data or not any(b.samples for b in val_data):
        raise ValueError("validation split must be non-empty")
    reward_cfg = reward_cfg or RewardConfig()
    dim = train_data[0].graph.d
    root = np.random.SeedSequence(cfg.seed)
    init_seed, run_seed = root.spawn(2)
    if params is None:
        params = RouterParams.init(dim, hidden_dim=cfg.hidden_dim,
                                   lambda_mix=cfg.lambda_mix,
                                   seed=int(init_seed.generate_state(1)[0]))
    gen = np.random.Generator(np.random.PCG64(run_seed))
    state = TrainerState.for_run(params, train_data, cfg)
    episodes = [(b, s) for b in train_data for s in b.samples]
    log: list[dict] = []
    trainable = cfg.ablation_mode.trains_router or cfg.ablation_mode.trains_edges
    best_epoch = 0
    best_val = -1.0
    best = _snapshot(params, train_data)

    epochs = cfg.epochs if trainable else 1
    for epoch in range(epochs):
        order = gen.permutation(len(episodes))
        episode_returns = []
        for idx in order:
            bundle, sample = episodes[idx]
            traj = rollout_episode(
                bundle.graph, sample, params, gen, cfg.h_max,
                lambda hits, timeout: step_reward(hits, timeout, reward_cfg),
            )
            episode_returns.append(traj.total_reward)
            if trainable and traj.steps:
                ascent_router, ascent_edges = accumulate_policy_gradient(
                    traj, state.baseline, reward_cfg.gamma, params, bundle.graph)
                loss_router = RouterGrads.zeros_like(params)
                loss_router.add_(ascent_router, scale=-1.0)
                _, edge_grad = anchor_loss_and_grad(bundle.graph, cfg.lambda_anchor)
                for eid, g in ascent_edges.items():
                    edge_grad[eid] -= g
                optimizer_step(state, params, bundle.name, bundle.graph,
                               loss_router, edge_grad, cfg)
            update_baseline(state, traj.total_reward)
        state.epoch = epoch + 1
        val_success = _greedy_success(val_data, params, cfg.h_max)
        log.append({
            "epoch": epoch,
            "mean_return": float(np.mean(episode_returns)),
            "baseline": state.baseline,
            "val_success": val_success,
            "mean_drift": _mean_drift(train_data),
        })
        if val_success > best_val:
            best_val = val_success
            best_epoch = epoch
            best = _snapshot(params, train_data)
    state.best_val_success = best_val
    best_params, best_feats = best
    return TrainedModel(best_params, best_feats, log, best_epoch, best_val)


def save_model_bundle(model: TrainedModel, out_dir) -> None:
    """Write the checkpoint bundle: router weights, per-graph edge features,
    and the per-epoch training log."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_router(model.params, out / "router.json")
    with open(out / "edge_features.jsonl", "w", encoding="utf-8") as fh:
        for graph_name in sorted(model.edge_features):
            feats = model.edge_features[graph_name]
            for eid, row in enumerate(feats):
                rec = {"edge": eid, "graph": graph_name, "feat": [float(v) for v in row]}
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    with open(out / "training_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in model.log:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
