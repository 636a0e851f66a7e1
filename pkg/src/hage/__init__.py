"""hage: weighted multi-relational memory graph with a trainable
query-conditioned traversal policy."""

from .graph import (GraphFormatError, MemoryGraph, MemoryNode, RelationEdge,
                    RelationType, cosine, load_graph, save_graph)
from .query import (QueryContext, TrainingSample, classify_intent,
                    intent_embedding, load_samples, save_samples,
                    select_anchors, select_start_node)
from .router import (RouterParams, enrich_edge, load_router, policy_distribution,
                     router_backward, save_router, structural_weight,
                     transition_score)
from .traversal import (RetrievedContext, Terminal, Trajectory, rollout_episode,
                        synthesize_context, traverse_beam, traverse_greedy)
from .training import (AblationMode, RewardConfig, TrainConfig, TrainedModel,
                       accumulate_policy_gradient, anchor_loss_and_grad,
                       discounted_returns, save_model_bundle, step_reward, train,
                       update_baseline)
from .evaluation import (EvalReport, FoldPlan, evaluate, make_folds,
                         run_ablation, run_cross_validation)
from .datasets import GraphBundle, load_dataset
from .synthetic import SyntheticSpec, generate_synthetic, make_planted_benchmark

__version__ = "0.1.0"
