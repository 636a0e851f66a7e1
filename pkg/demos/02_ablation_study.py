"""Compare the five training schemes on one benchmark.

StaticEdge and ScoredEdge never train anything; TrainableEdge and
TrainableRouter each unlock one parameter group; Full trains both. The
printed table shows how much of the routing gain comes from each piece.
"""

from hage import TrainConfig, make_planted_benchmark
from hage.evaluation import format_comparison, run_ablation

data = make_planted_benchmark(num_samples=20, seed=0, embedding_dim=16)
cfg = TrainConfig(epochs=200, seed=2, lambda_mix=0.35)

reports = run_ablation(data, cfg)
print(format_comparison(reports))
