"""Hyperbolic representation learning for incomplete two-view clustering.

Poincare-ball geometry, a small reverse-mode tensor engine, affinity-guided
contrastive training with angular/distance/prototype alignment in the ball,
missing-view recovery, clustering metrics, and a tree-embedding workbench
contrasting hyperbolic against flat layouts.
"""

from .affinity import GraphConfig, heat_kernel_adjacency, random_walk_graph, row_normalize
from .clustereval import ClusterResult, ari, hungarian_acc, kmeans, nmi, score
from .config import RunConfig, load_run_config
from .hypmath import (
    BallPoint,
    BoundaryError,
    HypConfig,
    angular_sim,
    clip,
    conformal_factor,
    dist_sim,
    exp_map_origin,
    hyp_distance,
    hyp_project,
    mobius_add,
)
from .impute import MaskedDataset, assemble, recover
from .losses import AlphaSchedule, LossConfig, alpha_at, contrastive, total_loss
from .netmodel import ModelSpec, ModelState, ema_update, forward_views, init_model
from .training import evaluate_model, run_ablation, train_model
from .treebed import (
    DistortionReport,
    RegularTree,
    TreeEmbedding,
    TreeSpec,
    build_regular_tree,
    euclidean_analog_layout,
    euclidean_lower_bound,
    measure_distortion,
    sarkar_embed,
)

__version__ = "0.1.0"
