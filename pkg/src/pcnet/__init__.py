"""Point cloud object classification: data synthesis, geometry kernels,
two classifiers over unordered point sets, training, and metrics."""

from .tensor import GradTape, Tensor, backward, grad_check, zero_grads
from .geom import (as_cloud, ball_query, canonical_order, canonical_seed_index,
                   farthest_point_sampling, kernel_backend, knn_query,
                   normalize_unit_sphere, resample_to_fixed_size, NeighborGraph)
from .dataset import (CLASS_NAMES, NUM_CLASSES, BoxAnnotation, LabeledCloud,
                      balance_classes, extract_object_clouds, generate_object,
                      load_cloud, load_labeled_cloud, save_cloud, synthesize_set,
                      train_test_split)
from .pointnet import (PointNetConfig, PointNetParams, init_pointnet,
                       orthogonality_penalty, pointnet_forward, pointnet_loss,
                       tnet_forward)
from .pointnetpp import (PointNetPPConfig, PointNetPPParams, SetAbstractionConfig,
                         build_hierarchy_trace, init_pointnetpp, pointnetpp_forward,
                         set_abstraction)
from .learn import (AdamState, TrainConfig, TrainResult, TrainingDiverged,
                    adam_step, evaluate, sgd_step, train)
from .metrics import (MetricsReport, binary_auc, confusion, derive_metrics,
                      report_text, roc_auc, roc_auc_per_class)
from .config import RunConfig, load_config, parse_config_text
from .checkpoint import load_checkpoint, save_checkpoint
from .seeding import fork_seed

__version__ = "0.1.0"
