"""Treatment-effect estimation from pre-trained representations.

Cross-fitted doubly-robust ATE estimators over latent-feature datasets,
invariance diagnostics under invertible linear transformations,
intrinsic-dimension estimators, and the simulation harnesses that check
all of it against known ground truth.
"""
from .data import (
    FoldAssignment,
    RepresentationSet,
    load_representations,
    make_folds,
    save_representations,
)
from .estimators import (
    AteReport,
    dml_aipw_ate,
    dml_partialling_out_ate,
    evaluate_score,
    naive_ate,
    oracle_ate,
    s_learner_ate,
)
from .intrinsic_dim import IdEstimate, estimate_id, id_ess, id_lpca, id_mle, knn
from .transforms import (
    LinearTransform,
    apply,
    sample_invertible,
    sample_orthogonal,
    sparsity_rotation_curve,
)

__version__ = "0.1.0"

__all__ = [
    "AteReport", "FoldAssignment", "IdEstimate", "LinearTransform",
    "RepresentationSet", "__version__", "apply", "dml_aipw_ate",
    "dml_partialling_out_ate", "estimate_id", "evaluate_score", "id_ess",
    "id_lpca", "id_mle", "knn", "load_representations", "make_folds",
    "naive_ate", "oracle_ate", "s_learner_ate", "sample_invertible",
    "sample_orthogonal", "save_representations", "sparsity_rotation_curve",
]
