"""Semi-supervised label propagation driven by entropic optimal transport."""

from .baseline import GaussianAffinity, gaussian_affinity, lp_propagate
from .datasets import Dataset, SplitMask, load_bundled, load_csv, make_splits
from .induction import (
    InductionModel,
    induce_label,
    induce_value,
    induction_weights,
    load_model,
    save_model,
)
from .metrics import accuracy, ari, nmi, score_measure
from .ot import (
    CostMatrix,
    Marginals,
    TransportPlan,
    entropic_linear_cost,
    exact_ot_uniform_small,
    pairwise_sq_dist,
    sinkhorn,
    uniform_marginals,
)
from .propagation import (
    OTPConfig,
    PropagationTrace,
    assign_labels,
    certainty_scores,
    class_probability_matrix,
    column_normalize,
    propagate,
    relax_alpha,
)

__version__ = "0.1.0"
