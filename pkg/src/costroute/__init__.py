"""Cost-aware routing of prompts across a pool of generators."""

from .errors import CostRouteError, DegenerateError, InfeasibleError, ValidationError
from .estimator import (
    KnnIndex,
    MlpModel,
    estimator_from_json,
    estimator_to_json,
    gradient_check,
    knn_build,
    knn_predict,
    mlp_forward,
    mlp_init,
    mlp_loss,
    mlp_train,
)
from .evaluation import (
    DeferralCurve,
    DeferralPoint,
    avg_quality_cost,
    deferral_curve,
    qnc,
    selection_rates,
)
from .imgmetrics import Image, convolve, gaussian_kernel, sharpness
from .pool import (
    Dataset,
    LabelScaler,
    ModelCandidate,
    PromptRecord,
    RoutingPool,
    apply_scaler,
    compute_labels,
    featurize_prompt,
    fit_scaler,
    load_dataset,
    load_pool,
)
from .router import RouteDecision, RouterConfig, calibrate_lambda, oracle_route, route, route_batch
from .stats import TTestResult, welch_ttest
from .synth import SynthSpec, brute_force_frontier, generate_synth_dataset

__version__ = "0.1.0"
