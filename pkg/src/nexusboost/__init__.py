"""Multi-output gradient-boosted regression trees for coupled water and
electricity demand, with seasonality handling, cross-validated evaluation,
variable selection and covariance-explained attribution."""

__version__ = "0.1.0"

from .boosting import BoostParams, BoostedEnsemble, boost_fit, boost_predict  # noqa: E402
from .cart import RegressionTree, TreeParams, fit_tree, predict_tree  # noqa: E402
from .cluster import Dendrogram, cluster_order, hier_cluster  # noqa: E402
from .dataset import NexusDataset, ingest_all, ingest_csv, standardize  # noqa: E402
from .evaluation import compare_models, cross_validate, make_folds, r_squared, rmse  # noqa: E402
from .mvtboost import MvBoostParams, covariance_explained, mvboost_fit, relative_influence  # noqa: E402
from .seasonal import decompose, deseasonalize, detect_seasonality, periodogram  # noqa: E402

__all__ = [
    "BoostParams", "BoostedEnsemble", "boost_fit", "boost_predict",
    "RegressionTree", "TreeParams", "fit_tree", "predict_tree",
    "Dendrogram", "cluster_order", "hier_cluster",
    "NexusDataset", "ingest_all", "ingest_csv", "standardize",
    "compare_models", "cross_validate", "make_folds", "r_squared", "rmse",
    "MvBoostParams", "covariance_explained", "mvboost_fit", "relative_influence",
    "decompose", "deseasonalize", "detect_seasonality", "periodogram",
]
