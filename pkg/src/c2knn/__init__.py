"""Approximate KNN graphs over sparse user/item data with Cluster-and-Conquer."""

from .baselines import build, run_bruteforce, run_greedy_full, run_lsh
from .dataset import Dataset, FoldSplit, RatingRecord, binarize_and_filter, load_ratings, make_folds
from .graph import KnnGraph
from .metrics import avg_sim, quality, recall_at_n, recommend
from .pipeline import BuildParams, run_c2
from .similarity import SimilarityOracle, gf_encode, gf_jaccard, jaccard

__version__ = "0.1.0"

__all__ = [
    "BuildParams", "Dataset", "FoldSplit", "KnnGraph", "RatingRecord", "SimilarityOracle",
    "avg_sim", "binarize_and_filter", "build", "gf_encode", "gf_jaccard", "jaccard",
    "load_ratings", "make_folds", "quality", "recall_at_n", "recommend", "run_bruteforce",
    "run_c2", "run_greedy_full", "run_lsh",
]
