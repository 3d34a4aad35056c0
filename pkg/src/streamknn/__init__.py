"""streamknn: streaming approximate nearest-neighbor indexes plus a
rate-controlled ingestion harness for measuring recall and latency while
data keeps arriving.
"""

from .core import (
    DimensionMismatch,
    Metric,
    TopK,
    VectorRecord,
    as_matrix,
    distance,
    make_records,
    normalize_dataset,
    select_top_k,
    top_k,
)
from .index_api import DynamicIndex, InsertCost, available_algorithms, create_index

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatch",
    "DynamicIndex",
    "InsertCost",
    "Metric",
    "TopK",
    "VectorRecord",
    "as_matrix",
    "available_algorithms",
    "create_index",
    "distance",
    "make_records",
    "normalize_dataset",
    "select_top_k",
    "top_k",
    "__version__",
]
