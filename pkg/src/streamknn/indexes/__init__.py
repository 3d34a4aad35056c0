"""Index implementations; importing this package registers them all."""

from ..index_api import register
from .dpg import DpgIndex
from .flat import FlatIndex
from .hnsw import HnswIndex
from .hnsw_dco import HnswAdsIndex, HnswLvqIndex
from .lsh import LshIndex
from .nndescent import NnDescentIndex
from .nsg import NsgIndex
from .nsw import NswIndex
from .pq import IvfPqIndex, OnlinePqIndex, PqIndex

register("baseline", FlatIndex)
register("lsh", LshIndex)
register("lsh_ml", lambda metric, dim, params: LshIndex(metric, dim, params, learned=True))
register("pq", PqIndex)
register("onlinepq", OnlinePqIndex)
register("ivfpq", IvfPqIndex)
register("hnsw", HnswIndex)
register("hnsw_lvq", HnswLvqIndex)
register("hnsw_ads", HnswAdsIndex)
register("nsw", NswIndex)
register("nndescent", NnDescentIndex)
register("dpg", DpgIndex)
register("nsg", NsgIndex)
