from ragrec.retrieval.popularity import PopularityStats, popularity_stats
from ragrec.retrieval.sampling import (SAMPLE_ORDERS, NeighborContext,
                                       sample_neighbor_ratings)
from ragrec.retrieval.similarity import (Neighbor, RetrievalError,
                                         SimilarityIndex, cosine_similarity,
                                         dense_similarities,
                                         read_neighbor_cache, top_k_neighbors,
                                         write_neighbor_cache)
