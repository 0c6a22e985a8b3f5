"""User-user cosine similarity and top-k neighbor selection."""
import io
import logging
from collections import namedtuple
from collections.abc import Mapping

import numpy as np

logger = logging.getLogger(__name__)

Neighbor = namedtuple('Neighbor', 'user, similarity')


class RetrievalError(ValueError):
    pass


def _cosine_from_parts(dot, sq_a, sq_b):
    """Cosine from a dot product and the two squared norms; zero where a
    norm is zero.  Works elementwise on arrays."""
    dot = np.asarray(dot, dtype=np.float64)
    denom = np.sqrt(np.asarray(sq_a, dtype=np.float64)) * \
        np.sqrt(np.asarray(sq_b, dtype=np.float64))
    with np.errstate(divide='ignore', invalid='ignore'):
        sim = np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)
    return np.minimum(sim, 1.0)


def cosine_similarity(a, b):
    """Cosine similarity of two rating vectors.

    *a* and *b* are either mappings ``{item: rating}`` (sparse; missing
    items are unobserved) or dense sequences over the same item universe
    with zeros for unobserved entries.  Returns 0 if either vector has a
    zero norm.

    """
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        if len(a) > len(b):
            a, b = b, a
        dot = sum(v * b[i] for i, v in a.items() if i in b)
        sq_a = sum(v * v for v in a.values())
        sq_b = sum(v * v for v in b.values())
    else:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise RetrievalError('vectors of different length: %d != %d' %
                                 (len(a), len(b)))
        dot, sq_a, sq_b = a.dot(b), a.dot(a), b.dot(b)
    return float(_cosine_from_parts(dot, sq_a, sq_b))


class SimilarityIndex:
    """Sparse similarity index over an immutable snapshot of the known
    ratings.

    Dot products are computed as sparse row products, i.e. only over the
    intersecting supports of two users.

    """
    def __init__(self, matrix):
        self._matrix = matrix
        self._csr = matrix.to_csr()
        self._sq_norms = np.asarray(
            self._csr.multiply(self._csr).sum(axis=1)).ravel()

    @property
    def matrix(self):
        return self._matrix

    @property
    def n_users(self):
        return self._matrix.n_users

    def similarities(self, target):
        """Similarities of *target* to every user (including itself)."""
        self._check_target(target)
        dots = np.asarray(
            (self._csr[target] @ self._csr.T).todense()).ravel()
        return _cosine_from_parts(dots, self._sq_norms[target],
                                  self._sq_norms)

    def ranking(self, target):
        """All other users ordered by similarity descending, ties by user
        index ascending, as a list of :class:`Neighbor`."""
        sims = self.similarities(target)
        users = np.arange(self.n_users)
        order = np.lexsort((users, -sims))
        return [Neighbor(int(u), float(sims[u])) for u in order
                if u != target]

    def _check_target(self, target):
        if not 0 <= target < self.n_users:
            raise RetrievalError('target %s out of range [0, %d)' %
                                 (target, self.n_users))


def dense_similarities(matrix, target):
    """Similarities of *target* to every user using a dense n x m copy of
    *matrix*.  Exact but wasteful; kept for cross-checking the sparse path.
    """
    dense = np.asarray(matrix.to_csr().todense())
    sq = np.einsum('ij,ij->i', dense, dense)
    return _cosine_from_parts(dense @ dense[target], sq[target], sq)


def top_k_neighbors(index, target, k):
    """Return a :class:`~ragrec.retrieval.sampling.NeighborContext` holding
    the ``min(k, n_users - 1)`` users most similar to *target*, together
    with each neighbor's known ratings.

    :param index: A :class:`SimilarityIndex` or a known-ratings
                  :class:`~ragrec.ingest.ratings.RatingMatrix`.

    """
    from ragrec.retrieval.sampling import NeighborContext

    if not isinstance(index, SimilarityIndex):
        index = SimilarityIndex(index)
    if k < 1:
        raise RetrievalError('k must be >= 1, got %s' % (k,))
    neighbors = index.ranking(target)[:k]
    return NeighborContext.from_neighbors(index.matrix, target, neighbors)


def write_neighbor_cache(path, rankings):
    """Write one line per target user: the target id followed by
    tab-separated ``neighbor:similarity`` pairs (6 decimals).

    :param rankings: dict mapping target to a list of :class:`Neighbor`.

    """
    with io.open(path, 'w', newline='\n') as f:
        for target in sorted(rankings):
            pairs = ['%d:%.6f' % (n.user, n.similarity)
                     for n in rankings[target]]
            f.write('\t'.join([str(target)] + pairs) + '\n')


def read_neighbor_cache(path):
    """Inverse of :func:`write_neighbor_cache`."""
    rankings = {}
    with io.open(path, 'rt') as f:
        for line in f:
            fields = line.rstrip('\n').split('\t')
            if not fields[0]:
                continue
            neighbors = []
            for pair in fields[1:]:
                user, sim = pair.split(':')
                neighbors.append(Neighbor(int(user), float(sim)))
            rankings[int(fields[0])] = neighbors
    return rankings
