"""Sparse symmetric factorisation used by every solver.

Symmetric positive definite systems go through CHOLMOD (the copy bundled
with cvxopt) under a METIS nested-dissection ordering. Indefinite systems
fall back to CHOLMOD's simplicial LDL^T, and small or awkward systems to
SuperLU. Solutions are improved by a few steps of iterative refinement.
"""
from __future__ import annotations

import hashlib
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

try:
    import cvxopt
    import cvxopt.cholmod as _cholmod
except ImportError:  # pragma: no cover - cvxopt is a declared dependency
    cvxopt = None

try:
    import pymetis
except ImportError:  # pragma: no cover
    pymetis = None

_DIRECT_DENSE_LIMIT = 200  # below this many dofs SuperLU is simply faster


_ordering_cache: dict[str, np.ndarray | None] = {}


def _pattern_key(A) -> str:
    A = sp.csr_matrix(A)
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(A.shape, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(A.indptr, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(A.indices, dtype=np.int64).tobytes())
    return h.hexdigest()


def nested_dissection(A) -> np.ndarray | None:
    """METIS fill-reducing permutation of the graph of ``A``, or None.

    The last ordering is cached by sparsity pattern, since Newton
    iterations and prestressed solves refactor the same pattern.
    """
    if pymetis is None or A.shape[0] < 2:
        return None
    key = _pattern_key(A)
    if key not in _ordering_cache:
        _ordering_cache.clear()
        _ordering_cache[key] = _metis(A)
    return _ordering_cache[key]


def _metis(A) -> np.ndarray | None:
    G = sp.csr_matrix(A, copy=True)
    G.data[:] = 1.0
    G = (G + G.T).tocsr()
    G.setdiag(0)
    G.eliminate_zeros()
    if G.nnz == 0:
        return None
    perm, _ = pymetis.nested_dissection(pymetis.CSRAdjacency(G.indptr, G.indices))
    return np.asarray(perm)


class Factor:
    """Reusable solver for a fixed symmetric matrix ``A``.

    ``kind`` records which factorisation succeeded: ``"cholesky"``,
    ``"ldl"`` or ``"lu"``.
    """

    def __init__(self, A, refine: int = 3):
        self.A = sp.csr_matrix(A)
        self.n = self.A.shape[0]
        self.refine = refine
        self.kind = None
        if self.n == 0:
            self.kind = "empty"
            return
        if cvxopt is not None and self.n > _DIRECT_DENSE_LIMIT:
            try:
                self._cholmod(supernodal=True)
                return
            except ArithmeticError:
                logger.info("matrix not positive definite, retrying with LDL^T")
            try:
                self._cholmod(supernodal=False)
                return
            except ArithmeticError:
                logger.info("LDL^T failed, falling back to SuperLU")
        self._lu()

    def _cholmod(self, supernodal: bool):
        L = sp.tril(self.A).tocsc()
        L.sort_indices()
        cols = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(L.indptr))
        Ac = cvxopt.spmatrix(
            cvxopt.matrix(np.ascontiguousarray(L.data, dtype=float)),
            cvxopt.matrix(L.indices.astype(np.int64)),
            cvxopt.matrix(cols),
            (self.n, self.n),
        )
        perm = nested_dissection(self.A)
        old = dict(_cholmod.options)
        _cholmod.options["supernodal"] = 2 if supernodal else 0
        _cholmod.options["postorder"] = True
        try:
            if perm is not None:
                F = _cholmod.symbolic(Ac, p=cvxopt.matrix(perm.astype(np.int64)), uplo="L")
            else:
                F = _cholmod.symbolic(Ac, uplo="L")
            _cholmod.numeric(Ac, F)
        finally:
            _cholmod.options.clear()
            _cholmod.options.update(old)
        self._F = F
        self.kind = "cholesky" if supernodal else "ldl"

    def _lu(self):
        self._lu_obj = spla.splu(self.A.tocsc(), permc_spec="MMD_AT_PLUS_A")
        self.kind = "lu"

    def _raw_solve(self, B):
        if self.kind in ("cholesky", "ldl"):
            X = cvxopt.matrix(np.asfortranarray(B, dtype=float))
            _cholmod.solve(self._F, X)
            return np.array(X).reshape(B.shape)
        return self._lu_obj.solve(B)

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        B = b.reshape(self.n, -1)
        X = self._raw_solve(B)
        for _ in range(self.refine):
            R = B - self.A @ X
            X = X + self._raw_solve(R)
        return X.reshape(b.shape)

    __call__ = solve


def factorize(A, refine: int = 3) -> Factor:
    return Factor(A, refine)


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)
