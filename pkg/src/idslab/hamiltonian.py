"""Dirichlet restrictions H_D = Delta + V of the graph Schrodinger operator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .groups import PeriodicGraph, VertexSet
from .random_env import EnvironmentSample, SingleSitePotential, potential_on

DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class DirichletMatrix:
    """Restriction of the quadratic form of H to functions supported in D.

    The diagonal carries the ambient degree, so cut edges still contribute.
    """

    matrix: Union[np.ndarray, sp.csr_matrix]
    domain: VertexSet
    potential: np.ndarray

    @property
    def n(self) -> int:
        return self.domain.size

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def gershgorin(self):
        M = self.matrix
        if self.is_sparse:
            diag = M.diagonal()
            rad = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
        else:
            diag = np.diag(M)
            rad = np.abs(M).sum(axis=1) - np.abs(diag)
        return float(np.min(diag - rad)), float(np.max(diag + rad))

    def triplets(self) -> str:
        """Upper-triangle (i, j, value) lines."""
        C = sp.coo_matrix(self.matrix)
        lines = [f"{i} {j} {v:.17g}\n" for i, j, v in sorted(zip(C.row, C.col, C.data)) if i <= j]
        return "".join(lines)


def assemble_dirichlet(
    D: VertexSet,
    w: Optional[EnvironmentSample],
    u: Optional[SingleSitePotential],
    graph: PeriodicGraph,
    sparse: Optional[bool] = None,
) -> DirichletMatrix:
    """H^w_D with ambient degree + V^w on the diagonal and -1 for each edge inside D.

    ``w=None`` gives the free operator.
    """
    n = D.size
    if n == 0:
        raise ValueError("empty domain")
    if sparse is None:
        sparse = n > DENSE_LIMIT
    V = np.zeros(n) if (w is None or u is None) else potential_on(D, w, u)
    index = D.index
    rows, cols = [], []
    deg = np.empty(n)
    for k, x in enumerate(D.vertices):
        deg[k] = graph.degree(x)
        for y in graph.neighbors(x):
            j = index.get(y)
            if j is not None:
                rows.append(k)
                cols.append(j)
    diag = deg + V
    if sparse:
        M = sp.csr_matrix((-np.ones(len(rows)), (rows, cols)), shape=(n, n)) + sp.diags(diag)
        M = sp.csr_matrix(M)
    else:
        M = np.zeros((n, n))
        M[rows, cols] = -1.0
        M[np.arange(n), np.arange(n)] = diag
    return DirichletMatrix(M, D, V)


def free_heat_diagonal(t: float, d: int = 1) -> float:
    """k(t, x, x) of the free Laplacian on Z^d: (e^{-2t} I_0(2t))^d.

    I_0(2t) = sum_k t^{2k}/(k!)^2; terms are summed in log space with the
    geometric tail bound below 1e-17 relative.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    return _scaled_i0(t) ** d


def _scaled_i0(t: float) -> float:
    logt = math.log(t)
    terms = []
    k = 0
    total = 0.0
    while True:
        term = math.exp(2 * k * logt - 2 * math.lgamma(k + 1) - 2 * t)
        terms.append(term)
        total += term
        k += 1
        q = t * t / (k * k)  # ratio of the next term to the current one bounds all later ratios
        if q < 1 and term * q / (1 - q) <= 1e-17 * total:
            break
    return math.fsum(terms)
