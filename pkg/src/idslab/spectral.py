"""Spectra, eigenvalue counting functions, heat traces and heat-kernel diagonals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.special

from .eigen import sturm_count as _sturm_count
from .eigen import symmetric_eigh
from .groups import PeriodicGraph, VertexSet, distance_layers
from .hamiltonian import DENSE_LIMIT, DirichletMatrix, assemble_dirichlet
from .folner import topological_boundary
from .random_env import EnvironmentSample, SingleSitePotential


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.eigenvalues)

    def distribution(self, volume: Optional[int] = None) -> "DistributionFunction":
        return DistributionFunction.from_eigenvalues(self.eigenvalues, volume or len(self))


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    """Left-continuous step function sum_j counts_j [lambda_j < .] / volume."""

    jumps: np.ndarray
    counts: np.ndarray
    volume: int

    @classmethod
    def from_eigenvalues(cls, eigenvalues, volume: int) -> "DistributionFunction":
        vals, counts = np.unique(np.asarray(eigenvalues, dtype=float), return_counts=True)
        return cls(vals, counts, int(volume))

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        cum = np.concatenate([[0], np.cumsum(self.counts)])
        return cum[np.searchsorted(self.jumps, lam, side="left")] / self.volume

    @property
    def total(self) -> float:
        return int(self.counts.sum()) / self.volume

    def laplace(self, t: float) -> float:
        """Stieltjes integral of e^{-t lambda} against this function (correctly rounded sum)."""
        terms = np.repeat(np.exp(-t * self.jumps), self.counts)
        return math.fsum(terms.tolist()) / self.volume


def eigenvalues(M: DirichletMatrix, want_vectors: bool = False) -> Spectrum:
    if M.n > DENSE_LIMIT:
        raise ValueError(f"dense solve limited to n <= {DENSE_LIMIT}; use chebyshev_heat_trace")
    w, V = symmetric_eigh(M.dense(), want_vectors)
    return Spectrum(w, V)


def count_below(s: Spectrum, lam: float, volume: Optional[int] = None):
    """(#{i : lambda_i < lam}, that count / |D|)."""
    k = int(np.searchsorted(s.eigenvalues, lam, side="left"))
    return k, k / (volume or len(s))


def sturm_count(M: DirichletMatrix, lam: float) -> int:
    return _sturm_count(M.dense(), lam)


def heat_trace(s: Spectrum, t: float, volume: Optional[int] = None) -> float:
    """(1/|D|) sum_i exp(-t lambda_i)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    terms = np.exp(-t * np.asarray(s.eigenvalues, dtype=float))
    return math.fsum(terms.tolist()) / (volume or len(s))


def heat_kernel_diagonal(s: Spectrum, t: float, x: Optional[int] = None):
    """k_D(t, x, x) = sum_i exp(-t lambda_i) v_i(x)^2; all x when ``x`` is None."""
    if s.eigenvectors is None:
        raise ValueError("spectrum has no eigenvectors")
    weights = np.exp(-t * s.eigenvalues)
    V = s.eigenvectors
    if x is None:
        return (V * V) @ weights
    return float((V[x] * V[x]) @ weights)


def padded_heat_diagonal(
    A: VertexSet,
    w: Optional[EnvironmentSample],
    u: Optional[SingleSitePotential],
    graph: PeriodicGraph,
    t,
    pad: int,
) -> np.ndarray:
    """Ambient k(t, x, x) for x in A, approximated on the pad-neighbourhood of A.

    A sequence of times gives one row per t from a single eigendecomposition.
    """
    P = VertexSet.of(distance_layers(graph, A.vertices, pad))
    M = assemble_dirichlet(P, w, u, graph)
    s = eigenvalues(M, True)
    idx = [P.index[x] for x in A.vertices]
    if np.ndim(t) == 0:
        return heat_kernel_diagonal(s, float(t))[idx]
    return np.array([heat_kernel_diagonal(s, float(tk))[idx] for tk in t])


# -- stochastic Chebyshev trace -------------------------------------------------

@dataclass(frozen=True)
class TraceEstimate:
    value: float
    stderr: float
    degree: int
    truncation_bound: float


class TruncationError(ValueError):
    pass


def chebyshev_heat_trace(
    M: DirichletMatrix,
    t: float,
    probes: int,
    degree: int,
    rng: np.random.Generator,
    tol: float = 1e-8,
) -> TraceEstimate:
    """Hutchinson estimate of (1/n) Tr exp(-tH) with Rademacher probes.

    exp(-t x) on the Gershgorin interval [c-h, c+h] is expanded as
    exp(-tc) [I_0(th) + 2 sum_k (-1)^k I_k(th) T_k(y)], y = (x-c)/h. Raises
    TruncationError when the dropped tail exceeds ``tol``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    n = M.n
    if t == 0:
        return TraceEstimate(1.0, 0.0, 0, 0.0)
    lo, hi = M.gershgorin()
    c = 0.5 * (hi + lo)
    h = max(0.5 * (hi - lo), 1e-300)
    tau = t * h
    ks = np.arange(degree + 1)
    coef = scipy.special.ive(ks, tau) * math.exp(-t * c + tau)
    coef[1:] *= 2 * (-1.0) ** ks[1:]
    tail = _bessel_tail(degree, tau) * math.exp(-t * c + tau)
    if tail > tol:
        raise TruncationError(f"degree {degree} leaves truncation bound {tail:.3g} > {tol:.3g}")
    H = M.matrix

    def op(v):
        return (H @ v - c * v) / h

    Z = rng.choice([-1.0, 1.0], size=(n, probes))
    T0 = Z
    acc = coef[0] * T0
    if degree >= 1:
        T1 = op(T0)
        acc = acc + coef[1] * T1
        for k in range(2, degree + 1):
            T0, T1 = T1, 2.0 * op(T1) - T0
            acc = acc + coef[k] * T1
    samples = np.einsum("ij,ij->j", Z, acc) / n
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(probes)) if probes > 1 else float("inf")
    return TraceEstimate(mean, se, degree, tail)


def _bessel_tail(degree: int, tau: float) -> float:
    """2 sum_{k > degree} I_k(tau) e^{-tau}, bounded via the geometric ratio of I_k."""
    k = degree + 1
    first = scipy.special.ive(k, tau)
    # I_{j+1}/I_j <= tau / (j + sqrt(j^2 + tau^2)), decreasing in j
    q = tau / (k + math.sqrt(k * k + tau * tau))
    if q >= 1:
        return float("inf")
    return 2 * first / (1 - q)


# -- not feeling the boundary -------------------------------------------------------

def collar_depths(D: VertexSet, graph: PeriodicGraph) -> Dict:
    """Graph distance from each vertex of D to the two-sided boundary of D."""
    bd = topological_boundary(D, graph)
    dist = distance_layers(graph, bd.vertices, max(D.size, 1))
    return {x: dist[x] for x in D.vertices}


@dataclass
class BoundaryTable:
    t_values: List[float]
    depths: List[int]
    gaps: np.ndarray  # (len(t), len(depths)) worst |k_D' - k_D| at collar depth >= h
    epsilon: float

    def h_for(self, t: float, eps: Optional[float] = None) -> Optional[int]:
        eps = self.epsilon if eps is None else eps
        row = self.gaps[self.t_values.index(t)]
        for h, g in zip(self.depths, row):
            if g <= eps:
                return h
        return None


def boundary_gap_profile(
    D: VertexSet,
    D_big: VertexSet,
    w: Optional[EnvironmentSample],
    u: Optional[SingleSitePotential],
    graph: PeriodicGraph,
    t: float,
):
    """Per collar depth h: max over x in D at depth h of |k_{D_big}(t,x,x) - k_D(t,x,x)|."""
    return _gap_profiles(D, D_big, w, u, graph, [t])[0]


def _gap_profiles(D, D_big, w, u, graph, t_values) -> List[Dict[int, float]]:
    sD = eigenvalues(assemble_dirichlet(D, w, u, graph), True)
    sB = eigenvalues(assemble_dirichlet(D_big, w, u, graph), True)
    depth = collar_depths(D, graph)
    idx = np.array([D_big.index[x] for x in D.vertices])
    hs = np.array([depth[x] for x in D.vertices])
    out = []
    for t in t_values:
        gaps = np.abs(heat_kernel_diagonal(sB, t)[idx] - heat_kernel_diagonal(sD, t))
        prof: Dict[int, float] = {}
        for h, g in zip(hs.tolist(), gaps.tolist()):
            prof[h] = max(prof.get(h, 0.0), g)
        out.append(prof)
    return out


def boundary_feeling_table(
    D: VertexSet,
    D_big: VertexSet,
    w,
    u,
    graph: PeriodicGraph,
    t_values: Sequence[float],
    epsilon: float = 1e-6,
) -> BoundaryTable:
    """Empirical h(t, eps): worst gap over collar depths >= h, for each t."""
    profiles = _gap_profiles(D, D_big, w, u, graph, t_values)
    depths = sorted(profiles[0])
    rows = []
    for prof in profiles:
        tailmax, running = [], 0.0
        for h in reversed(depths):
            running = max(running, prof[h])
            tailmax.append(running)
        rows.append(tailmax[::-1])
    return BoundaryTable(list(t_values), depths, np.array(rows), epsilon)
