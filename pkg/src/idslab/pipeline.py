"""From admissible domain sequences to IDS estimates and their Laplace transforms."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .folner import (
    FolnerSequence,
    extract_tempered_subsequence,
    h_approximate,
    h_boundary,
    sequence_tempered_quotients,
)
from .groups import PeriodicGraph, VertexSet, cayley_graph, integer_lattice, phi
from .hamiltonian import assemble_dirichlet, free_heat_diagonal
from .random_env import CouplingLaw, EnvironmentSample, SingleSitePotential, potential_on
from .spectral import DistributionFunction, Spectrum, eigenvalues, heat_trace, padded_heat_diagonal

log = logging.getLogger(__name__)


class AdmissibilityError(ValueError):
    pass


class SolverTaskError(RuntimeError):
    def __init__(self, n: int, seed: int, cause: Exception):
        super().__init__(f"solver failed at (n={n}, seed={seed}): {cause}")
        self.n = n
        self.seed = seed


@dataclass
class AdmissibleSequence:
    folner: FolnerSequence
    base: List[VertexSet]  # A_n = phi(I_n)
    domains: List[VertexSet]  # D_n
    h: int
    C: float
    tempered_quotients: List[float]

    def __len__(self):
        return len(self.domains)

    @property
    def sizes(self) -> List[int]:
        return [D.size for D in self.domains]


def build_admissible(
    graph: PeriodicGraph,
    seq: FolnerSequence,
    h: int = 0,
    seed: int = 0,
    C: float = 4.0,
    toggle_p: float = 0.5,
) -> AdmissibleSequence:
    """Tempered subsequence of ``seq``, A_n = phi(I_n), and D_n an h-approximation of A_n."""
    spec = graph.group
    tempered = extract_tempered_subsequence(spec, seq, C)
    if len(tempered) < 3:
        raise AdmissibilityError(
            f"tempered extraction with C={C} kept only {len(tempered)} sets (need >= 3)"
        )
    quotients = sequence_tempered_quotients(spec, tempered)
    assert all(q <= C for q in quotients)
    base, domains = [], []
    for n, I in enumerate(tempered.index_sets):
        A = phi(I, graph)
        if h == 0:
            D = A
        else:
            D = h_approximate(A, h, np.random.default_rng([seed, n]), graph, toggle_p)
            collar = h_boundary(A, h, graph)
            assert (A ^ D).issubset(collar), "h-approximation escaped the collar"
        if D.size == 0:
            raise AdmissibilityError(f"domain {n} became empty")
        base.append(A)
        domains.append(D)
    return AdmissibleSequence(tempered, base, domains, h, C, [float(q) for q in quotients])


def constant_sequence(graph: PeriodicGraph, I, copies: int = 3) -> AdmissibleSequence:
    I = frozenset(I)
    A = phi(I, graph)
    seq = FolnerSequence((I,) * copies)
    return AdmissibleSequence(seq, [A] * copies, [A] * copies, 0, 1.0, [1.0] * (copies - 1))


# -- spectra over the (n, seed) grid ------------------------------------------------

@dataclass(frozen=True)
class Model:
    graph: PeriodicGraph
    law: Optional[CouplingLaw]
    u: Optional[SingleSitePotential]

    @property
    def free(self) -> bool:
        return self.law is None or self.u is None

    def env(self, seed: int) -> Optional[EnvironmentSample]:
        if self.free:
            return None
        return EnvironmentSample(seed, self.law, self.graph.group)

    @property
    def C0(self) -> float:
        if self.free:
            return 0.0
        from .random_env import uniform_bound

        return uniform_bound(self.law, self.u)


def _solve(args):
    model, D, n, seed = args
    try:
        M = assemble_dirichlet(D, model.env(seed), model.u, model.graph)
        return eigenvalues(M).eigenvalues
    except Exception as exc:  # tag with task coordinates
        raise SolverTaskError(n, seed, exc) from exc


@dataclass(eq=False)
class SpectraTable:
    sizes: List[int]
    seeds: List[int]
    eigs: List[List[np.ndarray]]  # [n][seed]


def solve_spectra(adm: AdmissibleSequence, model: Model, seeds: Sequence[int], workers: int = 1) -> SpectraTable:
    seeds = list(seeds)
    if model.free:
        seeds_eff = seeds[:1]
    else:
        seeds_eff = seeds
    tasks = [(model, D, n, s) for n, D in enumerate(adm.domains) for s in seeds_eff]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve, tasks))
    else:
        results = [_solve(t) for t in tasks]
    k = len(seeds_eff)
    eigs = [results[n * k:(n + 1) * k] for n in range(len(adm.domains))]
    if model.free:
        # the free operator does not depend on the seed
        eigs = [row * len(seeds) for row in eigs]
    return SpectraTable(adm.sizes, seeds, eigs)


# -- counting functions --------------------------------------------------------------

@dataclass(eq=False)
class IDSEstimate:
    lambda_grid: np.ndarray
    sizes: List[int]
    seeds: List[int]
    values: np.ndarray  # (n, seed, lambda)
    min_eigs: np.ndarray  # (n, seed)
    max_eigs: np.ndarray
    atoms: np.ndarray  # repeated eigenvalues at the largest n

    @property
    def limit(self) -> np.ndarray:
        return self.values[-1].mean(axis=0)

    @property
    def mean_per_n(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def cauchy_gaps(self) -> np.ndarray:
        m = self.mean_per_n
        return np.abs(np.diff(m, axis=0))

    def atom_free_mask(self, tol: float = 1e-6) -> np.ndarray:
        if self.atoms.size == 0:
            return np.ones(self.lambda_grid.shape, dtype=bool)
        d = np.abs(self.lambda_grid[:, None] - self.atoms[None, :]).min(axis=1)
        return d > tol


def _repeated(e: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if e.size < 2:
        return np.zeros(0)
    close = np.diff(e) <= tol * max(1.0, float(np.abs(e).max()))
    return np.unique(e[1:][close])


def ids_from_spectra(table: SpectraTable, lambda_grid) -> IDSEstimate:
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("lambda grid must be sorted")
    N, S = len(table.sizes), len(table.seeds)
    values = np.empty((N, S, grid.size))
    mins = np.empty((N, S))
    maxs = np.empty((N, S))
    for n in range(N):
        for k in range(S):
            e = table.eigs[n][k]
            values[n, k] = np.searchsorted(e, grid, side="left") / table.sizes[n]
            mins[n, k] = e[0]
            maxs[n, k] = e[-1]
    atoms = np.unique(np.concatenate([_repeated(e) for e in table.eigs[-1]] or [np.zeros(0)]))
    return IDSEstimate(grid, list(table.sizes), list(table.seeds), values, mins, maxs, atoms)


def counting_functions(
    adm: AdmissibleSequence,
    seeds: Sequence[int],
    model: Model,
    lambda_grid,
    workers: int = 1,
) -> IDSEstimate:
    return ids_from_spectra(solve_spectra(adm, model, seeds, workers), lambda_grid)


# -- Laplace transforms ------------------------------------------------------------

@dataclass(eq=False)
class LaplaceReport:
    t_grid: np.ndarray
    sizes: List[int]
    seeds: List[int]
    values: np.ndarray  # (n, seed, t)
    identity_gap: np.ndarray  # (n, seed, t), trace minus Stieltjes integral
    reference: np.ndarray  # (t,) ergodic reference, nan when not computed
    reference_stderr: np.ndarray
    hk_gap: np.ndarray  # (n, t), nan when not computed

    @property
    def mean_per_n(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def cauchy_gaps(self) -> np.ndarray:
        return np.abs(np.diff(self.mean_per_n, axis=0))


def laplace_from_spectra(table: SpectraTable, t_grid) -> LaplaceReport:
    t_grid = np.asarray(t_grid, dtype=float)
    N, S, T = len(table.sizes), len(table.seeds), t_grid.size
    values = np.empty((N, S, T))
    gap = np.empty((N, S, T))
    for n in range(N):
        for k in range(S):
            s = Spectrum(table.eigs[n][k])
            dist = DistributionFunction.from_eigenvalues(s.eigenvalues, table.sizes[n])
            for j, t in enumerate(t_grid):
                tr = heat_trace(s, t, table.sizes[n])
                values[n, k, j] = tr
                gap[n, k, j] = tr - dist.laplace(t)
    nan = np.full(T, np.nan)
    return LaplaceReport(t_grid, list(table.sizes), list(table.seeds), values, gap, nan, nan.copy(), np.full((N, T), np.nan))


def laplace_pipeline(
    adm: AdmissibleSequence,
    seeds: Sequence[int],
    model: Model,
    t_grid,
    workers: int = 1,
    table: Optional[SpectraTable] = None,
) -> LaplaceReport:
    if table is None:
        table = solve_spectra(adm, model, seeds, workers)
    rep = laplace_from_spectra(table, t_grid)
    if np.any(rep.identity_gap != 0):
        raise AssertionError("Laplace identity violated")
    return rep


# -- heat kernel lemma ------------------------------------------------------------

@dataclass
class KernelLemmaGaps:
    t: float
    pad: int
    gaps: List[float]
    warnings: List[str] = field(default_factory=list)


def heat_kernel_lemma_gaps(
    adm: AdmissibleSequence,
    model: Model,
    seed: int,
    t_grid: Sequence[float],
    pad: int,
) -> np.ndarray:
    """Gaps for several t at once, shape (n, t); one decomposition per domain."""
    w = model.env(seed)
    out = np.empty((len(adm), len(t_grid)))
    for n, (A, D) in enumerate(zip(adm.base, adm.domains)):
        amb = padded_heat_diagonal(A, w, model.u, model.graph, t_grid, pad)
        s = eigenvalues(assemble_dirichlet(D, w, model.u, model.graph))
        for j, t in enumerate(t_grid):
            out[n, j] = abs(math.fsum(amb[j].tolist()) / A.size - heat_trace(s, t, D.size))
    return out


def heat_kernel_lemma_gap(
    adm: AdmissibleSequence,
    model: Model,
    seed: int,
    t: float,
    pad: int,
    required_pad: Optional[int] = None,
) -> KernelLemmaGaps:
    """Per n: |mean over A_n of the padded ambient diagonal - (1/|D_n|) Tr exp(-t H_{D_n})|."""
    warnings = []
    if required_pad is not None and pad < required_pad:
        warnings.append(f"pad {pad} below empirical h(t={t}, 1e-6) = {required_pad}")
    gaps = heat_kernel_lemma_gaps(adm, model, seed, [t], pad)[:, 0]
    return KernelLemmaGaps(t, pad, [float(g) for g in gaps], warnings)


# -- ergodic averages -----------------------------------------------------------------

SiteFunction = Callable[[Optional[EnvironmentSample], VertexSet], np.ndarray]


def potential_site_function(u: SingleSitePotential) -> SiteFunction:
    return lambda w, D: potential_on(D, w, u)


def constant_site_function(c: float = 1.0) -> SiteFunction:
    return lambda w, D: np.full(D.size, float(c))


def heat_diagonal_site_function(model: Model, t: float, pad: int) -> SiteFunction:
    return lambda w, D: padded_heat_diagonal(D, w, model.u, model.graph, t, pad)


@dataclass
class ErgodicResult:
    sizes: List[int]
    averages: List[float]
    stderrs: List[float]  # site-sample standard error of each average
    reference: float
    reference_stderr: float


def ergodic_average(
    f: SiteFunction,
    w: Optional[EnvironmentSample],
    sets: Sequence[VertexSet],
    graph: PeriodicGraph,
    reference_seeds: Sequence[int] = (),
) -> ErgodicResult:
    """Site averages of f(w, .) over each set, and the Monte Carlo estimate of
    (1/|F|) E sum_{x in F} f(., x) from fresh environments. ``w=None`` means the
    free model, where every fresh environment is None too."""
    avgs, ses = [], []
    for A in sets:
        vals = np.asarray(f(w, A), dtype=float)
        avgs.append(math.fsum(vals.tolist()) / vals.size)
        ses.append(float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("inf"))
    F = phi([graph.group.identity], graph)
    samples = []
    for s in reference_seeds:
        fresh = None if w is None else EnvironmentSample(s, w.law, w.group)
        samples.append(float(np.mean(f(fresh, F))))
    if samples:
        ref = float(np.mean(samples))
        ref_se = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else float("inf")
    else:
        ref, ref_se = float("nan"), float("nan")
    return ErgodicResult([A.size for A in sets], avgs, ses, ref, ref_se)


# -- Pastur / Subin ----------------------------------------------------------------------

@dataclass
class HypothesisFailure:
    hypothesis: str
    n: int
    t: Optional[float]
    value: float
    detail: str = ""


@dataclass
class PasturSubinVerdict:
    passed: bool
    failures: List[HypothesisFailure]
    notes: List[str]
    limit: np.ndarray
    lambda_gaps: np.ndarray
    t_gaps: np.ndarray


def heat_witness(graph: PeriodicGraph, C0: float) -> Callable[[float], float]:
    """A valid bound for (1/|D|) Tr exp(-t H_D): exp(C0 t) times the free diagonal on
    standard Z^d Cayley graphs, exp(C0 t) otherwise."""
    spec = graph.group
    if spec.is_abelian_lattice and graph == cayley_graph(integer_lattice(spec.dim, max_radius=spec.max_radius)):
        d = spec.dim
        return lambda t: math.exp(C0 * t) * free_heat_diagonal(t, d)
    return lambda t: math.exp(C0 * t)


def pastur_subin_limit(
    report: LaplaceReport,
    idse: IDSEstimate,
    C0: float,
    witness: Callable[[float], float],
    cauchy_threshold: float = 1e-2,
) -> PasturSubinVerdict:
    failures: List[HypothesisFailure] = []
    notes: List[str] = []
    floor = -C0 - 1e-10
    for n in range(idse.min_eigs.shape[0]):
        for k in range(idse.min_eigs.shape[1]):
            v = float(idse.min_eigs[n, k])
            if v < floor:
                failures.append(HypothesisFailure("a", n, None, v, f"eigenvalue below -C0={-C0}"))
    for j, t in enumerate(report.t_grid):
        bound = witness(float(t))
        for n in range(report.values.shape[0]):
            v = float(report.values[n, :, j].max())
            if v > bound * (1 + 1e-12):
                failures.append(HypothesisFailure("b", n, float(t), v, f"exceeds witness {bound}"))
    t_gaps = report.cauchy_gaps
    if t_gaps.size:
        for j, t in enumerate(report.t_grid):
            if t_gaps[-1, j] > cauchy_threshold:
                failures.append(HypothesisFailure("c", t_gaps.shape[0], float(t), float(t_gaps[-1, j]), "Cauchy gap above threshold"))
        if np.all(t_gaps == 0):
            notes.append("stationary sequence")
        elif np.any(np.diff(t_gaps, axis=0) > 0):
            notes.append("Cauchy gaps not monotone along n")
    return PasturSubinVerdict(not failures, failures, notes, idse.limit, idse.cauchy_gaps, t_gaps)


def non_randomness_check(groups: Sequence[IDSEstimate], tol: float = 1e-6) -> Dict[Tuple[int, int], float]:
    """Sup over atom-free grid points of |N_i - N_j| at the largest n, for every pair."""
    if len(groups) < 2:
        raise ValueError("need at least two seed groups")
    mask = np.ones(groups[0].lambda_grid.shape, dtype=bool)
    for g in groups:
        mask &= g.atom_free_mask(tol)
    out = {}
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            diff = np.abs(groups[i].limit - groups[j].limit)[mask]
            out[(i, j)] = float(diff.max()) if diff.size else 0.0
    return out
