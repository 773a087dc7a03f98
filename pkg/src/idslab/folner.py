"""Folner sets, temperedness, h-boundaries and the isoperimetric property (P)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .groups import (
    Element,
    GroupSpec,
    PeriodicGraph,
    VertexSet,
    ball,
    ball_size,
    distance_layers,
    phi,
)

log = logging.getLogger(__name__)

DEFAULT_TEMPERED_C = 4.0
DEFAULT_DECAY_THRESHOLD = 0.05


@dataclass(frozen=True)
class FolnerSequence:
    """Monotone increasing finite index sets I_1 c I_2 c ...

    ``provenance`` is one of "balls", "metric_balls", "user"; for balls ``radii``
    holds r_n with I_n = E^{r_n}.
    """

    index_sets: Tuple[frozenset, ...]
    provenance: str = "user"
    radii: Tuple[int, ...] = ()
    truncated: bool = False

    def __post_init__(self):
        if not self.index_sets:
            raise ValueError("empty Folner sequence")
        for I in self.index_sets:
            if not I:
                raise ValueError("index sets must be non-empty")
        for a, b in zip(self.index_sets, self.index_sets[1:]):
            if not a <= b:
                raise ValueError("index sets must be monotone increasing")
        if self.provenance == "balls":
            if len(self.radii) != len(self.index_sets):
                raise ValueError("ball provenance needs one radius per set")
            if any(r2 <= r1 for r1, r2 in zip(self.radii, self.radii[1:])):
                raise ValueError("radii must be strictly increasing")

    def __len__(self):
        return len(self.index_sets)

    @classmethod
    def from_balls(cls, spec: GroupSpec, radii: Sequence[int]) -> "FolnerSequence":
        radii = tuple(int(r) for r in radii)
        return cls(tuple(ball(spec, r) for r in radii), "balls", radii)

    def subsequence(self, keep: Sequence[int], truncated: bool = False) -> "FolnerSequence":
        radii = tuple(self.radii[k] for k in keep) if self.radii else ()
        return FolnerSequence(tuple(self.index_sets[k] for k in keep), self.provenance, radii, truncated)


# -- exact set arithmetic -------------------------------------------------------

def right_translate(spec: GroupSpec, I: Iterable[Element], gamma: Element) -> frozenset:
    mul = spec._mul
    return frozenset(mul(g, gamma) for g in I)


def folner_defect(spec: GroupSpec, I: frozenset, gamma: Element) -> Fraction:
    """|I Delta I gamma| / |I|."""
    if not I:
        raise ValueError("empty index set")
    spec.check(gamma)
    Ig = right_translate(spec, I, gamma)
    return Fraction(len(I ^ Ig), len(I))


def product_set(spec: GroupSpec, A: Iterable[Element], B: Iterable[Element]) -> frozenset:
    """{a b : a in A, b in B} by exhaustive enumeration."""
    A = list(A)
    B = list(B)
    if spec.is_abelian_lattice and len(A) * len(B) > 4096:
        return _lattice_sumset(A, B)
    mul = spec._mul
    return frozenset(mul(a, b) for a in A for b in B)


def _lattice_sumset(A, B) -> frozenset:
    a = np.asarray(A, dtype=np.int64)
    b = np.asarray(B, dtype=np.int64)
    seen = set()
    step = max(1, 2_000_000 // max(len(a), 1))
    for k in range(0, len(b), step):
        s = (a[:, None, :] + b[None, k:k + step, :]).reshape(-1, a.shape[1])
        seen.update(map(tuple, np.unique(s, axis=0).tolist()))
    return frozenset(seen)


def tempered_quotient(spec: GroupSpec, I_n: frozenset, I_next: frozenset) -> Fraction:
    """|I_next I_n^{-1}| / |I_next|."""
    if not I_n or not I_next:
        raise ValueError("empty index set")
    inv = spec._inv
    prod = product_set(spec, I_next, [inv(g) for g in I_n])
    return Fraction(len(prod), len(I_next))


def _ball_tempered_quotient(spec: GroupSpec, r: int, r_next: int) -> Fraction:
    # E^{r'} (E^r)^{-1} = E^{r'+r} since E = E^{-1}
    return Fraction(ball_size(spec, r + r_next), ball_size(spec, r_next))


def sequence_tempered_quotients(spec: GroupSpec, seq: FolnerSequence) -> List[Fraction]:
    out = []
    for k in range(len(seq) - 1):
        if seq.provenance == "balls":
            out.append(_ball_tempered_quotient(spec, seq.radii[k], seq.radii[k + 1]))
        else:
            out.append(tempered_quotient(spec, seq.index_sets[k], seq.index_sets[k + 1]))
    return out


def ball_shell_quotient(spec: GroupSpec, r: int, d: int) -> Fraction:
    """|E^{r+d} minus E^{r-d}| / |E^r|."""
    return Fraction(ball_size(spec, r + d) - ball_size(spec, r - d), ball_size(spec, r))


def select_radii(spec: GroupSpec, max_radius: int, d_max: int, epsilon: float) -> List[int]:
    """Radii r <= max_radius whose shell quotients stay <= epsilon for every d <= d_max."""
    if not (max_radius >= d_max >= 1):
        raise ValueError("need max_radius >= d_max >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    eps = Fraction(epsilon)
    ball_size(spec, max_radius + d_max)
    return [
        r for r in range(1, max_radius + 1)
        if all(ball_shell_quotient(spec, r, d) <= eps for d in range(1, d_max + 1))
    ]


def extract_tempered_subsequence(spec: GroupSpec, seq: FolnerSequence, C: float = DEFAULT_TEMPERED_C) -> FolnerSequence:
    """Greedy: keep I_1, then repeatedly the earliest later set whose quotient against
    the last kept set is <= C. Sets the ``truncated`` flag when the scan stalls."""
    if C < 1:
        raise ValueError("temperedness constant must be >= 1")
    bound = Fraction(C)
    keep = [0]
    k = 1
    truncated = False
    while k < len(seq):
        last = keep[-1]
        j = k
        while j < len(seq):
            if _pair_quotient(spec, seq, last, j) <= bound:
                break
            j += 1
        if j == len(seq):
            truncated = True
            break
        keep.append(j)
        k = j + 1
    return seq.subsequence(keep, truncated)


def _pair_quotient(spec, seq, i, j) -> Fraction:
    if seq.provenance == "balls":
        return _ball_tempered_quotient(spec, seq.radii[i], seq.radii[j])
    return tempered_quotient(spec, seq.index_sets[i], seq.index_sets[j])


# -- boundaries -----------------------------------------------------------------

def topological_boundary(D: VertexSet, graph: PeriodicGraph, window: Optional[VertexSet] = None) -> VertexSet:
    """Both endpoints of every cut edge of D (edges leaving ``window`` are ignored)."""
    members = D.members
    W = window.members if window is not None else None
    out = set()
    for x in D.vertices:
        for y in graph.neighbors(x):
            if y not in members and (W is None or y in W):
                out.add(x)
                out.add(y)
    return VertexSet.of(out)


def h_boundary(D: VertexSet, h: int, graph: PeriodicGraph, window: Optional[VertexSet] = None) -> VertexSet:
    """All vertices within graph distance h of the two-sided boundary of D."""
    if h < 0:
        raise ValueError("h must be non-negative")
    bd = topological_boundary(D, graph, window)
    if h == 0 or not bd.size:
        return bd
    layers = distance_layers(graph, bd.vertices, h)
    if window is not None:
        return VertexSet.of(v for v in layers if v in window.members)
    return VertexSet.of(layers)


def h_boundary_direct(D: VertexSet, h: int, graph: PeriodicGraph) -> VertexSet:
    """Same set as h_boundary, from the definition: candidates within h of D, kept when
    some cut-edge endpoint lies within distance h."""
    bd = topological_boundary(D, graph)
    cands = distance_layers(graph, D.vertices, h + 1)
    out = []
    for x in cands:
        ball_x = distance_layers(graph, [x], h)
        if any(v in bd.members for v in ball_x):
            out.append(x)
    return VertexSet.of(out)


def is_window_limited(D: VertexSet, graph: PeriodicGraph, window: VertexSet) -> bool:
    """True when D fills the window so no cut edge can be seen inside it."""
    return D.size > 0 and topological_boundary(D, graph, window).size == 0


def isoperimetric_quotient(D: VertexSet, d: int, graph: PeriodicGraph) -> Fraction:
    """|boundary_d D| / |D|."""
    if not D.size:
        raise ValueError("empty domain")
    return Fraction(h_boundary(D, d, graph).size, D.size)


def h_approximate(U: VertexSet, h: int, rng: np.random.Generator, graph: PeriodicGraph, p: float = 0.5) -> VertexSet:
    """Toggle membership of each vertex of boundary_h U independently with probability p."""
    if h < 1:
        raise ValueError("h must be >= 1")
    collar = h_boundary(U, h, graph)
    flips = rng.random(collar.size) < p
    toggled = {v for v, f in zip(collar.vertices, flips) if f}
    return VertexSet.of(U.members ^ toggled)


def remove_inner_collar(U: VertexSet, h: int, graph: PeriodicGraph) -> VertexSet:
    return VertexSet.of(U.members - h_boundary(U, h, graph).members)


def isopher_bound(U: VertexSet, h: int, d: int, graph: PeriodicGraph) -> Optional[Fraction]:
    """Upper bound for the quotient at d of any h-approximation of U, built from U's
    own quotient at h+d. None when the inner core of U is empty."""
    core = U.size - len(U.members & h_boundary(U, h, graph).members)
    if core <= 0:
        return None
    return isoperimetric_quotient(U, h + d, graph) * Fraction(U.size, core)


def inscribed_radius(D: VertexSet, graph: PeriodicGraph) -> int:
    """Largest r such that D contains a full metric ball of radius r (-1 if D is empty)."""
    outside = set()
    for x in D.vertices:
        for y in graph.neighbors(x):
            if y not in D.members:
                outside.add(y)
    if not D.size:
        return -1
    # distance from each vertex of D to the complement, by BFS restricted to D
    dist = {y: 0 for y in outside}
    frontier = list(outside)
    best = -1
    k = 0
    while frontier:
        k += 1
        nxt = []
        for x in frontier:
            for y in graph.neighbors(x):
                if y in D.members and y not in dist:
                    dist[y] = k
                    nxt.append(y)
        if nxt:
            best = k - 1
        frontier = nxt
    return best


# -- the equivalence check -------------------------------------------------------

@dataclass
class EquivalenceReport:
    sizes: List[int]
    defects: List[Dict[Element, Fraction]]
    quotients: List[Dict[int, Fraction]]
    tempered: List[Optional[Fraction]]
    threshold: float
    verdict: str

    @property
    def max_defect(self) -> List[Fraction]:
        return [max(d.values()) for d in self.defects]

    @property
    def max_quotient(self) -> List[Fraction]:
        return [max(q.values()) for q in self.quotients]

    def rows(self, generators: Sequence[Element], d_max: int):
        for n in range(len(self.sizes)):
            row = [n, self.sizes[n]]
            row += [float(self.defects[n][g]) for g in generators]
            row += [float(self.quotients[n][d]) for d in range(d_max + 1)]
            row.append("" if self.tempered[n] is None else float(self.tempered[n]))
            yield row


def check_folner_isoperimetric(
    spec: GroupSpec,
    seq: FolnerSequence,
    graph: PeriodicGraph,
    d_max: int,
    threshold: float = DEFAULT_DECAY_THRESHOLD,
) -> EquivalenceReport:
    """Følner defects over the generators and quotients of phi(I_n) for d <= d_max.

    Verdict: "co-decay" when both profiles end below ``threshold``, "co-stagnation"
    when neither does, "mismatch" otherwise.
    """
    gens = spec.nontrivial_generators
    sizes, defects, quotients = [], [], []
    for I in seq.index_sets:
        A = phi(I, graph)
        sizes.append(len(I))
        defects.append({g: folner_defect(spec, I, g) for g in gens})
        quotients.append({d: isoperimetric_quotient(A, d, graph) for d in range(d_max + 1)})
    tq = sequence_tempered_quotients(spec, seq)
    tempered = [None] + tq
    thr = Fraction(threshold)
    f_ok = max(defects[-1].values()) < thr
    q_ok = max(quotients[-1].values()) < thr
    if f_ok and q_ok:
        verdict = "co-decay"
    elif not f_ok and not q_ok:
        verdict = "co-stagnation"
    else:
        verdict = "mismatch"
    return EquivalenceReport(sizes, defects, quotients, tempered, threshold, verdict)
