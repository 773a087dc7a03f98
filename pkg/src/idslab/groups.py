"""Finitely generated groups, Cayley balls and periodic graphs.

Group elements are plain integer tuples (fixed width per family) so that sets of
elements can be hashed, sorted lexicographically and combined with ordinary set
algebra. A vertex of a periodic graph is a pair ``(element, fiber_index)``.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

Element = Tuple[int, ...]
Vertex = Tuple[Element, int]

DEFAULT_MAX_RADIUS = 512


@dataclass(frozen=True)
class GroupLaw:
    width: int
    multiply: Callable[[Element, Element], Element]
    inverse: Callable[[Element], Element]


def _lattice_mul(g: Element, h: Element) -> Element:
    return tuple(a + b for a, b in zip(g, h))


def _lattice_inv(g: Element) -> Element:
    return tuple(-a for a in g)


def _heis_mul(g: Element, h: Element) -> Element:
    a, b, c = g
    a2, b2, c2 = h
    return (a + a2, b + b2, c + c2 + a * b2)


def _heis_inv(g: Element) -> Element:
    a, b, c = g
    return (-a, -b, -c + a * b)


_LAWS: Dict[str, GroupLaw] = {
    "heisenberg": GroupLaw(3, _heis_mul, _heis_inv),
}


def register_family(name: str, width: int, multiply, inverse) -> None:
    """Register a user-defined multiplication law under ``name``.

    ``multiply`` and ``inverse`` act on integer tuples of length ``width`` and
    the identity must be the all-zero tuple.
    """
    if name in _LAWS or name.startswith("lattice"):
        raise ValueError(f"group family {name!r} already defined")
    _LAWS[name] = GroupLaw(width, multiply, inverse)


def _law(family: str, dim: int) -> GroupLaw:
    if family == "lattice":
        return GroupLaw(dim, _lattice_mul, _lattice_inv)
    try:
        return _LAWS[family]
    except KeyError:
        raise ValueError(f"unknown group family {family!r}") from None


@dataclass(frozen=True)
class GroupSpec:
    """A group family together with a finite symmetric generating set E (containing e)."""

    family: str
    dim: int
    generators: Tuple[Element, ...]
    max_radius: int = DEFAULT_MAX_RADIUS

    def __post_init__(self):
        law = _law(self.family, self.dim)
        if self.family != "lattice" and self.dim != law.width:
            raise ValueError(f"{self.family} elements have width {law.width}, got dim={self.dim}")
        gens = tuple(sorted({tuple(int(c) for c in s) for s in self.generators}))
        for s in gens:
            if len(s) != self.dim:
                raise ValueError(f"generator {s} has width {len(s)}, expected {self.dim}")
        if self.identity not in gens:
            raise ValueError("generating set must contain the identity")
        gset = set(gens)
        for s in gens:
            if law.inverse(s) not in gset:
                raise ValueError(f"generating set not closed under inversion: {s}")
        object.__setattr__(self, "generators", gens)

    @property
    def identity(self) -> Element:
        return (0,) * self.dim

    @cached_property
    def _law(self) -> GroupLaw:
        return _law(self.family, self.dim)

    @property
    def is_abelian_lattice(self) -> bool:
        return self.family == "lattice"

    @property
    def nontrivial_generators(self) -> Tuple[Element, ...]:
        return tuple(s for s in self.generators if s != self.identity)

    def check(self, g: Element) -> Element:
        if len(g) != self.dim:
            raise ValueError(f"element {g} does not belong to {self.family}(dim={self.dim})")
        return g

    def multiply(self, g: Element, h: Element) -> Element:
        self.check(g)
        self.check(h)
        return self._law.multiply(g, h)

    def inverse(self, g: Element) -> Element:
        return self._law.inverse(self.check(g))

    # unchecked variants for hot loops
    def _mul(self, g: Element, h: Element) -> Element:
        return self._law.multiply(g, h)

    def _inv(self, g: Element) -> Element:
        return self._law.inverse(g)


def integer_lattice(d: int, **kw) -> GroupSpec:
    """Z^d with E = {0, +-e_1, ..., +-e_d}."""
    if not 1 <= d:
        raise ValueError("dimension must be positive")
    gens = [(0,) * d]
    for i in range(d):
        for sign in (1, -1):
            v = [0] * d
            v[i] = sign
            gens.append(tuple(v))
    return GroupSpec("lattice", d, tuple(gens), **kw)


def heisenberg(**kw) -> GroupSpec:
    """Discrete Heisenberg group with the standard generators a^{+-1}, b^{+-1} and e."""
    gens = ((0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
    return GroupSpec("heisenberg", 3, gens, **kw)


def multiply(spec: GroupSpec, g: Element, h: Element) -> Element:
    return spec.multiply(g, h)


# -- Cayley balls ---------------------------------------------------------------

class _BallCache:
    """BFS spheres of the Cayley graph, grown on demand and shared per GroupSpec."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.norm: Dict[Element, int] = {spec.identity: 0}
        self.spheres: List[List[Element]] = [[spec.identity]]
        self.lock = threading.Lock()

    def grow(self, r: int) -> None:
        spec = self.spec
        if r > spec.max_radius:
            raise ValueError(f"radius {r} exceeds configured max_radius {spec.max_radius}")
        gens = spec.nontrivial_generators
        mul = spec._mul
        with self.lock:
            while len(self.spheres) <= r:
                k = len(self.spheres)
                nxt = []
                for g in self.spheres[-1]:
                    for s in gens:
                        h = mul(g, s)
                        if h not in self.norm:
                            self.norm[h] = k
                            nxt.append(h)
                nxt.sort()
                self.spheres.append(nxt)


_caches: Dict[GroupSpec, _BallCache] = {}
_caches_lock = threading.Lock()


def _cache(spec: GroupSpec) -> _BallCache:
    with _caches_lock:
        c = _caches.get(spec)
        if c is None:
            c = _caches[spec] = _BallCache(spec)
        return c


def sphere(spec: GroupSpec, r: int) -> Tuple[Element, ...]:
    c = _cache(spec)
    c.grow(r)
    return tuple(c.spheres[r])


def ball(spec: GroupSpec, r: int) -> frozenset:
    """E^r: all products of at most r generators."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    c = _cache(spec)
    c.grow(r)
    out = set()
    for k in range(r + 1):
        out.update(c.spheres[k])
    return frozenset(out)


def ball_size(spec: GroupSpec, r: int) -> int:
    if r < 0:
        return 0
    c = _cache(spec)
    c.grow(r)
    return sum(len(c.spheres[k]) for k in range(r + 1))


def word_norm(spec: GroupSpec, g: Element) -> Optional[int]:
    """BFS word length of g, or None if it exceeds the spec's max_radius."""
    spec.check(g)
    c = _cache(spec)
    r = 0
    while g not in c.norm:
        r += 1
        if r > spec.max_radius:
            return None
        c.grow(r)
    return c.norm[g]


# -- periodic graphs ------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGraph:
    """Gamma x F with Gamma-equivariant edges.

    ``intra_edges`` are fiber pairs (i, j) joining (g, i) and (g, j); an inter edge
    (s, i, j) joins (g, i) and (g s, j) for every g.
    """

    group: GroupSpec
    fiber_size: int = 1
    intra_edges: Tuple[Tuple[int, int], ...] = ()
    inter_edges: Tuple[Tuple[Element, int, int], ...] = ()

    def __post_init__(self):
        if self.fiber_size < 1:
            raise ValueError("fiber_size must be positive")
        m = self.fiber_size
        for i, j in self.intra_edges:
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"intra edge ({i}, {j}) out of fiber range")
        for s, i, j in self.inter_edges:
            self.group.check(tuple(s))
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"inter edge ({s}, {i}, {j}) out of fiber range")
        object.__setattr__(self, "intra_edges", tuple((int(i), int(j)) for i, j in self.intra_edges))
        object.__setattr__(
            self, "inter_edges", tuple((tuple(int(c) for c in s), int(i), int(j)) for s, i, j in self.inter_edges)
        )

    @cached_property
    def offsets(self) -> Tuple[Tuple[Tuple[Element, int], ...], ...]:
        """Per fiber index i: the (s, j) with (g, i) ~ (g s, j)."""
        e = self.group.identity
        inv = self.group._inv
        table = [set() for _ in range(self.fiber_size)]
        for i, j in self.intra_edges:
            table[i].add((e, j))
            table[j].add((e, i))
        for s, i, j in self.inter_edges:
            table[i].add((s, j))
            table[j].add((inv(s), i))
        for i in range(self.fiber_size):
            table[i].discard((e, i))
        return tuple(tuple(sorted(t)) for t in table)

    def neighbors(self, v: Vertex) -> Iterator[Vertex]:
        g, i = v
        mul = self.group._mul
        for s, j in self.offsets[i]:
            yield (mul(g, s), j)

    def degree(self, v: Vertex) -> int:
        return len(self.offsets[v[1]])

    @property
    def max_degree(self) -> int:
        return max(len(t) for t in self.offsets)


def cayley_graph(spec: GroupSpec) -> PeriodicGraph:
    return PeriodicGraph(spec, 1, (), tuple((s, 0, 0) for s in spec.nontrivial_generators))


def translate(graph: PeriodicGraph, gamma: Element, v: Vertex) -> Vertex:
    """Left action gamma.(g, i) = (gamma g, i)."""
    return (graph.group._mul(gamma, v[0]), v[1])


@dataclass(frozen=True)
class VertexSet:
    vertices: Tuple[Vertex, ...]

    @classmethod
    def of(cls, items: Iterable[Vertex]) -> "VertexSet":
        return cls(tuple(sorted(set(items))))

    @cached_property
    def members(self) -> frozenset:
        return frozenset(self.vertices)

    @cached_property
    def index(self) -> Dict[Vertex, int]:
        return {v: k for k, v in enumerate(self.vertices)}

    @property
    def size(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __contains__(self, v) -> bool:
        return v in self.members

    def __or__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet.of(self.members | other.members)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet.of(self.members - other.members)

    def __xor__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet.of(self.members ^ other.members)

    def issubset(self, other: "VertexSet") -> bool:
        return self.members <= other.members

    def to_text(self) -> str:
        return "".join(" ".join(map(str, g)) + f" {i}\n" for g, i in self.vertices)

    @classmethod
    def from_text(cls, text: str) -> "VertexSet":
        out = []
        for line in text.splitlines():
            parts = line.split()
            if parts:
                *coords, i = (int(p) for p in parts)
                out.append((tuple(coords), i))
        return cls.of(out)


def phi(I: Iterable[Element], graph: PeriodicGraph) -> VertexSet:
    """The vertex set I x F."""
    I = list(I)
    if not I:
        raise ValueError("phi needs a non-empty index set")
    for g in I:
        graph.group.check(g)
    m = graph.fiber_size
    return VertexSet.of((g, i) for g in I for i in range(m))


def translate_set(graph: PeriodicGraph, gamma: Element, D: VertexSet) -> VertexSet:
    return VertexSet.of(translate(graph, gamma, v) for v in D)


def graph_distance(graph: PeriodicGraph, v: Vertex, w: Vertex, max_radius: Optional[int] = None) -> Optional[int]:
    """Shortest path length, or None when w is not reached within ``max_radius`` steps."""
    if max_radius is None:
        max_radius = graph.group.max_radius
    if v == w:
        return 0
    seen = {v}
    frontier = [v]
    for k in range(1, max_radius + 1):
        nxt = []
        for x in frontier:
            for y in graph.neighbors(x):
                if y == w:
                    return k
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        if not nxt:
            return None
        frontier = nxt
    return None


def distance_layers(graph: PeriodicGraph, sources: Iterable[Vertex], depth: int) -> Dict[Vertex, int]:
    """Multi-source BFS: distance to the source set for every vertex within ``depth``."""
    dist = {}
    q = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            q.append(s)
    while q:
        x = q.popleft()
        dx = dist[x]
        if dx == depth:
            continue
        for y in graph.neighbors(x):
            if y not in dist:
                dist[y] = dx + 1
                q.append(y)
    return dist


def metric_ball(graph: PeriodicGraph, center: Vertex, r: int) -> VertexSet:
    return VertexSet.of(distance_layers(graph, [center], r))


def neighborhood(graph: PeriodicGraph, D: VertexSet, pad: int) -> VertexSet:
    """All vertices within graph distance ``pad`` of D."""
    return VertexSet.of(distance_layers(graph, D.vertices, pad))
