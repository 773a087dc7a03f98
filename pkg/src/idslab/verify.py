"""Property and oracle checks run by ``idslab verify`` against a configured model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import folner as fl
from .eigen import sturm_count, symmetric_eigh
from .groups import (
    VertexSet,
    ball,
    graph_distance,
    phi,
    translate,
    word_norm,
)
from .hamiltonian import assemble_dirichlet
from .pipeline import Model, heat_witness
from .random_env import EnvironmentSample, potential_value, shift, uniform_bound
from .spectral import (
    eigenvalues,
    heat_kernel_diagonal,
    heat_trace,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_element(rng, spec, r):
    B = sorted(ball(spec, r))
    return B[rng.integers(len(B))]


def check_word_metric(model: Model, rng) -> str:
    spec = model.graph.group
    if model.graph.fiber_size != 1:
        return "skipped (fiber_size > 1)"
    from .groups import cayley_graph

    G = cayley_graph(spec)
    for g in sorted(ball(spec, 3)):
        assert graph_distance(G, (spec.identity, 0), (g, 0)) == word_norm(spec, g)
    return f"{len(ball(spec, 3))} elements"


def check_equivariance(model: Model, rng) -> str:
    graph = model.graph
    spec = graph.group
    for _ in range(50):
        gamma = _random_element(rng, spec, 4)
        x = (_random_element(rng, spec, 4), int(rng.integers(graph.fiber_size)))
        for y in graph.neighbors(x):
            gx, gy = translate(graph, gamma, x), translate(graph, gamma, y)
            assert gy in set(graph.neighbors(gx))
    return "50 translates"


def check_hboundary(model: Model, rng) -> str:
    graph = model.graph
    spec = graph.group
    D = phi(ball(spec, 3), graph)
    prev = None
    for h in range(3):
        a = fl.h_boundary(D, h, graph)
        assert a == fl.h_boundary_direct(D, h, graph)
        if prev is not None:
            assert prev.issubset(a)
        prev = a
    return "h <= 2"


def check_compatibility(model: Model, rng) -> str:
    if model.free:
        return "skipped (free model)"
    spec = model.graph.group
    for k in range(200):
        w = EnvironmentSample(int(rng.integers(2**63)), model.law, spec)
        gamma = _random_element(rng, spec, 5)
        x = (_random_element(rng, spec, 5), int(rng.integers(model.graph.fiber_size)))
        lhs = potential_value(shift(w, gamma), model.u, x)
        rhs = potential_value(w, model.u, translate(model.graph, spec.inverse(gamma), x))
        assert lhs == rhs
    return "200 triples bit-exact"


def check_potential_bound(model: Model, rng) -> str:
    if model.free:
        return "skipped (free model)"
    spec = model.graph.group
    C0 = uniform_bound(model.law, model.u)
    w = EnvironmentSample(int(rng.integers(2**63)), model.law, spec)
    D = phi(ball(spec, 6), model.graph)
    worst = max(abs(potential_value(w, model.u, x)) for x in D)
    assert worst <= C0
    return f"max |V| = {worst:.4g} <= C0 = {C0:.4g}"


def check_sturm(model: Model, rng) -> str:
    for _ in range(50):
        n = int(rng.integers(1, 24))
        A = rng.normal(size=(n, n))
        A = A + A.T
        w, _ = symmetric_eigh(A)
        lam = float(rng.normal() * 3)
        assert sturm_count(A, lam) == int(np.searchsorted(w, lam, side="left"))
    return "50 random matrices"


def check_toeplitz(model: Model, rng) -> str:
    worst = 0.0
    for n in (1, 2, 3, 17, 128):
        T = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        w, _ = symmetric_eigh(T)
        exact = np.sort(2 - 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
        worst = max(worst, float(np.abs(w - exact).max()))
    assert worst <= 1e-10
    return f"max error {worst:.2e}"


def check_heat_invariants(model: Model, rng) -> str:
    graph = model.graph
    spec = graph.group
    C0 = model.C0
    witness = heat_witness(graph, C0)
    big = phi(ball(spec, 4), graph)
    for trial in range(5):
        w = model.env(int(rng.integers(2**63)))
        keep = rng.random(big.size) < 0.7
        small = VertexSet.of(v for v, k in zip(big.vertices, keep) if k) or big
        sb = eigenvalues(assemble_dirichlet(big, w, model.u, graph), True)
        ss = eigenvalues(assemble_dirichlet(small, w, model.u, graph), True)
        for t in (0.5, 1.0, 2.0):
            kb = heat_kernel_diagonal(sb, t)
            ks = heat_kernel_diagonal(ss, t)
            for k, x in enumerate(small.vertices):
                assert ks[k] <= kb[big.index[x]] + 1e-10
            assert kb.max() <= witness(t) + 1e-8
            assert abs(kb.sum() - big.size * heat_trace(sb, t)) <= 1e-9 * big.size
    return "5 nested pairs, t in {0.5, 1, 2}"


def check_laplace_identity(model: Model, rng) -> str:
    graph = model.graph
    D = phi(ball(graph.group, 3), graph)
    s = eigenvalues(assemble_dirichlet(D, model.env(7), model.u, graph))
    dist = s.distribution()
    for t in (0.1, 1.0, 5.0):
        assert heat_trace(s, t) == dist.laplace(t)
    return "exact"


CHECKS: List[Callable] = [
    check_word_metric,
    check_equivariance,
    check_hboundary,
    check_compatibility,
    check_potential_bound,
    check_sturm,
    check_toeplitz,
    check_heat_invariants,
    check_laplace_identity,
]


def run_checks(model: Model, seed: int = 0) -> List[CheckResult]:
    out = []
    for check in CHECKS:
        rng = np.random.default_rng(seed)
        name = check.__name__.removeprefix("check_")
        try:
            detail = check(model, rng)
            out.append(CheckResult(name, True, detail))
        except AssertionError as exc:
            out.append(CheckResult(name, False, str(exc) or "assertion failed"))
    return out
