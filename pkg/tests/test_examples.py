"""Worked examples for each public operation, one small case per behaviour."""
import math
from fractions import Fraction

import numpy as np
import pytest

from idslab import folner as fl
from idslab.eigen import sturm_count as dense_sturm
from idslab.folner import FolnerSequence
from idslab.groups import PeriodicGraph, integer_lattice, VertexSet, ball, ball_size, cayley_graph, graph_distance, phi
from idslab.hamiltonian import assemble_dirichlet, free_heat_diagonal
from idslab.pipeline import (
    AdmissibilityError,
    Model,
    build_admissible,
    constant_site_function,
    counting_functions,
    ergodic_average,
    heat_kernel_lemma_gap,
    heat_witness,
    ids_from_spectra,
    laplace_pipeline,
    non_randomness_check,
    pastur_subin_limit,
    solve_spectra,
)
from idslab.random_env import (
    CouplingLaw,
    EnvironmentSample,
    SingleSitePotential,
    coupling,
    potential_value,
    shift,
    uniform_bound,
)
from idslab.spectral import (
    Spectrum,
    chebyshev_heat_trace,
    count_below,
    eigenvalues,
    heat_kernel_diagonal,
    heat_trace,
    sturm_count,
)


# r + r' for the largest consecutive pair exceeds the shared fixture's max_radius
Z1_WIDE = integer_lattice(1, max_radius=1024)
G1_WIDE = cayley_graph(Z1_WIDE)


# -- groups ---------------------------------------------------------------------

def test_products(z2, heis):
    assert z2.multiply((1, 2), (3, 4)) == (4, 6)
    assert heis.multiply((1, 0, 0), (0, 1, 0)) == (1, 1, 1)
    for g in [(5, -2, 7), (0, 0, 0)]:
        assert heis.multiply(g, heis.identity) == g


def test_ball_examples(z1, z2, heis):
    assert ball_size(z1, 3) == 7
    assert ball_size(z2, 2) == 13
    assert ball_size(heis, 2) == 17


def test_phi_examples(z1, g1):
    G = PeriodicGraph(z1, 2, ((0, 1),))
    assert phi([z1.identity], g1).size == 1
    assert phi(ball(z1, 1), G).size == 6
    I, J = ball(z1, 1), {(5,), (6,)}
    assert phi(I | J, G) == phi(I, G) | phi(J, G)


def test_distance_examples(g1, gh, heis):
    assert graph_distance(g1, ((2,), 0), ((2,), 0)) == 0
    assert graph_distance(g1, ((0,), 0), ((5,), 0)) == 5
    assert graph_distance(gh, (heis.identity, 0), ((1, 1, 1), 0)) == 2


# -- Folner arithmetic ---------------------------------------------------------------

def test_defect_examples(z1, z2):
    assert fl.folner_defect(z1, ball(z1, 4), (0,)) == 0
    I = ball(z2, 2)
    brute = {(x, y) for x, y in I} ^ {(x + 1, y) for x, y in I}
    assert fl.folner_defect(z2, I, (1, 0)) == Fraction(len(brute), 13) == Fraction(10, 13)


def test_tempered_examples(z1):
    e = frozenset({z1.identity})
    assert fl.tempered_quotient(z1, e, e) == 1


def test_select_radii_examples(z1, z2):
    assert fl.select_radii(z1, 60, 1, 0.1) == list(range(20, 61))
    # Z^2 shell quotient (|B_{r+d}| - |B_{r-d}|) / |B_r| from the closed form
    size = lambda r: 2 * r * r + 2 * r + 1
    want = [r for r in range(2, 41)
            if all((size(r + d) - size(r - d)) / size(r) <= 0.5 for d in (1, 2))]
    assert fl.select_radii(z2, 40, 2, 0.5) == want

def test_select_radii_epsilon_two_takes_all(z1):
    # for Z^1 the shell quotient 4d/(2r+1) stays below 2 once r >= d
    got = fl.select_radii(z1, 30, 3, 2.0)
    assert got == [r for r in range(1, 31) if all(4 * d / (2 * r + 1) <= 2 for d in (1, 2, 3))]


def test_tempered_extraction_examples(z1):
    seq = FolnerSequence.from_balls(z1, [1, 2, 4, 8, 16])
    out = fl.extract_tempered_subsequence(z1, seq, C=2)
    assert out.index_sets == seq.index_sets and not out.truncated
    one = fl.extract_tempered_subsequence(z1, seq, C=1)
    assert len(one) == 1 and one.truncated


def test_boundary_examples(z1, g1):
    r = 5
    D = phi(ball(z1, r), g1)
    assert fl.h_boundary(D, 0, g1) == VertexSet.of((x, 0) for x in [(-r - 1,), (-r,), (r,), (r + 1,)])
    assert fl.h_boundary(D, 1, g1).size == 8
    assert fl.isoperimetric_quotient(D, 1, g1) == Fraction(8, 2 * r + 1)
    single = VertexSet.of([((0,), 0)])
    assert fl.isoperimetric_quotient(single, 0, g1) == 3
    assert fl.is_window_limited(D, g1, D) and fl.h_boundary(D, 0, g1, window=D).size == 0


def test_z2_quotient_brute(z2, g2):
    r = 6
    D = phi(ball(z2, r), g2)
    cells = {g for g, _ in D}
    brute = set()
    for x, y in cells:
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (x + dx, y + dy) not in cells:
                brute |= {(x, y), (x + dx, y + dy)}
    assert fl.isoperimetric_quotient(D, 0, g2) == Fraction(len(brute), len(cells))


def test_h_approximation_examples(z1, g1):
    U = phi(ball(z1, 10), g1)
    assert fl.h_approximate(U, 2, np.random.default_rng(1), g1, p=0.0) == U
    core = fl.remove_inner_collar(U, 2, g1)
    assert (U ^ core).issubset(fl.h_boundary(U, 2, g1))
    V = fl.h_approximate(U, 2, np.random.default_rng(42), g1)
    assert (U ^ V).issubset(fl.h_boundary(U, 2, g1))


def test_equivalence_examples(z1, g1):
    seq = FolnerSequence.from_balls(z1, [50, 100, 200])
    rep = fl.check_folner_isoperimetric(z1, seq, g1, 1)
    assert rep.verdict == "co-decay"
    # both profiles ~ c/r: defect 2/(2r+1), quotient at d=1 8/(2r+1)
    assert rep.max_defect[-1] == Fraction(2, 401) and rep.max_quotient[-1] == Fraction(8, 401)
    const = FolnerSequence((frozenset({z1.identity}),) * 3)
    assert fl.check_folner_isoperimetric(z1, const, g1, 1).verdict == "co-stagnation"


# -- random environment ---------------------------------------------------------------

def test_coupling_examples(z1):
    always = EnvironmentSample(3, CouplingLaw.bernoulli(1.0), z1)
    assert all(coupling(always, (k,)) == 1.0 for k in range(100))
    w = EnvironmentSample(3, CouplingLaw.uniform(0, 1), z1)
    assert coupling(w, (17,)) == coupling(w, (17,))
    mean = np.mean([coupling(w, (k,)) for k in range(10**4)])
    assert abs(mean - 0.5) < 0.02


def test_shift_examples(heis):
    w = EnvironmentSample(9, CouplingLaw.uniform(0, 1), heis)
    s = shift(w, heis.identity)
    assert all(coupling(s, g) == coupling(w, g) for g in ball(heis, 3))


def test_potential_examples(z1):
    w = EnvironmentSample(2, CouplingLaw.uniform(0, 1), z1)
    unit = SingleSitePotential.unit_mass(z1)
    assert potential_value(w, unit, ((7,), 0)) == coupling(w, (7,))
    two = SingleSitePotential((((0,), 0, 1.0), ((1,), 0, 1.0)))
    for x in range(-5, 5):
        assert potential_value(w, two, ((x,), 0)) == coupling(w, (x,)) + coupling(w, (x - 1,))
    zero = EnvironmentSample(2, CouplingLaw.bernoulli(0.0), z1)
    assert all(potential_value(zero, two, ((x,), 0)) == 0 for x in range(20))


def test_uniform_bound_examples(z1):
    assert uniform_bound(CouplingLaw.uniform(0, 1), SingleSitePotential.unit_mass(z1)) == 1
    u = SingleSitePotential((((0,), 0, 0.5), ((1,), 0, -0.25)))
    assert uniform_bound(CouplingLaw.uniform(-1, 2), u) == 1.5
    assert uniform_bound(CouplingLaw.uniform(-1, 2), SingleSitePotential(())) == 0


# -- operator ---------------------------------------------------------------------------

def test_dirichlet_examples(z1, g1):
    one = VertexSet.of([((0,), 0)])
    assert np.array_equal(assemble_dirichlet(one, None, None, g1).dense(), [[2.0]])
    two = VertexSet.of([((0,), 0), ((1,), 0)])
    assert np.array_equal(assemble_dirichlet(two, None, None, g1).dense(), [[2, -1], [-1, 2]])
    # V = (0.5, 0.25) from a two-atom law realised on these sites
    law = CouplingLaw.discrete([(0.5, 0.5), (0.25, 0.5)])
    for seed in range(200):
        w = EnvironmentSample(seed, law, z1)
        if (coupling(w, (0,)), coupling(w, (1,))) == (0.5, 0.25):
            break
    M = assemble_dirichlet(two, w, SingleSitePotential.unit_mass(z1), g1).dense()
    assert np.array_equal(M, [[2.5, -1], [-1, 2.25]])


def test_quadratic_form_lower_bound(z2, g2):
    law = CouplingLaw.uniform(-1, 0.5)
    w = EnvironmentSample(4, law, z2)
    u = SingleSitePotential.unit_mass(z2)
    s = eigenvalues(assemble_dirichlet(phi(ball(z2, 6), g2), w, u, g2))
    assert s.eigenvalues[0] >= -uniform_bound(law, u)


def test_free_heat_examples():
    assert abs(free_heat_diagonal(1e-9) - 1) < 1e-8
    assert abs(free_heat_diagonal(1.0) - 0.30851) < 1e-5
    assert free_heat_diagonal(1.0, 2) == pytest.approx(free_heat_diagonal(1.0) ** 2, rel=1e-15)


# -- spectra --------------------------------------------------------------------------------

def test_eigenvalue_examples(z1, g1):
    assert eigenvalues(assemble_dirichlet(VertexSet.of([((0,), 0)]), None, None, g1)).eigenvalues.tolist() == [2.0]
    s2 = eigenvalues(assemble_dirichlet(phi([(0,), (1,)], g1), None, None, g1))
    assert np.allclose(s2.eigenvalues, [1, 3], atol=1e-15)
    s3 = eigenvalues(assemble_dirichlet(phi([(0,), (1,), (2,)], g1), None, None, g1), True)
    assert np.allclose(s3.eigenvalues, [2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-14)
    V = s3.eigenvectors
    assert np.abs(V.T @ V - np.eye(3)).max() < 1e-10


def test_count_examples():
    s = Spectrum(np.array([1.0, 3.0]))
    assert count_below(s, 0.5) == (0, 0.0)
    assert count_below(s, 3.5) == (2, 1.0)
    assert count_below(s, 2.0) == (1, 0.5)


def test_sturm_examples(z1, g1):
    M3 = assemble_dirichlet(phi([(0,), (1,), (2,)], g1), None, None, g1)
    assert sturm_count(M3, 2.5) == 2
    assert sturm_count(M3, M3.gershgorin()[0] - 1) == 0
    rng = np.random.default_rng(88)
    A = rng.normal(size=(8, 8))
    A = A + A.T
    w = np.linalg.eigvalsh(A)
    for lam in rng.uniform(-8, 8, 50):
        assert dense_sturm(A, lam) == int(np.searchsorted(w, lam))


def test_heat_trace_examples():
    assert heat_trace(Spectrum(np.array([2.0])), 1.0) == pytest.approx(0.1353353, abs=1e-7)
    assert heat_trace(Spectrum(np.array([1.0, 3.0])), 1.0) == pytest.approx(0.2088332, abs=1e-7)
    assert heat_trace(Spectrum(np.array([1.0, 3.0])), 1e-12) == pytest.approx(1.0, abs=1e-11)


def test_heat_diagonal_examples(g1):
    one = VertexSet.of([((0,), 0)])
    s = eigenvalues(assemble_dirichlet(one, None, None, g1), True)
    assert heat_kernel_diagonal(s, 1.0, 0) == pytest.approx(math.exp(-2), rel=1e-15)
    two = phi([(0,), (1,)], g1)
    s = eigenvalues(assemble_dirichlet(two, None, None, g1), True)
    assert heat_kernel_diagonal(s, 1.0, 0) == pytest.approx((math.exp(-1) + math.exp(-3)) / 2, rel=1e-14)


def test_chebyshev_examples(z1, g1):
    D = phi([(k,) for k in range(500)], g1)
    M = assemble_dirichlet(D, None, None, g1)
    exact = heat_trace(eigenvalues(M), 1.0)
    est = chebyshev_heat_trace(M, 1.0, 30, 40, np.random.default_rng(5))
    assert abs(est.value - exact) <= 3 * est.stderr


# -- pipeline ------------------------------------------------------------------------------

def test_admissible_examples(z1, g1):
    seq = FolnerSequence.from_balls(z1, [20, 40, 80, 160])
    adm0 = build_admissible(g1, seq, h=0)
    assert adm0.domains == adm0.base
    adm = build_admissible(g1, seq, h=2, seed=7)
    for A, D in zip(adm.base, adm.domains):
        assert (A ^ D).issubset(fl.h_boundary(A, 2, g1))
    with pytest.raises(AdmissibilityError):
        build_admissible(g1, seq, C=1.0)


def test_counting_examples():
    adm = build_admissible(G1_WIDE, FolnerSequence.from_balls(Z1_WIDE, [50, 100, 200, 400]))
    est = counting_functions(adm, [1], Model(G1_WIDE, None, None), [1.0, 2.0])
    assert est.limit[1] == pytest.approx(0.5, abs=2e-3)
    assert abs(est.limit[0] - 1 / 3) <= 2e-3
    c = 3.0
    model = Model(G1_WIDE, CouplingLaw.bernoulli(0.5, (0.0, c)), SingleSitePotential.unit_mass(Z1_WIDE))
    grid = [-0.01, 4 + c + 0.01]
    est = counting_functions(adm, [1, 2], model, grid)
    assert np.all(est.values[..., 0] == 0) and np.all(est.values[..., 1] == 1)


def test_laplace_examples():
    adm = build_admissible(G1_WIDE, FolnerSequence.from_balls(Z1_WIDE, [50, 100, 200, 400]))
    free = Model(G1_WIDE, None, None)
    rep = laplace_pipeline(adm, [1], free, [1.0, 50.0])
    gaps = np.abs(rep.values[:, 0, 0] - free_heat_diagonal(1.0))
    assert np.all(np.diff(gaps) < 0)
    if np.all(rep.values[:, 0, 1] >= 0):
        shifted = Model(G1_WIDE, CouplingLaw.bernoulli(1.0, (0.0, 0.001)), SingleSitePotential.unit_mass(Z1_WIDE))
        rep2 = laplace_pipeline(adm, [1], shifted, [50.0])
        assert np.all(rep2.values <= math.exp(-0.05))
    assert np.all(rep.identity_gap == 0)


def test_kernel_lemma_examples(z1, g1):
    adm = build_admissible(g1, FolnerSequence.from_balls(z1, [20, 40, 80, 160]))
    free = Model(g1, None, None)
    res = heat_kernel_lemma_gap(adm, free, 1, 1.0, 60)
    # decays like |boundary A_n| / |A_n|
    ratios = [g * n for g, n in zip(res.gaps, adm.sizes)]
    assert max(ratios) / min(ratios) < 1.1
    assert res.gaps[-1] < 0.01 and adm.sizes[-1] == 321
    tiny = heat_kernel_lemma_gap(adm, free, 1, 1e-8, 20)
    assert max(tiny.gaps) < 1e-7


def test_ergodic_constant_function(z2, g2):
    sets = [phi(ball(z2, r), g2) for r in (2, 4)]
    w = EnvironmentSample(1, CouplingLaw.uniform(0, 1), z2)
    res = ergodic_average(constant_site_function(1.0), w, sets, g2, [3, 4])
    assert res.averages == [1.0, 1.0] and res.reference == 1.0


def test_pastur_examples():
    adm = build_admissible(G1_WIDE, FolnerSequence.from_balls(Z1_WIDE, [50, 100, 200, 400]))
    free = Model(G1_WIDE, None, None)
    table = solve_spectra(adm, free, [1])
    grid = np.linspace(0, 4, 41)
    idse = ids_from_spectra(table, grid)
    rep = laplace_pipeline(adm, [1], free, [0.5, 1.0], table=table)
    v = pastur_subin_limit(rep, idse, 0.0, heat_witness(G1_WIDE, 0.0))
    assert v.passed
    assert np.abs(v.limit - np.arccos(1 - grid / 2) / np.pi).max() <= 2e-3
    bad = type(table)(table.sizes, table.seeds, [[np.concatenate([[-1.0], e[1:]]) for e in row] for row in table.eigs])
    vb = pastur_subin_limit(rep, ids_from_spectra(bad, grid), 0.0, heat_witness(G1_WIDE, 0.0))
    assert not vb.passed and {f.hypothesis for f in vb.failures} == {"a"}


def test_non_randomness_examples(z1, g1):
    adm = build_admissible(g1, FolnerSequence.from_balls(z1, [10, 20, 40]))
    free = Model(g1, None, None)
    grid = np.linspace(0, 4, 17)
    a = counting_functions(adm, [1, 2], free, grid)
    b = counting_functions(adm, [3, 4], free, grid)
    assert non_randomness_check([a, b]) == {(0, 1): 0.0}
