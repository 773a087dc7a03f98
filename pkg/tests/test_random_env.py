import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from idslab.groups import ball, heisenberg, integer_lattice, translate, cayley_graph
from idslab.random_env import (
    CouplingLaw,
    EnvironmentSample,
    SingleSitePotential,
    coupling,
    potential_value,
    shift,
    site_hash,
    site_uniform,
    uniform_bound,
)

H = heisenberg()
Z2 = integer_lattice(2)
small = st.integers(-30, 30)
seeds = st.integers(0, 2**64 - 1)


def test_site_hash_frozen_values():
    # regression pins for the counter-based generator
    assert site_hash(0, (0,)) == site_hash(0, (0,))
    assert site_hash(0, (0,)) != site_hash(1, (0,))
    assert site_hash(0, (0, 1)) != site_hash(0, (1, 0))
    u = [site_uniform(7, (k,)) for k in range(5)]
    assert all(0.0 <= x < 1.0 for x in u)
    assert len(set(u)) == 5


def test_avalanche():
    rng = np.random.default_rng(0)
    flips = []
    for _ in range(400):
        seed = int(rng.integers(2**62))
        c = (int(rng.integers(-1000, 1000)), int(rng.integers(-1000, 1000)))
        a = site_hash(seed, c)
        b = site_hash(seed, (c[0] ^ 1, c[1]))
        flips.append(bin(a ^ b).count("1"))
    assert abs(np.mean(flips) - 32) < 1.0


def test_couplings_are_uniform_ks():
    w = EnvironmentSample(12345, CouplingLaw.uniform(0, 1), Z2)
    vals = [coupling(w, g) for g in sorted(ball(Z2, 30))]
    assert stats.kstest(vals, "uniform").pvalue > 1e-3


def test_shifted_environment_has_same_law_ks():
    w = EnvironmentSample(99, CouplingLaw.uniform(-1, 2), H)
    ws = shift(w, (5, -3, 17))
    sites = sorted(ball(H, 6))
    a = [coupling(w, g) for g in sites]
    b = [coupling(ws, g) for g in sites]
    assert stats.ks_2samp(a, b).pvalue > 1e-3
    assert a != b


def test_neighbour_couplings_uncorrelated():
    w = EnvironmentSample(4, CouplingLaw.uniform(0, 1), integer_lattice(1))
    x = np.array([coupling(w, (k,)) for k in range(20000)])
    r = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(r) < 4 / math.sqrt(x.size)


def test_bernoulli_frequency():
    w = EnvironmentSample(8, CouplingLaw.bernoulli(0.3, (0.0, 2.0)), integer_lattice(1))
    x = np.array([coupling(w, (k,)) for k in range(20000)])
    assert set(np.unique(x)) == {0.0, 2.0}
    p = (x == 2.0).mean()
    assert abs(p - 0.3) < 4 * math.sqrt(0.3 * 0.7 / x.size)


def test_discrete_law_skips_zero_atoms():
    law = CouplingLaw.discrete([(5.0, 0.0), (-1.0, 0.5), (3.0, 0.5)])
    assert law.max_abs == 3.0
    assert law.atom_values() == (-1.0, 3.0)
    assert {law.quantile(u) for u in np.linspace(0, 0.999, 100)} == {-1.0, 3.0}
    assert law.mean == 1.0


def test_law_validation():
    with pytest.raises(ValueError):
        CouplingLaw.uniform(1, 0)
    with pytest.raises(ValueError):
        CouplingLaw.uniform(0, math.inf)
    with pytest.raises(ValueError):
        CouplingLaw.bernoulli(1.5)
    with pytest.raises(ValueError):
        CouplingLaw.discrete([(1.0, 0.3)])
    with pytest.raises(ValueError):
        CouplingLaw("cauchy")
    with pytest.raises(ValueError):
        SingleSitePotential((((0,), 0, math.nan),))


@settings(max_examples=300, deadline=None)
@given(seeds, st.tuples(small, small, small), st.tuples(small, small, small))
def test_compatibility_identity_heisenberg(seed, gamma, g):
    w = EnvironmentSample(seed, CouplingLaw.uniform(0, 1), H)
    u = SingleSitePotential((((0, 0, 0), 0, 1.0), ((1, 0, 0), 0, -0.5), ((0, 1, 2), 0, 0.25)))
    G = cayley_graph(H)
    x = (g, 0)
    assert potential_value(shift(w, gamma), u, x) == potential_value(w, u, translate(G, H.inverse(gamma), x))


@settings(max_examples=200, deadline=None)
@given(seeds, st.tuples(small, small, small), st.tuples(small, small, small))
def test_shift_is_a_group_action(seed, g1, g2):
    w = EnvironmentSample(seed, CouplingLaw.uniform(0, 1), H)
    lhs = shift(w, H.multiply(g1, g2))
    rhs = shift(shift(w, g2), g1)
    for d in [(0, 0, 0), (1, 2, 3), (-4, 0, 7)]:
        assert coupling(lhs, d) == coupling(rhs, d)


@settings(max_examples=100, deadline=None)
@given(seeds, st.tuples(small, small))
def test_shift_moves_couplings(seed, gamma):
    w = EnvironmentSample(seed, CouplingLaw.uniform(0, 1), Z2)
    ws = shift(w, gamma)
    for d in [(0, 0), (3, -1)]:
        assert coupling(ws, d) == coupling(w, Z2.multiply(Z2.inverse(gamma), d))


@settings(max_examples=100, deadline=None)
@given(seeds, st.tuples(small, small))
def test_potential_respects_uniform_bound(seed, g):
    law = CouplingLaw.uniform(-2, 1)
    u = SingleSitePotential((((0, 0), 0, 1.0), ((1, 0), 0, 0.5)))
    w = EnvironmentSample(seed, law, Z2)
    assert abs(potential_value(w, u, (g, 0))) <= uniform_bound(law, u)
    assert uniform_bound(law, u) == 3.0


def test_same_seed_same_environment():
    a = EnvironmentSample(3, CouplingLaw.uniform(0, 1), H)
    b = EnvironmentSample(3, CouplingLaw.uniform(0, 1), H)
    assert all(coupling(a, g) == coupling(b, g) for g in ball(H, 3))


def test_fiber_restricted_potential():
    u = SingleSitePotential((((0,), 1, 2.0),))
    w = EnvironmentSample(1, CouplingLaw.uniform(0, 1), integer_lattice(1))
    assert potential_value(w, u, ((4,), 0)) == 0.0
    assert potential_value(w, u, ((4,), 1)) == 2.0 * coupling(w, (4,))
