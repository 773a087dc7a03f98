"""i.i.d. alloy-type random potentials with an exact shift action.

Couplings are generated counter-style: the value at site gamma is a hash of
``(seed, base_shift * gamma)`` pushed through the inverse CDF of the coupling law.
Shifting an environment only changes ``base_shift``, so the compatibility identity
V^{T_gamma w}(x) = V^w(gamma^{-1} x) holds bit for bit. The hash is splitmix64
based and not cryptographic.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .groups import Element, GroupSpec, Vertex, VertexSet

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def site_hash(seed: int, coords: Element) -> int:
    h = _mix64((seed + _GOLDEN) & _M64)
    for c in coords:
        h = _mix64(((h ^ (c & _M64)) + _GOLDEN) & _M64)
    return h


def site_uniform(seed: int, coords: Element) -> float:
    """A float in [0, 1) with 53 random bits."""
    return (site_hash(seed, coords) >> 11) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class CouplingLaw:
    """Bounded law of the single-site couplings.

    kind "uniform": params (a, b); "bernoulli": p and values (v0, v1) with
    P(v1) = p; "discrete": atoms ((value, prob), ...).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    p: float = 0.5
    values: Tuple[float, float] = (0.0, 1.0)
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a <= self.b):
                raise ValueError("uniform law needs finite a <= b")
        elif self.kind == "bernoulli":
            if not 0.0 <= self.p <= 1.0:
                raise ValueError("bernoulli p must lie in [0, 1]")
            if not all(math.isfinite(v) for v in self.values):
                raise ValueError("unbounded coupling values")
        elif self.kind == "discrete":
            if not self.atoms:
                raise ValueError("discrete law needs atoms")
            probs = [q for _, q in self.atoms]
            if any(q < 0 for q in probs) or abs(math.fsum(probs) - 1.0) > 1e-12:
                raise ValueError("atom probabilities must be non-negative and sum to 1")
            if not all(math.isfinite(v) for v, _ in self.atoms):
                raise ValueError("unbounded coupling values")
        else:
            raise ValueError(f"unknown coupling law {self.kind!r}")

    @classmethod
    def uniform(cls, a: float, b: float) -> "CouplingLaw":
        return cls("uniform", a=float(a), b=float(b))

    @classmethod
    def bernoulli(cls, p: float, values=(0.0, 1.0)) -> "CouplingLaw":
        return cls("bernoulli", p=float(p), values=tuple(float(v) for v in values))

    @classmethod
    def discrete(cls, atoms) -> "CouplingLaw":
        return cls("discrete", atoms=tuple((float(v), float(q)) for v, q in atoms))

    def quantile(self, u: float) -> float:
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        if self.kind == "bernoulli":
            return self.values[1] if u < self.p else self.values[0]
        cum = self._cumulative
        k = bisect.bisect_right(cum, u)
        return self.atoms[min(k, len(self.atoms) - 1)][0]

    @property
    def _cumulative(self):
        out, s = [], 0.0
        for _, q in self.atoms:
            s += q
            out.append(s)
        return out

    @property
    def max_abs(self) -> float:
        if self.kind == "uniform":
            return max(abs(self.a), abs(self.b))
        if self.kind == "bernoulli":
            # atoms of probability zero are never drawn
            vals = [v for v, q in zip(self.values, (1 - self.p, self.p)) if q > 0]
            return max(abs(v) for v in vals)
        return max(abs(v) for v, q in self.atoms if q > 0)

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "bernoulli":
            return (1 - self.p) * self.values[0] + self.p * self.values[1]
        return math.fsum(v * q for v, q in self.atoms)

    def atom_values(self) -> Tuple[float, ...]:
        if self.kind == "bernoulli":
            return tuple(v for v, q in zip(self.values, (1 - self.p, self.p)) if q > 0)
        if self.kind == "discrete":
            return tuple(v for v, q in self.atoms if q > 0)
        return ()


@dataclass(frozen=True)
class SingleSitePotential:
    """Finitely supported profile u: entries (offset, fiber_index, value)."""

    support: Tuple[Tuple[Element, int, float], ...]

    def __post_init__(self):
        norm = tuple((tuple(int(c) for c in g), int(i), float(v)) for g, i, v in self.support)
        for _, _, v in norm:
            if not math.isfinite(v):
                raise ValueError("single-site values must be finite")
        object.__setattr__(self, "support", norm)

    @classmethod
    def unit_mass(cls, spec: GroupSpec, fiber: int = 0) -> "SingleSitePotential":
        return cls(((spec.identity, fiber, 1.0),))

    @property
    def l1(self) -> float:
        return math.fsum(abs(v) for _, _, v in self.support)


@dataclass(frozen=True)
class EnvironmentSample:
    seed: int
    law: CouplingLaw
    group: GroupSpec
    base_shift: Optional[Element] = None

    def __post_init__(self):
        if self.base_shift is None:
            object.__setattr__(self, "base_shift", self.group.identity)
        else:
            self.group.check(tuple(self.base_shift))
        object.__setattr__(self, "seed", int(self.seed) & _M64)


def coupling(w: EnvironmentSample, gamma: Element) -> float:
    """omega_gamma."""
    site = w.group._mul(w.base_shift, gamma)
    return w.law.quantile(site_uniform(w.seed, site))


def shift(w: EnvironmentSample, gamma: Element) -> EnvironmentSample:
    """T_gamma w, with (T_gamma w)_delta = w_{gamma^{-1} delta}."""
    g = w.group
    return EnvironmentSample(w.seed, w.law, g, g._mul(w.base_shift, g.inverse(gamma)))


def potential_value(w: EnvironmentSample, u: SingleSitePotential, x: Vertex) -> float:
    """V^w(x) = sum_gamma omega_gamma u(gamma^{-1} x), summed in support order."""
    g, i = x
    grp = w.group
    total = 0.0
    for offset, fiber, val in u.support:
        if fiber != i:
            continue
        delta = grp._mul(g, grp._inv(offset))
        total += coupling(w, delta) * val
    return total


def potential_on(D: VertexSet, w: EnvironmentSample, u: SingleSitePotential) -> np.ndarray:
    return np.array([potential_value(w, u, x) for x in D.vertices], dtype=float)


def uniform_bound(law: CouplingLaw, u: SingleSitePotential) -> float:
    """C_0 = max|coupling| * sum|u|, a bound on sup |V^w| valid for every w."""
    return law.max_abs * u.l1
