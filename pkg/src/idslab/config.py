"""Experiment configuration (YAML), validated with pydantic."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .folner import FolnerSequence, select_radii
from .groups import GroupSpec, PeriodicGraph, cayley_graph, heisenberg, integer_lattice
from .pipeline import Model
from .random_env import CouplingLaw, SingleSitePotential


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class GroupConfig(_Base):
    family: Literal["lattice", "heisenberg"] = "lattice"
    dim: int = Field(1, ge=1, le=3)
    maxRadius: int = Field(512, ge=1)

    def build(self) -> GroupSpec:
        if self.family == "heisenberg":
            return heisenberg(max_radius=self.maxRadius)
        return integer_lattice(self.dim, max_radius=self.maxRadius)


class GraphConfig(_Base):
    fiberSize: int = Field(1, ge=1)
    intraEdges: List[Tuple[int, int]] = []
    interEdges: List[Tuple[List[int], int, int]] = []


class SelectConfig(_Base):
    maxRadius: int = Field(ge=1)
    dMax: int = Field(1, ge=1)
    epsilon: float = Field(gt=0)
    keepEvery: int = Field(1, ge=1)


class FolnerConfig(_Base):
    radii: Optional[List[int]] = None
    select: Optional[SelectConfig] = None
    intervals: Optional[List[int]] = None  # Z^1 only: I_n = {0, ..., L_n - 1}
    C: float = Field(4.0, ge=1.0)
    h: int = Field(0, ge=0)
    toggleP: float = Field(0.5, ge=0.0, le=1.0)
    approxSeed: int = 0
    dMax: int = Field(1, ge=0)
    threshold: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _one_source(self):
        given = [x is not None for x in (self.radii, self.select, self.intervals)]
        if sum(given) != 1:
            raise ValueError("give exactly one of radii, select, intervals")
        for name in ("radii", "intervals"):
            v = getattr(self, name)
            if v is not None and (len(v) == 0 or any(b <= a for a, b in zip(v, v[1:]))):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
        return self


class LawConfig(_Base):
    kind: Literal["uniform", "bernoulli", "discrete"]
    a: float = 0.0
    b: float = 1.0
    p: float = 0.5
    values: Tuple[float, float] = (0.0, 1.0)
    atoms: List[Tuple[float, float]] = []

    def build(self) -> CouplingLaw:
        if self.kind == "uniform":
            return CouplingLaw.uniform(self.a, self.b)
        if self.kind == "bernoulli":
            return CouplingLaw.bernoulli(self.p, self.values)
        return CouplingLaw.discrete(self.atoms)


class SiteConfig(_Base):
    offset: List[int]
    fiber: int = 0
    value: float


class PotentialConfig(_Base):
    law: LawConfig
    singleSite: List[SiteConfig]
    C0: Optional[float] = Field(None, ge=0)


class GridSpec(_Base):
    start: float
    stop: float
    num: int = Field(ge=1)


class SeedsConfig(_Base):
    groups: List[List[int]] = [[1]]
    reference: List[int] = []

    @model_validator(mode="after")
    def _distinct(self):
        flat = [s for g in self.groups for s in g] + list(self.reference)
        if any(len(g) == 0 for g in self.groups) or not self.groups:
            raise ValueError("seed groups must be non-empty")
        if len(set(flat)) != len(flat):
            raise ValueError("seeds must be distinct across groups and reference")
        return self


class ChebyshevConfig(_Base):
    probes: int = Field(32, ge=1)
    degree: int = Field(64, ge=0)


class SolverConfig(_Base):
    maxDenseN: int = Field(4096, ge=1)
    chebyshev: ChebyshevConfig = ChebyshevConfig()


class HeatConfig(_Base):
    pad: int = Field(20, ge=0)
    epsilon: float = Field(1e-6, gt=0)
    tableRadius: int = Field(40, ge=1)
    cauchyThreshold: float = Field(1e-2, gt=0)


class SpectrumConfig(_Base):
    index: int = -1
    seed: Optional[int] = None
    dumpMatrix: bool = False


class ExperimentConfig(_Base):
    group: GroupConfig = GroupConfig()
    graph: Optional[GraphConfig] = None
    folner: FolnerConfig
    potential: Optional[PotentialConfig] = None
    lambdaGrid: Union[GridSpec, List[float]]
    tGrid: List[float]
    seeds: SeedsConfig = SeedsConfig()
    solver: SolverConfig = SolverConfig()
    heat: HeatConfig = HeatConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    outputDir: str = "out"

    @field_validator("tGrid")
    @classmethod
    def _t_positive_sorted(cls, v):
        if not v:
            raise ValueError("tGrid must be non-empty")
        if any(t <= 0 for t in v):
            raise ValueError("tGrid values must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("tGrid must be strictly increasing")
        return v

    @field_validator("lambdaGrid")
    @classmethod
    def _lambda_sorted(cls, v):
        if isinstance(v, list):
            if not v or any(b < a for a, b in zip(v, v[1:])):
                raise ValueError("lambdaGrid must be non-empty and sorted")
        elif v.stop < v.start:
            raise ValueError("lambdaGrid stop must be >= start")
        return v

    # -- builders -------------------------------------------------------------

    def lambda_values(self) -> np.ndarray:
        g = self.lambdaGrid
        if isinstance(g, list):
            return np.array(g, dtype=float)
        return np.linspace(g.start, g.stop, g.num)

    def build_group(self) -> GroupSpec:
        return self.group.build()

    def build_graph(self) -> PeriodicGraph:
        spec = self.build_group()
        if self.graph is None:
            return cayley_graph(spec)
        return PeriodicGraph(
            spec,
            self.graph.fiberSize,
            tuple(tuple(e) for e in self.graph.intraEdges),
            tuple((tuple(s), i, j) for s, i, j in self.graph.interEdges),
        )

    def build_model(self) -> Model:
        graph = self.build_graph()
        if self.potential is None:
            return Model(graph, None, None)
        u = SingleSitePotential(tuple((tuple(s.offset), s.fiber, s.value) for s in self.potential.singleSite))
        return Model(graph, self.potential.law.build(), u)

    def C0(self, model: Model) -> float:
        if self.potential is not None and self.potential.C0 is not None:
            return self.potential.C0
        return model.C0

    def build_folner(self) -> FolnerSequence:
        spec = self.build_group()
        f = self.folner
        if f.radii is not None:
            return FolnerSequence.from_balls(spec, f.radii)
        if f.intervals is not None:
            if spec.family != "lattice" or spec.dim != 1:
                raise ValueError("folner.intervals only applies to the Z^1 lattice")
            return FolnerSequence(tuple(frozenset((k,) for k in range(L)) for L in f.intervals))
        radii = select_radii(spec, f.select.maxRadius, f.select.dMax, f.select.epsilon)
        radii = radii[:: -f.select.keepEvery][::-1] if radii else []
        if not radii:
            raise ValueError("folner.select: no radius qualifies")
        return FolnerSequence.from_balls(spec, radii)

    def all_seeds(self) -> List[int]:
        return [s for g in self.seeds.groups for s in g]

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class ConfigError(ValueError):
    pass


def load_config(path) -> ExperimentConfig:
    from pydantic import ValidationError

    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw or {})
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            msgs.append(f"{loc}: {err['msg']}")
        raise ConfigError("; ".join(msgs)) from exc
