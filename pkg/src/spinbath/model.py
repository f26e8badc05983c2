"""Spin-network construction: topologies, coupling families, Hamiltonian tables.

The whole system is a set of spin-1/2 sites split into a small "system"
register and a larger "environment" register. The Hamiltonian is

    H = H_S + H_E + H_SE,
    H_S  = -sum_{i<j} sum_a J_ij^a  S_i^a S_j^a      (within the system)
    H_E  = -sum_{i<j} sum_a O_ij^a  I_i^a I_j^a      (within the environment)
    H_SE = -sum_{i,j} sum_a D_ij^a  S_i^a I_j^a      (every system spin to
                                                      every environment spin)

with a in {x, y, z}. Couplings are stored *with the leading minus sign
folded out*: a term ``Coupling(i, j, "z", c)`` contributes ``-c *
S_i^z S_j^z`` to H. Global site indices put the system on 0..n_system-1
and the environment on n_system..n_total-1.

Randomness is counter-based (numpy Philox keyed through SeedSequence) and
keyed per named stream and per edge, so the sampled tables depend only on
(seed, stream, edge), never on the order edges are visited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from itertools import chain, combinations
from math import isfinite, isqrt
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ShapeError

AXES = ("x", "y", "z")

#: Named rng streams; the ids key the Philox counters and must never change.
STREAM_IDS = {
    "couplings-sys": 0,
    "couplings-env": 1,
    "couplings-int": 2,
    "state-sys": 3,
    "state-env": 4,
}


class TopologyKind(str, Enum):
    RING = "ring"
    SQUARE = "square_lattice"
    TRIANGULAR = "triangular_lattice"
    SPIN_GLASS = "spin_glass"
    NONE = "none"


class Family(str, Enum):
    XY = "XY"
    HEISENBERG = "Heisenberg"
    HEISENBERG_TYPE = "HeisenbergType"
    ISING = "Ising"
    ISING_TYPE = "IsingType"
    ISING_PM = "IsingPM"


class Coupling(NamedTuple):
    """One exchange term: contributes -c * S_i^alpha S_j^alpha."""

    i: int
    j: int
    alpha: str
    c: float


@dataclass(frozen=True)
class Topology:
    kind: TopologyKind
    n: int
    edges: tuple[tuple[int, int], ...]

    def degree(self, site: int) -> int:
        return sum(1 for (a, b) in self.edges if site in (a, b))


@dataclass(frozen=True)
class CouplingFamily:
    kind: Family
    scale: float

    def __post_init__(self):
        if not isfinite(self.scale):
            raise ConfigError(f"coupling scale must be finite, got {self.scale}")

    @property
    def is_random(self) -> bool:
        return self.kind in (Family.HEISENBERG_TYPE, Family.ISING_TYPE, Family.ISING_PM)


class NamedStream:
    """One named child stream of a root seed with per-edge substreams."""

    def __init__(self, root_seed: int, name: str):
        if name not in STREAM_IDS:
            raise ConfigError(f"unknown rng stream {name!r}")
        self.root_seed = int(root_seed)
        self.name = name
        self._sid = STREAM_IDS[name]

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=(self._sid,))
        return np.random.Generator(np.random.Philox(seq))

    def for_edge(self, i: int, j: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=(self._sid, i, j))
        return np.random.Generator(np.random.Philox(seq))


class RngStreams:
    """Root seed split into the fixed named streams of :data:`STREAM_IDS`.

    Couplings of H_S, H_E and H_SE and the two initial states each draw from
    their own stream, so e.g. re-randomizing the environment couplings cannot
    shift the initial-state draw.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {seed}")
        self.seed = seed

    def named(self, name: str) -> NamedStream:
        return NamedStream(self.seed, name)

    def generator(self, name: str) -> np.random.Generator:
        return self.named(name).generator()


def _lattice_shape(n: int, kind: TopologyKind) -> tuple[int, int]:
    # largest divisor pair r <= c with r >= 2; 16 -> 4 x 4
    best = None
    for r in range(2, isqrt(n) + 1):
        if n % r == 0 and n // r >= 2:
            best = (r, n // r)
    if best is None:
        raise ShapeError(f"{kind.value} needs n = r*c with r,c >= 2, got n={n}")
    return best


def build_topology(kind: TopologyKind | str, n: int) -> Topology:
    """Build the edge list for one of the named spin networks.

    ring: periodic chain, degree 2 (n=2 degenerates to the single bond).
    square_lattice / triangular_lattice: periodic 2d lattices, degree 4 / 6.
    spin_glass: complete graph, degree n-1. none: no edges.
    """
    kind = TopologyKind(kind)
    if n < 1:
        raise ShapeError(f"need at least one spin, got n={n}")
    edges: set[tuple[int, int]] = set()
    if kind is TopologyKind.NONE:
        pass
    elif kind is TopologyKind.RING:
        if n >= 2:
            edges = {tuple(sorted((k, (k + 1) % n))) for k in range(n)}
    elif kind is TopologyKind.SPIN_GLASS:
        edges = set(combinations(range(n), 2))
    elif kind in (TopologyKind.SQUARE, TopologyKind.TRIANGULAR):
        rows, cols = _lattice_shape(n, kind)
        offsets = [(0, 1), (1, 0)]
        if kind is TopologyKind.TRIANGULAR:
            offsets.append((1, 1))
        for r in range(rows):
            for c in range(cols):
                a = r * cols + c
                for dr, dc in offsets:
                    b = ((r + dr) % rows) * cols + (c + dc) % cols
                    if a != b:
                        edges.add(tuple(sorted((a, b))))
    return Topology(kind, n, tuple(sorted(edges)))


def sample_couplings(
    family: CouplingFamily,
    edges: Sequence[tuple[int, int]],
    stream: NamedStream | None = None,
) -> tuple[Coupling, ...]:
    """Draw the coupling table for ``edges`` from a family.

    Deterministic families (XY, Heisenberg, Ising) ignore ``stream``. The
    random families key their draws on (stream, i, j), so the table is a
    pure function of seed and edge, independent of edge order. Zero channels
    (e.g. J^z of XY) are omitted from the table.
    """
    kind, s = family.kind, family.scale
    if family.is_random and stream is None:
        raise ConfigError(f"{kind.value} sampling needs an rng stream")
    mag = abs(s)
    terms: list[Coupling] = []
    for (i, j) in edges:
        if i == j or i < 0:
            raise ConfigError(f"bad edge ({i},{j})")
        i, j = min(i, j), max(i, j)
        if kind is Family.XY:
            vals = {"x": s, "y": s}
        elif kind is Family.HEISENBERG:
            vals = {"x": s, "y": s, "z": s}
        elif kind is Family.ISING:
            vals = {"z": s}
        elif kind is Family.HEISENBERG_TYPE:
            g = stream.for_edge(i, j)
            draws = g.uniform(-mag, mag, size=3)
            vals = dict(zip(AXES, draws))
        elif kind is Family.ISING_TYPE:
            g = stream.for_edge(i, j)
            vals = {"z": g.uniform(-mag, mag)}
        elif kind is Family.ISING_PM:
            g = stream.for_edge(i, j)
            vals = {"z": mag if g.integers(0, 2) == 1 else -mag}
        else:  # pragma: no cover
            raise ConfigError(f"unknown family {kind}")
        terms.extend(Coupling(i, j, a, float(c)) for a, c in vals.items() if c != 0.0)
    return tuple(terms)


def _check_terms(terms: Iterable[Coupling], lo_i, hi_i, lo_j, hi_j, label):
    for t in terms:
        if not (lo_i <= t.i < hi_i and lo_j <= t.j < hi_j and t.i < t.j):
            raise ConfigError(f"{label} term {t} out of range")
        if t.alpha not in AXES:
            raise ConfigError(f"{label} term {t} has bad axis")
        if not isfinite(t.c):
            raise ConfigError(f"{label} term {t} has non-finite coupling")


@dataclass(frozen=True)
class HamiltonianSpec:
    """Complete coupling tables of H = H_S + H_E + H_SE in global indices."""

    n_system: int
    n_env: int
    sys_terms: tuple[Coupling, ...] = ()
    env_terms: tuple[Coupling, ...] = ()
    int_terms: tuple[Coupling, ...] = ()

    def __post_init__(self):
        ns, nt = self.n_system, self.n_total
        if ns < 1 or self.n_env < 0:
            raise ConfigError(f"bad spin counts ({ns}, {self.n_env})")
        _check_terms(self.sys_terms, 0, ns, 0, ns, "system")
        _check_terms(self.env_terms, ns, nt, ns, nt, "environment")
        _check_terms(self.int_terms, 0, ns, ns, nt, "interaction")

    @property
    def n_total(self) -> int:
        return self.n_system + self.n_env

    @property
    def all_terms(self) -> tuple[Coupling, ...]:
        return tuple(chain(self.sys_terms, self.env_terms, self.int_terms))

    def system_part(self) -> "HamiltonianSpec":
        """H_S alone, as a spec on the system register."""
        return HamiltonianSpec(self.n_system, 0, self.sys_terms)

    def environment_part(self) -> "HamiltonianSpec":
        """H_E alone, re-indexed onto its own 0..n_env-1 register."""
        ns = self.n_system
        local = tuple(Coupling(t.i - ns, t.j - ns, t.alpha, t.c) for t in self.env_terms)
        return HamiltonianSpec(self.n_env, 0, local)

    def without_interaction(self) -> "HamiltonianSpec":
        """H_S + H_E with the coupling H_SE switched off."""
        return HamiltonianSpec(self.n_system, self.n_env, self.sys_terms, self.env_terms, ())

    # -- lossless text serialization ------------------------------------

    def to_dict(self) -> dict:
        def rows(terms):
            return [[t.i, t.j, t.alpha, t.c] for t in terms]

        return {
            "n_system": self.n_system,
            "n_env": self.n_env,
            "system_terms": rows(self.sys_terms),
            "environment_terms": rows(self.env_terms),
            "interaction_terms": rows(self.int_terms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        def terms(rows):
            return tuple(Coupling(int(i), int(j), str(a), float(c)) for i, j, a, c in rows)

        return cls(
            n_system=int(d["n_system"]),
            n_env=int(d["n_env"]),
            sys_terms=terms(d["system_terms"]),
            env_terms=terms(d["environment_terms"]),
            int_terms=terms(d["interaction_terms"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "HamiltonianSpec":
        return cls.from_dict(json.loads(text))


def assemble(
    system: tuple[Topology, CouplingFamily],
    env: tuple[Topology, CouplingFamily],
    interaction: CouplingFamily,
    rng: RngStreams,
) -> HamiltonianSpec:
    """Assemble the full spec; every system spin couples to every bath spin."""
    sys_topo, sys_fam = system
    env_topo, env_fam = env
    ns, ne = sys_topo.n, env_topo.n

    sys_terms = sample_couplings(sys_fam, sys_topo.edges, rng.named("couplings-sys"))
    env_local = sample_couplings(env_fam, env_topo.edges, rng.named("couplings-env"))
    env_terms = tuple(Coupling(t.i + ns, t.j + ns, t.alpha, t.c) for t in env_local)
    cross = [(i, ns + j) for i in range(ns) for j in range(ne)]
    int_terms = sample_couplings(interaction, cross, rng.named("couplings-int"))
    return HamiltonianSpec(ns, ne, sys_terms, env_terms, int_terms)
