"""Domain types, topology generation and hierarchy validation.

A :class:`Topology` is a static snapshot of devices in a rectangle. A
:class:`Hierarchy` assigns every device to a first-level master and every
master to a super master; :func:`validate_hierarchy` checks it against the
constraint set of the clustering integer program (ids ``C8`` .. ``C16``).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class ParameterError(ValueError):
    """Invalid parameter value."""


class StructuralError(ValueError):
    """A hierarchy references ids that do not exist or is malformed."""


class Role(str, enum.Enum):
    MEMBER = "member"
    MASTER = "master"
    SUPER_MASTER = "super_master"


@dataclass(frozen=True)
class NodeSnapshot:
    id: int
    x: float
    y: float
    battery: float
    has_wifi: bool

    def __post_init__(self):
        if not (0.0 <= self.battery <= 1.0):
            raise ParameterError(f"node {self.id}: battery {self.battery} outside [0, 1]")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ParameterError(f"node {self.id}: non-finite position")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def battery_ok(self, threshold: float = 0.5) -> bool:
        return self.battery >= threshold


@dataclass(frozen=True)
class ModelParams:
    max_cluster_size_l1: int = 8
    max_cluster_size_l2: int = 8
    bt_range_m: float = 10.0
    fixed_cost: float = 100.0
    battery_threshold: float = 0.5

    def __post_init__(self):
        if self.max_cluster_size_l1 < 1 or self.max_cluster_size_l2 < 1:
            raise ParameterError("cluster sizes must be >= 1")
        if self.bt_range_m <= 0 or self.fixed_cost <= 0 or self.battery_threshold <= 0:
            raise ParameterError("bt_range_m, fixed_cost and battery_threshold must be > 0")

    def eligible(self, node: NodeSnapshot) -> bool:
        """Whether ``node`` may serve as a master (Wi-Fi and enough battery)."""
        return node.has_wifi and node.battery >= self.battery_threshold


def build_distance_matrix(positions: Sequence[Sequence[float]]) -> np.ndarray:
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    # hypot is symmetric bit-for-bit, but force it anyway
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True, eq=False)
class Topology:
    nodes: tuple[NodeSnapshot, ...]
    area: tuple[float, float] = (10.0, 10.0)
    seed: int | None = None
    distances: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        for k, node in enumerate(nodes):
            if node.id != k:
                raise ParameterError(f"node ids must be contiguous from 0; got {node.id} at {k}")
        if self.distances is None:
            d = build_distance_matrix([n.position for n in nodes])
        else:
            d = np.asarray(self.distances, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.nodes == other.nodes and self.area == other.area and self.seed == other.seed

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodes], dtype=float).reshape(-1, 2)

    def batteries(self) -> np.ndarray:
        return np.array([n.battery for n in self.nodes], dtype=float)

    def eligible_mask(self, p: ModelParams) -> np.ndarray:
        return np.array([p.eligible(n) for n in self.nodes], dtype=bool)

    def subset(self, ids: Iterable[int]) -> tuple["Topology", list[int]]:
        """Topology restricted to ``ids``, renumbered from 0, plus the id map."""
        keep = sorted(set(ids))
        nodes = [
            NodeSnapshot(k, self.nodes[i].x, self.nodes[i].y, self.nodes[i].battery, self.nodes[i].has_wifi)
            for k, i in enumerate(keep)
        ]
        return Topology(tuple(nodes), self.area, self.seed), keep


def _battery_sampler(law: str):
    name, *args = law.split(":")
    vals = [float(a) for a in args]
    if name == "uniform":
        lo, hi = vals if vals else (0.0, 1.0)
        return lambda rng, n: rng.uniform(lo, hi, n)
    if name == "beta":
        a, b = vals
        return lambda rng, n: rng.beta(a, b, n)
    if name == "const":
        (v,) = vals
        return lambda rng, n: np.full(n, v)
    raise ParameterError(f"unknown battery law {law!r}")


def generate_topology(
    n: int,
    area: tuple[float, float] = (10.0, 10.0),
    wifi_prob: float = 1.0,
    battery_law: str = "uniform:0:1",
    seed: int = 0,
) -> Topology:
    """Place ``n`` devices uniformly in ``area`` (width, height in meters).

    ``battery_law`` is ``"uniform:lo:hi"``, ``"beta:a:b"`` or ``"const:v"``;
    samples are clipped to [0, 1]. The same arguments always give the same
    topology.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    w, h = area
    if not (w > 0 and h > 0):
        raise ParameterError(f"area dimensions must be positive, got {area}")
    if not (0.0 <= wifi_prob <= 1.0):
        raise ParameterError("wifi_prob must lie in [0, 1]")
    sample_battery = _battery_sampler(battery_law)
    rng = np.random.default_rng(seed)
    xy = rng.uniform((0.0, 0.0), (w, h), size=(n, 2))
    wifi = rng.random(n) < wifi_prob
    battery = np.clip(sample_battery(rng, n), 0.0, 1.0)
    nodes = tuple(
        NodeSnapshot(i, float(xy[i, 0]), float(xy[i, 1]), float(battery[i]), bool(wifi[i]))
        for i in range(n)
    )
    return Topology(nodes, (float(w), float(h)), seed)


CSV_HEADER = ["id", "x", "y", "battery", "has_wifi"]


def dump_topology(topology: Topology) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for node in topology.nodes:
        # repr round-trips floats exactly
        writer.writerow([node.id, repr(node.x), repr(node.y), repr(node.battery), int(node.has_wifi)])
    return buf.getvalue()


def parse_topology(text: str, area: tuple[float, float] | None = None, seed: int | None = None) -> Topology:
    """Inverse of :func:`dump_topology`.

    The CSV carries no area; when ``area`` is omitted the bounding box of the
    positions is used.
    """
    rows = list(csv.DictReader(io.StringIO(text)))
    nodes = tuple(
        NodeSnapshot(
            int(r["id"]), float(r["x"]), float(r["y"]), float(r["battery"]),
            r["has_wifi"].strip().lower() in ("1", "true"),
        )
        for r in rows
    )
    if area is None:
        w = max((n.x for n in nodes), default=0.0)
        h = max((n.y for n in nodes), default=0.0)
        area = (w or 1.0, h or 1.0)
    return Topology(nodes, area, seed)


def load_topology(path: str | Path, area: tuple[float, float] | None = None, seed: int | None = None) -> Topology:
    return parse_topology(Path(path).read_text(), area, seed)


@dataclass(frozen=True)
class Hierarchy:
    """Two-level cluster assignment.

    ``l1_master_of`` maps every clustered node to its first-level master
    (masters map to themselves). ``l2_master_of`` maps every master to its
    super master (super masters map to themselves). Nodes absent from
    ``l1_master_of`` are unclustered (orphans).
    """

    l1_master_of: Mapping[int, int]
    l2_master_of: Mapping[int, int]

    @classmethod
    def empty(cls) -> "Hierarchy":
        return cls({}, {})

    @classmethod
    def single_level(cls, l1_master_of: Mapping[int, int]) -> "Hierarchy":
        """Every master reports on its own: it is its own super master."""
        masters = set(l1_master_of.values())
        return cls(dict(l1_master_of), {m: m for m in masters})

    @property
    def masters(self) -> list[int]:
        return sorted(set(self.l1_master_of.values()))

    @property
    def super_masters(self) -> list[int]:
        return sorted(set(self.l2_master_of.values()))

    @property
    def nodes(self) -> list[int]:
        return sorted(self.l1_master_of)

    @property
    def m1(self) -> int:
        return len(set(self.l1_master_of.values()))

    @property
    def m2(self) -> int:
        return len(set(self.l2_master_of.values()))

    def role(self, node: int) -> Role:
        if node in self.l2_master_of and self.l2_master_of[node] == node:
            return Role.SUPER_MASTER
        if self.l1_master_of.get(node) == node:
            return Role.MASTER
        return Role.MEMBER

    @property
    def roles(self) -> dict[int, Role]:
        return {i: self.role(i) for i in self.nodes}

    def l1_clusters(self) -> dict[int, list[int]]:
        """Master id -> sorted member ids (the master itself excluded)."""
        out: dict[int, list[int]] = {m: [] for m in self.masters}
        for i, m in sorted(self.l1_master_of.items()):
            if i != m:
                out.setdefault(m, []).append(i)
        return out

    def l2_clusters(self) -> dict[int, list[int]]:
        """Super master id -> sorted member-master ids (itself excluded)."""
        out: dict[int, list[int]] = {s: [] for s in self.super_masters}
        for m, s in sorted(self.l2_master_of.items()):
            if m != s:
                out.setdefault(s, []).append(m)
        return out

    def to_dict(self) -> dict:
        return {
            "masters": self.masters,
            "super_masters": self.super_masters,
            "l1_master_of": {str(k): v for k, v in sorted(self.l1_master_of.items())},
            "l2_master_of": {str(k): v for k, v in sorted(self.l2_master_of.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hierarchy":
        return cls(
            {int(k): int(v) for k, v in d["l1_master_of"].items()},
            {int(k): int(v) for k, v in d["l2_master_of"].items()},
        )


@dataclass(frozen=True)
class Violation:
    constraint: str
    nodes: tuple[int, ...]
    value: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def by_constraint(self, cid: str) -> list[Violation]:
        return [v for v in self.violations if v.constraint == cid]


def _check_structure(topology: Topology, h: Hierarchy) -> None:
    n = topology.n
    for k, v in list(h.l1_master_of.items()) + list(h.l2_master_of.items()):
        if not (0 <= k < n and 0 <= v < n):
            raise StructuralError(f"dangling id reference {k} -> {v} (topology has {n} nodes)")


def validate_hierarchy(
    topology: Topology,
    h: Hierarchy,
    p: ModelParams = ModelParams(),
    skip: Iterable[int] = (),
) -> ValidationReport:
    """Report every constraint breach of ``h``; nodes in ``skip`` are exempt from C8."""
    _check_structure(topology, h)
    skip = set(skip)
    d = topology.distances
    out: list[Violation] = []
    masters = set(h.l1_master_of.values())

    for i in range(topology.n):
        if i in skip:
            continue
        if i not in h.l1_master_of:
            out.append(Violation("C8", (i,), 0.0))
    for j in masters:
        # a master must be assigned to itself
        if h.l1_master_of.get(j) != j:
            out.append(Violation("C8", (j,), float(h.l1_master_of.get(j, -1))))

    for j, members in h.l1_clusters().items():
        size = len(members) + 1
        if size > p.max_cluster_size_l1:
            out.append(Violation("C9", (j, *members), float(size)))
    for i, j in sorted(h.l1_master_of.items()):
        if d[i, j] > p.bt_range_m:
            out.append(Violation("C10", (i, j), float(d[i, j])))

    for j in sorted(masters):
        if j not in h.l2_master_of:
            out.append(Violation("C11", (j,), 0.0))
    for m in sorted(h.l2_master_of):
        if m not in masters:
            out.append(Violation("C11", (m,), -1.0))

    for s, members in h.l2_clusters().items():
        size = len(members) + 1
        if size > p.max_cluster_size_l2:
            out.append(Violation("C12", (s, *members), float(size)))
    for m, s in sorted(h.l2_master_of.items()):
        if d[m, s] > p.bt_range_m:
            out.append(Violation("C13", (m, s), float(d[m, s])))

    for s in h.super_masters:
        if s not in masters or h.l2_master_of.get(s) != s:
            out.append(Violation("C14", (s,), 0.0))

    for j in sorted(masters):
        node = topology.nodes[j]
        if not node.has_wifi:
            out.append(Violation("C15", (j,), 0.0))
        if node.battery < p.battery_threshold:
            out.append(Violation("C16", (j,), node.battery))

    return ValidationReport(tuple(out))


def price_hierarchy(topology: Topology, h: Hierarchy, p: ModelParams = ModelParams()) -> tuple[float, float]:
    """Return (level-1 cost, level-2 cost) of ``h`` under the clustering objective.

    Level 1 is the summed member-to-master distance plus the fixed cost per
    master; level 2 the summed master-to-super-master distance plus the fixed
    cost per super master. Sums use ``math.fsum`` so that equal distance
    multisets price identically.
    """
    d = topology.distances
    l1 = math.fsum(float(d[i, j]) for i, j in h.l1_master_of.items()) + p.fixed_cost * h.m1
    l2 = math.fsum(float(d[i, j]) for i, j in h.l2_master_of.items()) + p.fixed_cost * h.m2
    return l1, l2
