"""Greedy bi-level clustering.

Both levels run the same election loop: the highest-battery candidate still
in the pool becomes a head and absorbs its nearest unassigned neighbours in
Bluetooth range, up to the cluster capacity. Ties go to the lower node id.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import Hierarchy, ModelParams, StructuralError, Topology


@dataclass(frozen=True)
class ClusterRound:
    level: int
    elected_head: int
    absorbed: tuple[int, ...]
    remaining_pool: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["absorbed"] = list(self.absorbed)
        return d


def _elect(order: np.ndarray, candidate: np.ndarray) -> int | None:
    """First index in battery-descending ``order`` that is still a candidate."""
    hits = np.flatnonzero(candidate[order])
    return int(order[hits[0]]) if hits.size else None


def _absorb(dist_row: np.ndarray, pool: np.ndarray, head: int, capacity: int, bt_range: float) -> list[int]:
    cand = np.flatnonzero(pool & (dist_row <= bt_range))
    cand = cand[cand != head]
    if cand.size == 0:
        return []
    # lexsort: last key is primary -> distance, then id
    ranked = cand[np.lexsort((cand, dist_row[cand]))]
    return [int(i) for i in ranked[:capacity]]


def _battery_order(topology: Topology, ids: np.ndarray | None = None) -> np.ndarray:
    ids = np.arange(topology.n) if ids is None else ids
    bat = topology.batteries()[ids]
    return ids[np.lexsort((ids, -bat))]


def cluster_level1(
    topology: Topology,
    p: ModelParams = ModelParams(),
    force_promote: bool = False,
) -> tuple[dict[int, int], set[int], list[ClusterRound]]:
    """First-level pass.

    Returns the master map (masters map to themselves), the orphan set and
    the round trace. Only nodes with Wi-Fi and battery at or above the
    threshold can be elected. With ``force_promote`` the leftover pool gets a
    second pass in which any Wi-Fi node may be elected regardless of battery.
    """
    n = topology.n
    d = topology.distances
    pool = np.ones(n, dtype=bool)
    eligible = topology.eligible_mask(p)
    order = _battery_order(topology)
    master_of: dict[int, int] = {}
    trace: list[ClusterRound] = []

    def run(gate: np.ndarray) -> None:
        while pool.any():
            head = _elect(order, pool & gate)
            if head is None:
                return
            pool[head] = False
            members = _absorb(d[head], pool, head, p.max_cluster_size_l1 - 1, p.bt_range_m)
            pool[members] = False
            master_of[head] = head
            for m in members:
                master_of[m] = head
            trace.append(ClusterRound(1, head, tuple(members), int(pool.sum())))

    run(eligible)
    if force_promote:
        run(np.array([nd.has_wifi for nd in topology.nodes], dtype=bool))
    orphans = {int(i) for i in np.flatnonzero(pool)}
    return master_of, orphans, trace


def cluster_level2(
    topology: Topology,
    level1: dict[int, int],
    p: ModelParams = ModelParams(),
) -> tuple[Hierarchy, list[ClusterRound]]:
    """Second-level pass over the masters of ``level1``.

    Every master ends up in exactly one second-level cluster; a master with
    no super master in range is elected on its own turn and heads a
    singleton cluster.
    """
    heads = {v for v in level1.values()}
    for h in heads:
        if level1.get(h) != h:
            raise StructuralError(f"level-1 head {h} is not its own master")
    n = topology.n
    d = topology.distances
    pool = np.zeros(n, dtype=bool)
    pool[sorted(heads)] = True
    order = _battery_order(topology, np.array(sorted(heads), dtype=int))
    super_of: dict[int, int] = {}
    trace: list[ClusterRound] = []
    while pool.any():
        head = _elect(order, pool)
        pool[head] = False
        members = _absorb(d[head], pool, head, p.max_cluster_size_l2 - 1, p.bt_range_m)
        pool[members] = False
        super_of[head] = head
        for m in members:
            super_of[m] = head
        trace.append(ClusterRound(2, head, tuple(members), int(pool.sum())))
    return Hierarchy(dict(level1), super_of), trace


def build_hierarchy(
    topology: Topology,
    p: ModelParams = ModelParams(),
    force_promote: bool = False,
) -> tuple[Hierarchy, set[int], list[ClusterRound]]:
    level1, orphans, trace1 = cluster_level1(topology, p, force_promote)
    h, trace2 = cluster_level2(topology, level1, p)
    return h, orphans, trace1 + trace2
