"""Exact solvers for the clustering integer program.

The default ``search`` backend enumerates master sets by increasing size and
prunes them with a vectorised lower bound (fixed costs plus each client's
distance to its nearest chosen head, ignoring capacity). Surviving sets are
priced exactly: members are placed by a min-cost assignment over replicated
capacity slots, and the second level is solved by the same search over the
chosen masters. The greedy heuristic supplies the first incumbent, so a
budget overrun still returns a feasible hierarchy and its gap.

The ``highs`` backend states the same 0/1 program for HiGHS through
:func:`scipy.optimize.milp` and serves as a cross-check.
``solve_bruteforce`` enumerates master sets and assignments directly and is
kept free of any solver code so it can serve as an oracle.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linear_sum_assignment, milp
from scipy.sparse import coo_matrix

from .model import Hierarchy, ModelParams, ParameterError, Topology, price_hierarchy

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"

DEFAULT_BUDGET_S = 300.0
BRUTEFORCE_MAX_N = 10


@dataclass
class IlpSolution:
    status: str
    hierarchy: Hierarchy | None
    objective: float = math.nan
    level1_cost: float = math.nan
    level2_cost: float = math.nan
    elapsed: float = 0.0
    nodes_explored: int = 0
    gap: float = 0.0
    bilevel: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        h = self.hierarchy
        out = {
            "status": self.status,
            "objective": None if math.isnan(self.objective) else self.objective,
            "level1_cost": None if math.isnan(self.level1_cost) else self.level1_cost,
            "level2_cost": None if math.isnan(self.level2_cost) else self.level2_cost,
            "masters": h.masters if h else [],
            "super_masters": h.super_masters if h and self.bilevel else [],
            "l1_master_of": h.to_dict()["l1_master_of"] if h else {},
            "l2_master_of": h.to_dict()["l2_master_of"] if h else {},
            "elapsed": self.elapsed,
            "nodes_explored": self.nodes_explored,
            "gap": self.gap,
        }
        return out


def _priced(status, h, topology, p, bilevel, **kw) -> IlpSolution:
    l1, l2 = price_hierarchy(topology, h, p)
    if not bilevel:
        l2 = 0.0
    return IlpSolution(status, h, l1 + l2, l1, l2, bilevel=bilevel, **kw)


class _Builder:
    """Incremental sparse constraint matrix."""

    def __init__(self, nvar: int):
        self.nvar = nvar
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []

    def add(self, coefs: list[tuple[int, float]], lo: float, hi: float) -> None:
        r = len(self.lb)
        for c, v in coefs:
            self.rows.append(r)
            self.cols.append(c)
            self.vals.append(v)
        self.lb.append(lo)
        self.ub.append(hi)

    def constraint(self) -> LinearConstraint:
        a = coo_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.lb), self.nvar)).tocsr()
        return LinearConstraint(a, np.array(self.lb), np.array(self.ub))


def _solve_highs(topology: Topology, p: ModelParams, budget: float, bilevel: bool) -> IlpSolution:
    t0 = time.perf_counter()
    n = topology.n
    if n == 0:
        return IlpSolution(OPTIMAL, Hierarchy.empty(), 0.0, 0.0, 0.0, bilevel=bilevel)
    d = topology.distances
    elig = [j for j in range(n) if p.eligible(topology.nodes[j])]
    in_range = d <= p.bt_range_m

    # variable layout: Y_j | X_ij | W_j | V_ij
    y_idx = {j: k for k, j in enumerate(elig)}
    nv = len(elig)
    x_idx: dict[tuple[int, int], int] = {}
    for i in range(n):
        for j in elig:
            if in_range[i, j]:
                x_idx[i, j] = nv
                nv += 1
    w_idx: dict[int, int] = {}
    v_idx: dict[tuple[int, int], int] = {}
    if bilevel:
        for j in elig:
            w_idx[j] = nv
            nv += 1
        for i in elig:
            for j in elig:
                if in_range[i, j]:
                    v_idx[i, j] = nv
                    nv += 1

    F = p.fixed_cost
    c = np.zeros(nv)
    for j, k in y_idx.items():
        c[k] = F
    for (i, j), k in x_idx.items():
        c[k] = d[i, j]
    for j, k in w_idx.items():
        c[k] = F
    for (i, j), k in v_idx.items():
        c[k] = d[i, j]

    heads_of: dict[int, list[int]] = {i: [] for i in range(n)}
    members_of: dict[int, list[int]] = {j: [] for j in elig}
    for (i, j) in x_idx:
        heads_of[i].append(j)
        members_of[j].append(i)
    if any(not hs for hs in heads_of.values()):
        return IlpSolution(INFEASIBLE, None, elapsed=time.perf_counter() - t0, bilevel=bilevel)

    b = _Builder(nv)
    for i in range(n):
        b.add([(x_idx[i, j], 1.0) for j in heads_of[i]], 1.0, 1.0)
    for j in elig:
        yj = y_idx[j]
        b.add([(x_idx[i, j], 1.0) for i in members_of[j]] + [(yj, -p.max_cluster_size_l1)], -np.inf, 0.0)
        b.add([(x_idx[j, j], 1.0), (yj, -1.0)], 0.0, 0.0)
        for i in members_of[j]:
            if i != j:
                b.add([(x_idx[i, j], 1.0), (yj, -1.0)], -np.inf, 0.0)

    if bilevel:
        sup_of: dict[int, list[int]] = {i: [] for i in elig}
        subs_of: dict[int, list[int]] = {j: [] for j in elig}
        for (i, j) in v_idx:
            sup_of[i].append(j)
            subs_of[j].append(i)
        for i in elig:
            # every master has exactly one super master
            b.add([(v_idx[i, j], 1.0) for j in sup_of[i]] + [(y_idx[i], -1.0)], 0.0, 0.0)
        for j in elig:
            wj = w_idx[j]
            b.add([(v_idx[i, j], 1.0) for i in subs_of[j]] + [(wj, -p.max_cluster_size_l2)], -np.inf, 0.0)
            b.add([(v_idx[j, j], 1.0), (wj, -1.0)], 0.0, 0.0)
            b.add([(wj, 1.0), (y_idx[j], -1.0)], -np.inf, 0.0)
            for i in subs_of[j]:
                if i != j:
                    b.add([(v_idx[i, j], 1.0), (wj, -1.0)], -np.inf, 0.0)

    res = milp(
        c,
        integrality=np.ones(nv),
        bounds=Bounds(0, 1),
        constraints=b.constraint(),
        options={"time_limit": max(budget, 1e-3), "disp": False, "mip_rel_gap": 0.0},
    )
    elapsed = time.perf_counter() - t0
    explored = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return IlpSolution(INFEASIBLE, None, elapsed=elapsed, nodes_explored=explored, bilevel=bilevel)
    if res.x is None:
        status = TIMEOUT if res.status == 1 else INFEASIBLE
        return IlpSolution(status, None, elapsed=elapsed, nodes_explored=explored, bilevel=bilevel)

    x = res.x > 0.5
    l1 = {i: j for (i, j), k in x_idx.items() if x[k]}
    if bilevel:
        l2 = {i: j for (i, j), k in v_idx.items() if x[k]}
        h = Hierarchy(l1, l2)
    else:
        h = Hierarchy.single_level(l1)
    status = OPTIMAL if res.status == 0 else TIMEOUT
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    return _priced(status, h, topology, p, bilevel, elapsed=elapsed, nodes_explored=explored, gap=gap)


BIG = 1e9
_CHUNK = 4096


def _assign(d, in_range, clients, heads, capacity):
    """Optimal capacitated assignment of ``clients`` to ``heads``.

    Unit demands make this an assignment problem over ``capacity`` copies of
    every head. Returns (cost, {client: head}) or None when infeasible.
    """
    clients = list(clients)
    heads = list(heads)
    if not clients:
        return 0.0, {}
    if len(clients) > capacity * len(heads) or capacity == 0:
        return None
    sub = d[np.ix_(clients, heads)]
    sub = np.where(in_range[np.ix_(clients, heads)], sub, BIG)
    slots = np.repeat(sub, capacity, axis=1)
    rows, cols = linear_sum_assignment(slots)
    if slots[rows, cols].max() >= BIG:
        return None
    mapping = {clients[r]: heads[c // capacity] for r, c in zip(rows, cols)}
    return math.fsum(d[c, h] for c, h in mapping.items()), mapping


class _HeadSearch:
    """Branch over head sets in order of size, pruning by cheap lower bounds.

    ``clients`` are all nodes that need a head and ``cand`` the ones allowed
    to be heads (heads cover themselves at zero distance). For a fixed head
    set the members are placed by :func:`_assign`. When ``second_level`` is
    set, the cost of clustering the chosen heads one level up is added (and
    bounded) as well.
    """

    def __init__(self, d, in_range, clients, cand, capacity, F, cap2=None, deadline=math.inf):
        self.d = d
        self.in_range = in_range
        self.clients = np.asarray(clients, dtype=int)
        self.cand = np.asarray(cand, dtype=int)
        self.capacity = capacity
        self.F = F
        self.cap2 = cap2
        self.deadline = deadline
        self.explored = 0
        self.timed_out = False
        self.lower = 0.0
        self._level2_cache: dict[tuple[int, ...], tuple[float, dict] | None] = {}

    def _level2(self, heads: tuple[int, ...]):
        if heads not in self._level2_cache:
            sub = _HeadSearch(self.d, self.in_range, heads, heads, self.cap2, self.F, deadline=self.deadline)
            self._level2_cache[heads] = sub.run()
            self.explored += sub.explored
            self.timed_out |= sub.timed_out
        return self._level2_cache[heads]

    def _bounds(self, combos: np.ndarray) -> np.ndarray:
        """Lower bound on the total cost with exactly these head sets (inf if infeasible)."""
        m, k = combos.shape
        F = self.F
        dc = self.d[np.ix_(self.clients, combos.ravel())].reshape(len(self.clients), m, k)
        rc = self.in_range[np.ix_(self.clients, combos.ravel())].reshape(len(self.clients), m, k)
        nearest = np.where(rc, dc, np.inf).min(axis=2)  # (clients, m); heads get 0
        lb = nearest.sum(axis=0) + F * k
        if self.cap2 is not None:
            dh = self.d[combos[:, :, None], combos[:, None, :]]
            rh = self.in_range[combos[:, :, None], combos[:, None, :]]
            idx = np.arange(k)
            rh[:, idx, idx] = False
            nn = np.sort(np.where(rh, dh, np.inf).min(axis=2), axis=1)
            isolated = np.isinf(nn).sum(axis=1)
            n_super = np.maximum(-(-k // self.cap2), isolated)
            csum = np.concatenate([np.zeros((m, 1)), np.cumsum(np.where(np.isinf(nn), 0.0, nn), axis=1)], axis=1)
            lb = lb + F * n_super + csum[np.arange(m), k - n_super]
        return lb

    def _exact(self, heads: tuple[int, ...]):
        hs = set(heads)
        others = [int(i) for i in self.clients if i not in hs]
        a = _assign(self.d, self.in_range, others, heads, self.capacity - 1)
        if a is None:
            return None
        cost, mapping = a
        mapping.update({h: h for h in heads})
        total = cost + self.F * len(heads)
        level2 = None
        if self.cap2 is not None:
            level2 = self._level2(heads)
            if level2 is None:
                return None
            total += level2[0]
        return total, mapping, level2

    def run(self, incumbent: float = math.inf, start=None):
        """Return (cost, assignment[, level2]) of the optimum, or None if infeasible.

        ``start`` is an optional known-feasible solution in the same format
        used as the initial incumbent.
        """
        best = start
        best_cost = start[0] if start is not None else incumbent
        n = len(self.clients)
        if n == 0:
            return (0.0, {}, (0.0, {})) if self.cap2 is not None else (0.0, {})
        F = self.F
        k_lo = -(-n // self.capacity)

        def size_floor(k):
            floor = F * k
            if self.cap2 is not None:
                floor += F * -(-k // self.cap2)
            return floor

        for k in range(k_lo, len(self.cand) + 1):
            self.lower = size_floor(k)
            if size_floor(k) >= best_cost:
                break
            combos_iter = itertools.combinations(self.cand.tolist(), k)
            survivors = []
            while True:
                chunk = list(itertools.islice(combos_iter, _CHUNK))
                if not chunk:
                    break
                if time.perf_counter() > self.deadline:
                    self.timed_out = True
                    return best
                arr = np.array(chunk, dtype=int)
                lb = self._bounds(arr)
                self.explored += len(chunk)
                keep = np.flatnonzero(lb < best_cost - 1e-9)
                survivors.extend((float(lb[i]), chunk[i]) for i in keep)
            survivors.sort()
            for lb, heads in survivors:
                if lb >= best_cost - 1e-9:
                    break
                if time.perf_counter() > self.deadline:
                    self.timed_out = True
                    return best
                sol = self._exact(heads)
                if sol is not None and sol[0] < best_cost - 1e-9:
                    best_cost, best = sol[0], sol
        self.lower = best_cost if best is not None else self.lower
        return best


def _heuristic_start(topology, p, bilevel):
    from .heuristic import build_hierarchy

    h, orphans, _ = build_hierarchy(topology, p)
    if orphans:
        return None
    l1, l2 = price_hierarchy(topology, h, p)
    if not bilevel:
        return (l1, dict(h.l1_master_of))
    return (l1 + l2, dict(h.l1_master_of), (l2, dict(h.l2_master_of)))


def _solve_search(topology: Topology, p: ModelParams, budget: float, bilevel: bool) -> IlpSolution:
    t0 = time.perf_counter()
    n = topology.n
    if n == 0:
        return IlpSolution(OPTIMAL, Hierarchy.empty(), 0.0, 0.0, 0.0, bilevel=bilevel)
    d = topology.distances
    in_range = d <= p.bt_range_m
    elig = [j for j in range(n) if p.eligible(topology.nodes[j])]
    search = _HeadSearch(
        d, in_range, range(n), elig, p.max_cluster_size_l1, p.fixed_cost,
        cap2=p.max_cluster_size_l2 if bilevel else None,
        deadline=t0 + budget,
    )
    best = search.run(start=_heuristic_start(topology, p, bilevel))
    elapsed = time.perf_counter() - t0
    if best is None:
        status = TIMEOUT if search.timed_out else INFEASIBLE
        return IlpSolution(status, None, elapsed=elapsed, nodes_explored=search.explored, bilevel=bilevel)
    if bilevel:
        h = Hierarchy(best[1], best[2][1])
    else:
        h = Hierarchy.single_level(best[1])
    sol = _priced(OPTIMAL, h, topology, p, bilevel, elapsed=elapsed, nodes_explored=search.explored)
    if search.timed_out:
        sol.status = TIMEOUT
        sol.gap = max(0.0, (sol.objective - search.lower) / sol.objective)
    return sol


BACKENDS = {"search": _solve_search, "highs": _solve_highs}


def solve_single_level(
    topology: Topology,
    p: ModelParams = ModelParams(),
    budget: float = DEFAULT_BUDGET_S,
    backend: str = "search",
) -> IlpSolution:
    """Minimise member distances plus the fixed cost of masters.

    The returned hierarchy makes every master its own super master and
    ``level2_cost`` is reported as 0.
    """
    return BACKENDS[backend](topology, p, budget, False)


def solve_bilevel(
    topology: Topology,
    p: ModelParams = ModelParams(),
    budget: float = DEFAULT_BUDGET_S,
    backend: str = "search",
) -> IlpSolution:
    """Minimise the full two-level objective."""
    return BACKENDS[backend](topology, p, budget, True)


def _best_assignment(clients, heads, d, in_range, capacity):
    """Cheapest capacity-respecting map clients -> heads by full enumeration."""
    options = [[h for h in heads if in_range[c, h]] for c in clients]
    if any(not o for o in options):
        return None
    best_cost, best = math.inf, None
    for choice in itertools.product(*options):
        load = {}
        ok = True
        for h in choice:
            load[h] = load.get(h, 0) + 1
            if load[h] > capacity:
                ok = False
                break
        if not ok:
            continue
        cost = math.fsum(d[c, h] for c, h in zip(clients, choice))
        if cost < best_cost:
            best_cost, best = cost, dict(zip(clients, choice))
    return None if best is None else (best_cost, best)


def _subsets(items):
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


def solve_bruteforce(topology: Topology, p: ModelParams = ModelParams(), bilevel: bool = True) -> IlpSolution:
    """Exhaustive optimum for tiny instances (at most 10 nodes)."""
    n = topology.n
    if n > BRUTEFORCE_MAX_N:
        raise ParameterError(f"bruteforce supports at most {BRUTEFORCE_MAX_N} nodes, got {n}")
    t0 = time.perf_counter()
    if n == 0:
        return IlpSolution(OPTIMAL, Hierarchy.empty(), 0.0, 0.0, 0.0, bilevel=bilevel)
    d = topology.distances
    in_range = d <= p.bt_range_m
    elig = [j for j in range(n) if p.eligible(topology.nodes[j])]
    F = p.fixed_cost
    best_z, best_h, explored = math.inf, None, 0

    for masters in _subsets(elig):
        explored += 1
        if F * len(masters) >= best_z:
            continue
        others = [i for i in range(n) if i not in masters]
        a1 = _best_assignment(others, masters, d, in_range, p.max_cluster_size_l1 - 1)
        if a1 is None:
            continue
        cost1, l1 = a1
        l1.update({m: m for m in masters})
        if not bilevel:
            z = cost1 + F * len(masters)
            if z < best_z:
                best_z, best_h = z, Hierarchy.single_level(l1)
            continue
        for supers in _subsets(list(masters)):
            if F * (len(masters) + len(supers)) >= best_z:
                continue
            subs = [m for m in masters if m not in supers]
            a2 = _best_assignment(subs, supers, d, in_range, p.max_cluster_size_l2 - 1)
            if a2 is None:
                continue
            cost2, l2 = a2
            z = cost1 + F * len(masters) + cost2 + F * len(supers)
            if z < best_z:
                l2.update({s: s for s in supers})
                best_z, best_h = z, Hierarchy(dict(l1), l2)

    elapsed = time.perf_counter() - t0
    if best_h is None:
        return IlpSolution(INFEASIBLE, None, elapsed=elapsed, nodes_explored=explored, bilevel=bilevel)
    return _priced(OPTIMAL, best_h, topology, p, bilevel, elapsed=elapsed, nodes_explored=explored)
