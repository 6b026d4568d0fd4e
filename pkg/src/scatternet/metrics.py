"""Energy, throughput and efficiency of a clustered network.

Energy is per reporting period. Every node that is not a super master
sends one Bluetooth frame to its head and its head pays to receive it;
super masters forward over Wi-Fi. Plain members and plain masters therefore
cost ``e_bt_member + e_bt_head_per_member`` each and super masters
``e_wifi_report``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .model import Hierarchy

# Optimal-approach energy (J) at N = 100..800 that the Bluetooth defaults are fitted to.
REFERENCE_N = (100, 200, 300, 400, 500, 600, 700, 800)
REFERENCE_OPTIMAL_TE = (21.8, 43.5, 62.9, 84.7, 104.1, 125.8, 145.2, 167.0)
DIRECT_TE_AT_100 = 238.41

E_WIFI_REPORT = DIRECT_TE_AT_100 / 100  # 2.3841 J per node per period
# fit_bluetooth_energy() result, rms residual 0.067 J, max |residual| 0.096 J
E_BT_PER_SERVED_NODE = 0.1728151449931805


class EfficiencyError(ZeroDivisionError):
    """Efficiency is undefined for zero total energy."""


@dataclass(frozen=True)
class EnergyParams:
    e_wifi_report: float = E_WIFI_REPORT
    e_bt_member: float = E_BT_PER_SERVED_NODE / 2
    e_bt_head_per_member: float = E_BT_PER_SERVED_NODE / 2
    e_idle: float = 0.0

    def __post_init__(self):
        if min(self.e_wifi_report, self.e_bt_member, self.e_bt_head_per_member, self.e_idle) < 0:
            raise ValueError("energy parameters must be >= 0")


@dataclass(frozen=True)
class TrafficParams:
    frame_len: int = 20  # bytes
    frame_rate: float = 1.0  # frames per second
    data_rate_kbps: float = 1000.0

    def __post_init__(self):
        if self.frame_len <= 0 or self.frame_rate <= 0:
            raise ValueError("frame_len and frame_rate must be > 0")


def dense_super_count(n: int, cap: int = 8) -> int:
    """Fewest super masters possible for ``n`` nodes when everyone is in range."""
    return math.ceil(math.ceil(n / cap) / cap)


def fit_bluetooth_energy(
    n_values: Iterable[int] = REFERENCE_N,
    te_values: Iterable[float] = REFERENCE_OPTIMAL_TE,
    e_wifi: float = E_WIFI_REPORT,
    super_counts: Iterable[int] | None = None,
) -> tuple[float, np.ndarray]:
    """Least-squares Bluetooth cost per served node, and the residuals.

    Model: ``TE(N) = a * (N - S) + e_wifi * S`` with ``S`` super masters,
    by default the dense-deployment count ``ceil(ceil(N/8)/8)``.
    """
    n = np.asarray(list(n_values), dtype=float)
    te = np.asarray(list(te_values), dtype=float)
    s = np.asarray(list(super_counts) if super_counts is not None else [dense_super_count(int(k)) for k in n], dtype=float)
    x = n - s
    y = te - e_wifi * s
    a = float(x @ y / (x @ x))
    return a, te - (a * x + e_wifi * s)


def total_energy(h: Hierarchy, ep: EnergyParams = EnergyParams(), orphans: Iterable[int] = ()) -> float:
    l1 = h.l1_clusters()
    l2 = h.l2_clusters()
    head = 0.0
    for m, members in l1.items():
        served = len(members)
        if m in l2:
            served += len(l2[m])
            head += ep.e_wifi_report
        else:
            head += ep.e_bt_member
        head += ep.e_bt_head_per_member * served
    n_members = sum(len(v) for v in l1.values())
    return head + ep.e_bt_member * n_members + ep.e_idle * len(set(orphans))


def energy_direct(n: int, ep: EnergyParams = EnergyParams()) -> float:
    if n < 0:
        raise ValueError("n must be >= 0")
    return n * ep.e_wifi_report


def throughput(n: int, t: TrafficParams = TrafficParams(), fer: float = 0.0) -> float:
    """Successfully delivered bits per period: N * L * 8 * R * (1 - FER)."""
    if not 0.0 <= fer <= 1.0:
        raise ValueError("fer must lie in [0, 1]")
    return n * t.frame_len * 8 * t.frame_rate * (1.0 - fer)


def effective_throughput(
    h: Hierarchy,
    t: TrafficParams,
    fer_of: Callable[[int], float],
    mode: str = "bilevel",
    n: int | None = None,
) -> float:
    """Throughput limited by interference among the clusters that contend.

    Single-level clusters all contend, so the FER is taken at M1; in the
    two-level layout each second-level cluster is scheduled as one piconet,
    so it is taken at M2. ``n`` defaults to the number of clustered nodes.
    """
    count = {"single_level": h.m1, "bilevel": h.m2}[mode]
    n = len(h.nodes) if n is None else n
    return throughput(n, t, fer_of(count))


def efficiency(g: float, te: float) -> float:
    if te <= 0:
        raise EfficiencyError("total energy must be > 0")
    return g / te


METRICS_COLUMNS = ["n", "approach", "te_joules", "g_bits", "ef"]


def metrics_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for r in rows:
        ef = r["ef"]
        w.writerow([r["n"], r["approach"], f"{r['te_joules']:.4f}", f"{r['g_bits']:.4f}", "nan" if math.isnan(ef) else f"{ef:.4f}"])
    return buf.getvalue()
