"""Frame error rate of co-located frequency-hopping piconets.

One observed piconet (a master and a slave) shares the band with ``P - 1``
interfering piconets and optionally a Wi-Fi block. Slots are aligned; in
every slot each piconet hops to a uniformly random channel. A received
frame is lost when an active interferer within the interference radius
transmits on the same channel in that slot.

The master receives uplink frames in odd slots and the slave downlink
frames in even slots. An interfering piconet's odd slots are busy when any
of its members has data, its even slots only when its master has data, so
uplink slots are more crowded and the master sees the higher error rate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import stats
from scipy.optimize import brentq

CHANNELS = 79
WIFI_WIDTH = 22
MEMBERS = 7

# Reference anchors: FER of a piconet with one and six interfering neighbours.
FER_AT_2 = 0.0068
FER_AT_7 = 0.0927


class FerRangeError(ValueError):
    """Requested piconet count is outside the curve's domain."""


def fer_analytic(P: int, channels: int = CHANNELS) -> float:
    """Per-slot collision probability with ``P - 1`` always-on interferers."""
    if P < 1:
        raise ValueError("P must be >= 1")
    return 1.0 - (1.0 - 1.0 / channels) ** (P - 1)


def busy_probabilities(duty: float, members: int = MEMBERS) -> tuple[float, float]:
    """(uplink, downlink) probability that an interferer transmits in a slot."""
    return 1.0 - (1.0 - duty) ** members, duty


def expected_fer(P: int, duty: float, channels: int = CHANNELS, members: int = MEMBERS) -> tuple[float, float]:
    """Closed-form (master, slave) FER of the slot model, all interferers in range."""
    up, down = busy_probabilities(duty, members)
    return (
        1.0 - (1.0 - up / channels) ** (P - 1),
        1.0 - (1.0 - down / channels) ** (P - 1),
    )


def fit_duty(target: float = FER_AT_2, channels: int = CHANNELS, members: int = MEMBERS) -> float:
    """Duty at which the mean of master and slave FER for P=2 equals ``target``."""
    return brentq(lambda d: sum(expected_fer(2, d, channels, members)) / 2 - target, 0.0, 1.0, xtol=1e-15)


# fit_duty() with the defaults; test_interference checks the two agree.
DEFAULT_DUTY = 0.2319958783941273


@dataclass(frozen=True)
class WifiInterferer:
    center: int = 39
    width: int = WIFI_WIDTH
    duty: float = 0.5

    def covers(self, channel: np.ndarray) -> np.ndarray:
        lo = self.center - self.width // 2
        return (channel >= lo) & (channel < lo + self.width)


@dataclass(frozen=True)
class FerConfig:
    piconets: int
    channels: int = CHANNELS
    slots_per_run: int = 20000
    runs: int = 20
    duty: float = DEFAULT_DUTY
    members: int = MEMBERS
    wifi: WifiInterferer | None = None
    distance_law: tuple[float, float] = (0.1, 10.0)
    radius: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.piconets < 1 or self.channels < 1 or self.runs < 1 or self.slots_per_run < 2:
            raise ValueError("piconets, channels, runs must be >= 1 and slots_per_run >= 2")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError("duty must lie in [0, 1]")


@dataclass(frozen=True)
class FerEstimate:
    fer_master: float
    fer_slave: float
    ci95_halfwidth: float
    runs: int
    frames: int = 0  # received frames per role, summed over runs

    @property
    def fer(self) -> float:
        """Piconet FER: mean of the master and slave rates."""
        return (self.fer_master + self.fer_slave) / 2


def _run(cfg: FerConfig, rng: np.random.Generator) -> tuple[int, int, int, int]:
    S = cfg.slots_per_run
    k = cfg.piconets - 1
    lo, hi = cfg.distance_law
    active = rng.uniform(lo, hi, k) <= cfg.radius
    own = rng.integers(0, cfg.channels, S)
    hops = rng.integers(0, cfg.channels, (S, k))
    up, down = busy_probabilities(cfg.duty, cfg.members)
    odd = (np.arange(S) % 2 == 1)[:, None]
    busy = rng.random((S, k)) < np.where(odd, up, down)
    hit = ((hops == own[:, None]) & busy & active[None, :]).any(axis=1)
    if cfg.wifi is not None:
        wifi_near = rng.uniform(lo, hi) <= cfg.radius
        gate = rng.random(S) < cfg.wifi.duty
        hit |= wifi_near & gate & cfg.wifi.covers(own)
    m_slots = odd[:, 0]
    return int(hit[m_slots].sum()), int(m_slots.sum()), int(hit[~m_slots].sum()), int((~m_slots).sum())


def simulate_fer(cfg: FerConfig) -> FerEstimate:
    """Monte Carlo estimate; run ``r`` draws from its own child seed, so the
    result does not depend on execution order."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    per_m, per_s = [], []
    frames = 0
    for child in children:
        em, nm, es, ns = _run(cfg, np.random.default_rng(child))
        per_m.append(em / nm)
        per_s.append(es / ns)
        frames += nm
    fm, fs = float(np.mean(per_m)), float(np.mean(per_s))
    if cfg.runs > 1:
        tq = stats.t.ppf(0.975, cfg.runs - 1)
        half = tq * max(np.std(per_m, ddof=1), np.std(per_s, ddof=1)) / math.sqrt(cfg.runs)
    else:
        half = math.nan
    return FerEstimate(fm, fs, float(half), cfg.runs, frames)


REFERENCE_FILE = "fer_reference_v1.csv"


def _reference_rows() -> list[dict]:
    text = resources.files("scatternet.data").joinpath(REFERENCE_FILE).read_text()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def reference_table() -> dict[int, tuple[float, str]]:
    """P -> (FER, source) where source is ``measured``, ``derived`` or ``interpolated``."""
    return {int(r["P"]): (float(r["fer"]), r["source"]) for r in _reference_rows()}


def fer_reference(P: int) -> float:
    table = reference_table()
    if P not in table:
        raise FerRangeError(f"P={P} outside reference table {min(table)}..{max(table)}")
    return table[P][0]


@dataclass
class FerCurve:
    points: dict[int, FerEstimate] = field(default_factory=dict)
    mode: str = "monte_carlo"

    def __call__(self, P: int) -> float:
        if P not in self.points:
            raise FerRangeError(f"P={P} outside curve domain {sorted(self.points)}")
        return self.points[P].fer

    @classmethod
    def reference(cls) -> "FerCurve":
        return cls({P: FerEstimate(v, v, 0.0, 0) for P, (v, _) in reference_table().items()}, "reference_table")

    @classmethod
    def analytic(cls, p_values, duty: float = DEFAULT_DUTY, channels: int = CHANNELS, members: int = MEMBERS) -> "FerCurve":
        pts = {}
        for P in p_values:
            fm, fs = expected_fer(P, duty, channels, members)
            pts[P] = FerEstimate(fm, fs, 0.0, 0)
        return cls(pts, "analytic")

    @classmethod
    def monte_carlo(cls, p_values, base: FerConfig | None = None) -> "FerCurve":
        base = base or FerConfig(piconets=1)
        return cls({P: simulate_fer(replace(base, piconets=P)) for P in p_values}, "monte_carlo")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["P", "fer_master", "fer_slave", "ci95"])
        for P in sorted(self.points):
            e = self.points[P]
            w.writerow([P, f"{e.fer_master:.4f}", f"{e.fer_slave:.4f}", f"{e.ci95_halfwidth:.4f}"])
        return buf.getvalue()
