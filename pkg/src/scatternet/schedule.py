"""TDMA slot plans and delay bounds for the two-level hierarchy.

Time is integer microseconds. A cycle ``T`` is two 625 us slots: the head
talks in the even slot, one member answers in the following odd slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import Hierarchy, StructuralError

SLOT_US = 625
CYCLE_US = 2 * SLOT_US


def tts_level1(member_count: int, T: int = CYCLE_US) -> int:
    if member_count < 0:
        raise ValueError("member_count must be >= 0")
    return member_count * T


def d1_max(member_counts: Sequence[int], T: int = CYCLE_US) -> int:
    if not member_counts:
        raise ValueError("d1_max needs at least one cluster")
    return max(member_counts) * T


def tts_level2(member_counts: Mapping[int, int], super_master: int, T: int = CYCLE_US) -> int:
    """Time for one second-level cluster to gather everything at its head.

    ``member_counts`` maps each master of the cluster (super master
    included) to the size of its own first-level member list. Each member
    master relays its members plus its own frame; the super master's own
    members need one cycle each.
    """
    if super_master not in member_counts:
        raise StructuralError(f"super master {super_master} is not in its cluster")
    cycles = member_counts[super_master]
    cycles += sum(n + 1 for m, n in member_counts.items() if m != super_master)
    return cycles * T


@dataclass(frozen=True)
class DelayReport:
    per_l1_tts: dict[int, int]
    d1_max: int
    per_l2_tts: dict[int, int]
    td2: int

    def to_dict(self) -> dict:
        return {
            "per_l1_tts_us": {str(k): v for k, v in sorted(self.per_l1_tts.items())},
            "d1_max_us": self.d1_max,
            "per_l2_tts_us": {str(k): v for k, v in sorted(self.per_l2_tts.items())},
            "td2_us": self.td2,
        }


def total_delay_bilevel(h: Hierarchy, T: int = CYCLE_US) -> DelayReport:
    l1 = h.l1_clusters()
    per_l1 = {m: tts_level1(len(members), T) for m, members in l1.items()}
    per_l2 = {}
    for s, subs in h.l2_clusters().items():
        counts = {m: len(l1[m]) for m in [s, *subs]}
        per_l2[s] = tts_level2(counts, s, T)
    return DelayReport(
        per_l1,
        max(per_l1.values(), default=0),
        per_l2,
        max(per_l2.values(), default=0),
    )


@dataclass(frozen=True)
class Transmission:
    sender: int
    receiver: int
    slot: int
    level: int
    origin: int  # node whose data the frame carries


@dataclass
class SlotPlan:
    slot_len: int = SLOT_US
    cycle: int = CYCLE_US
    transmissions: list[Transmission] = field(default_factory=list)

    @property
    def member_slots(self) -> dict[int, int]:
        """Level-1 uplink slot of every member."""
        return {t.sender: t.slot for t in self.transmissions if t.level == 1}

    def head_slots(self, head: int) -> list[int]:
        """Even slots in which ``head`` polls its level-1 members."""
        return sorted(t.slot - 1 for t in self.transmissions if t.level == 1 and t.receiver == head)

    def completion_us(self, receiver: int | None = None) -> int:
        """End of the last transmission, optionally only those heard by ``receiver``."""
        ends = [
            (t.slot + 1) * self.slot_len
            for t in self.transmissions
            if receiver is None or t.receiver == receiver
        ]
        return max(ends, default=0)


def build_slot_plan(h: Hierarchy, T: int = CYCLE_US) -> SlotPlan:
    """Uplink schedule whose completion times match the delay formulas.

    Members of a first-level cluster answer in consecutive odd slots in id
    order, all clusters in parallel. Within a second-level cluster the super
    master's own members go first; then each member master, in id order,
    relays its own frame followed by its members' frames, one cycle each.
    """
    slot = T // 2
    plan = SlotPlan(slot, T)
    l1 = h.l1_clusters()
    for m, members in l1.items():
        for k, i in enumerate(members):
            plan.transmissions.append(Transmission(i, m, 2 * k + 1, 1, i))
    for s, subs in h.l2_clusters().items():
        cycle = len(l1[s])
        for m in subs:
            for origin in [m, *l1[m]]:
                plan.transmissions.append(Transmission(m, s, 2 * cycle + 1, 2, origin))
                cycle += 1
    return plan
