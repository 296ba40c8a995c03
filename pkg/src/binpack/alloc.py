"""Robot assignment of task primitives and synchronized atomic sequencing."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from itertools import zip_longest
from typing import Iterable, Sequence, Union

from .env import Pack, ScenarioConfig, TaskPrimitive, Terminate, Unpack, WorldState
from .grid import ContractViolation, ItemSpec, Placement


class Source(str, enum.Enum):
    CONVEYOR = "conveyor"
    BUFFER = "buffer"
    BIN = "bin"


@dataclass(frozen=True)
class Pick:
    source: Source
    item: ItemSpec


@dataclass(frozen=True)
class PlaceToBin:
    item: ItemSpec
    placement: Placement


@dataclass(frozen=True)
class PlaceToBuffer:
    item: ItemSpec
    robot: int


@dataclass(frozen=True)
class Standby:
    pass


@dataclass(frozen=True)
class Ready:
    pass


STANDBY = Standby()
READY = Ready()
AtomicAction = Union[Pick, PlaceToBin, PlaceToBuffer, Standby, Ready]


@dataclass
class Allocation:
    """Primitives per robot plus the global order in which they execute."""

    queues: tuple[list[TaskPrimitive], ...]
    order: list[tuple[int, TaskPrimitive]] = field(default_factory=list)
    buffered: frozenset[int] = frozenset()  # ids already in a buffer beforehand


def _nearest(cfg: ScenarioConfig, slot: int, robots: Iterable[int]) -> int:
    return min(robots, key=lambda r: (abs(cfg.robot_x[r] - slot), r))


def allocate(action: Sequence[TaskPrimitive], world: WorldState,
             cfg: ScenarioConfig | None = None) -> Allocation:
    """Assign each primitive of a high-level action to a robot.

    Newly arrived items go to the nearest robot that can reach them (a robot
    already chosen by the planner is kept).  Unpacks alternate, starting with
    the less loaded robot.  A buffered item is repacked by the robot holding
    it, repacks running in reverse order of unpacking, before any new item.
    """
    cfg = cfg or world.cfg
    prims = [p for p in action if not isinstance(p, Terminate)]
    buffered = frozenset(it.id for it in world.C)
    if cfg.n_robot == 1:
        order = [(0, _with_robot(p, 0)) for p in prims]
        return Allocation(([p for _, p in order],), order, buffered)

    slots = {it.id: s for s, it in enumerate(world.conveyor.queue)}
    reach = world.reach()
    unpacked_here = [p.item.id for p in prims if isinstance(p, Unpack)]
    new_packs = [p for p in prims if isinstance(p, Pack)
                 and p.item.id not in buffered and p.item.id not in unpacked_here]
    repacks = [p for p in prims if isinstance(p, Pack)
               and (p.item.id in buffered or p.item.id in unpacked_here)]
    unpacks = [p for p in prims if isinstance(p, Unpack)]

    for p in new_packs:
        if p.item.id in world.bin:
            raise ContractViolation(f"pack of item {p.item.id} has no unpacking robot")

    loads = [0] * cfg.n_robot
    assigned_new = []
    for p in new_packs:
        if p.robot is not None:
            r = p.robot
        else:
            robots = reach.get(p.item.id) or range(cfg.n_robot)
            r = _nearest(cfg, slots.get(p.item.id, 0), robots)
        loads[r] += 1
        assigned_new.append((r, _with_robot(p, r)))

    holder = {it.id: r for r, buf in enumerate(world.buffers) for it in buf}
    assigned_unpacks = []
    turn = min(range(cfg.n_robot), key=lambda r: (loads[r], r))
    for p in unpacks:
        holder[p.item.id] = turn
        assigned_unpacks.append((turn, _with_robot(p, turn)))
        turn = 1 - turn

    # LIFO: items unpacked in this action come back newest first, then older buffer contents
    entry_order = [it.id for buf in world.buffers for it in buf] + unpacked_here
    rank = {iid: i for i, iid in enumerate(entry_order)}
    assigned_repacks = []
    for p in sorted(repacks, key=lambda p: -rank[p.item.id]):
        r = holder.get(p.item.id)
        if r is None:
            raise ContractViolation(f"no robot holds buffered item {p.item.id}")
        assigned_repacks.append((r, _with_robot(p, r)))

    order = assigned_unpacks + assigned_repacks + assigned_new
    queues = tuple([p for r, p in order if r == robot] for robot in range(cfg.n_robot))
    return Allocation(queues, order, buffered)


def _with_robot(p: TaskPrimitive, robot: int) -> TaskPrimitive:
    if isinstance(p, (Pack, Unpack)) and p.robot != robot:
        return replace(p, robot=robot)
    return p


@dataclass(frozen=True)
class RoundSchedule:
    rounds: tuple[tuple[AtomicAction, ...], ...]

    @property
    def n_robot(self) -> int:
        return len(self.rounds[0]) if self.rounds else 0

    @property
    def packing_steps(self) -> int:
        return sum(1 for rnd in self.rounds if any(isinstance(a, PlaceToBin) for a in rnd))

    def program(self, robot: int) -> list[AtomicAction]:
        return [rnd[robot] for rnd in self.rounds]


def robot_program(queue: Sequence[TaskPrimitive], robot: int,
                  buffered: Iterable[int] = ()) -> list[AtomicAction]:
    """Atomic actions for one robot's primitives, ending with READY."""
    in_buffer = set(buffered)
    last_unpack = max((i for i, p in enumerate(queue) if isinstance(p, Unpack)), default=None)
    prog: list[AtomicAction] = []
    i = 0
    while i < len(queue):
        p = queue[i]
        if isinstance(p, Unpack):
            nxt = queue[i + 1] if i + 1 < len(queue) else None
            if i == last_unpack and isinstance(nxt, Pack) and nxt.item.id == p.item.id:
                prog += [Pick(Source.BIN, p.item), PlaceToBin(p.item, nxt.placement())]
                i += 2
                continue
            prog += [Pick(Source.BIN, p.item), PlaceToBuffer(p.item, robot)]
            in_buffer.add(p.item.id)
        elif isinstance(p, Pack):
            src = Source.BUFFER if p.item.id in in_buffer else Source.CONVEYOR
            in_buffer.discard(p.item.id)
            prog += [Pick(src, p.item), PlaceToBin(p.item, p.placement())]
        i += 1
    prog.append(READY)
    return prog


def sequence_atomic(queues: Sequence[Sequence[TaskPrimitive]] | Allocation,
                    buffered: Iterable[int] = ()) -> RoundSchedule:
    if isinstance(queues, Allocation):
        buffered = queues.buffered
        queues = queues.queues
    buffered = frozenset(buffered)
    progs = [robot_program(q, r, buffered) for r, q in enumerate(queues)]
    if len(progs) == 2 and len(queues[0]) != len(queues[1]):
        lighter = 0 if len(queues[0]) < len(queues[1]) else 1
        progs[lighter].insert(0, STANDBY)
    rounds = tuple(tuple(rnd) for rnd in zip_longest(*progs, fillvalue=STANDBY))
    return RoundSchedule(rounds)


@dataclass(frozen=True)
class StepReport:
    packing_steps: int
    rounds: int
    busy: tuple[int, ...]


def count_steps(schedules: RoundSchedule | Iterable[RoundSchedule]) -> StepReport:
    if isinstance(schedules, RoundSchedule):
        schedules = [schedules]
    steps = rounds = 0
    busy: list[int] = []
    for s in schedules:
        steps += s.packing_steps
        rounds += len(s.rounds)
        if len(busy) < s.n_robot:
            busy += [0] * (s.n_robot - len(busy))
        for rnd in s.rounds:
            for r, a in enumerate(rnd):
                if not isinstance(a, (Standby, Ready)):
                    busy[r] += 1
    return StepReport(steps, rounds, tuple(busy))


def holds_one(schedule: RoundSchedule) -> bool:
    """No robot picks twice without placing in between."""
    for r in range(schedule.n_robot):
        holding = False
        for a in schedule.program(r):
            if isinstance(a, Pick):
                if holding:
                    return False
                holding = True
            elif isinstance(a, (PlaceToBin, PlaceToBuffer)):
                holding = False
    return True


def _describe(a: AtomicAction) -> dict:
    if isinstance(a, Pick):
        return {"action": "pick", "source": a.source.value, "item": a.item.id, "cells": []}
    if isinstance(a, PlaceToBin):
        return {"action": "place_to_bin", "item": a.item.id,
                "cells": [[x - 1, y - 1] for x, y in a.placement.cells()]}
    if isinstance(a, PlaceToBuffer):
        return {"action": "place_to_buffer", "item": a.item.id, "cells": []}
    return {"action": "standby" if isinstance(a, Standby) else "ready", "item": None, "cells": []}


def schedule_rows(schedule: RoundSchedule, round_offset: int = 0) -> list[dict]:
    rows = []
    for i, rnd in enumerate(schedule.rounds):
        for r, a in enumerate(rnd):
            rows.append({"round": round_offset + i, "robot": r, **_describe(a)})
    return rows


def write_schedule(schedules: Iterable[RoundSchedule], path) -> None:
    """Export rounds as JSON lines: round, robot, action, item, cells."""
    offset = 0
    with open(path, "w") as f:
        for s in schedules:
            for row in schedule_rows(s, offset):
                f.write(json.dumps(row) + "\n")
            offset += len(s.rounds)
