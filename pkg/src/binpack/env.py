"""High-level world: conveyor zones, item sets, buffers and task primitives.

Conveyor slots are counted from the front.  In dual-robot scenarios the
positioned items are split into three contiguous zones in queue order:
``beta`` (front robot only), ``O`` (both robots) and ``alpha`` (rear robot
only), with capacities ``(n_A - n_O, n_O, n_A - n_O)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

from .grid import GridBin, ItemSpec, Orientation, Placement, apply_pack, apply_unpack


class Robot(enum.IntEnum):
    FRONT = 0
    REAR = 1


class PrimitiveError(ValueError):
    """A task primitive was executed against a world that does not admit it."""


class ItemNotAvailable(PrimitiveError):
    pass


class BufferFull(PrimitiveError):
    pass


class EpisodeOver(PrimitiveError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n_robot: int
    n_R: int
    n_A: int
    n_O: int = 0
    robot_x: tuple[float, ...] | None = None
    buffer_cap: int | None = None  # None: unbounded

    def __post_init__(self):
        if self.n_robot not in (1, 2):
            raise ValueError("n_robot must be 1 or 2")
        if self.n_robot == 1:
            object.__setattr__(self, "n_O", 0)
        if not 0 <= self.n_O <= self.n_A or self.n_A < 1:
            raise ValueError(f"{self.name}: need 0 <= n_O <= n_A and n_A >= 1")
        if self.n_max > self.n_R:
            raise ValueError(f"{self.name}: n_max {self.n_max} exceeds n_R {self.n_R}")
        if self.robot_x is None:
            # each robot centred over the slots it can reach
            base = [(self.n_A - 1) / 2]
            if self.n_robot == 2:
                base.append(self.n_A - self.n_O + (self.n_A - 1) / 2)
            object.__setattr__(self, "robot_x", tuple(base))
        if len(self.robot_x) != self.n_robot:
            raise ValueError("one robot_x per robot")

    @property
    def n_max(self) -> int:
        return self.n_A * self.n_robot - self.n_O * (self.n_robot - 1)

    @property
    def zone_caps(self) -> tuple[int, int, int]:
        """Capacities (beta, O, alpha)."""
        if self.n_robot == 1:
            return self.n_A, 0, 0
        return self.n_A - self.n_O, self.n_O, self.n_A - self.n_O


SCENARIOS = {
    "S-R1A1": ScenarioConfig("S-R1A1", 1, 1, 1),
    "S-R5A1": ScenarioConfig("S-R5A1", 1, 5, 1),
    "S-R5A3": ScenarioConfig("S-R5A3", 1, 5, 3),
    "D-R2A2O2": ScenarioConfig("D-R2A2O2", 2, 2, 2, 2),
    "D-R5A2O2": ScenarioConfig("D-R5A2O2", 2, 5, 2, 2),
    "D-R5A3O1": ScenarioConfig("D-R5A3O1", 2, 5, 3, 1),
}


def scenario(name: str) -> ScenarioConfig:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


def n_max(cfg: ScenarioConfig) -> int:
    return cfg.n_max


# --------------------------------------------------------------------------
# conveyor

def balance_zones(k_total: int, k_alpha_prev: int, cfg: ScenarioConfig) -> tuple[int, int, int]:
    """Zone counts (k_O, k_alpha, k_beta) for a conveyor holding fewer than
    n_max items, given the rear-zone count before the conveyor moves."""
    if k_total <= 0:
        return 0, 0, 0
    k_o = min(k_total - k_alpha_prev, cfg.n_O)
    k_alpha = max(k_alpha_prev, k_total // 2 + 1 - k_o)
    return k_o, k_alpha, k_total - k_alpha - k_o


@dataclass(frozen=True)
class ConveyorState:
    """Known items in arrival order plus a count of not-yet-recognised items
    behind them.  Zone counts cover a prefix of the conveyor."""

    queue: tuple[ItemSpec, ...]
    hidden: int = 0
    k_beta: int = 0
    k_O: int = 0
    k_alpha: int = 0

    @property
    def length(self) -> int:
        return len(self.queue) + self.hidden

    @property
    def k_total(self) -> int:
        """Items currently positioned in a zone."""
        return self.k_beta + self.k_O + self.k_alpha

    def zone_of(self, slot: int) -> str | None:
        if slot < self.k_beta:
            return "beta"
        if slot < self.k_beta + self.k_O:
            return "O"
        if slot < self.k_total:
            return "alpha"
        return None

    def remove(self, item_id: int) -> "ConveyorState":
        for slot, it in enumerate(self.queue):
            if it.id == item_id:
                break
        else:
            raise ItemNotAvailable(f"item {item_id} is not on the conveyor")
        zone = self.zone_of(slot)
        counts = {"beta": self.k_beta, "O": self.k_O, "alpha": self.k_alpha}
        if zone is not None:
            counts[zone] -= 1
        return ConveyorState(self.queue[:slot] + self.queue[slot + 1:], self.hidden,
                             counts["beta"], counts["O"], counts["alpha"])


def advance_conveyor(state: ConveyorState, cfg: ScenarioConfig) -> ConveyorState:
    """Re-position items after picks or arrivals."""
    k = state.length
    beta_cap, o_cap, alpha_cap = cfg.zone_caps
    if cfg.n_robot == 1 or k >= cfg.n_max:
        # continuous fill from the front
        kb = min(k, beta_cap)
        ko = min(k - kb, o_cap)
        ka = min(k - kb - ko, alpha_cap)
    else:
        ko, ka, kb = balance_zones(k, state.k_alpha, cfg)
    return replace(state, k_beta=kb, k_O=ko, k_alpha=ka)


def slot_reach(state: ConveyorState, cfg: ScenarioConfig, slot: int) -> frozenset[int]:
    """Robots that can reach the item in ``slot``."""
    if cfg.n_robot == 1:
        return frozenset({0}) if slot < min(cfg.n_A, state.k_total) else frozenset()
    zone = state.zone_of(slot)
    if zone == "beta":
        return frozenset({Robot.FRONT})
    if zone == "O":
        return frozenset({Robot.FRONT, Robot.REAR})
    if zone == "alpha":
        return frozenset({Robot.REAR})
    return frozenset()


# --------------------------------------------------------------------------
# task primitives

@dataclass(frozen=True)
class Pack:
    item: ItemSpec
    orientation: Orientation
    x: int
    y: int
    robot: int | None = None
    depth: int | None = None

    def placement(self, seq: int = 0) -> Placement:
        return Placement(self.item, self.orientation, self.x, self.y, seq)


@dataclass(frozen=True)
class Unpack:
    item: ItemSpec
    robot: int | None = None


@dataclass(frozen=True)
class Terminate:
    pass


TERMINATE = Terminate()
TaskPrimitive = Union[Pack, Unpack, Terminate]


def high_level_reward(executed: Iterable[TaskPrimitive]) -> int:
    total = 0
    for p in executed:
        if isinstance(p, Pack):
            total += p.item.area
        elif isinstance(p, Unpack):
            total -= p.item.area
    return total


# --------------------------------------------------------------------------
# world

@dataclass(frozen=True)
class WorldState:
    cfg: ScenarioConfig
    bin: GridBin
    conveyor: ConveyorState
    buffers: tuple[tuple[ItemSpec, ...], ...]
    seq: int = 0
    terminated: bool = False
    executed: tuple[TaskPrimitive, ...] = field(default=(), repr=False)

    @classmethod
    def new(cls, cfg: ScenarioConfig, width: int, height: int,
            items: Sequence[ItemSpec], buffered: Sequence[ItemSpec] = ()) -> "WorldState":
        conveyor = advance_conveyor(ConveyorState(tuple(items)), cfg)
        buffers = [tuple(buffered)] + [()] * (cfg.n_robot - 1)
        return cls(cfg, GridBin.empty(width, height), conveyor, tuple(buffers))

    @property
    def N(self) -> tuple[ItemSpec, ...]:
        """Recognised conveyor items."""
        return self.conveyor.queue[:self.cfg.n_R]

    @property
    def I(self) -> dict[int, Placement]:
        return self.bin.placements

    @property
    def C(self) -> tuple[ItemSpec, ...]:
        return tuple(it for buf in self.buffers for it in buf)

    def buffer_owner(self, item_id: int) -> int | None:
        for r, buf in enumerate(self.buffers):
            if any(it.id == item_id for it in buf):
                return r
        return None

    def reach(self) -> dict[int, frozenset[int]]:
        """Robots able to reach each accessible item (conveyor or buffer)."""
        out: dict[int, frozenset[int]] = {}
        for slot, it in enumerate(self.N):
            r = slot_reach(self.conveyor, self.cfg, slot)
            if r:
                out[it.id] = r
        for r, buf in enumerate(self.buffers):
            for it in buf:
                out[it.id] = frozenset({r})
        return out

    def observed(self) -> "WorldState":
        """Copy in which items past the recognition window are unknown."""
        q = self.conveyor.queue
        n_r = self.cfg.n_R
        if len(q) <= n_r:
            return self
        conv = replace(self.conveyor, queue=q[:n_r], hidden=self.conveyor.hidden + len(q) - n_r)
        return replace(self, conveyor=conv)


def accessible_items(state: WorldState, robot: int, cfg: ScenarioConfig | None = None) -> list[ItemSpec]:
    cfg = cfg or state.cfg
    out = [it for slot, it in enumerate(state.N)
           if robot in slot_reach(state.conveyor, cfg, slot)]
    out.extend(state.buffers[robot])
    return out


def exec_primitive(state: WorldState, p: TaskPrimitive) -> WorldState:
    if state.terminated:
        raise EpisodeOver("episode already terminated")
    if isinstance(p, Terminate):
        return replace(state, terminated=True, executed=state.executed + (p,))
    if isinstance(p, Pack):
        owner = state.buffer_owner(p.item.id)
        conveyor, buffers = state.conveyor, state.buffers
        if owner is not None:
            buffers = tuple(tuple(it for it in buf if it.id != p.item.id) if r == owner else buf
                            for r, buf in enumerate(buffers))
        elif any(it.id == p.item.id for it in state.N):
            conveyor = conveyor.remove(p.item.id)
        else:
            raise ItemNotAvailable(f"item {p.item.id} is neither recognised nor buffered")
        new_bin = apply_pack(state.bin, p.placement(state.seq))
        return replace(state, bin=new_bin, conveyor=advance_conveyor(conveyor, state.cfg),
                       buffers=buffers, seq=state.seq + 1, executed=state.executed + (p,))
    if isinstance(p, Unpack):
        if p.item.id not in state.bin:
            raise ItemNotAvailable(f"item {p.item.id} is not packed")
        robot = 0 if p.robot is None else p.robot
        cap = state.cfg.buffer_cap
        if cap is not None and len(state.buffers[robot]) >= cap:
            raise BufferFull(f"buffer of robot {robot} is full")
        new_bin = apply_unpack(state.bin, p.item.id)
        buffers = tuple(buf + (p.item,) if r == robot else buf
                        for r, buf in enumerate(state.buffers))
        return replace(state, bin=new_bin, buffers=buffers, executed=state.executed + (p,))
    raise TypeError(f"not a task primitive: {p!r}")

