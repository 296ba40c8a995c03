"""High-level search: depth-first selective beam search over packing orders
and orientations, forward simulation of candidate sequences, and repacking.

The tree never models the conveyor: accessibility is fixed at the root, and
each root-to-leaf path is reordered into an executable job queue before it is
replayed on a clone of the world by :func:`forward_simulate`.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

from .env import (TERMINATE, ConveyorState, Pack, ScenarioConfig, TaskPrimitive, Terminate, Unpack,
                  WorldState, advance_conveyor, exec_primitive, slot_reach)
from .grid import (ContractViolation, GridBin, ItemSpec, Orientation, anchor_table, apply_pack,
                   border_bits, decode_action, footprint_bits, is_full, rotated_size, strip_bits,
                   utilization, Placement)
from .policy import GreedyPolicy, Policy

_DEFAULT_POLICY = GreedyPolicy(max_cache=200_000)


@dataclass(frozen=True)
class SearchConfig:
    beam_width: int | None = None  # None: Selection keeps every candidate
    prune_floor: int = 3
    require_full_pack: bool = False
    use_repack: bool = False
    repack_budget: float = 1.0  # seconds per repack trial
    repack_max_subsets: int | None = None  # deterministic cap, checked with the clock
    rotation: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.beam_width is not None and self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.repack_budget < 0:
            raise ValueError("repack_budget must be >= 0")


class TupleEntry(NamedTuple):
    item: ItemSpec
    orientation: Orientation
    action: int
    depth: int
    reward: int = 0


@dataclass(frozen=True)
class CandidateSequence:
    entries: tuple[TupleEntry, ...]
    contains_no_position: bool
    reordered: bool = True

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def item_ids(self) -> tuple[int, ...]:
        return tuple(e.item.id for e in self.entries)


@dataclass(frozen=True)
class EvaluatedSequence:
    sequence: CandidateSequence
    mu: int
    util: Fraction
    action: tuple[TaskPrimitive, ...]
    depth_sum: int
    predicted_bits: int

    @property
    def contains_no_position(self) -> bool:
        return self.sequence.contains_no_position

    def rank_key(self):
        ids = tuple(p.item.id for p in self.action if not isinstance(p, Terminate))
        return (-self.mu, -self.util, self.depth_sum, ids)


@dataclass(frozen=True)
class HighLevelAction:
    primitives: tuple[TaskPrimitive, ...]
    util: Fraction
    chi_star: EvaluatedSequence | None = None
    predicted_bits: int | None = None
    repacked: bool = False
    repack_seconds: float = 0.0
    candidates: int = 0

    @property
    def terminates(self) -> bool:
        return any(isinstance(p, Terminate) for p in self.primitives)

    def __iter__(self):
        return iter(self.primitives)

    def __len__(self):
        return len(self.primitives)


# --------------------------------------------------------------------------
# tree expansion

@dataclass
class SearchNode:
    bin: GridBin
    items: tuple[ItemSpec, ...]  # N and C items not yet virtually packed
    depth: int = 0
    n: int = 0


class Candidate(NamedTuple):
    item: ItemSpec
    orientation: Orientation
    action: int
    reward: int
    no_position: bool


class _Context:
    """Per-root data shared by a tree expansion and its simulations."""

    def __init__(self, world: WorldState, cfg: SearchConfig, policy: Policy, trace=None):
        self.world = world
        self.cfg = cfg
        self.policy = policy
        self.width, self.height = world.bin.width, world.bin.height
        self.nop = self.width * self.height
        self.reach = world.reach()
        self.c_ids = frozenset(it.id for it in world.C)
        self.arrival = {it.id: slot for slot, it in enumerate(world.conveyor.queue)}
        self.trace = trace

    def accessible(self, item_id: int) -> bool:
        return item_id in self.reach

    def orientations(self, item: ItemSpec) -> tuple[Orientation, ...]:
        if self.cfg.rotation and item.w != item.h:
            return (Orientation.DEG0, Orientation.DEG90)
        return (Orientation.DEG0,)


def reward_sorting(candidates: Sequence[Candidate]) -> list[Candidate]:
    """Reward descending, then item area descending, then id, then DEG0 first.
    No-position candidates go last."""
    return sorted(candidates, key=lambda c: (c.no_position, -c.reward, -c.item.area,
                                             c.item.id, int(c.orientation)))


def selection(ranked: Sequence[Candidate], beam_width: int | None, remaining_items: int,
              prune_floor: int = 3) -> list[Candidate]:
    """Top-K of a ranked candidate list.

    Pruning is skipped when fewer than ``prune_floor`` items remain.  Every
    no-position candidate leads to the same simulated outcome, so at most one
    is kept.
    """
    feasible = [c for c in ranked if not c.no_position]
    nops = [c for c in ranked if c.no_position]
    if not feasible:
        return nops[:1]
    pool = feasible + nops[:1]
    if beam_width is None or remaining_items < prune_floor:
        return pool
    return pool[:beam_width]


def sequence_sorting(chi: Sequence[TupleEntry], c_ids, accessible, arrival,
                     no_position: int | None = None) -> CandidateSequence:
    """Buffered items first, then accessible conveyor items (both in tree
    order), then inaccessible items in arrival order."""
    buffered = [e for e in chi if e.item.id in c_ids]
    acc = [e for e in chi if e.item.id not in c_ids and e.item.id in accessible]
    rest = sorted((e for e in chi if e.item.id not in c_ids and e.item.id not in accessible),
                  key=lambda e: arrival.get(e.item.id, len(arrival)))
    entries = tuple(buffered + acc + rest)
    return CandidateSequence(entries, any(e.action == no_position for e in entries))


def _sort_chi(chi, ctx: _Context) -> CandidateSequence:
    return sequence_sorting(chi, ctx.c_ids, ctx.reach, ctx.arrival, ctx.nop)


def tree_expansion(v: SearchNode, X: list, chi: tuple, d: int, n: int, require_full_pack: bool,
                   ctx: _Context) -> tuple[list, bool]:
    candidates: list[Candidate] = []
    stop = n == 0
    for o in v.items:
        all_nop = True
        for phi in ctx.orientations(o):
            dec = ctx.policy.decide(v.bin, rotated_size(o, phi))
            nop = dec.action == ctx.nop
            if not nop:
                all_nop = False
                if ctx.accessible(o.id):
                    stop = False
            candidates.append(Candidate(o, phi, dec.action, dec.score, nop))
        if require_full_pack and all_nop:
            return X, False
    if stop:
        return X, False

    ranked = selection(reward_sorting(candidates), ctx.cfg.beam_width, len(v.items),
                       ctx.cfg.prune_floor)
    for c in ranked:
        entry = TupleEntry(c.item, c.orientation, c.action, d + 1, c.reward)
        chi2 = chi + (entry,)
        if ctx.trace is not None:
            ctx.trace.append({"depth": d + 1, "item": c.item.id, "orientation": int(c.orientation),
                              "action": c.action, "reward": c.reward})
        full = False
        child = None
        if not c.no_position:
            x, y = decode_action(c.action, ctx.width, ctx.height)
            child_bin = apply_pack(v.bin, Placement(c.item, c.orientation, x, y))
            child = SearchNode(child_bin, tuple(it for it in v.items if it.id != c.item.id),
                               d + 1, n + (1 if ctx.accessible(c.item.id) else 0))
            full = is_full(child_bin)
        if c.no_position or not child.items or full:
            X.append(_sort_chi(chi2, ctx))
            if require_full_pack and full:
                return X, True
            continue
        X, solved = tree_expansion(child, X, chi2, d + 1, child.n, require_full_pack, ctx)
        if solved:
            return X, True
    return X, False


# --------------------------------------------------------------------------
# forward simulation

def _nearest(robot_x, slot: int, robots) -> int:
    return min(robots, key=lambda r: (abs(robot_x[r] - slot), r))


def choose_new_packs(cands: Sequence[TupleEntry], reach: dict, arrival: dict,
                     cfg: ScenarioConfig) -> list[tuple[TupleEntry, int]]:
    """Pick at most one newly arrived item per robot, smallest depth first.

    ``cands`` must already be ordered by depth.
    """
    if not cands:
        return []
    first, rest = cands[0], list(cands[1:])
    if cfg.n_robot == 1:
        return [(first, 0)]
    r_first = reach[first.item.id]
    if len(r_first) == 1:
        r = next(iter(r_first))
        other = 1 - r
        second = next((c for c in rest if other in reach[c.item.id]), None)
        return [(first, r)] + ([(second, other)] if second is not None else [])
    if not rest:
        return [(first, _nearest(cfg.robot_x, arrival[first.item.id], (0, 1)))]
    second = rest[0]
    r_second = reach[second.item.id]
    if len(r_second) == 1:
        r2 = next(iter(r_second))
        return [(first, 1 - r2), (second, r2)]
    r1 = _nearest(cfg.robot_x, arrival[first.item.id], (0, 1))
    return [(first, r1), (second, 1 - r1)]


def _interior(bits: int, width: int, height: int) -> int:
    return bits.bit_count() - border_bits(width, height).bit_count()


def _anything_packable(bits, conveyor: ConveyorState, buffers, world: WorldState, rotation) -> bool:
    """Whether the next step could pack something; unknown accessible items count."""
    w, h = world.bin.width, world.bin.height
    cfg = world.cfg
    candidates = [it for buf in buffers for it in buf]
    for slot in range(conveyor.k_total):
        if not slot_reach(conveyor, cfg, slot):
            continue
        if slot >= len(conveyor.queue):
            return True
        candidates.append(conveyor.queue[slot])
    for it in candidates:
        for phi in ((Orientation.DEG0, Orientation.DEG90) if rotation else (Orientation.DEG0,)):
            lx, ly = rotated_size(it, phi)
            if any(not bits & fp for _, fp, _ in anchor_table(w, h, lx, ly)):
                return True
    return False


def forward_simulate(chi_tilde: CandidateSequence, world: WorldState,
                     cfg: SearchConfig | None = None, ctx: _Context | None = None) -> EvaluatedSequence:
    """Replay a reordered sequence on a clone of ``world`` and build its action."""
    cfg = cfg or SearchConfig()
    ctx = ctx or _Context(world, cfg, _DEFAULT_POLICY)
    w, h, nop = ctx.width, ctx.height, ctx.nop
    scen = world.cfg
    bits = world.bin.bits
    conveyor = world.conveyor
    c_left = set(ctx.c_ids)
    mu = 0
    executed: list[tuple[TupleEntry, bool]] = []  # (entry, from buffer)
    for e in chi_tilde.entries:
        if e.action == nop:
            continue
        x, y = decode_action(e.action, w, h)
        lx, ly = rotated_size(e.item, e.orientation)
        fp = footprint_bits(w, h, x, y, lx, ly)
        if bits & fp:
            continue
        iid = e.item.id
        if iid in c_left:
            c_left.discard(iid)
            buffered = True
        else:
            slot = next((s for s, it in enumerate(conveyor.queue) if it.id == iid), None)
            if slot is None or not slot_reach(conveyor, scen, slot):
                continue
            conveyor = advance_conveyor(conveyor.remove(iid), scen)
            buffered = False
        mu += (bits & strip_bits(w, h, x, y, lx, ly)).bit_count()
        bits |= fp
        executed.append((e, buffered))
    util = Fraction(_interior(bits, w, h), w * h)

    owner = {it.id: r for r, buf in enumerate(world.buffers) for it in buf}
    emitted: list[tuple[TupleEntry, int | None]] = [(e, owner.get(e.item.id))
                                                    for e, buf in executed if buf]
    fresh = [e for e, buf in executed if not buf and e.item.id in ctx.reach]
    fresh.sort(key=lambda e: e.depth)
    emitted += choose_new_packs(fresh, ctx.reach, ctx.arrival, scen)

    pbits = world.bin.bits
    next_conv = world.conveyor
    for e, _ in emitted:
        x, y = decode_action(e.action, w, h)
        lx, ly = rotated_size(e.item, e.orientation)
        pbits |= footprint_bits(w, h, x, y, lx, ly)
        if e.item.id not in ctx.c_ids:
            next_conv = advance_conveyor(next_conv.remove(e.item.id), scen)
    done = {e.item.id for e, _ in emitted}
    next_buffers = tuple(tuple(it for it in buf if it.id not in done) for buf in world.buffers)

    action: list[TaskPrimitive] = []
    for e, robot in emitted:
        x, y = decode_action(e.action, w, h)
        action.append(Pack(e.item, e.orientation, x, y, robot, e.depth))
    if not action or not _anything_packable(pbits, next_conv, next_buffers, world, cfg.rotation):
        action.append(TERMINATE)
    return EvaluatedSequence(chi_tilde, mu, util, tuple(action),
                             sum(e.depth for e, _ in emitted), pbits)


def best_action_selection(evaluated: Sequence[EvaluatedSequence]) -> EvaluatedSequence:
    """Highest score, then utilization, then smallest depth sum of the action."""
    if not evaluated:
        raise ContractViolation("best_action_selection needs at least one sequence")
    return min(evaluated, key=EvaluatedSequence.rank_key)


def _evaluate_all(X, world, cfg, ctx) -> list[EvaluatedSequence]:
    memo: dict = {}
    out = []
    for chi in X:
        key = tuple((e.item.id, e.orientation, e.action) for e in chi.entries)
        ev = memo.get(key)
        if ev is None or ev.sequence.entries != chi.entries:
            ev = forward_simulate(chi, world, cfg, ctx)
            memo[key] = ev
        out.append(ev)
    return out


def _search_root(world: WorldState, cfg: SearchConfig, policy: Policy, require_full_pack: bool,
                 trace=None):
    ctx = _Context(world, cfg, policy, trace)
    root = SearchNode(world.bin, tuple(world.C) + tuple(world.N))
    X, solved = tree_expansion(root, [], (), 0, 0, require_full_pack, ctx)
    return X, ctx


# --------------------------------------------------------------------------
# repacking

def _unpack_subsets(world: WorldState):
    packed = sorted(world.bin.placements.values(), key=lambda p: p.seq, reverse=True)
    for i in range(1, len(packed) + 1):
        # lexicographic over the newest-first list: newest max stamp first
        yield from itertools.combinations(packed, i)


@dataclass
class RepackOutcome:
    action: tuple[TaskPrimitive, ...] = ()
    success: bool = False
    util: Fraction | None = None
    chi_star: EvaluatedSequence | None = None
    predicted_bits: int | None = None
    subsets_tried: int = 0
    seconds: float = 0.0
    utils_seen: list = field(default_factory=list)


def repack_trial(world: WorldState, best_util: Fraction, require_full_pack: bool,
                 budget: float, cfg: SearchConfig | None = None,
                 policy: Policy | None = None) -> RepackOutcome:
    """Unpack subsets of packed items, newest first, and search again.

    In full-pack mode the first best sequence without a no-position tuple wins;
    otherwise the best utilization above ``best_util`` found within the budget.
    Subsets are enumerated once; the clock is read between subsets.
    """
    cfg = cfg or SearchConfig()
    policy = policy or _DEFAULT_POLICY
    start = time.perf_counter()
    out = RepackOutcome(util=best_util)
    if budget <= 0:
        return out
    observed = world.observed()
    for subset in _unpack_subsets(observed):
        if time.perf_counter() - start >= budget:
            break
        if cfg.repack_max_subsets is not None and out.subsets_tried >= cfg.repack_max_subsets:
            break
        out.subsets_tried += 1
        clone = observed
        unpacks: list[TaskPrimitive] = []
        for p in subset:
            u = Unpack(p.item)
            clone = exec_primitive(clone, u)
            unpacks.append(u)
        X, ctx = _search_root(clone, cfg, policy, require_full_pack)
        if not X:
            continue
        best = best_action_selection(_evaluate_all(X, clone, cfg, ctx))
        moved = {p.item.id for p in subset}
        # buffers for freshly unpacked items are chosen at allocation time
        action = tuple(unpacks) + tuple(
            replace(p, robot=None) if isinstance(p, Pack) and p.item.id in moved else p
            for p in best.action)
        if require_full_pack and not best.contains_no_position:
            out.action, out.success, out.util = action, True, best.util
            out.chi_star, out.predicted_bits = best, best.predicted_bits
            break
        if not require_full_pack and out.util < best.util:
            out.action, out.success, out.util = action, True, best.util
            out.chi_star, out.predicted_bits = best, best.predicted_bits
            out.utils_seen.append(best.util)
    out.seconds = time.perf_counter() - start
    return out


# --------------------------------------------------------------------------
# top level

def high_level_search(world: WorldState, cfg: SearchConfig | None = None,
                      policy: Policy | None = None, trace: list | None = None) -> HighLevelAction:
    cfg = cfg or SearchConfig()
    policy = policy or _DEFAULT_POLICY
    observed = world.observed()
    X, ctx = _search_root(observed, cfg, policy, False, trace)
    best = None
    if not X:
        primitives: tuple = (TERMINATE,)
        util = utilization(world.bin)
        predicted = world.bin.bits
    else:
        best = best_action_selection(_evaluate_all(X, observed, cfg, ctx))
        primitives, util, predicted = best.action, best.util, best.predicted_bits
    repack_seconds = 0.0
    if (not X or best.contains_no_position) and cfg.use_repack:
        rep = repack_trial(world, util, cfg.require_full_pack, cfg.repack_budget, cfg, policy)
        repack_seconds = rep.seconds
        if rep.success:
            return HighLevelAction(rep.action, rep.util, rep.chi_star, rep.predicted_bits,
                                   repacked=True, repack_seconds=repack_seconds,
                                   candidates=len(X))
    return HighLevelAction(primitives, util, best, predicted, repack_seconds=repack_seconds,
                           candidates=len(X))


def write_trace(trace: list[dict], path) -> None:
    """Dump visited tree nodes as JSON lines."""
    with open(path, "w") as f:
        for row in trace:
            f.write(json.dumps(row) + "\n")
