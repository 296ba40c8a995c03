import json

import pytest
from hypothesis import given, settings, strategies as st

from binpack.alloc import (READY, STANDBY, Pick, PlaceToBin, PlaceToBuffer, Source,
                           allocate, count_steps, holds_one, robot_program, sequence_atomic,
                           write_schedule)
from binpack.datagen import generate_full_set, generate_random_instance
from binpack.env import Pack, Robot, ScenarioConfig, Unpack, WorldState, exec_primitive, scenario
from binpack.grid import ContractViolation, ItemSpec, Orientation
from binpack.harness import play_episode
from binpack.search import SearchConfig

D0 = Orientation.DEG0
A, B = Robot.FRONT, Robot.REAR


def it(i, w=1, h=1):
    return ItemSpec(i, w, h)


def pk(i, x=0, y=0, robot=None):
    return Pack(it(i), D0, x, y, robot)


def packed_world(cfg, n):
    """n 1x1 items already in the bin (ids 0..n-1) plus arrivals 10.."""
    w = WorldState.new(cfg, 6, 6, [it(i) for i in range(n)] + [it(10 + i) for i in range(5)])
    for i in range(n):
        w = exec_primitive(w, Pack(it(i), D0, i, 0))
    return w


class TestAllocate:
    def test_nearest_robot(self):
        cfg = ScenarioConfig("bases-1-4", 2, 5, 3, 1, robot_x=(1.0, 4.0))
        w = WorldState.new(cfg, 6, 6, [it(i) for i in range(5)])
        alloc = allocate([pk(0, 0, 0), pk(3, 1, 0)], w)
        assert [(r, p.item.id) for r, p in alloc.order] == [(A, 0), (B, 3)]

    def test_tie_goes_to_front(self):
        cfg = ScenarioConfig("bases-0-2", 2, 5, 3, 1, robot_x=(0.0, 4.0))
        w = WorldState.new(cfg, 6, 6, [it(i) for i in range(5)])
        assert allocate([pk(2)], w).order[0][0] == A

    def test_unpacks_alternate_from_less_loaded(self):
        w = packed_world(scenario("D-R5A3O1"), 3)
        action = [Unpack(it(0)), Unpack(it(1)), Unpack(it(2)), pk(10, robot=A), pk(11, robot=A)]
        alloc = allocate(action, w)
        unpackers = [r for r, p in alloc.order if isinstance(p, Unpack)]
        assert unpackers == [B, A, B]

    def test_repacks_by_holder_in_reverse_order(self):
        w = packed_world(scenario("D-R5A3O1"), 2)
        action = [Unpack(it(0)), Unpack(it(1)), pk(0, 4, 4), pk(1, 5, 5)]
        alloc = allocate(action, w)
        assert [(r, type(p).__name__, p.item.id) for r, p in alloc.order] == \
            [(A, "Unpack", 0), (B, "Unpack", 1), (B, "Pack", 1), (A, "Pack", 0)]

    def test_global_order_unpack_repack_new(self):
        w = packed_world(scenario("D-R5A3O1"), 1)
        action = [Unpack(it(0)), pk(0, 3, 3), pk(10, 1, 1, robot=A)]
        kinds = [("U" if isinstance(p, Unpack) else "R" if p.item.id == 0 else "N")
                 for _, p in allocate(action, w).order]
        assert kinds == ["U", "R", "N"]

    def test_buffered_item_keeps_owner(self):
        w = WorldState.new(scenario("D-R5A2O2"), 4, 4, [it(5)])
        w = WorldState(w.cfg, w.bin, w.conveyor, ((), (it(7),)))
        alloc = allocate([pk(7)], w)
        assert alloc.order[0][0] == B

    def test_pack_of_packed_item_without_unpack(self):
        w = packed_world(scenario("D-R5A3O1"), 1)
        with pytest.raises(ContractViolation):
            allocate([pk(0, 3, 3)], w)

    def test_single_robot_identity(self):
        w = packed_world(scenario("S-R5A3"), 1)
        action = [Unpack(it(0)), pk(0, 2, 2), pk(10, 3, 3)]
        alloc = allocate(action, w)
        assert [p.item.id for p in alloc.queues[0]] == [0, 0, 10]
        assert all(r == 0 for r, _ in alloc.order)


class TestSequencing:
    def test_single_pack(self):
        s = sequence_atomic(([pk(0)],))
        assert s.program(0) == [Pick(Source.CONVEYOR, it(0)), PlaceToBin(it(0), pk(0).placement()),
                                READY]

    def test_fused_unpack_pack(self):
        s = sequence_atomic(([Unpack(it(0)), pk(0, 2, 2)],))
        assert s.program(0) == [Pick(Source.BIN, it(0)), PlaceToBin(it(0), pk(0, 2, 2).placement()),
                                READY]

    def test_buffered_unpacks(self):
        q = [Unpack(it(0)), Unpack(it(1)), pk(1, 2, 2), pk(0, 3, 3)]
        prog = robot_program(q, 0)
        assert prog == [Pick(Source.BIN, it(0)), PlaceToBuffer(it(0), 0),
                        Pick(Source.BIN, it(1)), PlaceToBin(it(1), pk(1, 2, 2).placement()),
                        Pick(Source.BUFFER, it(0)), PlaceToBin(it(0), pk(0, 3, 3).placement()),
                        READY]

    def test_standby_for_lighter_robot(self):
        q0 = [pk(0), pk(1), pk(2), pk(3)]
        q1 = [pk(4), pk(5)]
        s = sequence_atomic((q0, q1))
        assert s.program(1)[0] == STANDBY and s.program(0)[0] != STANDBY
        assert all(len(r) == 2 for r in s.rounds)
        assert s.program(0)[-1] == READY

    def test_pick_from_preexisting_buffer(self):
        prog = robot_program([pk(3)], 0, buffered={3})
        assert prog[0] == Pick(Source.BUFFER, it(3))

    def test_schedule_export(self, tmp_path):
        s = sequence_atomic(([pk(0, 1, 2)], [pk(1, 0, 0)]))
        path = tmp_path / "s.jsonl"
        write_schedule([s, s], path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert {"round", "robot", "action", "item", "cells"} <= rows[0].keys()
        places = [r for r in rows if r["action"] == "place_to_bin"]
        assert places[0]["cells"] == [[1, 2]] and rows[-1]["round"] == 2 * len(s.rounds) - 1


class TestSteps:
    def test_single_robot_five_packs(self):
        assert count_steps(sequence_atomic(([pk(i) for i in range(5)],))).packing_steps == 5

    def test_dual_aligned(self):
        s = sequence_atomic(([pk(0), pk(1)], [pk(2), pk(3)]))
        rep = count_steps(s)
        assert rep.packing_steps == 2 and rep.busy == (4, 4)

    def test_dual_five_packs_over_an_episode(self):
        parts = [([pk(0)], [pk(1)]), ([pk(2)], [pk(3)]), ([pk(4)], [])]
        assert count_steps([sequence_atomic(p) for p in parts]).packing_steps == 3

    @settings(max_examples=60)
    @given(st.lists(st.sampled_from(["P", "U"]), max_size=6),
           st.lists(st.sampled_from(["P", "U"]), max_size=6))
    def test_hold_one_and_bounds(self, a, b):
        def q(spec, base):
            out = []
            for k, c in enumerate(spec):
                out.append(pk(base + k) if c == "P" else Unpack(it(base + k)))
            return out
        s = sequence_atomic((q(a, 0), q(b, 100)))
        assert holds_one(s)
        n_pack = a.count("P") + b.count("P")
        assert -(-n_pack // 2) <= s.packing_steps <= n_pack or n_pack == 0


class TestEpisodeProperties:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_single_robot_steps_equal_packed(self, seed):
        inst = generate_random_instance(6, 6, 14, seed)
        r = play_episode(inst, "S-R5A3", SearchConfig(beam_width=2)).report
        assert r.packing_steps == r.packed_items

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10**6))
    def test_dual_step_bounds(self, seed):
        inst = generate_random_instance(6, 6, 14, seed)
        res = play_episode(inst, "D-R5A3O1", SearchConfig(beam_width=2))
        n_pack = sum(isinstance(a, PlaceToBin) for s in res.schedules for rnd in s.rounds
                     for a in rnd)
        assert -(-n_pack // 2) <= res.report.packing_steps <= n_pack
        assert all(holds_one(s) for s in res.schedules)

    def test_buffer_lifo_in_repacking_episode(self):
        for seed in range(60):
            res = play_episode(generate_full_set(4, 4, 2.0, seed), "D-R5A2O2",
                               SearchConfig(require_full_pack=True, use_repack=True,
                                            repack_budget=10))
            for s in res.schedules:
                for r in range(s.n_robot):
                    stack = []
                    for a in s.program(r):
                        if isinstance(a, PlaceToBuffer):
                            stack.append(a.item.id)
                        elif isinstance(a, Pick) and a.source == Source.BUFFER:
                            if a.item.id in stack:
                                assert stack.pop() == a.item.id
