"""
Look-ahead search and repacking
===============================

With several items visible on the conveyor the planner simulates each packing
order and orientation with the greedy policy, then commits to the sequence
that packs the most.  When nothing fits any more it may lift items back out
and re-place them.
"""

from binpack import SearchConfig, WorldState, high_level_search, scenario
from binpack.datagen import generate_full_set
from binpack.grid import ItemSpec, Orientation, Placement, apply_pack
from binpack.harness import play_episode

# A 3 x 3 bin with a single unit block in the middle.  Every 2 x 2 anchor is
# blocked, so a 2 x 2 arrival cannot be packed without moving the block.
world = WorldState.new(scenario("S-R5A3"), 3, 3, [ItemSpec(1, 2, 2)])
world = WorldState(world.cfg, apply_pack(world.bin, Placement(ItemSpec(0, 1, 1),
                                                                Orientation.DEG0, 1, 1)),
                   world.conveyor, world.buffers)
print(world.bin.render(), end="\n\n")

plain = high_level_search(world, SearchConfig())
print("without repacking:", [type(p).__name__ for p in plain])

repack = high_level_search(world, SearchConfig(use_repack=True, repack_budget=5))
print("with repacking:   ", [type(p).__name__ for p in repack], "util", repack.util)

# A whole episode on an item set that tiles a 5 x 5 bin exactly.  In full-pack
# mode only complete packings count as success, and repacking fixes dead ends.
inst = generate_full_set(5, 5, sigma=2.0, seed=3)
print("\nitems:", inst.items)
cfg = SearchConfig(require_full_pack=True, use_repack=True, repack_budget=30)
res = play_episode(inst, "S-R5A3", cfg)
print(res.bin.render())
r = res.report
print(f"utilization {r.utilization:.2f}, {r.packed_items} packs, {r.repacked_items} unpacks")
