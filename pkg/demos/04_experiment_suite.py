"""
A small reproducible experiment
===============================

Generate instances, run two scenarios with and without rotation, compare with
a shelf heuristic, and write CSV plus JSON reports.  Every number is a pure
function of the seeds, so re-running gives identical files.
"""

from binpack import SearchConfig
from binpack.baselines import run_baseline
from binpack.datagen import generate_random_instance, write_instances
from binpack.harness import run_suite

insts = [generate_random_instance(10, 10, 40, seed) for seed in range(100)]
write_instances(insts, "demo_instances.jsonl.gz")

for rotation in (True, False):
    rep = run_suite(insts, ["S-R1A1", "S-R5A3"], SearchConfig(rotation=rotation, beam_width=3))
    for name in ("S-R1A1", "S-R5A3"):
        print(f"{name} rotation={rotation}: {100 * rep.mean_utilization(name):.2f}%")
    rep.write_csv(f"demo_rot{int(rotation)}.csv")
    rep.write_json(f"demo_rot{int(rotation)}.json")

shelf = run_baseline("shelf-next-fit", insts)
print(f"shelf next-fit: {100 * shelf.mean_utilization():.2f}%")
