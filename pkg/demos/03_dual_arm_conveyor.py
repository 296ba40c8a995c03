"""
Two robots on one conveyor
==========================

The dual scenarios put a front and a rear robot along the belt.  Packs are
split between them and sequenced into synchronized rounds, so two packs can
happen in one step.  Compare the step counts against a single robot on the
same arrivals.
"""

from binpack import SearchConfig
from binpack.alloc import write_schedule
from binpack.datagen import generate_random_instance
from binpack.harness import play_episode, run_suite

insts = [generate_random_instance(10, 10, 40, seed) for seed in range(20)]
suite = run_suite(insts, ["S-R5A1", "D-R5A2O2"], SearchConfig(beam_width=2))
for name, agg in suite.aggregates().items():
    ratio = agg["total_packing_steps"] / agg["total_packed_items"]
    print(f"{name}: {agg['total_packed_items']} packs in {agg['total_packing_steps']} steps "
          f"(ratio {ratio:.2f}), mean utilization {agg['mean_utilization_pct']:.1f}%")

# The robot-level programme of one episode: pick, place and stand-by rounds.
res = play_episode(insts[0], "D-R5A2O2", SearchConfig(beam_width=2))
first = res.schedules[0]
for k, rnd in enumerate(first.rounds):
    print(f"round {k}:", " | ".join(type(a).__name__ if not isinstance(a, str) else a
                                     for a in rnd))
write_schedule(res.schedules, "dual_schedule.jsonl")
print("full schedule written to dual_schedule.jsonl")
