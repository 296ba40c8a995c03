"""Episode runner, suites and report emission."""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .alloc import RoundSchedule, allocate, sequence_atomic
from .datagen import FULL_SET, InstanceRecord
from .env import ScenarioConfig, Terminate, Unpack, WorldState, exec_primitive, scenario
from .grid import GridBin, ItemSpec, utilization
from .search import SearchConfig, high_level_search


class StateDivergence(RuntimeError):
    """The executed bin differs from the one the search predicted."""


@dataclass(frozen=True)
class EpisodeReport:
    scenario: str
    seed: int | None
    rotation: bool
    repack: bool
    utilization: float
    packed_items: int
    packing_steps: int
    repacked_items: int
    repack_time_ms: float
    index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.utilization <= 1.0:
            raise ValueError("utilization outside [0, 1]")
        if min(self.packed_items, self.packing_steps, self.repacked_items) < 0:
            raise ValueError("negative count")

    def csv_row(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "rotation": int(self.rotation),
                "repack": int(self.repack), "utilization_pct": f"{100 * self.utilization:.2f}",
                "packed_items": self.packed_items, "packing_steps": self.packing_steps,
                "repacked_items": self.repacked_items,
                "repack_time_ms": f"{self.repack_time_ms:.1f}"}


CSV_COLUMNS = ("scenario", "seed", "rotation", "repack", "utilization_pct", "packed_items",
               "packing_steps", "repacked_items", "repack_time_ms")


@dataclass
class EpisodeResult:
    report: EpisodeReport
    bin: GridBin
    leftovers: tuple[ItemSpec, ...]
    schedules: list[RoundSchedule] = field(default_factory=list)
    actions: list = field(default_factory=list)


def _bin_diff(expected: int, actual: GridBin) -> str:
    pw = actual.width + 2
    cells = [(i % pw - 1, i // pw - 1) for i in range((expected ^ actual.bits).bit_length())
             if (expected ^ actual.bits) >> i & 1]
    return f"cells differing (interior coords): {cells}\nexecuted:\n{actual.render()}"


def play_episode(instance: InstanceRecord, scen: ScenarioConfig | str,
                 cfg: SearchConfig | None = None, index: int = 0,
                 max_actions: int | None = None) -> EpisodeResult:
    """Run one bin to termination.

    For RANDOM instances the unused items are returned as ``leftovers`` so a
    caller can offer them to the next bin; FULL_SET leftovers are simply dropped.
    """
    cfg = cfg or SearchConfig()
    scen = scenario(scen) if isinstance(scen, str) else scen
    world = WorldState.new(scen, instance.W, instance.H, instance.item_specs())
    max_actions = max_actions or 4 * len(instance.items) + 8
    schedules: list[RoundSchedule] = []
    actions = []
    repacked = 0
    repack_s = 0.0
    for _ in range(max_actions):
        act = high_level_search(world, cfg)
        actions.append(act)
        repack_s += act.repack_seconds
        alloc = allocate(act.primitives, world)
        sched = sequence_atomic(alloc)
        for _, p in alloc.order:
            world = exec_primitive(world, p)
            repacked += isinstance(p, Unpack)
        if alloc.order:
            schedules.append(sched)
        if act.predicted_bits is not None and act.predicted_bits != world.bin.bits:
            raise StateDivergence("simulated and executed bins differ\n"
                                  + _bin_diff(act.predicted_bits, world.bin))
        if act.terminates:
            world = exec_primitive(world, next(p for p in act.primitives
                                               if isinstance(p, Terminate)))
            break
    else:
        raise RuntimeError(f"episode did not terminate within {max_actions} actions")

    leftovers = world.conveyor.queue + world.C
    report = EpisodeReport(
        scenario=scen.name, seed=instance.seed, rotation=cfg.rotation, repack=cfg.use_repack,
        utilization=float(utilization(world.bin)), packed_items=len(world.bin),
        packing_steps=sum(s.packing_steps for s in schedules), repacked_items=repacked,
        repack_time_ms=1000 * repack_s, index=index)
    return EpisodeResult(report, world.bin,
                         leftovers if instance.gen != FULL_SET else (), schedules, actions)


def run_episode(instance: InstanceRecord, scen: ScenarioConfig | str,
                cfg: SearchConfig | None = None, index: int = 0) -> EpisodeReport:
    return play_episode(instance, scen, cfg, index).report


@dataclass
class SuiteReport:
    episodes: list[EpisodeReport]
    metadata: dict = field(default_factory=dict)

    def by_scenario(self) -> dict[str, list[EpisodeReport]]:
        out: dict[str, list[EpisodeReport]] = {}
        for e in self.episodes:
            out.setdefault(e.scenario, []).append(e)
        return out

    def aggregates(self) -> dict[str, dict]:
        agg = {}
        for name, eps in self.by_scenario().items():
            agg[name] = {
                "episodes": len(eps),
                "mean_utilization_pct": round(100 * statistics.fmean(e.utilization for e in eps), 2),
                "total_packed_items": sum(e.packed_items for e in eps),
                "total_packing_steps": sum(e.packing_steps for e in eps),
                "mean_repacked_items": statistics.fmean(e.repacked_items for e in eps),
                "mean_repack_time_ms": statistics.fmean(e.repack_time_ms for e in eps),
            }
        return agg

    def mean_utilization(self, name: str | None = None) -> float:
        eps = self.episodes if name is None else self.by_scenario()[name]
        return statistics.fmean(e.utilization for e in eps)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for e in self.episodes:
                w.writerow(e.csv_row())

    def write_json(self, path) -> None:
        doc = {"metadata": self.metadata, "aggregates": self.aggregates(),
               "episodes": [asdict(e) for e in self.episodes]}
        Path(path).write_text(json.dumps(doc, indent=2))


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _job(args):
    inst, scen, cfg, idx = args
    return run_episode(inst, scen, cfg, idx)


def run_suite(instances: Sequence[InstanceRecord], scenarios: Sequence[ScenarioConfig | str],
              cfg: SearchConfig | None = None, workers: int = 1) -> SuiteReport:
    """Every scenario sees the same instances in the same order."""
    cfg = cfg or SearchConfig()
    scens = [scenario(s) if isinstance(s, str) else s for s in scenarios]
    jobs = [(inst, s, cfg, i) for s in scens for i, inst in enumerate(instances)]
    if workers <= 1:
        episodes = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            episodes = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    order = {s.name: k for k, s in enumerate(scens)}
    episodes.sort(key=lambda e: (order[e.scenario], e.seed if e.seed is not None else -1, e.index))
    meta = {"engine_version": __version__, "config": asdict(cfg),
            "scenarios": [asdict(s) for s in scens], "instances": len(instances),
            "config_hash": config_hash({"cfg": asdict(cfg), "scenarios": [asdict(s) for s in scens]})}
    return SuiteReport(episodes, meta)
