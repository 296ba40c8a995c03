"""Classic online heuristics for comparison: no rotation, no look-ahead, no repacking.

Both stop at the first arriving item they cannot place, which is how the
engine behaves in a single-slot scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .datagen import InstanceRecord
from .grid import GridBin, Orientation, Placement, anchor_table, apply_pack, decode_action, utilization
from .harness import EpisodeReport, SuiteReport, config_hash

FIRST_FIT = "FIRST_FIT"
SHELF_NEXT_FIT = "SHELF_NEXT_FIT"
BASELINES = (FIRST_FIT, SHELF_NEXT_FIT)


def first_fit(instance: InstanceRecord) -> GridBin:
    """Each item goes to the lowest feasible anchor index (row-major scan)."""
    bin = GridBin.empty(instance.W, instance.H)
    for it in instance.item_specs():
        idx = next((i for i, fp, _ in anchor_table(bin.width, bin.height, it.w, it.h)
                    if not bin.bits & fp), None)
        if idx is None:
            break
        x, y = decode_action(idx, bin.width, bin.height)
        bin = apply_pack(bin, Placement(it, Orientation.DEG0, x, y, len(bin)))
    return bin


@dataclass
class _Shelf:
    y: int
    height: int
    cursor: int = 0


def shelf_next_fit(instance: InstanceRecord) -> GridBin:
    """Row shelves filled left to right; a shelf's height is set by its first
    item, and a closed shelf is never revisited."""
    W, H = instance.W, instance.H
    bin = GridBin.empty(W, H)
    shelf: _Shelf | None = None
    for it in instance.item_specs():
        if it.w > W:
            break
        if shelf is None or shelf.cursor + it.w > W or it.h > shelf.height:
            y = 0 if shelf is None else shelf.y + shelf.height
            if y + it.h > H:
                break
            shelf = _Shelf(y, it.h)
        bin = apply_pack(bin, Placement(it, Orientation.DEG0, shelf.cursor, shelf.y, len(bin)))
        shelf.cursor += it.w
    return bin


_RUNNERS = {FIRST_FIT: first_fit, SHELF_NEXT_FIT: shelf_next_fit}


def baseline_name(name: str) -> str:
    key = name.upper().replace("-", "_")
    if key not in _RUNNERS:
        raise ValueError(f"unknown baseline {name!r}; choose from {BASELINES}")
    return key


def run_baseline(name: str, instances: Sequence[InstanceRecord]) -> SuiteReport:
    key = baseline_name(name)
    run = _RUNNERS[key]
    eps = []
    for i, inst in enumerate(instances):
        b = run(inst)
        eps.append(EpisodeReport(key, inst.seed, False, False, float(utilization(b)), len(b),
                                 len(b), 0, 0.0, i))
    meta = {"baseline": key, "instances": len(instances), "config_hash": config_hash(key)}
    return SuiteReport(eps, meta)
