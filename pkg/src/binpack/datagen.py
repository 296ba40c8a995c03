"""Instance generators and the JSONL instance format.

One instance per line::

    {"gen": "FULL_SET", "W": 10, "H": 10, "sigma": 2.0, "seed": 7,
     "items": [[w, h], ...], "placements": [[x, y, lx, ly], ...]}

``placements`` (full sets only) records where the generator put each item,
aligned with ``items``.  Readers accept gzip-compressed files transparently.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import GridBin, ItemSpec, Orientation, Placement, apply_pack, decode_action, is_full
from .policy import greedy_place

FULL_SET = "FULL_SET"
RANDOM = "RANDOM"


class InstanceFormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass(frozen=True)
class InstanceRecord:
    W: int
    H: int
    items: tuple[tuple[int, int], ...]
    gen: str
    seed: int | None = None
    sigma: float | None = None
    placements: tuple[tuple[int, int, int, int], ...] | None = field(default=None, compare=True)

    def item_specs(self, first_id: int = 0) -> list[ItemSpec]:
        return [ItemSpec(first_id + i, w, h) for i, (w, h) in enumerate(self.items)]

    @property
    def total_area(self) -> int:
        return sum(w * h for w, h in self.items)

    def validate(self) -> None:
        if self.W < 1 or self.H < 1:
            raise ValueError("bin dimensions must be positive")
        if any(w < 1 or h < 1 for w, h in self.items):
            raise ValueError("item dimensions must be positive")
        if self.gen == FULL_SET:
            if self.total_area != self.W * self.H:
                raise ValueError(f"FULL_SET areas sum to {self.total_area}, not {self.W * self.H}")
        elif self.gen == RANDOM:
            if any(w > self.W // 2 or h > self.H // 2 for w, h in self.items):
                raise ValueError("RANDOM item exceeds half the bin")
        else:
            raise ValueError(f"unknown generator tag {self.gen!r}")

    def to_json(self) -> dict:
        out = {"gen": self.gen, "W": self.W, "H": self.H}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        out["seed"] = self.seed
        out["items"] = [list(it) for it in self.items]
        if self.placements is not None:
            out["placements"] = [list(p) for p in self.placements]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "InstanceRecord":
        placements = d.get("placements")
        return cls(int(d["W"]), int(d["H"]), tuple((int(w), int(h)) for w, h in d["items"]),
                   d["gen"], d.get("seed"), None if d.get("sigma") is None else float(d["sigma"]),
                   None if placements is None else tuple(tuple(int(v) for v in p) for p in placements))


def _log_bell(n: int, sigma: float) -> np.ndarray:
    if n < 1 or sigma <= 0:
        raise ValueError("need n >= 1 and sigma > 0")
    d = np.arange(1, n + 1, dtype=float)
    return -((d - (n + 1) / 2) ** 2) / (2 * sigma ** 2)


def gaussian_prob(n: int, sigma: float) -> np.ndarray:
    """p[d-1] for d = 1..n, a discretised bell centred at (n + 1) / 2."""
    p = np.exp(_log_bell(n, sigma))
    return p / p.sum()


def generate_full_set(W: int, H: int, sigma: float = 2.0, seed: int = 0) -> InstanceRecord:
    """An item set that tiles the W x H bin exactly.

    Each item size follows the Gaussian weights conditioned on the size budget
    (w + h <= W + H - max_w - max_h), the area budget, and the existence of a
    feasible anchor.  The item goes to its best edge-contact anchor with random
    ties.  A single left-over cell becomes a 1x1 item and the set is shuffled.

    The conditional draw is made directly (one uniform per attempt over the
    admissible size pairs) instead of by repeated rejection; the distribution is
    the same, but large bins no longer stall.  Stream order per item: size
    draw(s), then the tie-break draw; finally one permutation.
    """
    if W < 1 or H < 1:
        raise ValueError("bin dimensions must be positive")
    rng = np.random.default_rng(seed)
    # log weights keep far-tail sizes drawable when sigma is small
    logw = _log_bell(W, sigma)[:, None] + _log_bell(H, sigma)[None, :]  # [w-1, h-1]
    ws = np.arange(1, W + 1)[:, None]
    hs = np.arange(1, H + 1)[None, :]
    bin = GridBin.empty(W, H)
    items: list[tuple[int, int]] = []
    spots: list[tuple[int, int, int, int]] = []
    area, max_w, max_h = 0, 0, 0
    total = W * H
    while area < total - 1:
        # floor of 2 keeps 1x1 admissible after a W x (H-1) or (W-1) x H first item
        budget = max(2, W + H - max_w - max_h)
        ok = (ws + hs <= budget) & (area + ws * hs <= total)
        while True:
            lw = np.where(ok, logw, -np.inf)
            p = np.exp(lw - lw.max()).ravel()
            k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
            k = min(k, p.size - 1)
            w, h = k // H + 1, k % H + 1
            dec = greedy_place(bin, (w, h), rng)
            if dec.action < total:
                break
            ok &= ~((ws >= w) & (hs >= h))  # nothing at least this large fits either
        x, y = decode_action(dec.action, W, H)
        bin = apply_pack(bin, Placement(ItemSpec(len(items), w, h), Orientation.DEG0, x, y))
        items.append((w, h))
        spots.append((x, y, w, h))
        area += w * h
        max_w, max_h = max(max_w, w), max(max_h, h)
    if area == total - 1:
        hole = next(j for j in range(total) if not bin.bits & _cell_bit(W, j))
        x, y = decode_action(hole, W, H)
        items.append((1, 1))
        spots.append((x, y, 1, 1))
    order = rng.permutation(len(items))
    return InstanceRecord(W, H, tuple(items[i] for i in order), FULL_SET, seed, float(sigma),
                          tuple(spots[i] for i in order))


def _cell_bit(W: int, j: int) -> int:
    x, y = j % W, j // W
    return 1 << (x + 1 + (y + 1) * (W + 2))


def generate_random_instance(W: int, H: int, count: int, seed: int = 0) -> InstanceRecord:
    """``count`` items with independent uniform sides up to half the bin."""
    if count < 1 or W < 2 or H < 2:
        raise ValueError("need count >= 1 and W, H >= 2")
    rng = np.random.default_rng(seed)
    ws = rng.integers(1, W // 2 + 1, size=count)
    hs = rng.integers(1, H // 2 + 1, size=count)
    return InstanceRecord(W, H, tuple(zip(ws.tolist(), hs.tolist())), RANDOM, seed)


def replay_tiling(rec: InstanceRecord) -> GridBin:
    """Pack a full set at its recorded placements; raises on any overlap."""
    if rec.placements is None:
        raise ValueError("instance carries no placements")
    bin = GridBin.empty(rec.W, rec.H)
    for i, ((w, h), (x, y, lx, ly)) in enumerate(zip(rec.items, rec.placements)):
        phi = Orientation.DEG0 if (lx, ly) == (w, h) else Orientation.DEG90
        bin = apply_pack(bin, Placement(ItemSpec(i, w, h), phi, x, y))
    return bin


def is_exact_tiling(rec: InstanceRecord) -> bool:
    try:
        return is_full(replay_tiling(rec))
    except ValueError:
        return False


# --------------------------------------------------------------------------
# serialization

def dumps(records: Iterable[InstanceRecord]) -> str:
    return "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in records)


def loads(text: str, validate: bool = True) -> list[InstanceRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = InstanceRecord.from_json(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InstanceFormatError(f"malformed instance: {exc}", lineno) from None
        if validate:
            try:
                rec.validate()
            except ValueError as exc:
                raise InstanceFormatError(str(exc), lineno) from None
        out.append(rec)
    return out


def _open(path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    with open(path, "rb") as probe:
        magic = probe.read(2) if "r" in mode else b""
    if magic == b"\x1f\x8b":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_instances(records: Sequence[InstanceRecord], path) -> None:
    path = Path(path)
    opener = gzip.open(path, "wt", encoding="utf-8") if path.suffix == ".gz" else \
        open(path, "w", encoding="utf-8")
    with opener as f:
        f.write(dumps(records))


def read_instances(path, validate: bool = True) -> list[InstanceRecord]:
    with _open(path, "r") as f:
        return loads(f.read(), validate)
