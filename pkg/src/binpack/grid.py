"""Bin occupancy, placement geometry and the edge-contact reward.

The bin is a padded binary map: a W x H interior surrounded by a one-cell
border of permanently occupied cells.  Occupancy is held as a Python integer
bitboard over the padded grid (bit ``x + y * (W + 2)`` in padded coordinates),
which keeps clones cheap and makes overlap tests a single ``&``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, NamedTuple

import numpy as np


class PlacementConflict(ValueError):
    """Footprint overlaps an occupied cell or leaves the interior."""


class NotPackedError(ValueError):
    """Unpack of an item that is not (or not exactly so) in the bin."""


class ContractViolation(ValueError):
    """A precondition of an operation was not met by the caller."""


class Orientation(enum.IntEnum):
    DEG0 = 0
    DEG90 = 1


@dataclass(frozen=True, order=True)
class ItemSpec:
    id: int
    w: int
    h: int

    def __post_init__(self):
        if self.id < 0 or self.w < 1 or self.h < 1:
            raise ValueError(f"invalid item {self!r}")

    @property
    def area(self) -> int:
        return self.w * self.h


class RotatedSize(NamedTuple):
    lx: int
    ly: int


def rotated_size(item: ItemSpec, phi: Orientation) -> RotatedSize:
    if phi == Orientation.DEG0:
        return RotatedSize(item.w, item.h)
    return RotatedSize(item.h, item.w)


def no_position(width: int, height: int) -> int:
    """Index of the reserved no-position action."""
    return width * height


def encode_action(x: int, y: int, width: int, height: int | None = None) -> int:
    if not 0 <= x < width or y < 0 or (height is not None and y >= height):
        raise ValueError(f"anchor ({x}, {y}) outside a {width}-wide bin")
    return x + y * width


def decode_action(idx: int, width: int, height: int) -> tuple[int, int]:
    if not 0 <= idx < width * height:
        raise ValueError(f"action {idx} does not name a cell of a {width}x{height} bin")
    return idx % width, idx // width


@dataclass(frozen=True)
class Placement:
    item: ItemSpec
    orientation: Orientation
    x: int
    y: int
    seq: int = 0

    @property
    def size(self) -> RotatedSize:
        return rotated_size(self.item, self.orientation)

    def cells(self) -> list[tuple[int, int]]:
        """Occupied cells in padded coordinates."""
        lx, ly = self.size
        return [(cx, cy) for cy in range(self.y + 1, self.y + ly + 1)
                for cx in range(self.x + 1, self.x + lx + 1)]

    def same_spot(self, other: "Placement") -> bool:
        return (self.item == other.item and self.size == other.size
                and self.x == other.x and self.y == other.y)


# --------------------------------------------------------------------------
# bitboard tables

def _row_bits(x0: int, x1: int, y: int, pw: int) -> int:
    """Bits of padded cells x0..x1 (inclusive) on padded row y."""
    if x1 < x0:
        return 0
    return ((1 << (x1 - x0 + 1)) - 1) << (x0 + y * pw)


@lru_cache(maxsize=None)
def border_bits(width: int, height: int) -> int:
    pw, ph = width + 2, height + 2
    bits = _row_bits(0, pw - 1, 0, pw) | _row_bits(0, pw - 1, ph - 1, pw)
    for y in range(1, ph - 1):
        bits |= (1 << (y * pw)) | (1 << (pw - 1 + y * pw))
    return bits


@lru_cache(maxsize=None)
def footprint_bits(width: int, height: int, x: int, y: int, lx: int, ly: int) -> int:
    pw = width + 2
    bits = 0
    for yy in range(y + 1, y + ly + 1):
        bits |= _row_bits(x + 1, x + lx, yy, pw)
    return bits


@lru_cache(maxsize=None)
def strip_bits(width: int, height: int, x: int, y: int, lx: int, ly: int) -> int:
    """The four one-cell strips bordering a footprint anchored at (x, y)."""
    pw = width + 2
    bits = _row_bits(x + 1, x + lx, y, pw) | _row_bits(x + 1, x + lx, y + ly + 1, pw)
    for yy in range(y + 1, y + ly + 1):
        bits |= (1 << (x + yy * pw)) | (1 << (x + lx + 1 + yy * pw))
    return bits


@lru_cache(maxsize=None)
def anchor_table(width: int, height: int, lx: int, ly: int) -> tuple[tuple[int, int, int], ...]:
    """(action index, footprint bits, strip bits) for every in-bounds anchor,
    in increasing action index."""
    rows = []
    for y in range(height - ly + 1):
        for x in range(width - lx + 1):
            rows.append((x + y * width,
                         footprint_bits(width, height, x, y, lx, ly),
                         strip_bits(width, height, x, y, lx, ly)))
    return tuple(rows)


class GridBin:
    """Padded occupancy map plus the placement that owns each occupied block.

    Treated as a value: the pack/unpack functions return new bins.
    """

    __slots__ = ("width", "height", "bits", "_placements")

    def __init__(self, width: int, height: int, bits: int | None = None,
                 placements: Mapping[int, Placement] | None = None):
        if width < 1 or height < 1:
            raise ValueError("bin dimensions must be positive")
        self.width = width
        self.height = height
        self.bits = border_bits(width, height) if bits is None else bits
        self._placements = dict(placements) if placements else {}

    @classmethod
    def empty(cls, width: int, height: int) -> "GridBin":
        return cls(width, height)

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def placements(self) -> Mapping[int, Placement]:
        return dict(self._placements)

    def placement_of(self, item_id: int) -> Placement | None:
        return self._placements.get(item_id)

    def __contains__(self, item_id: int) -> bool:
        return item_id in self._placements

    def __len__(self) -> int:
        return len(self._placements)

    @property
    def occupied(self) -> int:
        """Occupied interior cells."""
        return self.bits.bit_count() - border_bits(self.width, self.height).bit_count()

    @property
    def occ(self) -> np.ndarray:
        """Padded map as a uint8 array indexed ``occ[x, y]``."""
        pw, ph = self.width + 2, self.height + 2
        flat = np.array([(self.bits >> i) & 1 for i in range(pw * ph)], dtype=np.uint8)
        return flat.reshape(ph, pw).T.copy()

    def copy(self) -> "GridBin":
        return GridBin(self.width, self.height, self.bits, self._placements)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridBin):
            return NotImplemented
        return (self.width, self.height, self.bits, self._placements) == \
            (other.width, other.height, other.bits, other._placements)

    def __hash__(self):
        return hash((self.width, self.height, self.bits))

    def __repr__(self) -> str:
        return f"GridBin({self.width}x{self.height}, {self.occupied} occupied)"

    def render(self) -> str:
        occ = self.occ
        return "\n".join("".join("#" if occ[x, y] else "." for x in range(1, self.width + 1))
                         for y in range(1, self.height + 1))


def fits(bin: GridBin, x: int, y: int, size: RotatedSize) -> bool:
    lx, ly = size
    if x < 0 or y < 0 or x + lx > bin.width or y + ly > bin.height:
        return False
    return not bin.bits & footprint_bits(bin.width, bin.height, x, y, lx, ly)


def apply_pack(bin: GridBin, p: Placement) -> GridBin:
    lx, ly = p.size
    if p.x < 0 or p.y < 0 or p.x + lx > bin.width or p.y + ly > bin.height:
        raise PlacementConflict(f"item {p.item.id} at ({p.x}, {p.y}) overflows the bin")
    if p.item.id in bin._placements:
        raise PlacementConflict(f"item {p.item.id} is already packed")
    fp = footprint_bits(bin.width, bin.height, p.x, p.y, lx, ly)
    if bin.bits & fp:
        raise PlacementConflict(f"item {p.item.id} at ({p.x}, {p.y}) overlaps occupied cells")
    out = GridBin(bin.width, bin.height, bin.bits | fp, bin._placements)
    out._placements[p.item.id] = p
    return out


def apply_unpack(bin: GridBin, p: Placement | ItemSpec | int) -> GridBin:
    """Clear the cells of a packed item.  Accepts the placement itself, the
    item, or its id; a placement must match the stored one."""
    item_id = p if isinstance(p, int) else (p.id if isinstance(p, ItemSpec) else p.item.id)
    stored = bin._placements.get(item_id)
    if stored is None:
        raise NotPackedError(f"item {item_id} is not packed")
    if isinstance(p, Placement) and not stored.same_spot(p):
        raise NotPackedError(f"item {item_id} is packed elsewhere")
    lx, ly = stored.size
    fp = footprint_bits(bin.width, bin.height, stored.x, stored.y, lx, ly)
    out = GridBin(bin.width, bin.height, bin.bits & ~fp, bin._placements)
    del out._placements[item_id]
    return out


def feasibility_mask(bin: GridBin, size: RotatedSize) -> np.ndarray:
    """Boolean vector over actions 0..W*H; the last entry is no-position."""
    n = bin.width * bin.height
    mask = np.zeros(n + 1, dtype=bool)
    for idx, fp, _ in anchor_table(bin.width, bin.height, size[0], size[1]):
        if not bin.bits & fp:
            mask[idx] = True
    mask[n] = not mask[:n].any()
    return mask


def edge_contact_reward(bin: GridBin, x: int, y: int, size: RotatedSize) -> int:
    """Occupied cells (border included) orthogonally adjacent to the footprint.

    Evaluated on the bin before the item is placed.
    """
    if not fits(bin, x, y, size):
        raise ContractViolation(f"anchor ({x}, {y}) is infeasible for size {tuple(size)}")
    return (bin.bits & strip_bits(bin.width, bin.height, x, y, size[0], size[1])).bit_count()


def utilization(bin: GridBin) -> Fraction:
    return Fraction(bin.occupied, bin.area)


def is_full(bin: GridBin) -> bool:
    return bin.occupied == bin.area
