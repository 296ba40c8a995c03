"""Low-level placement policies.

A policy maps ``(bin, rotated size)`` to a position action.  The default is a
greedy maximiser of the edge-contact reward; :class:`ExternalPolicy` forwards
queries to another process over a line protocol and re-validates its answers.

Line protocol, one request per line::

    QUERY W H lx ly <hex>      ->      ACT <idx>

``<hex>`` packs the W*H interior occupancy bits row-wise (bit j is the cell of
action j), most significant bit first within each hex digit, zero padded to a
multiple of four bits.  ``idx`` is in ``[0, W*H]``; ``W*H`` means no position.
"""

from __future__ import annotations

import logging
import os
import select
import socket
import subprocess
import time
from dataclasses import dataclass
from typing import IO, Protocol, Sequence

import numpy as np

from .grid import (GridBin, RotatedSize, anchor_table, decode_action, edge_contact_reward,
                   feasibility_mask, no_position)

log = logging.getLogger(__name__)

# tie-break rules: SMALLEST_INDEX, or a numpy Generator for seeded random ties
SMALLEST_INDEX = None


@dataclass(frozen=True)
class PolicyDecision:
    action: int
    score: int


class Policy(Protocol):
    def decide(self, bin: GridBin, size: RotatedSize) -> PolicyDecision: ...


def greedy_place(bin: GridBin, size: RotatedSize,
                 tiebreak: np.random.Generator | None = SMALLEST_INDEX) -> PolicyDecision:
    """Feasible anchor with the highest edge-contact reward.

    Ties go to the smallest action index, or to a uniform draw from ``tiebreak``
    when a generator is given.  No feasible anchor gives no-position, score 0.
    """
    bits = bin.bits
    best = -1
    ties: list[int] = []
    for idx, fp, strip in anchor_table(bin.width, bin.height, size[0], size[1]):
        if bits & fp:
            continue
        r = (bits & strip).bit_count()
        if r > best:
            best, ties = r, [idx]
        elif r == best and tiebreak is not None:
            ties.append(idx)
    if best < 0:
        return PolicyDecision(no_position(bin.width, bin.height), 0)
    if tiebreak is None or len(ties) == 1:
        return PolicyDecision(ties[0], best)
    return PolicyDecision(ties[int(tiebreak.integers(len(ties)))], best)


class GreedyPolicy:
    """Deterministic greedy policy with a memo keyed on the occupancy bits."""

    def __init__(self, max_cache: int = 1 << 20):
        self._cache: dict[tuple, PolicyDecision] = {}
        self.max_cache = max_cache

    def decide(self, bin: GridBin, size: RotatedSize) -> PolicyDecision:
        key = (bin.width, bin.height, bin.bits, size[0], size[1])
        hit = self._cache.get(key)
        if hit is None:
            hit = greedy_place(bin, size)
            if len(self._cache) >= self.max_cache:
                self._cache.clear()
            self._cache[key] = hit
        return hit


# --------------------------------------------------------------------------
# external policies

class PolicyProtocolError(RuntimeError):
    pass


class PolicyTimeout(PolicyProtocolError):
    pass


class MalformedReply(PolicyProtocolError):
    pass


class InfeasibleAction(PolicyProtocolError):
    """Raised only when the adapter is told not to fall back."""


def pack_occupancy_hex(bin: GridBin) -> str:
    occ = bin.occ[1:-1, 1:-1]
    bits = [int(occ[j % bin.width, j // bin.width]) for j in range(bin.area)]
    bits += [0] * (-len(bits) % 4)
    return "".join(f"{bits[i] << 3 | bits[i + 1] << 2 | bits[i + 2] << 1 | bits[i + 3]:x}"
                   for i in range(0, len(bits), 4))


def unpack_occupancy_hex(text: str, width: int, height: int) -> np.ndarray:
    """Inverse of :func:`pack_occupancy_hex`; returns an interior map ``[x, y]``."""
    bits = [(int(c, 16) >> s) & 1 for c in text for s in (3, 2, 1, 0)]
    if len(bits) < width * height:
        raise MalformedReply("occupancy payload too short")
    occ = np.zeros((width, height), dtype=np.uint8)
    for j in range(width * height):
        occ[j % width, j // width] = bits[j]
    return occ


def format_query(bin: GridBin, size: RotatedSize) -> str:
    return f"QUERY {bin.width} {bin.height} {size[0]} {size[1]} {pack_occupancy_hex(bin)}"


def parse_reply(line: str, width: int, height: int) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != "ACT":
        raise MalformedReply(f"unexpected reply {line!r}")
    try:
        idx = int(parts[1])
    except ValueError:
        raise MalformedReply(f"non-integer action in {line!r}") from None
    if not 0 <= idx <= width * height:
        raise MalformedReply(f"action {idx} out of range")
    return idx


class ExternalPolicyHandle:
    """One external endpoint; a single query in flight at a time."""

    def __init__(self, reader: IO[str] | int, writer: IO[str], timeout: float = 0.5,
                 closer=None):
        # raw descriptor, read unbuffered so a half-written line cannot block past the deadline
        self.read_fd = reader if isinstance(reader, int) else reader.fileno()
        self.writer = writer
        self.timeout = timeout
        self._closer = closer

    @classmethod
    def spawn(cls, argv: Sequence[str], timeout: float = 0.5) -> "ExternalPolicyHandle":
        proc = subprocess.Popen(list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                text=True, bufsize=1)

        def close():
            proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)

        return cls(proc.stdout, proc.stdin, timeout, close)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 0.5) -> "ExternalPolicyHandle":
        sock = socket.create_connection((host, port), timeout=timeout)
        f = sock.makefile("w", encoding="ascii", newline="\n")

        def close():
            f.close()
            sock.close()

        return cls(sock.fileno(), f, timeout, close)

    def request(self, line: str) -> str:
        self.writer.write(line + "\n")
        self.writer.flush()
        deadline = time.monotonic() + self.timeout
        fd = self.read_fd
        buf = b""
        while not buf.endswith(b"\n"):
            left = deadline - time.monotonic()
            if left <= 0:
                raise PolicyTimeout(f"no reply within {self.timeout:.3f}s")
            ready, _, _ = select.select([fd], [], [], left)
            if not ready:
                raise PolicyTimeout(f"no reply within {self.timeout:.3f}s")
            chunk = os.read(fd, 1)
            if not chunk:
                raise MalformedReply("endpoint closed the stream")
            buf += chunk
        return buf.decode("ascii").strip()

    def close(self):
        if self._closer is not None:
            self._closer()
            self._closer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_policy_query(bin: GridBin, size: RotatedSize, endpoint: ExternalPolicyHandle,
                          fallback: bool = True) -> PolicyDecision:
    """Ask an external policy, then check its answer against the mask.

    An infeasible answer is replaced by the greedy choice (with a warning)
    unless ``fallback`` is false, in which case :class:`InfeasibleAction` is raised.
    """
    idx = parse_reply(endpoint.request(format_query(bin, size)), bin.width, bin.height)
    mask = feasibility_mask(bin, size)
    if not mask[idx]:
        if not fallback:
            raise InfeasibleAction(f"endpoint chose infeasible action {idx}")
        log.warning("external policy chose infeasible action %d; using greedy fallback", idx)
        return greedy_place(bin, size)
    if idx == no_position(bin.width, bin.height):
        return PolicyDecision(idx, 0)
    x, y = decode_action(idx, bin.width, bin.height)
    return PolicyDecision(idx, edge_contact_reward(bin, x, y, size))


class ExternalPolicy:
    """Adapts an endpoint to the :class:`Policy` interface used by the search."""

    def __init__(self, endpoint: ExternalPolicyHandle):
        self.endpoint = endpoint

    def decide(self, bin: GridBin, size: RotatedSize) -> PolicyDecision:
        return external_policy_query(bin, size, self.endpoint)
