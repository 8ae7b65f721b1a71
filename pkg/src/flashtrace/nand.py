"""Raw NAND chip model: blocks of pages, physical constraints, wear and a
virtual clock driven by a configurable latency model.

The chip is the ground truth for the whole stack.  It enforces the two
hardware rules that shape everything above it: a written page cannot be
rewritten before its block is erased, and writes within a block must land
on consecutive page offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

# Latency defaults sit inside the typical ranges for SLC NAND:
# 25-200 us reads, 250-500 us writes, up to 2 ms erases.
DEFAULT_READ_LATENCY_NS = 130_000
DEFAULT_WRITE_LATENCY_NS = 375_000
DEFAULT_ERASE_LATENCY_NS = 2_000_000


class FlashError(Exception):
    """Base class for chip-level operation failures."""


class OutOfRangeError(FlashError):
    pass


class BadBlockError(FlashError):
    pass


class OverwriteError(FlashError):
    """Write to a page that already holds data (erase-before-write rule)."""


class NonSequentialWriteError(FlashError):
    """Write that skips ahead of the block's next free page offset."""


class PageState(Enum):
    FREE = "free"
    WRITTEN = "written"


@dataclass(frozen=True)
class FlashGeometry:
    """Chip shape: blocks per chip, pages per block, page size in bytes."""

    blocks_per_chip: int = 2048
    pages_per_block: int = 64
    page_size: int = 2048

    def __post_init__(self):
        if self.blocks_per_chip <= 0:
            raise ValueError("blocks_per_chip must be positive")
        if self.pages_per_block <= 0 or self.pages_per_block % 32 != 0:
            raise ValueError("pages_per_block must be a positive multiple of 32")
        if self.page_size <= 0:
            raise ValueError("page_size must be positive")

    @property
    def total_pages(self) -> int:
        return self.blocks_per_chip * self.pages_per_block

    @property
    def total_bytes(self) -> int:
        return self.total_pages * self.page_size

    @property
    def block_bytes(self) -> int:
        return self.pages_per_block * self.page_size


def page_to_block(geometry: FlashGeometry, page: int) -> int:
    """Map a page index to the index of its enclosing block."""
    if page < 0 or page >= geometry.total_pages:
        raise OutOfRangeError(f"page {page} outside 0..{geometry.total_pages - 1}")
    return page // geometry.pages_per_block


@dataclass(frozen=True)
class LatencyModel:
    """Per-operation latencies in nanoseconds."""

    read_ns: int = DEFAULT_READ_LATENCY_NS
    write_ns: int = DEFAULT_WRITE_LATENCY_NS
    erase_ns: int = DEFAULT_ERASE_LATENCY_NS

    def __post_init__(self):
        if self.read_ns <= 0 or self.write_ns <= 0 or self.erase_ns <= 0:
            raise ValueError("latencies must be strictly positive")


class OpReceipt(NamedTuple):
    """Record of one physical operation: kind, target address, start time.

    The address is a page index for R/W and a block index for E.  The
    start time is the virtual clock value when the operation began, i.e.
    before its latency was added.
    """

    kind: str
    address: int
    start_ns: int


class BlockState:
    """One erase block.

    Because in-block writes are strictly sequential, the written pages of
    a block always form a prefix; `written` is the length of that prefix
    and doubles as the next free page offset.
    """

    __slots__ = ("written", "erase_count", "is_bad", "_pages_per_block")

    def __init__(self, pages_per_block: int):
        self._pages_per_block = pages_per_block
        self.written = 0
        self.erase_count = 0
        self.is_bad = False

    @property
    def pages(self) -> list[PageState]:
        n = self._pages_per_block
        return [PageState.WRITTEN] * self.written + [PageState.FREE] * (n - self.written)


class FlashChip:
    """A NAND chip as a flat array of blocks with a virtual clock.

    Every successful operation advances `clock_ns` by exactly the
    corresponding latency; nothing else moves the clock, so final time is
    always the per-kind operation counts dotted with the latency model.
    """

    def __init__(
        self,
        geometry: Optional[FlashGeometry] = None,
        latency: Optional[LatencyModel] = None,
        endurance_limit: Optional[int] = None,
    ):
        self.geometry = geometry or FlashGeometry()
        self.latency = latency or LatencyModel()
        if endurance_limit is not None and endurance_limit <= 0:
            raise ValueError("endurance_limit must be positive when set")
        self.endurance_limit = endurance_limit
        self.clock_ns = 0
        ppb = self.geometry.pages_per_block
        self.blocks = [BlockState(ppb) for _ in range(self.geometry.blocks_per_chip)]

    # -- state queries -----------------------------------------------------

    def page_state(self, page: int) -> PageState:
        blk, off = self._locate(page)
        return PageState.WRITTEN if off < blk.written else PageState.FREE

    def snapshot(self) -> tuple:
        """Hashable summary of all mutable chip state, for transcript diffs."""
        return (
            self.clock_ns,
            tuple((b.written, b.erase_count, b.is_bad) for b in self.blocks),
        )

    def _locate(self, page: int) -> tuple[BlockState, int]:
        if page < 0 or page >= self.geometry.total_pages:
            raise OutOfRangeError(
                f"page {page} outside 0..{self.geometry.total_pages - 1}"
            )
        ppb = self.geometry.pages_per_block
        return self.blocks[page // ppb], page % ppb

    # -- physical operations ----------------------------------------------

    def read_page(self, page: int) -> OpReceipt:
        blk, _ = self._locate(page)
        if blk.is_bad:
            raise BadBlockError(f"block {page // self.geometry.pages_per_block} is bad")
        start = self.clock_ns
        self.clock_ns = start + self.latency.read_ns
        return OpReceipt("R", page, start)

    def write_page(self, page: int) -> OpReceipt:
        blk, off = self._locate(page)
        if blk.is_bad:
            raise BadBlockError(f"block {page // self.geometry.pages_per_block} is bad")
        if off < blk.written:
            raise OverwriteError(f"page {page} already written; erase block first")
        if off > blk.written:
            raise NonSequentialWriteError(
                f"page {page} skips offset {blk.written} of its block"
            )
        blk.written += 1
        start = self.clock_ns
        self.clock_ns = start + self.latency.write_ns
        return OpReceipt("W", page, start)

    def erase_block(self, block: int) -> OpReceipt:
        if block < 0 or block >= self.geometry.blocks_per_chip:
            raise OutOfRangeError(
                f"block {block} outside 0..{self.geometry.blocks_per_chip - 1}"
            )
        blk = self.blocks[block]
        if blk.is_bad:
            raise BadBlockError(f"block {block} is bad")
        blk.written = 0
        blk.erase_count += 1
        if self.endurance_limit is not None and blk.erase_count > self.endurance_limit:
            blk.is_bad = True
        start = self.clock_ns
        self.clock_ns = start + self.latency.erase_ns
        return OpReceipt("E", block, start)

    def install_image(self, start_page: int, page_count: int) -> None:
        """Flash a sequential image without receipts, events or clock time.

        Models pre-experiment flashing done before any monitoring begins
        (e.g. a bootloader writing a root file system).  The range must be
        writable under the sequential rule; the call validates the whole
        range before touching anything.
        """
        if page_count < 0:
            raise ValueError("page_count must be >= 0")
        if page_count == 0:
            return
        end = start_page + page_count
        if start_page < 0 or end > self.geometry.total_pages:
            raise OutOfRangeError(f"pages {start_page}..{end - 1} out of range")
        ppb = self.geometry.pages_per_block
        first_blk = start_page // ppb
        last_blk = (end - 1) // ppb
        spans = []
        for bi in range(first_blk, last_blk + 1):
            blk = self.blocks[bi]
            if blk.is_bad:
                raise BadBlockError(f"block {bi} is bad")
            lo = max(start_page, bi * ppb) - bi * ppb
            hi = min(end, (bi + 1) * ppb) - bi * ppb
            if lo < blk.written:
                raise OverwriteError(f"image overlaps written pages in block {bi}")
            if lo > blk.written:
                raise NonSequentialWriteError(
                    f"image would leave a gap in block {bi}"
                )
            spans.append((blk, hi))
        for blk, hi in spans:
            blk.written = hi
