"""Layered driver facade over a raw NAND chip.

The driver is organized as a small stack of named function slots.  Upper
slots accept multi-page (or multi-block) ranges and chunk them into
single-page calls on the lower slots; lower slots talk to the chip
directly.  Every call, at both levels, is dispatched through the probe
registry so observers can interpose without changing behavior.

Slots are replaceable: rebinding a slot models substituting one driver
implementation for another.  A device built in legacy mode keeps the
same behavior but its lower slots carry no address metadata, which
forces probe-target resolution to fall back on the upper layer.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .nand import FlashChip, OutOfRangeError
from .probes import HookInvocation, ProbeRegistry, UnknownSlotError, invoke_through

_tuple_new = tuple.__new__

UPPER_SLOTS = ("upper.read", "upper.write", "upper.erase")
LOWER_SLOTS = ("lower.read_page", "lower.write_page", "lower.erase_block")


class PartitionError(Exception):
    """Partition table violation: overlap, misalignment, or out of bounds."""


class FunctionSlot:
    """One named entry in the driver stack.

    ``exposes_address`` records whether a probe on this slot can learn
    per-call addresses from the call itself; legacy lower slots cannot.
    ``probe_fn`` and ``probe_raw`` are managed by the probe registry and
    hold the currently active pre-handler (or None) and its calling
    convention.
    """

    __slots__ = ("name", "level", "kind", "target", "exposes_address",
                 "probe_fn", "probe_raw")

    def __init__(self, name: str, level: str, kind: str, target: Callable,
                 exposes_address: bool = True):
        self.name = name
        self.level = level
        self.kind = kind
        self.target = target
        self.exposes_address = exposes_address
        self.probe_fn = None
        self.probe_raw = False

    def __repr__(self):
        return f"FunctionSlot({self.name!r}, level={self.level!r}, kind={self.kind!r})"


@dataclass(frozen=True)
class Partition:
    index: int
    first_block: int
    block_count: int
    label: str
    first_page: int
    page_count: int

    @property
    def block_limit(self) -> int:
        return self.first_block + self.block_count

    @property
    def page_limit(self) -> int:
        return self.first_page + self.page_count


class ProbeTargetReport(NamedTuple):
    read_slot: str
    write_slot: str
    erase_slot: str
    fallback_used: bool


class MtdDevice:
    """Partitioned driver stack bound to one chip."""

    def __init__(self, chip: FlashChip, legacy: bool = False):
        self.chip = chip
        self.legacy = legacy
        self.partitions: list[Partition] = []
        self.current_task = ""
        meta = not legacy
        self._slots = {
            "upper.read": FunctionSlot("upper.read", "upper", "R", self._upper_read),
            "upper.write": FunctionSlot("upper.write", "upper", "W", self._upper_write),
            "upper.erase": FunctionSlot("upper.erase", "upper", "E", self._upper_erase),
            "lower.read_page": FunctionSlot(
                "lower.read_page", "lower", "R", chip.read_page, meta),
            "lower.write_page": FunctionSlot(
                "lower.write_page", "lower", "W", chip.write_page, meta),
            "lower.erase_block": FunctionSlot(
                "lower.erase_block", "lower", "E", chip.erase_block, meta),
        }
        self.hooks = ProbeRegistry(self._slots)

    # -- task attribution ------------------------------------------------

    @contextmanager
    def task(self, name: str):
        """Attribute operations in the body to the named task."""
        previous = self.current_task
        self.current_task = name
        try:
            yield
        finally:
            self.current_task = previous

    # -- slot table ------------------------------------------------------

    def slot(self, name: str) -> FunctionSlot:
        try:
            return self._slots[name]
        except KeyError:
            raise UnknownSlotError(f"no slot named {name!r}") from None

    def rebind_slot(self, name: str, target: Callable) -> None:
        self.slot(name).target = target

    # -- upper-layer behaviors (bound into the upper slots) --------------
    #
    # Each upper behavior chunks its range into single-unit lower-slot
    # calls.  The loop is the hot path of every simulation, so the lower
    # slot's probe state is resolved once per call and the dispatch is
    # specialized on it; both branches are observably identical to
    # running invoke_through per unit (probes cannot change mid-call on
    # the serialized operation path).

    def _chunked(self, slot_name: str, start: int, count: int):
        chip = self.chip
        slot = self._slots[slot_name]
        target = slot.target
        fn = slot.probe_fn
        receipts = []
        append = receipts.append
        if fn is None:
            for unit in range(start, start + count):
                append(target(unit))
        elif slot.probe_raw:
            name = slot.name
            kind = slot.kind
            task = self.current_task
            for unit in range(start, start + count):
                fn((name, kind, unit, chip.clock_ns, task))
                append(target(unit))
        else:
            name = slot.name
            kind = slot.kind
            task = self.current_task
            make = _tuple_new
            invocation = HookInvocation
            for unit in range(start, start + count):
                fn(make(invocation, (name, kind, unit, chip.clock_ns, task)))
                append(target(unit))
        return receipts

    def _upper_read(self, start_page: int, page_count: int):
        self._check_page_range(start_page, page_count)
        return self._chunked("lower.read_page", start_page, page_count)

    def _upper_write(self, start_page: int, page_count: int):
        self._check_page_range(start_page, page_count)
        return self._chunked("lower.write_page", start_page, page_count)

    def _upper_erase(self, start_block: int, block_count: int):
        self._check_block_range(start_block, block_count)
        return self._chunked("lower.erase_block", start_block, block_count)

    def _check_page_range(self, start_page: int, page_count: int) -> None:
        if (start_page < 0 or page_count < 0
                or start_page + page_count > self.chip.geometry.total_pages):
            raise OutOfRangeError(
                f"page range [{start_page}, {start_page + page_count}) "
                f"outside chip of {self.chip.geometry.total_pages} pages")

    def _check_block_range(self, start_block: int, block_count: int) -> None:
        if (start_block < 0 or block_count < 0
                or start_block + block_count > self.chip.geometry.blocks_per_chip):
            raise OutOfRangeError(
                f"block range [{start_block}, {start_block + block_count}) "
                f"outside chip of {self.chip.geometry.blocks_per_chip} blocks")

    # -- public operation entry points -----------------------------------

    def mtd_read(self, start_page: int, page_count: int):
        return invoke_through(self._slots["upper.read"], self.chip.clock_ns,
                              self.current_task, start_page, page_count)

    def mtd_write(self, start_page: int, page_count: int):
        return invoke_through(self._slots["upper.write"], self.chip.clock_ns,
                              self.current_task, start_page, page_count)

    def mtd_erase(self, start_block: int, block_count: int):
        return invoke_through(self._slots["upper.erase"], self.chip.clock_ns,
                              self.current_task, start_block, block_count)

    # -- partitions ------------------------------------------------------

    def add_partition(self, first_block: int, block_count: int, label: str) -> int:
        geometry = self.chip.geometry
        if first_block < 0 or block_count < 1:
            raise PartitionError(
                f"partition {label!r}: need first_block >= 0 and block_count >= 1")
        if first_block + block_count > geometry.blocks_per_chip:
            raise PartitionError(
                f"partition {label!r}: blocks [{first_block}, "
                f"{first_block + block_count}) exceed chip of "
                f"{geometry.blocks_per_chip} blocks")
        limit = first_block + block_count
        for other in self.partitions:
            if first_block < other.block_limit and other.first_block < limit:
                raise PartitionError(
                    f"partition {label!r} overlaps {other.label!r}")
        part = Partition(
            index=len(self.partitions),
            first_block=first_block,
            block_count=block_count,
            label=label,
            first_page=first_block * geometry.pages_per_block,
            page_count=block_count * geometry.pages_per_block,
        )
        self.partitions.append(part)
        return part.index

    def partition(self, ident) -> Partition:
        """Look up a partition by index or by label."""
        if isinstance(ident, int):
            if 0 <= ident < len(self.partitions):
                return self.partitions[ident]
            raise PartitionError(f"no partition with index {ident}")
        for part in self.partitions:
            if part.label == ident:
                return part
        raise PartitionError(f"no partition labeled {ident!r}")

    # -- probe-target resolution (the function finder) -------------------

    def resolve_probe_targets(self, preferred_level: str = "lower") -> ProbeTargetReport:
        if preferred_level not in ("lower", "upper"):
            raise ValueError(f"preferred_level must be lower or upper, "
                             f"got {preferred_level!r}")
        if preferred_level == "lower":
            lower = [self._slots[name] for name in LOWER_SLOTS]
            if all(slot.exposes_address for slot in lower):
                return ProbeTargetReport(*LOWER_SLOTS, fallback_used=False)
            return ProbeTargetReport(*UPPER_SLOTS, fallback_used=True)
        return ProbeTargetReport(*UPPER_SLOTS, fallback_used=False)
