"""Flash operation monitor.

Attaches probes to a device's driver slots and maintains two views of
the traffic: per-block spatial counters and a bounded temporal event
log.  Both views are rendered to text on demand in stable, bit-exact
formats:

    spatial   one line per traced block, ascending:  "<reads> <writes> <erases>\n"
    temporal  one line per event, insertion order:
              "<seconds with 9 fractional digits>;<R|W|E>;<address>[;<task>]\n"

Addresses are absolute chip-level indices even when tracing a single
partition: page index for R/W events, block index for E events.

Ingestion is deliberately cheap: the probe sink appends the raw
invocation to a pending list and all bucketing/filtering is folded into
the views the next time one is read or a control command runs.  With
subscribers present the monitor switches to an eager sink so each
recorded event is delivered as it happens.  Either way the observable
views are identical, and the cost added to the operation path stays a
small fraction of the simulated driver work.
"""

from __future__ import annotations

from array import array
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .mtd import MtdDevice

TASK_NAME_BYTES = 16
STATIC_BASE_BYTES = 8861
COUNTER_BYTES_PER_BLOCK = 12  # three 32-bit unsigned counters
LOG_ENTRY_BYTES_BARE = 20
LOG_ENTRY_BYTES_WITH_TASKS = LOG_ENTRY_BYTES_BARE + TASK_NAME_BYTES

NS_PER_SECOND = 1_000_000_000


class MonitorError(Exception):
    pass


class AlreadyAttachedError(MonitorError):
    pass


class NotAttachedError(MonitorError):
    pass


class UnknownCommandError(MonitorError):
    pass


class TraceEvent(NamedTuple):
    time_ns: int
    kind: str  # "R" | "W" | "E"
    address: int  # page index for R/W, block index for E
    task_name: str  # at most TASK_NAME_BYTES bytes, possibly empty


def truncate_task_name(name: str) -> str:
    """Clip a task name to its first TASK_NAME_BYTES bytes of UTF-8."""
    raw = name.encode("utf-8")
    if len(raw) <= TASK_NAME_BYTES:
        return name
    return raw[:TASK_NAME_BYTES].decode("utf-8", errors="ignore")


def format_time_ns(time_ns: int) -> str:
    """Nanosecond clock value as seconds with exactly 9 fractional digits."""
    return f"{time_ns // NS_PER_SECOND}.{time_ns % NS_PER_SECOND:09d}"


def parse_time(text: str) -> int:
    seconds, _, fraction = text.partition(".")
    if len(fraction) != 9:
        raise ValueError(f"timestamp {text!r} lacks 9 fractional digits")
    return int(seconds) * NS_PER_SECOND + int(fraction)


def format_event(event: TraceEvent, with_task: bool) -> str:
    if with_task:
        return (f"{format_time_ns(event.time_ns)};{event.kind};"
                f"{event.address};{event.task_name}\n")
    return f"{format_time_ns(event.time_ns)};{event.kind};{event.address}\n"


def parse_temporal(text: str) -> list[TraceEvent]:
    """Inverse of render_temporal for either task-name mode."""
    events = []
    for line in text.splitlines():
        if not line:
            continue
        parts = line.split(";")
        if len(parts) == 3:
            stamp, kind, address = parts
            task = ""
        elif len(parts) == 4:
            stamp, kind, address, task = parts
        else:
            raise ValueError(f"malformed temporal line: {line!r}")
        if kind not in ("R", "W", "E"):
            raise ValueError(f"unknown event kind in line: {line!r}")
        events.append(TraceEvent(parse_time(stamp), kind, int(address), task))
    return events


def parse_spatial(text: str) -> list[tuple[int, int, int]]:
    """Inverse of render_spatial: one (reads, writes, erases) per line."""
    triples = []
    for line in text.splitlines():
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"malformed spatial line: {line!r}")
        triples.append((int(fields[0]), int(fields[1]), int(fields[2])))
    return triples


class RingLog:
    """Bounded event log; once full, the oldest entry yields to the newest."""

    __slots__ = ("capacity", "total_inserted", "_entries")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("log capacity must be positive")
        self.capacity = capacity
        self.total_inserted = 0
        self._entries = deque(maxlen=capacity)

    def insert(self, event: TraceEvent) -> None:
        self._entries.append(event)
        self.total_inserted += 1

    def clear(self) -> None:
        self._entries.clear()
        self.total_inserted = 0

    def entries(self) -> list[TraceEvent]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


class SpatialCounters:
    """One (reads, writes, erases) triple per block of the traced scope.

    Counters are 32-bit unsigned, stored in flat arrays indexed by
    block offset within the scope.
    """

    __slots__ = ("first_block", "block_count", "reads", "writes", "erases")

    def __init__(self, first_block: int, block_count: int):
        self.first_block = first_block
        self.block_count = block_count
        zeros = bytes(4 * block_count)
        self.reads = array("I", zeros)
        self.writes = array("I", zeros)
        self.erases = array("I", zeros)

    def zero(self) -> None:
        for counters in (self.reads, self.writes, self.erases):
            for i in range(len(counters)):
                counters[i] = 0

    def triple(self, block: int) -> tuple[int, int, int]:
        """Counters of an absolute block index within the scope."""
        i = block - self.first_block
        if not 0 <= i < self.block_count:
            raise IndexError(f"block {block} outside traced scope")
        return (self.reads[i], self.writes[i], self.erases[i])

    def sums(self) -> tuple[int, int, int]:
        return (sum(self.reads), sum(self.writes), sum(self.erases))

    def allocated_bytes(self) -> int:
        return (self.reads.itemsize * len(self.reads)
                + self.writes.itemsize * len(self.writes)
                + self.erases.itemsize * len(self.erases))


@dataclass(frozen=True)
class MonitorConfig:
    traced_partition: Optional[int] = None  # None traces the whole chip
    log_capacity: int = 40_000
    record_task_names: bool = True
    static_base_bytes: int = STATIC_BASE_BYTES

    def __post_init__(self):
        if self.log_capacity < 1:
            raise ValueError("log_capacity must be positive")

    @property
    def log_entry_bytes(self) -> int:
        return (LOG_ENTRY_BYTES_WITH_TASKS if self.record_task_names
                else LOG_ENTRY_BYTES_BARE)


def footprint_estimate(config: MonitorConfig, n_blocks: int) -> int:
    """Modeled RAM usage: static base + counters + preallocated log."""
    return (config.static_base_bytes
            + COUNTER_BYTES_PER_BLOCK * n_blocks
            + config.log_entry_bytes * config.log_capacity)


class FlashMonitor:
    """Probe-backed monitor bound to one device.

    Construction performs the attachment: probe targets are resolved,
    one pre-handler is registered per operation kind, and tracing starts
    immediately.  Attachment itself performs no flash operations and
    never alters the device's behavior or receipts.
    """

    def __init__(self, dev: MtdDevice, config: Optional[MonitorConfig] = None):
        if getattr(dev, "_attached_monitor", None) is not None:
            raise AlreadyAttachedError("device already has a monitor attached")
        if config is None:
            config = MonitorConfig()
        self.dev = dev
        self.config = config
        geometry = dev.chip.geometry
        if config.traced_partition is None:
            first_block, block_limit = 0, geometry.blocks_per_chip
        else:
            part = dev.partition(config.traced_partition)
            first_block, block_limit = part.first_block, part.block_limit
        self._first_block = first_block
        self._block_limit = block_limit
        self._pages_per_block = geometry.pages_per_block
        self.counters = SpatialCounters(first_block, block_limit - first_block)
        self.log = RingLog(config.log_capacity)
        self._pending: list[tuple] = []
        self._mode = "running"
        self._subscribers: dict[int, Callable] = {}
        self._next_subscription = 1
        self._task_cache: dict[str, str] = {}
        self.target_report = dev.resolve_probe_targets("lower")
        self._target_slots = (self.target_report.read_slot,
                              self.target_report.write_slot,
                              self.target_report.erase_slot)
        self._handles = []
        self._register_sink(self._pending.append)
        self._attached = True
        dev._attached_monitor = self

    # -- probe plumbing --------------------------------------------------

    def _register_sink(self, sink: Callable) -> None:
        registry = self.dev.hooks
        for handle in self._handles:
            registry.unregister_probe(handle)
        self._handles = [registry.register_probe(name, sink, raw_tuple=True)
                         for name in self._target_slots]
        if self._mode != "running":
            self._set_probes_active(False)

    def _set_probes_active(self, value: bool) -> None:
        for handle in self._handles:
            handle.active = value

    def _require_attached(self) -> None:
        if not getattr(self, "_attached", False):
            raise NotAttachedError("monitor is detached")

    # -- ingestion -------------------------------------------------------

    def _record(self, invocation) -> Optional[TraceEvent]:
        """Fold one invocation into both views; None if out of scope."""
        _, kind, address, time_ns, raw_task = invocation
        if kind == "E":
            block = address
        else:
            block = address // self._pages_per_block
        if not self._first_block <= block < self._block_limit:
            return None
        counters = self.counters
        i = block - counters.first_block
        if kind == "R":
            counters.reads[i] += 1
        elif kind == "W":
            counters.writes[i] += 1
        else:
            counters.erases[i] += 1
        task = self._task_cache.get(raw_task)
        if task is None:
            task = truncate_task_name(raw_task)
            self._task_cache[raw_task] = task
        event = TraceEvent(time_ns, kind, address, task)
        self.log.insert(event)
        return event

    def _ingest_eager(self, invocation) -> None:
        event = self._record(invocation)
        if event is not None:
            for subscriber in self._subscribers.values():
                subscriber(event)

    def _drain(self) -> None:
        pending = self._pending
        if not pending:
            return
        record = self._record
        for invocation in pending:
            record(invocation)
        pending.clear()

    def on_event(self, invocation) -> None:
        """Feed one invocation directly, honoring the current mode."""
        self._require_attached()
        if self._mode != "running":
            return
        self._drain()
        event = self._record(invocation)
        if event is not None:
            for subscriber in self._subscribers.values():
                subscriber(event)

    # -- control and state -----------------------------------------------

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def total_inserted(self) -> int:
        self._require_attached()
        self._drain()
        return self.log.total_inserted

    def control(self, command: str) -> None:
        self._require_attached()
        if command == "start":
            self._drain()
            self._mode = "running"
            self._set_probes_active(True)
        elif command == "stop":
            self._drain()
            self._mode = "stopped"
            self._set_probes_active(False)
        elif command == "pause":
            self._drain()
            self._mode = "paused"
            self._set_probes_active(False)
        elif command == "reset":
            self._pending.clear()
            self.counters.zero()
            self.log.clear()
        elif command == "flush":
            self._drain()
            self.log.clear()
        else:
            raise UnknownCommandError(f"unknown control command {command!r}")

    # -- views -----------------------------------------------------------

    def events(self) -> list[TraceEvent]:
        self._require_attached()
        self._drain()
        return self.log.entries()

    def render_spatial(self) -> str:
        self._require_attached()
        self._drain()
        counters = self.counters
        reads, writes, erases = counters.reads, counters.writes, counters.erases
        return "".join(f"{reads[i]} {writes[i]} {erases[i]}\n"
                       for i in range(counters.block_count))

    def render_temporal(self) -> str:
        self._require_attached()
        self._drain()
        if self.config.record_task_names:
            return "".join(
                f"{format_time_ns(t)};{kind};{address};{task}\n"
                for t, kind, address, task in self.log._entries)
        return "".join(
            f"{format_time_ns(t)};{kind};{address}\n"
            for t, kind, address, _ in self.log._entries)

    # -- subscribers -----------------------------------------------------

    def subscribe(self, subscriber: Callable) -> int:
        self._require_attached()
        self._drain()
        if not self._subscribers:
            self._register_sink(self._ingest_eager)
        subscription = self._next_subscription
        self._next_subscription += 1
        self._subscribers[subscription] = subscriber
        return subscription

    def unsubscribe(self, subscription: int) -> None:
        self._require_attached()
        if subscription not in self._subscribers:
            raise MonitorError(f"unknown subscription {subscription}")
        del self._subscribers[subscription]
        if not self._subscribers:
            self._register_sink(self._pending.append)

    # -- accounting ------------------------------------------------------

    def footprint_bytes(self) -> int:
        """The monitor's own accounting of its modeled allocations."""
        return (self.config.static_base_bytes
                + self.counters.allocated_bytes()
                + self.config.log_entry_bytes * self.log.capacity)

    # -- teardown --------------------------------------------------------

    def detach(self) -> None:
        self._require_attached()
        registry = self.dev.hooks
        for handle in self._handles:
            registry.unregister_probe(handle)
        self._handles = []
        self._pending.clear()
        self.log.clear()
        self.counters.zero()
        self._subscribers.clear()
        self._attached = False
        self.dev._attached_monitor = None


def attach(dev: MtdDevice, config: Optional[MonitorConfig] = None) -> FlashMonitor:
    return FlashMonitor(dev, config)
