"""Probe interposition for driver function slots.

A probe is a pre-handler attached to a named slot: it runs synchronously
on the caller's path, sees the call's kind/address/time/task before the
slot's behavior executes, and cannot change the call's outcome.  At most
one probe may be attached to a slot at a time.

Handlers normally receive a HookInvocation.  A handler registered with
``raw_tuple=True`` receives the same five fields as a plain tuple
instead; that skips one allocation per event and exists for sinks that
run on every single flash operation (the monitor's ingestion path,
mirroring a real trace handler that only appends to preallocated RAM).

The active handler is stashed directly on the slot object (``probe_fn``)
so the dispatch shim pays one attribute load when deciding whether to
fire; toggling a handle's ``active`` flag swaps that field in and out.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

_tuple_new = tuple.__new__


class ProbeError(Exception):
    pass


class UnknownSlotError(ProbeError):
    pass


class DuplicateProbeError(ProbeError):
    pass


class StaleHandleError(ProbeError):
    pass


class HookInvocation(NamedTuple):
    """What a pre-handler observes for one slot call."""

    slot_name: str
    kind: str  # "R" | "W" | "E"
    address: int  # page index for R/W, block index for E
    time_ns: int  # virtual clock at call entry
    task_name: str


class ProbeHandle:
    """Registration token; flipping ``active`` pauses or resumes the probe."""

    __slots__ = ("id", "slot_name", "_slot", "_fn", "_registered")

    def __init__(self, probe_id: int, slot, fn: Callable):
        self.id = probe_id
        self.slot_name = slot.name
        self._slot = slot
        self._fn = fn
        self._registered = True

    @property
    def active(self) -> bool:
        return self._registered and self._slot.probe_fn is not None

    @active.setter
    def active(self, value: bool) -> None:
        if not self._registered:
            raise StaleHandleError(f"handle {self.id} is not registered")
        self._slot.probe_fn = self._fn if value else None


class ProbeRegistry:
    """Slot table with one-probe-per-slot registration semantics."""

    def __init__(self, slots):
        self._slots = dict(slots)
        self._handles: dict[str, ProbeHandle] = {}
        self._next_id = 1

    def register_probe(self, slot_name: str, handler: Callable,
                       raw_tuple: bool = False) -> ProbeHandle:
        slot = self._slots.get(slot_name)
        if slot is None:
            raise UnknownSlotError(f"no slot named {slot_name!r}")
        if slot_name in self._handles:
            raise DuplicateProbeError(f"slot {slot_name!r} already probed")
        handle = ProbeHandle(self._next_id, slot, handler)
        self._next_id += 1
        self._handles[slot_name] = handle
        slot.probe_raw = raw_tuple
        slot.probe_fn = handler
        return handle

    def unregister_probe(self, handle: ProbeHandle) -> None:
        current = self._handles.get(handle.slot_name)
        if current is not handle or not handle._registered:
            raise StaleHandleError(f"handle {handle.id} is not registered")
        handle._slot.probe_fn = None
        handle._slot.probe_raw = False
        handle._registered = False
        del self._handles[handle.slot_name]

    def is_probed(self, slot_name: str) -> bool:
        return slot_name in self._handles


def invoke_through(slot, time_ns: int, task_name: str, *args):
    """Dispatch one call through a slot: fire its probe, then run the target.

    The handler fires on entry, so it also runs for calls whose behavior
    subsequently fails; behavior results and errors pass through unchanged.
    """
    fn = slot.probe_fn
    if fn is not None:
        if slot.probe_raw:
            fn((slot.name, slot.kind, args[0], time_ns, task_name))
        else:
            fn(_tuple_new(HookInvocation,
                          (slot.name, slot.kind, args[0], time_ns, task_name)))
    return slot.target(*args)
