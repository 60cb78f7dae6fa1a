"""Run ledger: in-memory, append-only events for the run manifest. Retention = max in-memory entries."""

import logging
from typing import Any

logger = logging.getLogger(__name__)

# In-memory store (single process); the CLI clears it at the start of each run
_entries: list[dict[str, Any]] = []
_MAX_MEMORY = 10_000
_seq = 0


def append(event_type: str, payload: dict[str, Any]) -> dict[str, Any]:
    """
    Append a ledger entry.

    Entries carry a sequence number instead of a wall-clock timestamp so
    that manifests of identical runs are identical.

    Args:
        event_type: Type of event (e.g. "velocity_cap_binding", "no_bracket")
        payload: Event data (plain JSON-serializable values)

    Returns:
        Created ledger entry dict
    """
    global _seq
    entry = {
        "seq": _seq,
        "event_type": event_type,
        "payload": payload,
    }
    _seq += 1
    _entries.append(entry)

    # Maintain max memory limit (FIFO)
    if len(_entries) > _MAX_MEMORY:
        _entries.pop(0)

    logger.debug("ledger event %s: %s", event_type, payload)
    return entry


def list_entries(event_type: str | None = None, limit: int = 1000) -> list[dict[str, Any]]:
    """
    List ledger entries in append order, optionally filtered by event type.

    Args:
        event_type: Optional filter
        limit: Maximum number of entries (the most recent ones are kept)

    Returns:
        List of ledger entries
    """
    out = _entries
    if event_type:
        out = [e for e in out if e["event_type"] == event_type]
    return list(out[-limit:])


def clear() -> None:
    """Drop all entries and reset the sequence counter."""
    global _seq
    _entries.clear()
    _seq = 0
