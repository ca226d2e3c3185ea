"""Raw monitor record parsing and emission.

Two wire formats are supported:

* ``zeek_notice_tsv``: tab-separated notice export with a ``#fields``
  header naming the columns.  The minimum layout is
  ``ts uid id.orig_h id.resp_h note msg`` with ``ts`` in epoch seconds
  (optional fractional part).
* ``syslog_line``: ``HH:MM:SS [host] message``.  The line carries no
  date, so callers supply a base date (config key ``ingest.base_date``).

Parsing is pure per-record; the emitters exist so simulated streams can
be written out and read back bit-exactly.
"""

from __future__ import annotations

import re
from datetime import date, datetime, time, timezone
from typing import Iterable, Iterator, Optional, Sequence

from .types import RawLogRecord, SourceMonitor

ZEEK_FORMAT = "zeek_notice_tsv"
SYSLOG_FORMAT = "syslog_line"

# Minimum notice columns; a #fields header may name more.
ZEEK_DEFAULT_FIELDS: tuple[str, ...] = ("ts", "uid", "id.orig_h", "id.resp_h", "note", "msg")

_SYSLOG_RE = re.compile(r"^(\d{2}):(\d{2}):(\d{2}) \[([^\]\s]+)\] (.*\S.*)$")


class UnknownFormat(Exception):
    """The requested wire format name is not one we parse."""


class MalformedRecord(Exception):
    """A line failed to parse.

    ``offset`` is the byte offset within the line where parsing gave up
    (0 when the line shape is wrong as a whole).
    """

    def __init__(self, reason: str, offset: int = 0):
        super().__init__(f"{reason} (byte offset {offset})")
        self.reason = reason
        self.offset = offset


def parse_record(
    line: str,
    format: str,
    base_date: Optional[date] = None,
    fields: Optional[Sequence[str]] = None,
) -> RawLogRecord:
    """Parse one complete record in the named format.

    ``fields`` overrides the Zeek column layout (normally taken from a
    ``#fields`` header by ``read_zeek_notices``); syslog parsing needs
    ``base_date`` because the line itself is time-of-day only.
    """
    if format == ZEEK_FORMAT:
        return _parse_zeek(line, fields or ZEEK_DEFAULT_FIELDS)
    if format == SYSLOG_FORMAT:
        return _parse_syslog(line, base_date)
    raise UnknownFormat(format)


def _parse_zeek(line: str, fields: Sequence[str]) -> RawLogRecord:
    stripped = line.rstrip("\n")
    if not stripped:
        raise MalformedRecord("empty line")
    if stripped.startswith("#"):
        raise MalformedRecord("directive line is not a record")
    cols = stripped.split("\t")
    if len(cols) < len(fields):
        # Report where the line ran out of columns.
        raise MalformedRecord(
            f"expected {len(fields)} columns, got {len(cols)}",
            offset=len(stripped.encode("utf-8")),
        )
    values = dict(zip(fields, cols))
    try:
        epoch = float(values["ts"])
    except ValueError:
        raise MalformedRecord(f"bad epoch timestamp {values['ts']!r}") from None
    timestamp = datetime.fromtimestamp(epoch, tz=timezone.utc)
    msg = values.get("msg", "")
    if not msg:
        raise MalformedRecord("empty msg column", offset=len(stripped.encode("utf-8")))
    extras = {k: v for k, v in values.items() if k not in ("ts", "msg") and v != "-"}
    # The responder endpoint is the machine the notice is about.
    host = values.get("id.resp_h", "") or "unknown"
    return RawLogRecord(
        timestamp=timestamp,
        source_monitor=SourceMonitor.ZEEK_NOTICE,
        host=host,
        message=msg,
        extras=extras,
    )


def _parse_syslog(line: str, base_date: Optional[date]) -> RawLogRecord:
    if base_date is None:
        raise ValueError("syslog_line parsing requires a base_date (config ingest.base_date)")
    stripped = line.rstrip("\n")
    if not stripped:
        raise MalformedRecord("empty line")
    m = _SYSLOG_RE.match(stripped)
    if m is None:
        raise MalformedRecord("line does not match 'HH:MM:SS [host] message'")
    hh, mm, ss = int(m.group(1)), int(m.group(2)), int(m.group(3))
    if hh > 23 or mm > 59 or ss > 59:
        raise MalformedRecord(f"time of day out of range: {m.group(1)}:{m.group(2)}:{m.group(3)}")
    timestamp = datetime.combine(base_date, time(hh, mm, ss), tzinfo=timezone.utc)
    return RawLogRecord(
        timestamp=timestamp,
        source_monitor=SourceMonitor.SYSLOG,
        host=m.group(4),
        message=m.group(5),
    )


def read_zeek_notices(lines: Iterable[str]) -> Iterator[RawLogRecord]:
    """Parse a Zeek notice TSV stream, honoring #fields headers.

    Directive lines (#separator, #types, #close, ...) are consumed;
    #fields re-maps the column layout for subsequent data lines.
    """
    fields: Sequence[str] = ZEEK_DEFAULT_FIELDS
    for line in lines:
        stripped = line.rstrip("\n")
        if not stripped:
            continue
        if stripped.startswith("#"):
            if stripped.startswith("#fields\t"):
                fields = stripped.split("\t")[1:]
            continue
        yield _parse_zeek(stripped, fields)


def read_syslog(lines: Iterable[str], base_date: date) -> Iterator[RawLogRecord]:
    for line in lines:
        if not line.strip():
            continue
        yield _parse_syslog(line, base_date)


def zeek_header(fields: Sequence[str] = ZEEK_DEFAULT_FIELDS) -> str:
    return "#fields\t" + "\t".join(fields)


def format_zeek_notice(record: RawLogRecord, fields: Sequence[str] = ZEEK_DEFAULT_FIELDS) -> str:
    """Emit one notice data line (inverse of _parse_zeek for the given layout)."""
    values = dict(record.extras)
    values["ts"] = f"{record.timestamp.timestamp():.6f}"
    # TSV cannot carry literal tabs or newlines in a column.
    values["msg"] = re.sub(r"[\t\n]", " ", record.message)
    values.setdefault("id.resp_h", record.host)
    return "\t".join(values.get(f, "-") for f in fields)


def format_syslog(record: RawLogRecord) -> str:
    return f"{record.timestamp:%H:%M:%S} [{record.host}] {record.message}"
