"""Transfer-log ingestion: parsing, filtering, and aggregation into links.

The raw input is a delimited text file with one transfer per line:

    timestamp, source_id, destination_id, amount_yen,
    source_kind, destination_kind,
    source_lat, source_lon, dest_lat, dest_lon

Coordinates may be empty.  Amounts are integer yen; a valid transfer moves
at least 1 yen.  Ingestion is a pure streaming transform: parse each line,
drop records that fail the enabled filter predicates, then collapse all
transfers of each ordered account pair (i, j) into a single link carrying
the total flow and the transfer count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from typing import IO, Iterable, Sequence

__all__ = [
    "TransferRecord",
    "FilterPolicy",
    "AggregatedLink",
    "RejectedLine",
    "ParseError",
    "parse_log",
    "filter_records",
    "aggregate",
    "write_links",
    "read_links",
    "collect_node_coords",
    "write_node_coords",
    "read_node_coords",
]

KINDS = ("firm", "household", "external")

COLUMNS = (
    "timestamp",
    "source_id",
    "destination_id",
    "amount_yen",
    "source_kind",
    "destination_kind",
    "source_lat",
    "source_lon",
    "dest_lat",
    "dest_lon",
)


@dataclass(frozen=True)
class TransferRecord:
    """One raw remittance event.

    Invariants:
    - amount >= 1 (zero-amount lines are rejected at parse time)
    - kinds are one of "firm", "household", "external"
    """

    timestamp: datetime
    source: str
    destination: str
    amount: int
    source_kind: str = "firm"
    destination_kind: str = "firm"
    source_coord: tuple[float, float] | None = None
    destination_coord: tuple[float, float] | None = None


@dataclass(frozen=True)
class FilterPolicy:
    """Which record-level predicates are enforced.

    All three enabled is the reference configuration: keep a transfer only
    when both endpoints are in-bank, both are firm accounts, and the two
    endpoints differ.
    """

    require_intra_bank: bool = True
    require_firm_both_ends: bool = True
    drop_self_loops: bool = True

    def keeps(self, rec: TransferRecord) -> bool:
        if self.require_intra_bank and (
            rec.source_kind == "external" or rec.destination_kind == "external"
        ):
            return False
        if self.require_firm_both_ends and (
            rec.source_kind != "firm" or rec.destination_kind != "firm"
        ):
            return False
        if self.drop_self_loops and rec.source == rec.destination:
            return False
        return True


@dataclass(frozen=True)
class AggregatedLink:
    """Aggregate of all transfers for one ordered account pair.

    flow is the summed amount in yen, frequency the number of transfers;
    flow >= frequency >= 1 because every transfer moves at least 1 yen.
    """

    source: str
    destination: str
    flow: int
    frequency: int


@dataclass(frozen=True)
class RejectedLine:
    """Diagnostic for an input line that could not be parsed."""

    line_no: int
    reason: str


class ParseError(ValueError):
    """Raised in strict mode when a line cannot be parsed."""


def _parse_coord(lat_s: str, lon_s: str) -> tuple[float, float] | None:
    lat_s = lat_s.strip()
    lon_s = lon_s.strip()
    if not lat_s and not lon_s:
        return None
    if not lat_s or not lon_s:
        raise ValueError("latitude and longitude must both be present or both empty")
    return (float(lat_s), float(lon_s))


def _parse_line(parts: Sequence[str]) -> TransferRecord:
    if len(parts) != len(COLUMNS):
        raise ValueError(f"expected {len(COLUMNS)} fields, got {len(parts)}")
    ts = datetime.fromisoformat(parts[0].strip())
    source = parts[1].strip()
    destination = parts[2].strip()
    if not source or not destination:
        raise ValueError("source_id and destination_id are required")
    amount_s = parts[3].strip()
    try:
        amount = int(amount_s)
    except ValueError:
        raise ValueError(f"non-integer amount {amount_s!r}") from None
    if amount < 1:
        raise ValueError(f"amount must be >= 1 yen, got {amount}")
    source_kind = parts[4].strip()
    destination_kind = parts[5].strip()
    for kind in (source_kind, destination_kind):
        if kind not in KINDS:
            raise ValueError(f"unknown party kind {kind!r}")
    return TransferRecord(
        timestamp=ts,
        source=source,
        destination=destination,
        amount=amount,
        source_kind=source_kind,
        destination_kind=destination_kind,
        source_coord=_parse_coord(parts[6], parts[7]),
        destination_coord=_parse_coord(parts[8], parts[9]),
    )


def parse_log(
    stream: IO[str] | Iterable[str],
    *,
    delimiter: str = ",",
    strict: bool = False,
) -> tuple[list[TransferRecord], list[RejectedLine]]:
    """Parse a transfer log into records, reporting rejected lines.

    Returns ``(records, rejected)`` where records appear in file order and
    each rejected line carries its 1-based line number and a reason.  In
    strict mode the first malformed line raises :class:`ParseError` instead.
    Blank lines and a leading header line (first field "timestamp") are
    skipped silently.
    """
    records: list[TransferRecord] = []
    rejected: list[RejectedLine] = []
    reader = csv.reader(stream, delimiter=delimiter)
    for line_no, parts in enumerate(reader, start=1):
        if not parts or (len(parts) == 1 and not parts[0].strip()):
            continue
        if line_no == 1 and parts[0].strip() == "timestamp":
            continue
        try:
            records.append(_parse_line(parts))
        except ValueError as exc:
            if strict:
                raise ParseError(f"line {line_no}: {exc}") from exc
            rejected.append(RejectedLine(line_no=line_no, reason=str(exc)))
    return records, rejected


def filter_records(
    records: Iterable[TransferRecord], policy: FilterPolicy
) -> list[TransferRecord]:
    """Keep exactly the records satisfying all enabled predicates, in order."""
    return [rec for rec in records if policy.keeps(rec)]


def aggregate(records: Iterable[TransferRecord]) -> list[AggregatedLink]:
    """Collapse transfers into one link per ordered (source, destination) pair.

    Each link carries flow = sum of amounts and frequency = transfer count.
    Pairs with transfers in both directions yield two links.  Output is
    sorted by (source, destination) so the link set is order-independent.
    """
    acc: dict[tuple[str, str], list[int]] = {}
    for rec in records:
        key = (rec.source, rec.destination)
        slot = acc.get(key)
        if slot is None:
            acc[key] = [rec.amount, 1]
        else:
            slot[0] += rec.amount
            slot[1] += 1
    return [
        AggregatedLink(source=src, destination=dst, flow=flow, frequency=freq)
        for (src, dst), (flow, freq) in sorted(acc.items())
    ]


LINK_COLUMNS = ("source_id", "destination_id", "flow_yen", "frequency")


def write_links(links: Iterable[AggregatedLink], stream: IO[str]) -> None:
    """Write the link table as delimited text with a header line."""
    stream.write(",".join(LINK_COLUMNS) + "\n")
    for link in links:
        stream.write(f"{link.source},{link.destination},{link.flow},{link.frequency}\n")


def read_links(stream: IO[str] | Iterable[str]) -> list[AggregatedLink]:
    """Read a link table written by :func:`write_links`."""
    links: list[AggregatedLink] = []
    reader = csv.reader(stream)
    for line_no, parts in enumerate(reader, start=1):
        if not parts or (len(parts) == 1 and not parts[0].strip()):
            continue
        if parts[0].strip() == "source_id":
            continue
        if len(parts) != 4:
            raise ValueError(f"link table line {line_no}: expected 4 fields")
        links.append(
            AggregatedLink(
                source=parts[0].strip(),
                destination=parts[1].strip(),
                flow=int(parts[2]),
                frequency=int(parts[3]),
            )
        )
    return links


def collect_node_coords(
    records: Iterable[TransferRecord],
) -> tuple[dict[str, tuple[float, float]], int]:
    """Map each account to its coordinate, first occurrence wins.

    Returns the mapping plus the number of records whose coordinates
    conflicted with an earlier occurrence of the same account.
    """
    coords: dict[str, tuple[float, float]] = {}
    conflicts = 0
    for rec in records:
        for node, coord in (
            (rec.source, rec.source_coord),
            (rec.destination, rec.destination_coord),
        ):
            if coord is None:
                continue
            seen = coords.get(node)
            if seen is None:
                coords[node] = coord
            elif seen != coord:
                conflicts += 1
    return coords, conflicts


def write_node_coords(coords: dict[str, tuple[float, float]], stream: IO[str]) -> None:
    """Write per-account coordinates (node_id, lat, lon) sorted by id."""
    stream.write("node_id,lat,lon\n")
    for node in sorted(coords):
        lat, lon = coords[node]
        stream.write(f"{node},{lat!r},{lon!r}\n")


def read_node_coords(stream: IO[str] | Iterable[str]) -> dict[str, tuple[float, float]]:
    """Read the coordinate table written by :func:`write_node_coords`."""
    coords: dict[str, tuple[float, float]] = {}
    reader = csv.reader(stream)
    for parts in reader:
        if not parts or parts[0].strip() == "node_id":
            continue
        coords[parts[0].strip()] = (float(parts[1]), float(parts[2]))
    return coords
