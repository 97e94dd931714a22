"""Event-stream types and file I/O for event-camera recordings.

Coordinates follow image convention: ``x`` is the pixel column, ``y`` the
pixel row. Timestamps are microseconds from the stream origin. Polarity is
+1 (ON, brightness increase) or -1 (OFF, decrease); raw 0/1 encodings are
normalized on ingest. Streams are sorted by timestamp on ingest rather than
rejected, because many recorders emit near-sorted data.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Union

import numpy as np

__all__ = [
    "BINARY_RECORD_DTYPE",
    "DEFAULT_GEOMETRY",
    "Event",
    "EventStream",
    "ParseError",
    "SensorGeometry",
    "parse_events",
    "write_csv",
    "write_binary",
    "events_to_csv_bytes",
]

# Little-endian wire record: u64 t, u16 x, u16 y, i8 p -- 13-byte stride.
BINARY_RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])
assert BINARY_RECORD_DTYPE.itemsize == 13

Source = Union[str, os.PathLike, bytes, bytearray, BinaryIO]


class ParseError(ValueError):
    """Malformed or out-of-contract event input (reports line/offset)."""


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel-array size of the recording sensor."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"sensor geometry must be positive, got {self.width}x{self.height}")

    @classmethod
    def parse(cls, text: str) -> "SensorGeometry":
        """Parse a ``WIDTHxHEIGHT`` string such as ``346x260``."""
        parts = text.lower().replace("×", "x").split("x")
        if len(parts) != 2:
            raise ValueError(f"expected WIDTHxHEIGHT, got {text!r}")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError as exc:
            raise ValueError(f"expected WIDTHxHEIGHT, got {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.width}x{self.height}"


# DAVIS-346-class default; configuration, not a constant of the format.
DEFAULT_GEOMETRY = SensorGeometry(346, 260)


@dataclass(frozen=True)
class Event:
    """One sensor change report."""

    t: int
    x: int
    y: int
    p: int


class EventStream:
    """A validated, time-sorted event recording.

    Column arrays are read-only after construction, so instances are safe
    to share between threads. Equal timestamps keep their input order
    (stable sort), which fixes the collision order downstream.
    """

    __slots__ = ("geometry", "t", "x", "y", "p")

    def __init__(
        self,
        geometry: SensorGeometry,
        t: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        p: np.ndarray,
        *,
        _validated: bool = False,
    ) -> None:
        t = np.asarray(t, dtype=np.int64)
        x64 = np.asarray(x, dtype=np.int64)
        y64 = np.asarray(y, dtype=np.int64)
        p = np.asarray(p, dtype=np.int8)
        if not (t.shape == x64.shape == y64.shape == p.shape) or t.ndim != 1:
            raise ValueError("event columns must be 1-D arrays of equal length")
        if not _validated:
            _validate_columns(t, x64, y64, p, geometry)
            if t.size and np.any(np.diff(t) < 0):
                order = np.argsort(t, kind="stable")
                t, x64, y64, p = t[order], x64[order], y64[order], p[order]
        self.geometry = geometry
        self.t = np.ascontiguousarray(t)
        self.x = np.ascontiguousarray(x64.astype(np.uint16))
        self.y = np.ascontiguousarray(y64.astype(np.uint16))
        self.p = np.ascontiguousarray(p)
        for arr in (self.t, self.x, self.y, self.p):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @property
    def t_min(self) -> int:
        if not len(self):
            raise ValueError("empty stream has no t_min")
        return int(self.t[0])

    @property
    def t_max(self) -> int:
        if not len(self):
            raise ValueError("empty stream has no t_max")
        return int(self.t[-1])

    @property
    def duration_us(self) -> int:
        return self.t_max - self.t_min

    def slice_range(self, lo: int, hi: int) -> "EventStream":
        """Positional slice [lo, hi); shares the underlying arrays."""
        return EventStream(
            self.geometry, self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi],
            _validated=True,
        )

    def slice_window(self, t_start: int, t_end: int) -> "EventStream":
        """Events with t in [t_start, t_end); may be empty."""
        lo = int(np.searchsorted(self.t, t_start, side="left"))
        hi = int(np.searchsorted(self.t, t_end, side="left"))
        return self.slice_range(lo, hi)


def _validate_columns(
    t: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    geometry: SensorGeometry,
    line_of=None,
) -> np.ndarray:
    """Check invariants; returns polarity normalized to {-1,+1}.

    ``line_of`` maps a row index to a human-readable source location for
    error messages; without it the bare row index is used.
    """
    where = line_of if line_of is not None else (lambda i: f"record {i}")

    def first_bad(mask: np.ndarray) -> int:
        return int(np.nonzero(mask)[0][0])

    if t.size:
        bad = t < 0
        if np.any(bad):
            i = first_bad(bad)
            raise ParseError(f"{where(i)}: negative timestamp {t[i]}")
        bad = (x < 0) | (x >= geometry.width)
        if np.any(bad):
            i = first_bad(bad)
            raise ParseError(
                f"{where(i)}: x={x[i]} out of bounds for sensor width {geometry.width}"
            )
        bad = (y < 0) | (y >= geometry.height)
        if np.any(bad):
            i = first_bad(bad)
            raise ParseError(
                f"{where(i)}: y={y[i]} out of bounds for sensor height {geometry.height}"
            )
    return _normalize_polarity(p, where)


def _normalize_polarity(p: np.ndarray, where) -> np.ndarray:
    """Map raw polarity to {-1,+1}; accepts 0/1 and -1/+1 encodings."""
    if p.size == 0:
        return p.astype(np.int8)
    bad = (p < -1) | (p > 1)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise ParseError(f"{where(i)}: polarity {p[i]} not in {{0,1}} or {{-1,+1}}")
    has_zero = bool(np.any(p == 0))
    has_neg = bool(np.any(p == -1))
    if has_zero and has_neg:
        i = int(np.nonzero(p == 0)[0][0])
        raise ParseError(f"{where(i)}: mixed 0/1 and -1/+1 polarity encodings")
    if has_zero:
        return (2 * p.astype(np.int16) - 1).astype(np.int8)
    return p.astype(np.int8)


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def parse_events(
    source: Source,
    fmt: str = "csv",
    geometry: SensorGeometry = DEFAULT_GEOMETRY,
    *,
    swap_xy: bool = False,
) -> EventStream:
    """Parse a raw event recording into a validated, sorted stream.

    Args:
        source: path, bytes, or binary file object.
        fmt: ``csv`` (rows ``t,x,y,p``, optional header, LF or CRLF) or
            ``binary_le`` (13-byte little-endian records).
        geometry: sensor bounds used for coordinate validation.
        swap_xy: interpret the coordinate columns as ``t,y,x,p`` -- escape
            hatch for recorders that store the row coordinate first.
    """
    data = _read_bytes(source)
    if fmt == "csv":
        return _parse_csv(data, geometry, swap_xy)
    if fmt == "binary_le":
        return _parse_binary(data, geometry, swap_xy)
    raise ValueError(f"unknown event format {fmt!r} (expected 'csv' or 'binary_le')")


def _csv_data_lines(text: str) -> tuple[list[tuple[int, str]], bool]:
    """Split CSV text into (line_number, content) pairs, handling a header."""
    numbered = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r").strip()
        if line:
            numbered.append((lineno, line))
    has_header = False
    if numbered:
        first_field = numbered[0][1].split(",")[0].strip()
        try:
            int(first_field)
        except ValueError:
            has_header = True
            numbered = numbered[1:]
    return numbered, has_header


def _parse_csv(data: bytes, geometry: SensorGeometry, swap_xy: bool) -> EventStream:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"event CSV is not valid UTF-8: {exc}") from exc
    numbered, _ = _csv_data_lines(text)
    if not numbered:
        raise ParseError("empty stream")

    linenos = np.array([n for n, _ in numbered], dtype=np.int64)
    body = "\n".join(line for _, line in numbered)
    try:
        arr = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
        if arr.shape[1] != 4:
            raise ValueError(f"expected 4 columns, got {arr.shape[1]}")
    except ValueError:
        _scan_for_bad_line(numbered)
        raise  # unreachable unless the scanner misses what loadtxt saw

    return _finish_parse(arr, geometry, swap_xy, lambda i: f"line {linenos[i]}")


def _scan_for_bad_line(numbered: list[tuple[int, str]]) -> None:
    """Locate the first malformed CSV record and raise with its line number."""
    for lineno, line in numbered:
        parts = [f.strip() for f in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields 't,x,y,p', got {len(parts)}")
        for field in parts:
            try:
                int(field)
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer field {field!r}") from None


def _parse_binary(data: bytes, geometry: SensorGeometry, swap_xy: bool) -> EventStream:
    if len(data) == 0:
        raise ParseError("empty stream")
    stride = BINARY_RECORD_DTYPE.itemsize
    if len(data) % stride != 0:
        raise ParseError(
            f"truncated record at byte offset {len(data) - len(data) % stride}"
            f" (stream length {len(data)} is not a multiple of {stride})"
        )
    rec = np.frombuffer(data, dtype=BINARY_RECORD_DTYPE)
    arr = np.empty((rec.size, 4), dtype=np.int64)
    arr[:, 0] = rec["t"].astype(np.int64)
    arr[:, 1] = rec["x"]
    arr[:, 2] = rec["y"]
    arr[:, 3] = rec["p"]
    return _finish_parse(
        arr, geometry, swap_xy, lambda i: f"record {i} (byte offset {i * stride})"
    )


def _finish_parse(arr: np.ndarray, geometry: SensorGeometry, swap_xy: bool, line_of) -> EventStream:
    t = arr[:, 0]
    x = arr[:, 2] if swap_xy else arr[:, 1]
    y = arr[:, 1] if swap_xy else arr[:, 2]
    p = _validate_columns(t, x, y, arr[:, 3].astype(np.int64), geometry, line_of)
    if np.any(np.diff(t) < 0):
        order = np.argsort(t, kind="stable")
        t, x, y, p = t[order], x[order], y[order], p[order]
    return EventStream(geometry, t, x, y, p, _validated=True)


def events_to_csv_bytes(stream: EventStream, header: bool = False) -> bytes:
    buf = io.StringIO()
    if header:
        buf.write("t,x,y,p\n")
    cols = np.column_stack(
        [stream.t, stream.x.astype(np.int64), stream.y.astype(np.int64), stream.p.astype(np.int64)]
    )
    np.savetxt(buf, cols, fmt="%d", delimiter=",", newline="\n")
    return buf.getvalue().encode("utf-8")


def write_csv(stream: EventStream, dest: Union[str, os.PathLike, BinaryIO], header: bool = False) -> None:
    payload = events_to_csv_bytes(stream, header=header)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(payload)
    else:
        dest.write(payload)


def write_binary(stream: EventStream, dest: Union[str, os.PathLike, BinaryIO]) -> None:
    rec = np.empty(len(stream), dtype=BINARY_RECORD_DTYPE)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    payload = rec.tobytes()
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(payload)
    else:
        dest.write(payload)
