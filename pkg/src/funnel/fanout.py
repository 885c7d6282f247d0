"""Buffered multi-resolution distribution for spectators.

Broadcast frames accumulate into fixed-duration segments; each segment is
downscaled to every ladder rung, hashed, and appended to a sliding window
served behind a playlist. Segments are immutable once cut: eviction drops
them from the window but never mutates bytes already handed to a reader.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


from .geom import InputDomainError
from .render.raster import Frame, downscale_box
from .wire import encode_frame_from_pixels, prefix_record

DEFAULT_SEGMENT_MS = 2000
DEFAULT_WINDOW = 10
DEFAULT_LIVE_EDGE_OFFSET = 10


@dataclass(frozen=True, slots=True)
class LadderRung:
    name: str
    width: int
    height: int


DEFAULT_RUNGS = (
    LadderRung("full", 640, 360),
    LadderRung("half", 320, 180),
)


@dataclass(frozen=True, slots=True)
class StreamSegment:
    seq: int  # 1-indexed, strictly increasing
    duration_ms: int
    first_pts: int
    frame_count: int
    payloads: dict[str, bytes]  # rung name -> record stream
    hashes: dict[str, str]  # rung name -> sha256 hex


class StreamError(ValueError):
    pass


class Segmenter:
    """Single-producer frame accumulator cutting fixed-duration segments."""

    def __init__(
        self,
        rungs: tuple[LadderRung, ...] = DEFAULT_RUNGS,
        segment_ms: int = DEFAULT_SEGMENT_MS,
        source_width: int = 640,
        source_height: int = 360,
    ):
        if not rungs:
            raise InputDomainError("need at least one ladder rung")
        for r in rungs:
            if source_width % r.width or source_height % r.height:
                raise InputDomainError(
                    f"rung {r.name} {r.width}x{r.height} does not divide source "
                    f"{source_width}x{source_height}"
                )
            if source_width // r.width != source_height // r.height:
                raise InputDomainError(f"rung {r.name} changes the aspect ratio")
        self.rungs = rungs
        self.segment_ms = segment_ms
        self.source_w = source_width
        self.source_h = source_height
        self.pts_regressions = 0
        self._last_pts: int | None = None
        self._next_seq = 1
        self._acc: dict[str, list[bytes]] = {r.name: [] for r in rungs}
        self._acc_first_pts: int | None = None
        self._acc_count = 0
        self._last_delta = 0

    def ingest(self, frame: Frame, camera_id: int = 0, encoded_full: bytes | None = None) -> StreamSegment | None:
        """Add one broadcast frame; returns the finished segment when the
        accumulated span reaches the segment duration.

        encoded_full: optional pre-encoded record for the source-resolution
        rung (the media socket already paid for that compression).
        """
        if frame.width != self.source_w or frame.height != self.source_h:
            raise StreamError(
                f"frame {frame.width}x{frame.height} != source {self.source_w}x{self.source_h}"
            )
        if self._last_pts is not None and frame.pts <= self._last_pts:
            self.pts_regressions += 1
            self._reset_accumulator()
            return None
        delta = 0 if self._last_pts is None else frame.pts - self._last_pts
        self._last_pts = frame.pts
        if self._acc_first_pts is None:
            self._acc_first_pts = frame.pts
        if self._acc_count > 0:
            self._last_delta = delta

        for rung in self.rungs:
            factor = self.source_w // rung.width
            if factor == 1 and encoded_full is not None:
                rec = encoded_full
            else:
                pixels = frame.pixels if factor == 1 else downscale_box(frame.pixels, factor)
                rec = encode_frame_from_pixels(pixels, frame.pts, camera_id, compress=True)
            self._acc[rung.name].append(prefix_record(rec))
        self._acc_count += 1

        span = frame.pts - self._acc_first_pts + (self._last_delta or self.segment_ms)
        if self._acc_count > 1 and span >= self.segment_ms:
            return self._cut(span)
        if self._acc_count == 1 and self.segment_ms <= (self._last_delta or 0):
            return self._cut(span)
        return None

    def _cut(self, span: int) -> StreamSegment:
        payloads = {name: b"".join(parts) for name, parts in self._acc.items()}
        hashes = {name: hashlib.sha256(data).hexdigest() for name, data in payloads.items()}
        seg = StreamSegment(
            seq=self._next_seq,
            duration_ms=int(span),
            first_pts=int(self._acc_first_pts),
            frame_count=self._acc_count,
            payloads=payloads,
            hashes=hashes,
        )
        self._next_seq += 1
        self._reset_accumulator()
        return seg

    def _reset_accumulator(self) -> None:
        self._acc = {r.name: [] for r in self.rungs}
        self._acc_first_pts = None
        self._acc_count = 0


class SegmentGone(KeyError):
    """Requested segment fell out of the window."""


class SegmentNotYet(KeyError):
    """Requested segment has not been cut yet."""


@dataclass(slots=True)
class SegmentStore:
    window: int = DEFAULT_WINDOW
    segment_ms: int = DEFAULT_SEGMENT_MS
    rungs: tuple[LadderRung, ...] = DEFAULT_RUNGS
    _segments: dict[int, StreamSegment] = field(default_factory=dict)
    _order: list[int] = field(default_factory=list)

    def append(self, seg: StreamSegment) -> None:
        self._segments[seg.seq] = seg
        self._order.append(seg.seq)
        while len(self._order) > self.window:
            evicted = self._order.pop(0)
            self._segments.pop(evicted, None)

    @property
    def newest_seq(self) -> int | None:
        return self._order[-1] if self._order else None

    @property
    def media_sequence(self) -> int:
        return self._order[0] if self._order else 1

    def rung(self, name: str) -> LadderRung:
        for r in self.rungs:
            if r.name == name:
                return r
        raise KeyError(name)

    def playlist(self, rung_name: str) -> dict:
        self.rung(rung_name)  # 404 on unknown rung
        return {
            "version": 1,
            "target_duration_s": self.segment_ms / 1000.0,
            "media_sequence": self.media_sequence,
            "segments": [
                {
                    "seq": seq,
                    "duration_ms": self._segments[seq].duration_ms,
                    "url": f"/live/{rung_name}/seg/{seq}",
                }
                for seq in self._order
            ],
        }

    def playlist_text(self, rung_name: str) -> str:
        return json.dumps(self.playlist(rung_name))

    def segment_bytes(self, rung_name: str, seq: int) -> bytes:
        self.rung(rung_name)
        seg = self._segments.get(seq)
        if seg is None:
            newest = self.newest_seq
            if newest is None or seq > newest:
                raise SegmentNotYet(seq)
            raise SegmentGone(seq)
        return seg.payloads[rung_name]

    def segment_hash(self, rung_name: str, seq: int) -> str:
        seg = self._segments.get(seq)
        if seg is None:
            raise SegmentGone(seq)
        return seg.hashes[rung_name]
