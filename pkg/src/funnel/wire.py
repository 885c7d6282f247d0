"""Binary frame record format shared by the media socket and the fan-out.

Record = header + payload. Header fields, big-endian:

    magic     4s   "SFNL"
    camera_id u8   rig index (order of RigMode)
    flags     u8   bit0 zlib payload, bit1 thumbnail, bit2 audio
    width     u16
    height    u16
    pts_ms    u64
    len       u32  stored payload length
    crc32     u32  of the stored payload bytes

Video payloads are RGB8 row-major, top row first. Audio payloads are
opaque; width/height are zero for them.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .render.raster import Frame
from .rig import RigMode

MAGIC = b"SFNL"
HEADER = struct.Struct(">4sBBHHQII")
HEADER_SIZE = HEADER.size  # 26 bytes

FLAG_COMPRESSED = 0x01
FLAG_THUMBNAIL = 0x02
FLAG_AUDIO = 0x04

CAMERA_IDS = {mode: i for i, mode in enumerate(RigMode)}
CAMERA_BY_ID = {i: mode for mode, i in CAMERA_IDS.items()}

COMPRESS_LEVEL = 1  # synthetic frames compress well even at the fast level


class WireError(ValueError):
    """Malformed or corrupt frame record."""


@dataclass(frozen=True, slots=True)
class FrameRecord:
    camera_id: int
    flags: int
    width: int
    height: int
    pts_ms: int
    payload: bytes  # decompressed

    @property
    def is_thumbnail(self) -> bool:
        return bool(self.flags & FLAG_THUMBNAIL)

    @property
    def is_audio(self) -> bool:
        return bool(self.flags & FLAG_AUDIO)

    def to_frame(self) -> Frame:
        label = CAMERA_BY_ID.get(self.camera_id, RigMode.FREE).value
        return Frame.from_bytes(self.payload, self.width, self.height, label, self.pts_ms)


def encode_frame(frame: Frame, camera_id: int, compress: bool = True, thumbnail: bool = False) -> bytes:
    payload = frame.to_bytes()
    flags = FLAG_THUMBNAIL if thumbnail else 0
    if compress:
        payload = zlib.compress(payload, COMPRESS_LEVEL)
        flags |= FLAG_COMPRESSED
    header = HEADER.pack(
        MAGIC, camera_id, flags, frame.width, frame.height,
        frame.pts, len(payload), zlib.crc32(payload),
    )
    return header + payload


def encode_audio(payload: bytes, pts_ms: int, camera_id: int = 0) -> bytes:
    header = HEADER.pack(
        MAGIC, camera_id, FLAG_AUDIO, 0, 0, pts_ms, len(payload), zlib.crc32(payload)
    )
    return header + payload


def decode_record(data: bytes, offset: int = 0) -> tuple[FrameRecord, int]:
    """Decode one record at `offset`; returns (record, next_offset)."""
    if len(data) - offset < HEADER_SIZE:
        raise WireError("truncated header")
    magic, camera_id, flags, width, height, pts, plen, crc = HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise WireError(f"bad magic {magic!r}")
    start = offset + HEADER_SIZE
    end = start + plen
    if len(data) < end:
        raise WireError("truncated payload")
    payload = data[start:end]
    if zlib.crc32(payload) != crc:
        raise WireError("payload crc mismatch")
    if flags & FLAG_COMPRESSED:
        payload = zlib.decompress(payload)
    if not (flags & FLAG_AUDIO) and len(payload) != width * height * 3:
        raise WireError(f"payload length {len(payload)} != {width}x{height}x3")
    return FrameRecord(camera_id, flags, width, height, pts, payload), end


def encode_frame_from_pixels(
    pixels: np.ndarray, pts_ms: int, camera_id: int, compress: bool = True, thumbnail: bool = False
) -> bytes:
    h, w = pixels.shape[:2]
    return encode_frame(Frame(w, h, pixels, pts=pts_ms), camera_id, compress, thumbnail)


def iter_records(data: bytes):
    """All records in a length-prefixed concatenation (as used in segments)."""
    offset = 0
    while offset < len(data):
        if len(data) - offset < 4:
            raise WireError("truncated record length prefix")
        (rec_len,) = struct.unpack_from(">I", data, offset)
        offset += 4
        rec, end = decode_record(data, offset)
        if end - offset != rec_len:
            raise WireError("record length prefix mismatch")
        yield rec
        offset = end


def prefix_record(record: bytes) -> bytes:
    return struct.pack(">I", len(record)) + record
