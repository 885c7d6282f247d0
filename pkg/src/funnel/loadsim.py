"""Spectator load simulation: many concurrent clients playing the buffered
stream, measuring end-to-end latency and integrity.

Clients speak minimal HTTP/1.1 over one persistent connection each; at 200
spectators a full-featured HTTP client dominates the measurement with its
own CPU cost, which is exactly what a load harness must not do.

Every client follows the same plan (first segment and count), chosen
centrally after syncing to a fresh segment boundary, so their recorded
hash sets are comparable; fetching, pacing and stall detection are fully
per-client. Latency is wall-clock now minus the pts of the currently
played frame, anchored at the server's stream epoch.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from urllib.parse import urlparse

from .wire import HEADER, HEADER_SIZE

POLL_S = 0.1
PREFETCH_S = 0.5
REQUEST_TIMEOUT_S = 15.0


class HarnessError(RuntimeError):
    pass


class MiniHttp:
    """One persistent HTTP/1.1 connection; reconnects once on failure."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None

    async def _connect(self) -> None:
        self._reader, self._writer = await asyncio.open_connection(self.host, self.port)

    async def get(self, path: str) -> tuple[int, bytes]:
        for attempt in (0, 1):
            try:
                if self._writer is None:
                    await self._connect()
                return await asyncio.wait_for(self._once(path), REQUEST_TIMEOUT_S)
            except (ConnectionError, asyncio.IncompleteReadError, asyncio.TimeoutError, OSError) as e:
                self.close()
                if attempt == 1:
                    raise HarnessError(f"GET {path} failed: {e}") from e
        raise HarnessError(f"GET {path} failed")  # pragma: no cover

    async def _once(self, path: str) -> tuple[int, bytes]:
        assert self._writer is not None and self._reader is not None
        self._writer.write(
            f"GET {path} HTTP/1.1\r\nHost: {self.host}\r\nConnection: keep-alive\r\n\r\n".encode()
        )
        await self._writer.drain()
        status_line = await self._reader.readline()
        if not status_line:
            raise ConnectionError("server closed connection")
        status = int(status_line.split()[1])
        length = None
        while True:
            line = await self._reader.readline()
            if line in (b"\r\n", b""):
                break
            key, _, value = line.decode("latin-1").partition(":")
            if key.strip().lower() == "content-length":
                length = int(value.strip())
        body = await self._reader.readexactly(length) if length else b""
        return status, body

    async def get_json(self, path: str) -> tuple[int, dict]:
        status, body = await self.get(path)
        return status, (json.loads(body) if body else {})

    def close(self) -> None:
        if self._writer is not None:
            try:
                self._writer.close()
            except Exception:
                pass
        self._reader = self._writer = None


@dataclass(slots=True)
class SpectatorReport:
    client: str
    startup_latency_s: float
    stall_count: int
    steady_latency_s: float
    samples: list[float] = field(default_factory=list)
    hash_set: dict[int, str] = field(default_factory=dict)


@dataclass(slots=True)
class LoadReport:
    n: int
    duration_s: float
    rung: str
    offset: int
    segment_ms: int
    plan_first_seq: int
    plan_count: int
    spectators: list[SpectatorReport]
    stalls_total: int
    latency_median_s: float
    latency_min_s: float
    latency_max_s: float
    hash_sets_identical: bool
    elapsed_s: float

    def to_dict(self) -> dict:
        doc = asdict(self)
        for spec in doc["spectators"]:
            spec["hash_set"] = {str(k): v for k, v in spec["hash_set"].items()}
        return doc


def _first_pts(segment: bytes) -> int:
    if len(segment) < 4 + HEADER_SIZE:
        raise HarnessError("segment too short to parse")
    _, _, _, _, _, pts, _, _ = HEADER.unpack_from(segment, 4)
    return pts


def _endpoint(base_url: str) -> tuple[str, int]:
    u = urlparse(base_url)
    if u.scheme not in ("http", ""):
        raise HarnessError(f"only http URLs supported, got {base_url!r}")
    host = u.hostname or "127.0.0.1"
    return host, u.port or 80


async def _wait_for_seq(http: MiniHttp, rung: str, seq: int, deadline: float) -> None:
    while True:
        status, pl = await http.get_json(f"/live/{rung}/playlist.json")
        if status != 200:
            raise HarnessError(f"playlist fetch gave HTTP {status}")
        seqs = [s["seq"] for s in pl["segments"]]
        if seq in seqs:
            return
        if seqs and seq < min(seqs):
            raise HarnessError(f"segment {seq} already evicted")
        if time.monotonic() > deadline:
            raise HarnessError(f"timed out waiting for segment {seq}")
        await asyncio.sleep(POLL_S)


async def _spectator(
    host: str,
    port: int,
    name: str,
    jitter_s: float,
    rung: str,
    epoch_ms: int,
    segment_s: float,
    first_seq: int,
    count: int,
    start_wall: float,
    play_anchor: float,
) -> SpectatorReport:
    report = SpectatorReport(client=name, startup_latency_s=0.0, stall_count=0, steady_latency_s=0.0)
    http = MiniHttp(host, port)
    try:
        for k in range(count):
            seq = first_seq + k
            play_start = play_anchor + k * segment_s
            prefetch_at = play_start - PREFETCH_S - jitter_s
            now = time.monotonic()
            if now < prefetch_at:
                await asyncio.sleep(prefetch_at - now)
            deadline = play_start + 30.0
            body = None
            stalled = False
            while body is None:
                status, content = await http.get(f"/live/{rung}/seg/{seq}")
                if status == 200:
                    body = content
                    break
                if status == 410:
                    raise HarnessError(f"{name}: segment {seq} evicted before playback")
                if status != 404 and status < 500:
                    raise HarnessError(f"{name}: segment fetch gave HTTP {status}")
                if time.monotonic() > play_start and not stalled:
                    stalled = True  # playback under-run: wanted but not available
                    report.stall_count += 1
                if time.monotonic() > deadline:
                    raise HarnessError(f"{name}: segment {seq} never appeared")
                await asyncio.sleep(POLL_S)
            report.hash_set[seq] = hashlib.sha256(body).hexdigest()
            now = time.monotonic()
            if now < play_start:
                await asyncio.sleep(play_start - now)
            # currently played frame = first frame of this segment
            wall_ms = time.time() * 1000.0
            latency = (wall_ms - epoch_ms - _first_pts(body)) / 1000.0
            report.samples.append(round(latency, 4))
            if k == 0:
                report.startup_latency_s = round(time.monotonic() - start_wall, 3)
    finally:
        http.close()
    steady = report.samples[1:] or report.samples
    report.steady_latency_s = round(statistics.median(steady), 4) if steady else 0.0
    return report


async def run_loadsim(
    base_url: str,
    n: int,
    duration_s: float,
    rung: str = "half",
    offset: int | None = None,
) -> LoadReport:
    if n <= 0:
        raise ValueError("need at least one spectator")
    host, port = _endpoint(base_url)
    t0 = time.monotonic()
    control = MiniHttp(host, port)
    try:
        try:
            status, stats = await control.get_json("/live/stats")
        except HarnessError as e:
            raise HarnessError(f"server unreachable at {base_url}: {e}") from e
        if status != 200 or stats.get("epoch_ms") is None:
            raise HarnessError("server has no stream epoch (engine not running)")
        epoch_ms = int(stats["epoch_ms"])
        segment_s = stats["segment_ms"] / 1000.0
        use_offset = stats["default_offset"] if offset is None else offset
        if rung not in stats["rungs"]:
            raise HarnessError(f"unknown rung {rung!r}; server offers {stats['rungs']}")

        # sync: wait for the next fresh segment boundary; on a young stream,
        # wait until enough history exists to really start `offset` back
        status, pl = await control.get_json(f"/live/{rung}/playlist.json")
        if status != 200:
            raise HarnessError(f"playlist fetch gave HTTP {status}")
        segs = pl["segments"]
        back = max(1, use_offset)  # offset 0 still plays the newest segment
        target = max((segs[-1]["seq"] if segs else 0) + 1, back)
        sync_deadline = time.monotonic() + max(30.0, (back + 4) * segment_s)
        await _wait_for_seq(control, rung, target, sync_deadline)
        play_anchor = time.monotonic()

        first_seq = target - back + 1
        elapsed = time.monotonic() - t0
        count = max(1, int((duration_s - elapsed - 1.0) / segment_s))

        tasks = [
            _spectator(
                host, port, f"spec-{i:03d}", (i % 25) * 0.04, rung, epoch_ms,
                segment_s, first_seq, count, t0, play_anchor,
            )
            for i in range(n)
        ]
        reports = list(await asyncio.gather(*tasks))
    finally:
        control.close()

    all_samples = [s for rep in reports for s in rep.samples]
    hash_sets = [rep.hash_set for rep in reports]
    identical = all(h == hash_sets[0] for h in hash_sets)
    return LoadReport(
        n=n,
        duration_s=duration_s,
        rung=rung,
        offset=use_offset,
        segment_ms=int(segment_s * 1000),
        plan_first_seq=first_seq,
        plan_count=count,
        spectators=reports,
        stalls_total=sum(r.stall_count for r in reports),
        latency_median_s=round(statistics.median(all_samples), 4) if all_samples else 0.0,
        latency_min_s=round(min(all_samples), 4) if all_samples else 0.0,
        latency_max_s=round(max(all_samples), 4) if all_samples else 0.0,
        hash_sets_identical=identical,
        elapsed_s=round(time.monotonic() - t0, 2),
    )
