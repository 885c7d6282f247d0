"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class CommandRequest(BaseModel):
    token: str
    cmd: str
    params: dict[str, Any] = Field(default_factory=dict)


class CommandResponse(BaseModel):
    ok: bool
    result: Optional[dict[str, Any]] = None
    error: Optional[str] = None


class ChatPostRequest(BaseModel):
    client_id: str = Field(min_length=1)
    text: str


class ChatPostResponse(BaseModel):
    ok: bool
    msg_id: Optional[int] = None
    error: Optional[str] = None


class ChatLedgerEntry(BaseModel):
    msg_id: int
    sender: str
    sender_role: str
    text: str
    t: int
    relayed: bool


class ChatLedgerResponse(BaseModel):
    messages: list[ChatLedgerEntry]


class AudioPostRequest(BaseModel):
    token: str
    payload_b64: str = ""


class AudioPostResponse(BaseModel):
    ok: bool
    delivered_to: list[str] = Field(default_factory=list)
    error: Optional[str] = None


class TabletHistoryItem(BaseModel):
    kind: str
    t: int
    text: str = ""
    source: str = ""
    msg_id: Optional[int] = None
    image_sha: str = ""


class TabletResponse(BaseModel):
    on_air: bool
    history: list[TabletHistoryItem]
    snapshot_pts: Optional[int] = None
    snapshot_label: Optional[str] = None


class StateSummary(BaseModel):
    tick: int
    scenario_t: float
    active_rig: str
    on_air: bool
    chat_len: int
    annotations: int
    targets: int
    selection: list[str]
    newest_seq: Optional[int] = None
    pts_regressions: int
    audio_counters: dict[str, int]
    grab_rejections: int
    epoch_ms: Optional[int] = None


class LiveStats(BaseModel):
    epoch_ms: Optional[int]
    newest_seq: Optional[int]
    media_sequence: int
    segment_ms: int
    default_offset: int
    rungs: list[str]
