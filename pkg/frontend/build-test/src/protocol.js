/**
 * Wire protocol shared by the co-host console and the spectator player:
 * command body encoding (byte-stable JSON), the binary frame record format
 * and playlist/stat document types.
 */
export const TOOLBAR = [
    "select_object",
    "annotate_vr",
    "annotate_spec",
    "annotate_windowed",
    "place_target",
    "remove_windowed",
    "remove_all_annotations",
    "remove_targets",
];
/** Params for one toolbar tool from a pointer gesture, key order fixed. */
export function toolParams(tool, gesture) {
    switch (tool) {
        case "select_object":
        case "place_target": {
            const [x, y] = gesture.points[gesture.points.length - 1];
            return { x, y };
        }
        case "annotate_vr":
        case "annotate_spec":
            return { polyline_px: gesture.points };
        case "annotate_windowed":
            return { strokes_px: [gesture.points], stroke_px: 3 };
        case "remove_windowed":
        case "remove_all_annotations":
        case "remove_targets":
            return {};
    }
}
/**
 * The exact request body sent to POST /api/command. Key order is part of
 * the contract with the golden fixtures: token, cmd, params.
 */
export function commandBody(token, cmd, params) {
    return JSON.stringify({ token, cmd, params });
}
export function commandForTool(token, tool, gesture) {
    return commandBody(token, tool, toolParams(tool, gesture));
}
// ---------------------------------------------------------------- records
export const HEADER_SIZE = 26;
export const FLAG_COMPRESSED = 0x01;
export const FLAG_THUMBNAIL = 0x02;
export const FLAG_AUDIO = 0x04;
export const CAMERA_NAMES = ["free", "first_person", "over_shoulder", "third_follow", "map_view"];
const CRC_TABLE = (() => {
    const table = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
        let c = n;
        for (let k = 0; k < 8; k++) {
            c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
        }
        table[n] = c >>> 0;
    }
    return table;
})();
export function crc32(data) {
    let c = 0xffffffff;
    for (let i = 0; i < data.length; i++) {
        c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
    }
    return (c ^ 0xffffffff) >>> 0;
}
async function inflate(data) {
    const ds = new DecompressionStream("deflate"); // zlib container
    const stream = new Blob([data]).stream().pipeThrough(ds);
    const buf = await new Response(stream).arrayBuffer();
    return new Uint8Array(buf);
}
/** Decode one record at `offset`; returns the record and the next offset. */
export async function decodeRecord(data, offset = 0) {
    const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
    if (data.length - offset < HEADER_SIZE) {
        throw new Error("truncated record header");
    }
    const magic = String.fromCharCode(data[offset], data[offset + 1], data[offset + 2], data[offset + 3]);
    if (magic !== "SFNL") {
        throw new Error(`bad magic ${magic}`);
    }
    const cameraId = view.getUint8(offset + 4);
    const flags = view.getUint8(offset + 5);
    const width = view.getUint16(offset + 6);
    const height = view.getUint16(offset + 8);
    const ptsMs = Number(view.getBigUint64(offset + 10));
    const length = view.getUint32(offset + 18);
    const crc = view.getUint32(offset + 22);
    const start = offset + HEADER_SIZE;
    if (data.length < start + length) {
        throw new Error("truncated record payload");
    }
    let payload = data.subarray(start, start + length);
    if (crc32(payload) !== crc) {
        throw new Error("record crc mismatch");
    }
    if (flags & FLAG_COMPRESSED) {
        payload = await inflate(payload);
    }
    if (!(flags & FLAG_AUDIO) && payload.length !== width * height * 3) {
        throw new Error(`payload ${payload.length} != ${width}x${height}x3`);
    }
    return { record: { cameraId, flags, width, height, ptsMs, payload }, next: start + length };
}
/** All records in a length-prefixed segment payload. */
export async function decodeSegment(data) {
    const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
    const out = [];
    let offset = 0;
    while (offset < data.length) {
        if (data.length - offset < 4) {
            throw new Error("truncated record length prefix");
        }
        const recLen = view.getUint32(offset);
        offset += 4;
        const { record, next } = await decodeRecord(data, offset);
        if (next - offset !== recLen) {
            throw new Error("record length prefix mismatch");
        }
        out.push(record);
        offset = next;
    }
    return out;
}
/** RGB8 -> RGBA for canvas ImageData. Return type inferred so the pixel
 * buffer keeps its plain-ArrayBuffer parameterization for ImageData. */
export function rgbToRgba(rgb, width, height) {
    const out = new Uint8ClampedArray(width * height * 4);
    for (let i = 0, j = 0; i < rgb.length; i += 3, j += 4) {
        out[j] = rgb[i];
        out[j + 1] = rgb[i + 1];
        out[j + 2] = rgb[i + 2];
        out[j + 3] = 255;
    }
    return out;
}
