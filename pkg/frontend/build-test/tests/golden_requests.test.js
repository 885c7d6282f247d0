/**
 * Every toolbar tool must emit a request body byte-identical to the golden
 * fixture the primary server accepted.
 */
import assert from "node:assert/strict";
import { readFileSync, readdirSync } from "node:fs";
import { join, dirname } from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";
import { TOOLBAR, commandForTool } from "../src/protocol.js";
const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "fixtures", "golden");
test("one golden fixture exists per toolbar tool", () => {
    const files = readdirSync(FIXTURES).filter((f) => f.endsWith(".json"));
    assert.equal(files.length, TOOLBAR.length);
    for (const tool of TOOLBAR) {
        assert.ok(files.includes(`${tool}.json`), `missing fixture for ${tool}`);
    }
});
for (const tool of TOOLBAR) {
    test(`tool ${tool} emits the golden request body byte-for-byte`, () => {
        const golden = JSON.parse(readFileSync(join(FIXTURES, `${tool}.json`), "utf8"));
        const body = commandForTool("GOLDEN-TOKEN", tool, { points: golden.gesture_points });
        assert.equal(body, golden.body);
        assert.deepEqual(Buffer.from(body, "utf8"), Buffer.from(golden.body, "utf8"));
    });
}
test("drag of 12 points batches into one spec-annotation command", () => {
    const points = Array.from({ length: 12 }, (_, i) => [100 + i * 5, 200 + (i % 3)]);
    const body = commandForTool("T", "annotate_spec", { points });
    const doc = JSON.parse(body);
    assert.equal(doc.cmd, "annotate_spec");
    assert.equal(doc.params.polyline_px.length, 12);
});
