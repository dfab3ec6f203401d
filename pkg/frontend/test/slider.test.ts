import { describe, expect, it } from "vitest";

import { FrameStore, frameIndex } from "../src/slider";
import { asClient, ScriptedClient } from "./helpers";

describe("frameIndex", () => {
  it("maps slider endpoints onto the first and last frames", () => {
    expect(frameIndex(0, 5)).toBe(0);
    expect(frameIndex(1, 5)).toBe(4);
    expect(frameIndex(0.5, 5)).toBe(2);
    expect(frameIndex(0.9, 5)).toBe(4);
  });

  it("rejects out-of-range positions and bad step counts", () => {
    expect(() => frameIndex(1.01, 5)).toThrow(RangeError);
    expect(() => frameIndex(-0.2, 5)).toThrow(RangeError);
    expect(() => frameIndex(0.5, 1)).toThrow(RangeError);
  });
});

describe("FrameStore", () => {
  it("fetches a sequence once and serves scrubs from the cache", async () => {
    const scripted = new ScriptedClient();
    const store = new FrameStore(asClient(scripted));

    const first = await store.frames("aW1n", "the circle is red", "the circle is blue");
    expect(first).toHaveLength(5);
    expect(scripted.interpolations).toBe(1);

    // a scrub across the whole slider and back re-reads the cache only
    for (const position of [0, 0.25, 0.5, 0.75, 1, 0.5, 0]) {
      const frames = await store.frames("aW1n", "the circle is red", "the circle is blue");
      expect(frames[frameIndex(position, frames.length)]).toBe(first[frameIndex(position, 5)]);
    }
    expect(scripted.interpolations).toBe(1);
    expect(store.fetchCount).toBe(1);
  });

  it("treats different endpoints or images as separate sequences", async () => {
    const scripted = new ScriptedClient();
    const store = new FrameStore(asClient(scripted));

    await store.frames("aW1n", "a b", "c d");
    await store.frames("aW1n", "a b", "c e");
    await store.frames("b3RoZXI=", "a b", "c d");
    expect(scripted.interpolations).toBe(3);
    expect(store.has("aW1n", "a b", "c d")).toBe(true);
    expect(store.has("aW1n", "x y", "c d")).toBe(false);
  });

  it("forgets everything on clear", async () => {
    const scripted = new ScriptedClient();
    const store = new FrameStore(asClient(scripted));
    await store.frames("aW1n", "a b", "c d");
    store.clear();
    await store.frames("aW1n", "a b", "c d");
    expect(scripted.interpolations).toBe(2);
  });
});
