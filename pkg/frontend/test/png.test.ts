import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { colormap, encodePng, Raster } from "../dist/index.js";
import { decodePng, pixelAt } from "./util.js";

const tmp = mkdtempSync(join(tmpdir(), "vmpfc-plots-png-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

describe("encodePng", () => {
  it("round-trips pixels exactly", () => {
    const r = new Raster(3, 2, [10, 20, 30]);
    r.set(0, 0, [255, 0, 0]);
    r.set(2, 1, [0, 0, 255]);
    const path = join(tmp, "tiny.png");
    writeFileSync(path, encodePng(r.width, r.height, r.data));
    const img = decodePng(path);
    expect(img.width).toBe(3);
    expect(img.height).toBe(2);
    expect(pixelAt(img, 0, 0)).toEqual([255, 0, 0]);
    expect(pixelAt(img, 1, 0)).toEqual([10, 20, 30]);
    expect(pixelAt(img, 2, 1)).toEqual([0, 0, 255]);
  });

  it("is deterministic", () => {
    const r = new Raster(40, 30);
    r.line(0, 0, 39, 29, [1, 2, 3]);
    r.text(2, 2, "dt=0.5e-2", [0, 0, 0]);
    const a = encodePng(r.width, r.height, r.data);
    const b = encodePng(r.width, r.height, r.data);
    expect(a.equals(b)).toBe(true);
  });

  it("rejects a buffer of the wrong size", () => {
    expect(() => encodePng(4, 4, new Uint8Array(3))).toThrow(/pixel buffer/);
  });
});

describe("raster primitives", () => {
  it("draws text pixels inside the glyph box", () => {
    const r = new Raster(20, 12);
    r.text(1, 1, "A", [0, 0, 0]);
    let dark = 0;
    for (let i = 0; i < r.data.length; i += 4) {
      if (r.data[i] === 0) dark += 1;
    }
    expect(dark).toBeGreaterThan(5);
    expect(dark).toBeLessThan(5 * 7);
  });

  it("clips out-of-range pixels instead of wrapping", () => {
    const r = new Raster(4, 4);
    r.set(-1, 0, [0, 0, 0]);
    r.set(0, 7, [0, 0, 0]);
    for (let i = 0; i < r.data.length; i += 4) {
      expect(r.data[i]).toBe(255);
    }
  });

  it("maps the colormap endpoints to the stop colors", () => {
    expect(colormap(0)).toEqual([68, 1, 84]);
    expect(colormap(1)).toEqual([253, 231, 37]);
    expect(colormap(-5)).toEqual(colormap(0));
    expect(colormap(5)).toEqual(colormap(1));
  });
});
