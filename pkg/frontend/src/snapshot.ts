/** Reader for field snapshots: <base>.f64 raw doubles + <base>.json sidecar. */

import { readFileSync, statSync } from "node:fs";

import { FormatError } from "./errors.js";

export interface Snapshot {
  dim: number;
  n: number[];
  lengths: number[];
  t: number;
  scheme: string;
  field: string;
  /** C-order samples, index [i0 * n1 * n2 + i1 * n2 + i2] in 3D. */
  data: Float64Array;
}

export function snapshotPaths(path: string): { raw: string; meta: string } {
  const base = path.endsWith(".f64")
    ? path.slice(0, -4)
    : path.endsWith(".json")
      ? path.slice(0, -5)
      : path;
  return { raw: base + ".f64", meta: base + ".json" };
}

export function readSnapshot(path: string): Snapshot {
  const { raw, meta } = snapshotPaths(path);
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(readFileSync(meta, "utf8"));
  } catch (e) {
    if (e instanceof SyntaxError) {
      throw new FormatError(`${meta}: invalid JSON (${e.message})`);
    }
    throw e;
  }
  for (const key of ["dim", "n", "L", "t"]) {
    if (!(key in doc)) {
      throw new FormatError(`${meta}: missing key ${JSON.stringify(key)}`);
    }
  }
  const dim = Number(doc.dim);
  const n = (doc.n as unknown[]).map(Number);
  const lengths = (doc.L as unknown[]).map(Number);
  if (
    !Number.isInteger(dim) ||
    n.length !== dim ||
    lengths.length !== dim ||
    n.some((v) => !Number.isInteger(v) || v < 1) ||
    lengths.some((v) => !(v > 0))
  ) {
    throw new FormatError(`${meta}: inconsistent dim/n/L`);
  }
  const points = n.reduce((a, b) => a * b, 1);
  const size = statSync(raw).size;
  if (size !== 8 * points) {
    throw new FormatError(`${raw}: payload is ${size} bytes, geometry needs ${8 * points}`);
  }
  const buf = readFileSync(raw);
  // file is little-endian float64; typed-array view matches on LE hosts
  const data = new Float64Array(buf.buffer, buf.byteOffset, points);
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i]!)) {
      throw new FormatError(`${raw}: non-finite sample at index ${i}`);
    }
  }
  return {
    dim,
    n,
    lengths,
    t: Number(doc.t),
    scheme: String(doc.scheme ?? ""),
    field: String(doc.field ?? "phi"),
    data,
  };
}
