/** Readers for the solver's series.csv and convergence.csv formats. */

import { readFileSync } from "node:fs";

import { FormatError } from "./errors.js";

export const SERIES_COLUMNS = [
  "t",
  "dt",
  "mass",
  "e_original",
  "e_pseudo",
  "e_modified",
  "e_discrete",
  "aux",
  "s_active",
] as const;

export type SeriesColumn = (typeof SERIES_COLUMNS)[number];

export interface SeriesFrame {
  path: string;
  length: number;
  columns: Record<SeriesColumn, Float64Array>;
}

export interface ConvergenceRow {
  dt: number;
  error: number;
  rate: number;
}

/** Strict float parse; accepts the C-locale spellings nan/inf the writer uses. */
function parseNumber(token: string, where: string): number {
  const s = token.trim();
  const low = s.toLowerCase();
  if (low === "nan" || low === "-nan") return NaN;
  if (low === "inf" || low === "infinity") return Infinity;
  if (low === "-inf" || low === "-infinity") return -Infinity;
  if (s === "" || Number.isNaN(Number(s))) {
    throw new FormatError(`${where}: not a number: ${JSON.stringify(token)}`);
  }
  return Number(s);
}

function readLines(path: string): string[] {
  return readFileSync(path, "utf8").split(/\r?\n/).filter((line) => line !== "");
}

export function readSeriesCsv(path: string): SeriesFrame {
  const lines = readLines(path);
  if (lines.length === 0) {
    throw new FormatError(`${path}: empty file`);
  }
  if (lines[0] !== SERIES_COLUMNS.join(",")) {
    throw new FormatError(
      `${path}: bad series header ${JSON.stringify(lines[0])}; expected ${SERIES_COLUMNS.join(",")}`,
    );
  }
  const n = lines.length - 1;
  if (n === 0) {
    throw new FormatError(`${path}: no records`);
  }
  const columns = Object.fromEntries(
    SERIES_COLUMNS.map((c) => [c, new Float64Array(n)]),
  ) as Record<SeriesColumn, Float64Array>;
  for (let i = 0; i < n; i++) {
    const fields = lines[i + 1]!.split(",");
    if (fields.length !== SERIES_COLUMNS.length) {
      throw new FormatError(
        `${path}:${i + 2}: expected ${SERIES_COLUMNS.length} fields, got ${fields.length}`,
      );
    }
    SERIES_COLUMNS.forEach((c, j) => {
      columns[c][i] = parseNumber(fields[j]!, `${path}:${i + 2} (${c})`);
    });
  }
  for (let i = 1; i < n; i++) {
    if (!(columns.t[i]! > columns.t[i - 1]!)) {
      throw new FormatError(`${path}: t not strictly increasing at row ${i + 2}`);
    }
  }
  return { path, length: n, columns };
}

export function readConvergenceCsv(path: string): ConvergenceRow[] {
  const lines = readLines(path);
  if (lines.length === 0 || lines[0] !== "dt,error,rate") {
    throw new FormatError(
      `${path}: bad convergence header ${JSON.stringify(lines[0] ?? "")}; expected dt,error,rate`,
    );
  }
  const rows: ConvergenceRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = lines[i]!.split(",");
    if (fields.length !== 3) {
      throw new FormatError(`${path}:${i + 1}: expected 3 fields, got ${fields.length}`);
    }
    const dt = parseNumber(fields[0]!, `${path}:${i + 1} (dt)`);
    if (!(dt > 0) || !Number.isFinite(dt)) {
      throw new FormatError(`${path}:${i + 1}: dt must be positive, got ${fields[0]}`);
    }
    rows.push({
      dt,
      error: parseNumber(fields[1]!, `${path}:${i + 1} (error)`),
      rate: parseNumber(fields[2]!, `${path}:${i + 1} (rate)`),
    });
  }
  return rows;
}
