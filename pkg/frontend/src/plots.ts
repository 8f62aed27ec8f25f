/** The four renderers: energy curves, dt traces, convergence lines, field maps. */

import { mkdirSync, writeFileSync } from "node:fs";
import { basename, dirname } from "node:path";

import { Frame, formatTick } from "./axes.js";
import { readConvergenceCsv, readSeriesCsv, SeriesColumn, SeriesFrame } from "./csv.js";
import { FormatError, UsageError } from "./errors.js";
import { encodePng } from "./png.js";
import { BLACK, colormap, GREY, PALETTE, Raster, TEXT_H } from "./raster.js";
import { readSnapshot, Snapshot } from "./snapshot.js";

export const ENERGY_COLUMNS = [
  "e_original",
  "e_pseudo",
  "e_modified",
  "e_discrete",
  "aux",
] as const;

export interface PlotOptions {
  width?: number;
  height?: number;
  columns?: string[];
  logx?: boolean;
}

interface Trace {
  xs: number[];
  ys: number[];
  label: string;
}

function writePng(out: string, r: Raster): void {
  mkdirSync(dirname(out), { recursive: true });
  writeFileSync(out, encodePng(r.width, r.height, r.data));
}

function stem(path: string): string {
  return basename(path).replace(/\.[^.]+$/, "");
}

function collectTraces(
  frames: SeriesFrame[],
  columns: SeriesColumn[],
  logx: boolean,
): Trace[] {
  const traces: Trace[] = [];
  for (const frame of frames) {
    for (const col of columns) {
      const xs: number[] = [];
      const ys: number[] = [];
      for (let i = 0; i < frame.length; i++) {
        const x = frame.columns.t[i]!;
        const y = frame.columns[col][i]!;
        if (!Number.isFinite(y) || (logx && !(x > 0))) continue;
        xs.push(x);
        ys.push(y);
      }
      if (xs.length === 0) continue;
      const label =
        columns.length > 1 && frames.length > 1
          ? `${stem(frame.path)}:${col}`
          : columns.length > 1
            ? col
            : stem(frame.path);
      traces.push({ xs, ys, label });
    }
  }
  return traces;
}

function extent(traces: Trace[]): { xlim: [number, number]; ylim: [number, number] } {
  let xlo = Infinity;
  let xhi = -Infinity;
  let ylo = Infinity;
  let yhi = -Infinity;
  for (const tr of traces) {
    for (const x of tr.xs) {
      xlo = Math.min(xlo, x);
      xhi = Math.max(xhi, x);
    }
    for (const y of tr.ys) {
      ylo = Math.min(ylo, y);
      yhi = Math.max(yhi, y);
    }
  }
  const pad = Math.max(0.05 * (yhi - ylo), 1e-12 * Math.max(1, Math.abs(ylo)));
  return { xlim: [xlo, xhi], ylim: [ylo - pad, yhi + pad] };
}

function drawSeriesPlot(
  traces: Trace[],
  out: string,
  opts: PlotOptions,
  ylabel: string,
): void {
  const r = new Raster(opts.width ?? 900, opts.height ?? 540);
  const { xlim, ylim } = extent(traces);
  const frame = new Frame(r, {
    xlim,
    ylim,
    logx: opts.logx ?? false,
    xlabel: "t",
    ylabel,
    title: ylabel + " vs t",
  });
  frame.drawFrame();
  traces.forEach((tr, i) => {
    frame.polyline(tr.xs, tr.ys, PALETTE[i % PALETTE.length]!);
  });
  frame.legend(traces.map((tr, i) => ({ label: tr.label, color: PALETTE[i % PALETTE.length]! })));
  writePng(out, r);
}

export function plotEnergy(paths: string[], out: string, opts: PlotOptions = {}): void {
  if (paths.length === 0) {
    throw new UsageError("plot-energy needs at least one series.csv");
  }
  const requested = opts.columns ?? ["e_pseudo"];
  const columns: SeriesColumn[] = [];
  for (const c of requested) {
    if (!(ENERGY_COLUMNS as readonly string[]).includes(c)) {
      throw new UsageError(
        `unknown energy column ${JSON.stringify(c)}; choose from ${ENERGY_COLUMNS.join(", ")}`,
      );
    }
    columns.push(c as SeriesColumn);
  }
  if (columns.length === 0) {
    throw new UsageError("empty column selection");
  }
  const frames = paths.map(readSeriesCsv);
  const traces = collectTraces(frames, columns, opts.logx ?? false);
  if (traces.length === 0) {
    throw new UsageError(`no finite data in columns ${columns.join(", ")}`);
  }
  drawSeriesPlot(traces, out, opts, columns.length === 1 ? columns[0]! : "energy");
}

export function plotDt(paths: string[], out: string, opts: PlotOptions = {}): void {
  if (paths.length === 0) {
    throw new UsageError("plot-dt needs at least one series.csv");
  }
  const frames = paths.map(readSeriesCsv);
  const traces: Trace[] = [];
  for (const frame of frames) {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let i = 0; i < frame.length; i++) {
      const dt = frame.columns.dt[i]!;
      if (!(dt > 0)) continue; // the t = 0 row carries dt = 0
      xs.push(frame.columns.t[i]!);
      ys.push(dt);
    }
    if (xs.length) traces.push({ xs, ys, label: stem(frame.path) });
  }
  if (traces.length === 0) {
    throw new FormatError("no steps to plot (all rows have dt = 0)");
  }
  drawSeriesPlot(traces, out, opts, "dt");
}

export function plotConvergence(path: string, out: string, opts: PlotOptions = {}): void {
  const rows = readConvergenceCsv(path).filter((row) => Number.isFinite(row.error));
  for (const row of rows) {
    if (!(row.error > 0)) {
      throw new FormatError(`${path}: nonpositive error ${row.error} at dt = ${row.dt}`);
    }
  }
  if (rows.length < 3) {
    throw new FormatError(`${path}: need at least 3 finite rows, got ${rows.length}`);
  }
  rows.sort((a, b) => a.dt - b.dt);
  const dts = rows.map((row) => row.dt);
  const errs = rows.map((row) => row.error);
  const ref = dts.map((dt) => errs[0]! * (dt / dts[0]!) ** 2);

  const r = new Raster(opts.width ?? 700, opts.height ?? 520);
  const lo = Math.min(...errs, ...ref);
  const hi = Math.max(...errs, ...ref);
  const frame = new Frame(r, {
    xlim: [dts[0]! / 1.3, dts[dts.length - 1]! * 1.3],
    ylim: [lo / 1.5, hi * 1.5],
    logx: true,
    logy: true,
    xlabel: "dt",
    ylabel: "error",
    title: "L2 error vs dt",
  });
  frame.drawFrame();
  frame.polyline(dts, ref, GREY, true);
  frame.polyline(dts, errs, PALETTE[0]!);
  frame.markers(dts, errs, PALETTE[0]!);
  frame.legend([
    { label: "error", color: PALETTE[0]! },
    { label: "slope 2", color: GREY },
  ]);
  writePng(out, r);
}

interface Panel {
  ni: number;
  nj: number;
  at(i: number, j: number): number;
  label: string;
}

function panelsFor(snap: Snapshot): Panel[] {
  const { n, data } = snap;
  if (snap.dim === 2) {
    const [n0, n1] = [n[0]!, n[1]!];
    return [{ ni: n0, nj: n1, at: (i, j) => data[i * n1 + j]!, label: "xy" }];
  }
  const [n0, n1, n2] = [n[0]!, n[1]!, n[2]!];
  const [m0, m1, m2] = [n0 >> 1, n1 >> 1, n2 >> 1];
  return [
    { ni: n0, nj: n1, at: (i, j) => data[(i * n1 + j) * n2 + m2]!, label: "xy mid" },
    { ni: n0, nj: n2, at: (i, k) => data[(i * n1 + m1) * n2 + k]!, label: "xz mid" },
    { ni: n1, nj: n2, at: (j, k) => data[(m0 * n1 + j) * n2 + k]!, label: "yz mid" },
  ];
}

export function plotField(path: string, out: string, opts: PlotOptions = {}): void {
  const snap = readSnapshot(path);
  if (snap.dim === 1) {
    throw new UsageError("1D snapshots are unsupported; need dim 2 or 3");
  }
  if (snap.dim !== 2 && snap.dim !== 3) {
    throw new FormatError(`unsupported dim ${snap.dim}`);
  }
  const panels = panelsFor(snap);
  let vmin = Infinity;
  let vmax = -Infinity;
  for (const v of snap.data) {
    vmin = Math.min(vmin, v);
    vmax = Math.max(vmax, v);
  }
  const span = vmax - vmin;

  const top = 34;
  const bottom = 26;
  const gap = 16;
  const cbar = 64;
  const left = 12;
  const width = opts.width ?? left + panels.length * (340 + gap) + cbar;
  const height = opts.height ?? top + 340 + bottom;
  const panelW = Math.floor((width - left - cbar - panels.length * gap) / panels.length);
  const panelH = height - top - bottom;
  if (panelW < 32 || panelH < 32) {
    throw new UsageError(`image ${width}x${height} is too small for ${panels.length} panels`);
  }
  const r = new Raster(width, height);

  panels.forEach((panel, k) => {
    const x0 = left + k * (panelW + gap);
    for (let py = 0; py < panelH; py++) {
      // row 0 of the panel shows the top of the box: j runs upward
      const j = Math.min(panel.nj - 1, Math.floor(((panelH - 1 - py) / panelH) * panel.nj));
      for (let px = 0; px < panelW; px++) {
        const i = Math.min(panel.ni - 1, Math.floor((px / panelW) * panel.ni));
        const u = span > 0 ? (panel.at(i, j) - vmin) / span : 0.5;
        r.set(x0 + px, top + py, colormap(u));
      }
    }
    r.line(x0, top, x0 + panelW, top, BLACK);
    r.line(x0, top + panelH, x0 + panelW, top + panelH, BLACK);
    r.line(x0, top, x0, top + panelH, BLACK);
    r.line(x0 + panelW, top, x0 + panelW, top + panelH, BLACK);
    r.text(x0 + (panelW - r.textWidth(panel.label)) / 2, top + panelH + 8, panel.label);
  });

  const bx = width - cbar + 10;
  for (let py = 0; py < panelH; py++) {
    const u = (panelH - 1 - py) / (panelH - 1);
    for (let px = 0; px < 16; px++) {
      r.set(bx + px, top + py, colormap(u));
    }
  }
  r.text(bx + 20 - r.textWidth(formatTick(vmax)) / 2, top - TEXT_H - 2, formatTick(vmax));
  r.text(bx + 20 - r.textWidth(formatTick(vmin)) / 2, top + panelH + 4, formatTick(vmin));

  const title = `${snap.field}  t=${formatTick(snap.t)}  ${snap.scheme}`.trim();
  r.text((width - r.textWidth(title)) / 2, 10, title);
  writePng(out, r);
}
