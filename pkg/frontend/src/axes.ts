/** Tick selection, tick formatting, and a framed x/y plot area. */

import { BLACK, GREY, Raster, Rgb, TEXT_H } from "./raster.js";

export function formatTick(v: number): string {
  if (v === 0) return "0";
  if (!Number.isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(1).replace(/\.0e/, "e").replace("e+", "e");
  }
  return String(parseFloat(v.toPrecision(6)));
}

export function linearTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) return [lo];
  const step0 = (hi - lo) / target;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  let step = 10 * mag;
  for (const m of [1, 2, 5]) {
    if (step0 <= m * mag) {
      step = m * mag;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
    out.push(parseFloat(v.toPrecision(12)));
  }
  return out;
}

/** Decade ticks; 2x and 5x mantissas fill in when the range is narrow. */
export function logTicks(lo: number, hi: number): number[] {
  const d0 = Math.ceil(Math.log10(lo) - 1e-9);
  const d1 = Math.floor(Math.log10(hi) + 1e-9);
  const out: number[] = [];
  for (let d = d0; d <= d1; d++) {
    out.push(Math.pow(10, d));
  }
  if (out.length < 3) {
    for (let d = d0 - 1; d <= d1; d++) {
      for (const m of [2, 5]) {
        const v = m * Math.pow(10, d);
        if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) out.push(v);
      }
    }
    out.sort((a, b) => a - b);
  }
  return out.length >= 2 ? out : [lo, hi];
}

export interface FrameOpts {
  xlim: readonly [number, number];
  ylim: readonly [number, number];
  logx?: boolean;
  logy?: boolean;
  title?: string;
  xlabel?: string;
  ylabel?: string;
}

export const MARGIN = { left: 78, right: 16, top: 30, bottom: 42 };

/** One plot area with axes; maps data coordinates to raster pixels. */
export class Frame {
  private readonly tx: (v: number) => number;
  private readonly ty: (v: number) => number;
  private readonly x0: number;
  private readonly x1: number;
  private readonly y0: number;
  private readonly y1: number;

  constructor(
    readonly r: Raster,
    readonly opts: FrameOpts,
  ) {
    const fx = opts.logx ? Math.log10 : (v: number) => v;
    const fy = opts.logy ? Math.log10 : (v: number) => v;
    let [xa, xb] = [fx(opts.xlim[0]), fx(opts.xlim[1])];
    let [ya, yb] = [fy(opts.ylim[0]), fy(opts.ylim[1])];
    if (!(xb > xa)) [xa, xb] = [xa - 0.5, xa + 0.5];
    if (!(yb > ya)) [ya, yb] = [ya - 0.5, ya + 0.5];
    this.x0 = MARGIN.left;
    this.x1 = r.width - MARGIN.right;
    this.y0 = MARGIN.top;
    this.y1 = r.height - MARGIN.bottom;
    const sx = (this.x1 - this.x0) / (xb - xa);
    const sy = (this.y1 - this.y0) / (yb - ya);
    this.tx = (v) => this.x0 + (fx(v) - xa) * sx;
    this.ty = (v) => this.y1 - (fy(v) - ya) * sy;
  }

  px(x: number): number {
    return this.tx(x);
  }

  py(y: number): number {
    return this.ty(y);
  }

  drawFrame(): void {
    const { r, opts } = this;
    r.line(this.x0, this.y0, this.x1, this.y0, BLACK);
    r.line(this.x0, this.y1, this.x1, this.y1, BLACK);
    r.line(this.x0, this.y0, this.x0, this.y1, BLACK);
    r.line(this.x1, this.y0, this.x1, this.y1, BLACK);

    const xticks = opts.logx
      ? logTicks(opts.xlim[0], opts.xlim[1])
      : linearTicks(opts.xlim[0], opts.xlim[1], 6);
    for (const v of xticks) {
      const x = Math.round(this.px(v));
      if (x < this.x0 - 1 || x > this.x1 + 1) continue;
      r.line(x, this.y1, x, this.y1 + 4, BLACK);
      r.line(x, this.y0, x, this.y1, GREY);
      const label = formatTick(v);
      r.text(x - r.textWidth(label) / 2, this.y1 + 7, label);
    }
    const yticks = opts.logy
      ? logTicks(opts.ylim[0], opts.ylim[1])
      : linearTicks(opts.ylim[0], opts.ylim[1], 5);
    for (const v of yticks) {
      const y = Math.round(this.py(v));
      if (y < this.y0 - 1 || y > this.y1 + 1) continue;
      r.line(this.x0 - 4, y, this.x0, y, BLACK);
      r.line(this.x0, y, this.x1, y, GREY);
      const label = formatTick(v);
      r.text(this.x0 - 6 - r.textWidth(label), y - TEXT_H / 2, label);
    }
    // grid lines were painted over the border; restore it
    r.line(this.x0, this.y0, this.x1, this.y0, BLACK);
    r.line(this.x0, this.y1, this.x1, this.y1, BLACK);
    r.line(this.x0, this.y0, this.x0, this.y1, BLACK);
    r.line(this.x1, this.y0, this.x1, this.y1, BLACK);

    if (opts.title) {
      r.text((r.width - r.textWidth(opts.title)) / 2, 8, opts.title);
    }
    if (opts.xlabel) {
      r.text((this.x0 + this.x1 - r.textWidth(opts.xlabel)) / 2, r.height - TEXT_H - 6, opts.xlabel);
    }
    if (opts.ylabel) {
      r.text(4, 8, opts.ylabel);
    }
  }

  polyline(xs: ArrayLike<number>, ys: ArrayLike<number>, color: Rgb, dashed = false): void {
    let started = false;
    let lx = 0;
    let ly = 0;
    for (let i = 0; i < xs.length; i++) {
      const x = this.px(xs[i]!);
      const y = this.py(ys[i]!);
      if (!Number.isFinite(x) || !Number.isFinite(y)) {
        started = false;
        continue;
      }
      if (started && (!dashed || i % 2 === 1)) {
        this.r.line(lx, ly, x, y, color);
      }
      lx = x;
      ly = y;
      started = true;
    }
  }

  markers(xs: ArrayLike<number>, ys: ArrayLike<number>, color: Rgb): void {
    for (let i = 0; i < xs.length; i++) {
      const x = this.px(xs[i]!);
      const y = this.py(ys[i]!);
      if (Number.isFinite(x) && Number.isFinite(y)) {
        this.r.marker(x, y, color);
      }
    }
  }

  legend(entries: readonly { label: string; color: Rgb }[]): void {
    if (!entries.length) return;
    const widest = Math.max(...entries.map((e) => this.r.textWidth(e.label)));
    const pad = 5;
    const rowH = TEXT_H + 4;
    const w = widest + 26 + 2 * pad;
    const h = entries.length * rowH + 2 * pad - 4;
    const x = this.x1 - w - 6;
    const y = this.y0 + 6;
    this.r.fillRect(x, y, w, h, [255, 255, 255]);
    this.r.line(x, y, x + w, y, BLACK);
    this.r.line(x, y + h, x + w, y + h, BLACK);
    this.r.line(x, y, x, y + h, BLACK);
    this.r.line(x + w, y, x + w, y + h, BLACK);
    entries.forEach((e, i) => {
      const ry = y + pad + i * rowH;
      this.r.line(x + pad, ry + TEXT_H / 2, x + pad + 18, ry + TEXT_H / 2, e.color);
      this.r.text(x + pad + 24, ry, e.label);
    });
  }
}
