export { FormatError, UsageError } from "./errors.js";
export { readConvergenceCsv, readSeriesCsv, SERIES_COLUMNS } from "./csv.js";
export type { ConvergenceRow, SeriesColumn, SeriesFrame } from "./csv.js";
export { readSnapshot, snapshotPaths } from "./snapshot.js";
export type { Snapshot } from "./snapshot.js";
export { encodePng } from "./png.js";
export { colormap, PALETTE, Raster } from "./raster.js";
export { ENERGY_COLUMNS, plotConvergence, plotDt, plotEnergy, plotField } from "./plots.js";
export type { PlotOptions } from "./plots.js";
export { main } from "./cli.js";
