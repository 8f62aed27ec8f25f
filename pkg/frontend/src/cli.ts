/**
 * Command line: plot-energy, plot-dt, plot-convergence, plot-field, each
 * reading the solver's documented file formats and writing one PNG.
 *
 * Exit codes: 0 success, 2 usage or format error, 3 I/O error.
 */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { FormatError, UsageError } from "./errors.js";
import { ENERGY_COLUMNS, plotConvergence, plotDt, plotEnergy, plotField, PlotOptions } from "./plots.js";

const USAGE = `usage:
  plot-energy <series.csv...> --out <png> [--column <name>]... [--logx]
  plot-dt <series.csv...> --out <png>
  plot-convergence <convergence.csv> --out <png>
  plot-field <snapshot(.f64|.json)> --out <png>
common flags: --width <px> --height <px>
energy columns: ${ENERGY_COLUMNS.join(", ")}`;

interface Parsed {
  positionals: string[];
  out: string;
  opts: PlotOptions;
}

function parseSize(value: string | undefined, name: string): number | undefined {
  if (value === undefined) return undefined;
  const v = Number(value);
  if (!Number.isInteger(v) || v < 96 || v > 8192) {
    throw new UsageError(`--${name} must be an integer in [96, 8192], got ${value}`);
  }
  return v;
}

function parseCommand(args: string[], withColumns: boolean): Parsed {
  let parsed;
  try {
    parsed = parseArgs({
      args,
      allowPositionals: true,
      options: {
        out: { type: "string" },
        width: { type: "string" },
        height: { type: "string" },
        ...(withColumns
          ? { column: { type: "string", multiple: true }, logx: { type: "boolean" } }
          : {}),
      },
    });
  } catch (e) {
    throw new UsageError((e as Error).message);
  }
  const { values, positionals } = parsed;
  if (!values.out) {
    throw new UsageError("--out <png> is required");
  }
  const opts: PlotOptions = {
    width: parseSize(values.width, "width"),
    height: parseSize(values.height, "height"),
  };
  if (withColumns) {
    const cols = (values as { column?: string[] }).column;
    if (cols !== undefined) {
      opts.columns = cols.flatMap((c) => c.split(",")).filter((c) => c !== "");
    }
    opts.logx = Boolean((values as { logx?: boolean }).logx);
  }
  return { positionals, out: values.out, opts };
}

function requireOne(positionals: string[], what: string): string {
  if (positionals.length !== 1) {
    throw new UsageError(`expected exactly one ${what}, got ${positionals.length}`);
  }
  return positionals[0]!;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "plot-energy": {
        const { positionals, out, opts } = parseCommand(rest, true);
        if (positionals.length === 0) {
          throw new UsageError("plot-energy needs at least one series.csv");
        }
        plotEnergy(positionals, out, opts);
        break;
      }
      case "plot-dt": {
        const { positionals, out, opts } = parseCommand(rest, false);
        if (positionals.length === 0) {
          throw new UsageError("plot-dt needs at least one series.csv");
        }
        plotDt(positionals, out, opts);
        break;
      }
      case "plot-convergence": {
        const { positionals, out, opts } = parseCommand(rest, false);
        plotConvergence(requireOne(positionals, "convergence.csv"), out, opts);
        break;
      }
      case "plot-field": {
        const { positionals, out, opts } = parseCommand(rest, false);
        plotField(requireOne(positionals, "snapshot"), out, opts);
        break;
      }
      case undefined:
      case "--help":
      case "-h":
        console.error(USAGE);
        return command === undefined ? 2 : 0;
      default:
        throw new UsageError(`unknown command ${JSON.stringify(command)}\n${USAGE}`);
    }
  } catch (e) {
    if (e instanceof UsageError) {
      console.error(`usage error: ${e.message}`);
      return 2;
    }
    if (e instanceof FormatError) {
      console.error(`format error: ${e.message}`);
      return 2;
    }
    if (e instanceof Error && "code" in e) {
      console.error(`io error: ${e.message}`);
      return 3;
    }
    throw e;
  }
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}
