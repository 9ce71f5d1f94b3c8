#!/usr/bin/env node
/**
 * convert --in <archive.pkl> --out <dataset.wsig>
 *         [--classes A,B,...] [--snr-min X] [--snr-max Y] [--summary path]
 *
 * Converts a RadioML 2016 pickle archive into a WSIG-v1 dataset file and
 * prints (or writes) a JSON summary with per-cell counts.
 */

import * as fs from "fs";

import { convertArchive } from "./convert.js";

function usage(): never {
  console.error(
    "usage: convert --in <archive.pkl> --out <dataset.wsig> " +
    "[--classes A,B,...] [--snr-min X] [--snr-max Y] [--summary path]");
  process.exit(2);
}

function parseArgs(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) usage();
    flags.set(key.slice(2), value);
  }
  return flags;
}

export function main(argv: string[]): number {
  const args = argv[0] === "convert" ? argv.slice(1) : argv;
  const flags = parseArgs(args);
  const inPath = flags.get("in");
  const outPath = flags.get("out");
  if (!inPath || !outPath) usage();
  const known = new Set(["in", "out", "classes", "snr-min", "snr-max", "summary"]);
  for (const key of flags.keys()) {
    if (!known.has(key)) {
      console.error(`unknown flag --${key}`);
      usage();
    }
  }

  try {
    const summary = convertArchive(inPath, outPath, {
      classes: flags.get("classes")?.split(",").map((s) => s.trim()).filter(Boolean),
      snrMin: flags.has("snr-min") ? Number(flags.get("snr-min")) : undefined,
      snrMax: flags.has("snr-max") ? Number(flags.get("snr-max")) : undefined,
    });
    const text = JSON.stringify(summary, null, 2);
    const summaryPath = flags.get("summary");
    if (summaryPath) fs.writeFileSync(summaryPath, text + "\n");
    else console.log(text);
    console.error(`wrote ${summary.total} records to ${outPath}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
