/**
 * Archive-to-WSIG conversion: filtering, per-record power normalization,
 * and the per-cell summary.
 */

import * as fs from "fs";

import { ANALOG_CLASSES, ArchiveError, ArchiveIndex, CLASS_TABLE, frameAt, loadArchive } from "./archive.js";
import { WsigHeader, WsigWriter } from "./wsig.js";

export interface ConvertOptions {
  classes?: string[];
  snrMin?: number;
  snrMax?: number;
}

export interface CellSummary {
  modulation: string;
  snr: number;
  count: number;
  analog: boolean;
}

export interface ConvertSummary {
  total: number;
  frame_length: number;
  class_names: string[];
  cells: CellSummary[];
}

/**
 * Scale one 2xL frame to unit average power. Matches the generator's
 * convention: mean over time of (I^2 + Q^2) equals 1, computed in
 * float64, stored as float32. All-zero frames pass through unchanged.
 */
export function normalizeFrame(iq: Float32Array, length: number): Float32Array {
  let power = 0;
  for (let l = 0; l < length; l++) {
    power += iq[l] * iq[l] + iq[length + l] * iq[length + l];
  }
  power /= length;
  if (power <= 0) return iq;
  const scale = 1 / Math.sqrt(power);
  const out = new Float32Array(iq.length);
  for (let i = 0; i < iq.length; i++) out[i] = Math.fround(iq[i] * scale);
  return out;
}

export function convertArchive(
  archivePath: string,
  outPath: string,
  options: ConvertOptions = {},
): ConvertSummary {
  const index = loadArchive(fs.readFileSync(archivePath));
  if (options.classes) {
    for (const name of options.classes) {
      if (!(CLASS_TABLE as readonly string[]).includes(name)) {
        throw new ArchiveError(`unknown modulation name ${name}`);
      }
    }
  }
  const wanted = (cell: { modulation: string; snr: number }) =>
    (!options.classes || options.classes.includes(cell.modulation)) &&
    (options.snrMin === undefined || cell.snr >= options.snrMin) &&
    (options.snrMax === undefined || cell.snr <= options.snrMax);

  const cells = index.cells.filter(wanted);
  if (cells.length === 0) {
    throw new ArchiveError("no archive cells match the requested classes and snr range");
  }
  if (options.classes) {
    const present = new Set(cells.map((c) => c.modulation));
    const missing = options.classes.filter((c) => !present.has(c));
    if (missing.length > 0) {
      throw new ArchiveError(`requested classes missing from the archive: ${missing.join(", ")}`);
    }
  }

  // class indices follow the canonical table order, restricted to what is kept
  const classNames = (CLASS_TABLE as readonly string[]).filter((name) =>
    cells.some((c) => c.modulation === name));
  const snrGrid = [...new Set(cells.map((c) => c.snr))].sort((a, b) => a - b);
  const total = cells.reduce((acc, c) => acc + c.count, 0);

  const header: WsigHeader = {
    version: 1,
    length: index.frameLength,
    class_names: classNames,
    record_count: total,
    snr_grid: snrGrid,
    provenance: `radioml-convert ${archivePath.split("/").pop() ?? archivePath}`,
  };
  const writer = new WsigWriter(outPath, header);
  const summaryCells: CellSummary[] = [];
  for (const cell of cells) {
    const classIdx = classNames.indexOf(cell.modulation);
    for (let row = 0; row < cell.count; row++) {
      const frame = frameAt(cell, row, index.frameLength);
      writer.writeRecord({
        classIdx,
        snrDb: cell.snr,
        labeled: true,
        iq: normalizeFrame(frame, index.frameLength),
      });
    }
    summaryCells.push({
      modulation: cell.modulation,
      snr: cell.snr,
      count: cell.count,
      analog: ANALOG_CLASSES.has(cell.modulation),
    });
  }
  writer.close();
  return {
    total,
    frame_length: index.frameLength,
    class_names: classNames,
    cells: summaryCells,
  };
}
