/**
 * Reading a loaded archive dict into typed records.
 *
 * Archives map (modulation, snr) to an N x 2 x L float32 array; row 0 of
 * each record is the in-phase plane, row 1 the quadrature plane.
 */

import { NdArray, PickleError, PyDict, PyTuple, PyValue, expectNdArray, keyToString, loads } from "./pickle.js";

export const CLASS_TABLE = [
  "8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK",
  "PAM4", "QAM16", "QAM64", "QPSK", "WBFM",
] as const;

export const ANALOG_CLASSES = new Set(["AM-DSB", "AM-SSB", "WBFM"]);

export interface ArchiveCell {
  modulation: string;
  snr: number;
  count: number;
  array: NdArray;
}

export interface ArchiveIndex {
  cells: ArchiveCell[];
  total: number;
  frameLength: number;
}

export class ArchiveError extends Error {}

function parseKey(key: PyValue): { modulation: string; snr: number } {
  if (!(key instanceof PyTuple) || key.items.length !== 2) {
    throw new ArchiveError("archive keys must be (modulation, snr) pairs");
  }
  const modulation = keyToString(key.items[0]);
  const snr = key.items[1];
  if (typeof snr !== "number") throw new ArchiveError(`non-numeric snr for ${modulation}`);
  return { modulation, snr };
}

export function indexArchive(dict: PyDict): ArchiveIndex {
  const cells: ArchiveCell[] = [];
  let frameLength = -1;
  for (const [key, value] of dict.entries) {
    const { modulation, snr } = parseKey(key);
    if (!(CLASS_TABLE as readonly string[]).includes(modulation)) {
      throw new ArchiveError(`unknown modulation name ${modulation}`);
    }
    const array = expectNdArray(value);
    if (array.shape.length !== 3 || array.shape[1] !== 2) {
      throw new ArchiveError(
        `cell (${modulation}, ${snr}) has shape [${array.shape}], expected N x 2 x L`);
    }
    if (array.dtype !== "<f4") {
      throw new ArchiveError(`cell (${modulation}, ${snr}) has dtype ${array.dtype}, expected <f4`);
    }
    const length = array.shape[2];
    if (frameLength === -1) frameLength = length;
    else if (frameLength !== length) {
      throw new ArchiveError(
        `inconsistent frame length: ${length} in (${modulation}, ${snr}), ${frameLength} elsewhere`);
    }
    const expectedBytes = array.shape[0] * 2 * length * 4;
    if (array.data.length !== expectedBytes) {
      throw new ArchiveError(
        `cell (${modulation}, ${snr}) holds ${array.data.length} bytes, expected ${expectedBytes}`);
    }
    if (array.shape[0] < 1) {
      throw new ArchiveError(`cell (${modulation}, ${snr}) is empty`);
    }
    cells.push({ modulation, snr, count: array.shape[0], array });
  }
  if (cells.length === 0) throw new ArchiveError("archive holds no cells");
  // deterministic order: class-table order, then ascending snr
  cells.sort((a, b) => {
    const ca = (CLASS_TABLE as readonly string[]).indexOf(a.modulation);
    const cb = (CLASS_TABLE as readonly string[]).indexOf(b.modulation);
    return ca !== cb ? ca - cb : a.snr - b.snr;
  });
  return {
    cells,
    total: cells.reduce((acc, c) => acc + c.count, 0),
    frameLength,
  };
}

export function loadArchive(buf: Buffer): ArchiveIndex {
  let root: PyValue;
  try {
    root = loads(buf);
  } catch (err) {
    if (err instanceof PickleError) {
      throw new ArchiveError(`malformed archive: ${err.message}`);
    }
    throw err;
  }
  if (!(root instanceof PyDict)) throw new ArchiveError("archive root is not a dict");
  return indexArchive(root);
}

/** One frame's float32 values (2 x L, I plane then Q plane), as a view. */
export function frameAt(cell: ArchiveCell, row: number, frameLength: number): Float32Array {
  const bytesPerFrame = 2 * frameLength * 4;
  const offset = cell.array.data.byteOffset + row * bytesPerFrame;
  return new Float32Array(
    cell.array.data.buffer.slice(offset, offset + bytesPerFrame));
}
