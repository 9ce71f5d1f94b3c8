/**
 * WSIG-v1 writer (and a reader used by the test suite).
 *
 * Layout: magic "WSIG", u32 LE version 1, u64 LE JSON header length, the
 * JSON header, then per record: u16 class index, f32 snr, u8 labeled
 * flag, and 2*L f32 samples (I plane then Q plane), all little-endian.
 */

import * as fs from "fs";

export interface WsigHeader {
  version: number;
  length: number;
  class_names: string[];
  record_count: number;
  snr_grid: number[];
  provenance: string;
}

export interface WsigRecord {
  classIdx: number;
  snrDb: number;
  labeled: boolean;
  iq: Float32Array; // 2*L values, I plane then Q plane
}

const MAGIC = Buffer.from("WSIG", "ascii");
const VERSION = 1;

export class WsigFormatError extends Error {}

export function recordSize(length: number): number {
  return 2 + 4 + 1 + 2 * length * 4;
}

export class WsigWriter {
  private fd: number;
  private written = 0;
  private recBuf: Buffer;

  constructor(path: string, private header: WsigHeader) {
    this.fd = fs.openSync(path, "w");
    const headerJson = Buffer.from(JSON.stringify(sortedHeader(header)), "utf-8");
    const prefix = Buffer.alloc(16);
    MAGIC.copy(prefix, 0);
    prefix.writeUInt32LE(VERSION, 4);
    prefix.writeBigUInt64LE(BigInt(headerJson.length), 8);
    fs.writeSync(this.fd, prefix);
    fs.writeSync(this.fd, headerJson);
    this.recBuf = Buffer.alloc(recordSize(header.length));
  }

  writeRecord(rec: WsigRecord): void {
    if (rec.iq.length !== 2 * this.header.length) {
      throw new WsigFormatError(
        `record has ${rec.iq.length} samples, header says ${2 * this.header.length}`);
    }
    const buf = this.recBuf;
    buf.writeUInt16LE(rec.classIdx, 0);
    buf.writeFloatLE(rec.snrDb, 2);
    buf.writeUInt8(rec.labeled ? 1 : 0, 6);
    for (let i = 0; i < rec.iq.length; i++) {
      buf.writeFloatLE(rec.iq[i], 7 + 4 * i);
    }
    fs.writeSync(this.fd, buf);
    this.written += 1;
  }

  close(): void {
    fs.closeSync(this.fd);
    if (this.written !== this.header.record_count) {
      throw new WsigFormatError(
        `header promised ${this.header.record_count} records, wrote ${this.written}`);
    }
  }
}

/** Mirror of the Python header serialization: sorted keys, compact JSON. */
function sortedHeader(header: WsigHeader): Record<string, unknown> {
  return {
    class_names: header.class_names,
    length: header.length,
    provenance: header.provenance,
    record_count: header.record_count,
    snr_grid: header.snr_grid,
    version: header.version,
  };
}

export function readWsig(path: string): { header: WsigHeader; records: WsigRecord[] } {
  const raw = fs.readFileSync(path);
  if (raw.length < 16) throw new WsigFormatError("file shorter than the fixed prefix");
  if (!raw.subarray(0, 4).equals(MAGIC)) {
    throw new WsigFormatError(`bad magic ${raw.subarray(0, 4).toString("latin1")}`);
  }
  const version = raw.readUInt32LE(4);
  if (version !== VERSION) throw new WsigFormatError(`unsupported version ${version}`);
  const headerLen = Number(raw.readBigUInt64LE(8));
  const header = JSON.parse(raw.subarray(16, 16 + headerLen).toString("utf-8")) as WsigHeader;
  const size = recordSize(header.length);
  const payload = raw.subarray(16 + headerLen);
  if (payload.length !== size * header.record_count) {
    throw new WsigFormatError(
      `payload holds ${payload.length} bytes, expected ${size * header.record_count}`);
  }
  const records: WsigRecord[] = [];
  for (let r = 0; r < header.record_count; r++) {
    const base = r * size;
    const iq = new Float32Array(2 * header.length);
    for (let i = 0; i < iq.length; i++) {
      iq[i] = payload.readFloatLE(base + 7 + 4 * i);
    }
    records.push({
      classIdx: payload.readUInt16LE(base),
      snrDb: payload.readFloatLE(base + 2),
      labeled: payload.readUInt8(base + 6) === 1,
      iq,
    });
  }
  return { header, records };
}
