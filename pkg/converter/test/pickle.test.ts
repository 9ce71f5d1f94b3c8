import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { indexArchive, loadArchive } from "../src/archive.js";
import { PyDict, PyTuple, expectNdArray, loads } from "../src/pickle.js";

const FIXTURES = path.join(__dirname, "fixtures");
const expected = JSON.parse(
  fs.readFileSync(path.join(FIXTURES, "expected.json"), "utf-8"));

const PICKLES = ["proto2.pkl", "proto4.pkl", "py2style.pkl"];

describe.each(PICKLES)("pickle reader on %s", (name) => {
  const buf = fs.readFileSync(path.join(FIXTURES, name));

  it("loads a dict keyed by (modulation, snr)", () => {
    const root = loads(buf);
    expect(root).toBeInstanceOf(PyDict);
    const dict = root as PyDict;
    expect(dict.entries.length).toBe(expected.cells.length);
    for (const [key] of dict.entries) {
      expect(key).toBeInstanceOf(PyTuple);
    }
  });

  it("reconstructs array shapes and dtype", () => {
    const index = loadArchive(buf);
    expect(index.frameLength).toBe(expected.frame_length);
    expect(index.total).toBe(expected.total);
    const counts = Object.fromEntries(
      index.cells.map((c) => [`${c.modulation}|${c.snr}`, c.count]));
    for (const cell of expected.cells) {
      expect(counts[`${cell.modulation}|${cell.snr}`]).toBe(cell.count);
    }
  });

  it("reproduces exact float values", () => {
    const index = loadArchive(buf);
    for (const sample of expected.samples) {
      const cell = index.cells.find(
        (c) => c.modulation === sample.modulation && c.snr === sample.snr)!;
      expect(cell).toBeDefined();
      const view = new Float32Array(
        cell.array.data.buffer.slice(
          cell.array.data.byteOffset,
          cell.array.data.byteOffset + 4 * sample.values.length));
      for (let i = 0; i < sample.values.length; i++) {
        expect(view[i]).toBeCloseTo(sample.values[i], 6);
      }
    }
  });
});

describe("pickle reader errors", () => {
  it("rejects truncated streams", () => {
    const buf = fs.readFileSync(path.join(FIXTURES, "proto2.pkl"));
    expect(() => loads(buf.subarray(0, buf.length - 40))).toThrow(/truncated|underflow|MARK/i);
  });

  it("rejects unknown globals", () => {
    // PROTO 2, GLOBAL os.system, NONE, TUPLE1, REDUCE -> must refuse
    const evil = Buffer.concat([
      Buffer.from([0x80, 2]),
      Buffer.from("cos\nsystem\n", "ascii"),
      Buffer.from([0x4e, 0x85, 0x52, 0x2e]),
    ]);
    expect(() => loads(evil)).toThrow(/unsupported global/);
  });

  it("rejects a non-dict root via indexArchive", () => {
    expect(() => loadArchive(Buffer.from([0x80, 2, 0x4e, 0x2e]))).toThrow(/not a dict/);
  });
});

describe("archive validation", () => {
  it("flags unknown modulations", () => {
    const dict = new PyDict();
    const buf = fs.readFileSync(path.join(FIXTURES, "proto2.pkl"));
    const good = loads(buf) as PyDict;
    const arr = expectNdArray(good.entries[0][1]);
    dict.set(new PyTuple(["NOT-A-MOD", 0]), arr);
    expect(() => indexArchive(dict)).toThrow(/unknown modulation/);
  });

  it("flags inconsistent frame lengths", () => {
    const buf = fs.readFileSync(path.join(FIXTURES, "proto2.pkl"));
    const good = loads(buf) as PyDict;
    const arr = expectNdArray(good.entries[0][1]);
    const dict = new PyDict();
    dict.set(new PyTuple(["BPSK", 0]), arr);
    dict.set(new PyTuple(["QPSK", 0]), {
      shape: [2, 2, arr.shape[2] * 2],
      dtype: "<f4",
      data: Buffer.alloc(2 * 2 * arr.shape[2] * 2 * 4),
    });
    expect(() => indexArchive(dict)).toThrow(/inconsistent frame length/);
  });
});
