/**
 * Minimal pickle reader for RadioML-style archives.
 *
 * The archives are Python dicts keyed by (modulation, snr) tuples with
 * float32 ndarray values. This loader executes just enough of the pickle
 * VM to rebuild that structure from pickles written by Python 2 (protocol
 * 2 with raw byte strings) or Python 3 (protocols 2-5, where protocol 2
 * routes array bytes through a latin-1 encode step).
 */

export class PickleError extends Error {}

export interface NdArray {
  shape: number[];
  dtype: string; // numpy descr, e.g. "<f4"
  data: Buffer;
}

export type PyValue =
  | null
  | boolean
  | number
  | string
  | Buffer
  | PyValue[]
  | PyTuple
  | PyDict
  | GlobalRef
  | DTypeObj
  | NdArrayStub
  | NdArray;

export class PyTuple {
  constructor(public items: PyValue[]) {}
}

export class PyDict {
  entries: Array<[PyValue, PyValue]> = [];
  set(key: PyValue, value: PyValue): void {
    this.entries.push([key, value]);
  }
}

class GlobalRef {
  constructor(public module: string, public name: string) {}
}

class DTypeObj {
  byteorder = "=";
  constructor(public descr: string) {}
}

class NdArrayStub {}

const MARK_SENTINEL = Symbol("mark");

function isNdArray(v: PyValue): v is NdArray {
  return typeof v === "object" && v !== null && "dtype" in v && "shape" in v && "data" in v;
}

/** Python 2 pickles carry text as byte strings; accept both forms. */
function asText(v: PyValue): string | null {
  if (typeof v === "string") return v;
  if (Buffer.isBuffer(v)) return v.toString("latin1");
  return null;
}

/** Apply a referenced callable to REDUCE arguments. */
function callGlobal(ref: GlobalRef, args: PyValue[]): PyValue {
  const qual = `${ref.module}.${ref.name}`;
  switch (qual) {
    case "numpy.core.multiarray._reconstruct":
    case "numpy._core.multiarray._reconstruct":
      return new NdArrayStub();
    case "numpy.dtype": {
      const descr = asText(args[0]);
      if (descr === null) {
        throw new PickleError(`numpy.dtype called with non-string descr`);
      }
      return new DTypeObj(descr);
    }
    case "_codecs.encode": {
      const [text, encodingVal] = args;
      const encoding = asText(encodingVal);
      if (typeof text !== "string") {
        throw new PickleError("_codecs.encode expects a string");
      }
      if (encoding !== "latin1" && encoding !== "latin-1" && encoding !== "latin_1") {
        throw new PickleError(`unsupported encoding ${String(encoding)}`);
      }
      return Buffer.from(text, "latin1");
    }
    case "collections.OrderedDict":
      return new PyDict();
    default:
      throw new PickleError(`unsupported global ${qual}`);
  }
}

/** BUILD: apply __setstate__-style state to the object on the stack. */
function applyState(obj: PyValue, state: PyValue): PyValue {
  if (obj instanceof DTypeObj) {
    if (state instanceof PyTuple && state.items.length >= 2) {
      const order = asText(state.items[1]);
      if (order !== null) obj.byteorder = order;
    }
    return obj;
  }
  if (obj instanceof NdArrayStub) {
    if (!(state instanceof PyTuple) || state.items.length < 5) {
      throw new PickleError("unexpected ndarray state");
    }
    const [, shapeVal, dtypeVal, fortran, dataVal] = state.items;
    if (!(shapeVal instanceof PyTuple)) throw new PickleError("ndarray shape is not a tuple");
    const shape = shapeVal.items.map((v) => {
      if (typeof v !== "number") throw new PickleError("non-numeric shape entry");
      return v;
    });
    if (!(dtypeVal instanceof DTypeObj)) throw new PickleError("ndarray dtype missing");
    if (fortran === true) throw new PickleError("fortran-ordered arrays are not supported");
    if (!Buffer.isBuffer(dataVal)) throw new PickleError("ndarray data is not raw bytes");
    const order = dtypeVal.byteorder === "=" ? "<" : dtypeVal.byteorder;
    return { shape, dtype: order + dtypeVal.descr, data: dataVal };
  }
  throw new PickleError("BUILD on an unsupported object");
}

export function loads(buf: Buffer): PyValue {
  let pos = 0;
  const stack: Array<PyValue | typeof MARK_SENTINEL> = [];
  const memo = new Map<number, PyValue>();

  const need = (n: number) => {
    if (pos + n > buf.length) throw new PickleError("truncated pickle stream");
  };
  const u1 = () => { need(1); return buf.readUInt8(pos++); };
  const u2 = () => { need(2); const v = buf.readUInt16LE(pos); pos += 2; return v; };
  const i4 = () => { need(4); const v = buf.readInt32LE(pos); pos += 4; return v; };
  const u4 = () => { need(4); const v = buf.readUInt32LE(pos); pos += 4; return v; };
  const u8 = () => {
    need(8);
    const v = buf.readBigUInt64LE(pos);
    pos += 8;
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) throw new PickleError("length exceeds safe range");
    return Number(v);
  };
  const bytes = (n: number) => { need(n); const v = buf.subarray(pos, pos + n); pos += n; return Buffer.from(v); };
  const line = () => {
    const nl = buf.indexOf(0x0a, pos);
    if (nl < 0) throw new PickleError("unterminated text line");
    const v = buf.toString("ascii", pos, nl);
    pos = nl + 1;
    return v;
  };
  const pop = (): PyValue => {
    const v = stack.pop();
    if (v === undefined || v === MARK_SENTINEL) throw new PickleError("stack underflow");
    return v;
  };
  const popMark = (): PyValue[] => {
    const items: PyValue[] = [];
    for (;;) {
      const v = stack.pop();
      if (v === undefined) throw new PickleError("no MARK on stack");
      if (v === MARK_SENTINEL) break;
      items.push(v);
    }
    return items.reverse();
  };

  for (;;) {
    const op = u1();
    switch (op) {
      case 0x80: u1(); break;                       // PROTO
      case 0x95: u8(); break;                       // FRAME (length hint only)
      case 0x7d: stack.push(new PyDict()); break;   // EMPTY_DICT  '}'
      case 0x5d: stack.push([]); break;             // EMPTY_LIST  ']'
      case 0x29: stack.push(new PyTuple([])); break; // EMPTY_TUPLE ')'
      case 0x4e: stack.push(null); break;           // NONE
      case 0x88: stack.push(true); break;           // NEWTRUE
      case 0x89: stack.push(false); break;          // NEWFALSE
      case 0x28: stack.push(MARK_SENTINEL); break;  // MARK '('

      case 0x71: memo.set(u1(), stack[stack.length - 1] as PyValue); break;  // BINPUT
      case 0x72: memo.set(u4(), stack[stack.length - 1] as PyValue); break;  // LONG_BINPUT
      case 0x94: memo.set(memo.size, stack[stack.length - 1] as PyValue); break; // MEMOIZE
      case 0x68: {                                   // BINGET 'h'
        const k = u1();
        if (!memo.has(k)) throw new PickleError(`memo miss ${k}`);
        stack.push(memo.get(k)!);
        break;
      }
      case 0x6a: {                                   // LONG_BINGET 'j'
        const k = u4();
        if (!memo.has(k)) throw new PickleError(`memo miss ${k}`);
        stack.push(memo.get(k)!);
        break;
      }

      case 0x4a: stack.push(i4()); break;            // BININT 'J'
      case 0x4b: stack.push(u1()); break;            // BININT1 'K'
      case 0x4d: stack.push(u2()); break;            // BININT2 'M'
      case 0x8a: {                                   // LONG1
        const n = u1();
        const raw = bytes(n);
        let v = 0n;
        for (let i = n - 1; i >= 0; i--) v = (v << 8n) | BigInt(raw[i]);
        if (n > 0 && raw[n - 1] & 0x80) v -= 1n << BigInt(8 * n);
        if (v > BigInt(Number.MAX_SAFE_INTEGER) || v < BigInt(Number.MIN_SAFE_INTEGER)) {
          throw new PickleError("integer exceeds safe range");
        }
        stack.push(Number(v));
        break;
      }
      case 0x47: {                                   // BINFLOAT 'G' (big-endian)
        need(8);
        stack.push(buf.readDoubleBE(pos));
        pos += 8;
        break;
      }

      case 0x58: stack.push(bytes(u4()).toString("utf-8")); break;  // BINUNICODE 'X'
      case 0x8c: stack.push(bytes(u1()).toString("utf-8")); break;  // SHORT_BINUNICODE
      case 0x8d: stack.push(bytes(u8()).toString("utf-8")); break;  // BINUNICODE8
      case 0x55: stack.push(bytes(u1())); break;                    // SHORT_BINSTRING 'U'
      case 0x54: stack.push(bytes(u4())); break;                    // BINSTRING 'T'
      case 0x43: stack.push(bytes(u1())); break;                    // SHORT_BINBYTES 'C'
      case 0x42: stack.push(bytes(u4())); break;                    // BINBYTES 'B'
      case 0x8e: stack.push(bytes(u8())); break;                    // BINBYTES8

      case 0x85: stack.push(new PyTuple([pop()])); break;           // TUPLE1
      case 0x86: {                                                  // TUPLE2
        const b = pop(); const a = pop();
        stack.push(new PyTuple([a, b]));
        break;
      }
      case 0x87: {                                                  // TUPLE3
        const c = pop(); const b = pop(); const a = pop();
        stack.push(new PyTuple([a, b, c]));
        break;
      }
      case 0x74: stack.push(new PyTuple(popMark())); break;         // TUPLE 't'

      case 0x61: {                                                  // APPEND 'a'
        const v = pop();
        const list = stack[stack.length - 1];
        if (!Array.isArray(list)) throw new PickleError("APPEND to non-list");
        list.push(v);
        break;
      }
      case 0x65: {                                                  // APPENDS 'e'
        const items = popMark();
        const list = stack[stack.length - 1];
        if (!Array.isArray(list)) throw new PickleError("APPENDS to non-list");
        list.push(...items);
        break;
      }
      case 0x73: {                                                  // SETITEM 's'
        const v = pop(); const k = pop();
        const dict = stack[stack.length - 1];
        if (!(dict instanceof PyDict)) throw new PickleError("SETITEM to non-dict");
        dict.set(k, v);
        break;
      }
      case 0x75: {                                                  // SETITEMS 'u'
        const items = popMark();
        const dict = stack[stack.length - 1];
        if (!(dict instanceof PyDict)) throw new PickleError("SETITEMS to non-dict");
        for (let i = 0; i + 1 < items.length; i += 2) dict.set(items[i], items[i + 1]);
        break;
      }

      case 0x63: {                                                  // GLOBAL 'c'
        const module = line();
        const name = line();
        stack.push(new GlobalRef(module, name));
        break;
      }
      case 0x93: {                                                  // STACK_GLOBAL
        const name = pop(); const module = pop();
        if (typeof module !== "string" || typeof name !== "string") {
          throw new PickleError("STACK_GLOBAL expects two strings");
        }
        stack.push(new GlobalRef(module, name));
        break;
      }
      case 0x52: {                                                  // REDUCE 'R'
        const argsVal = pop();
        const fn = pop();
        if (!(fn instanceof GlobalRef)) {
          // calling the result of _reconstruct etc. never happens here
          throw new PickleError("REDUCE of a non-global callable");
        }
        const args = argsVal instanceof PyTuple ? argsVal.items : [argsVal];
        stack.push(callGlobal(fn, args));
        break;
      }
      case 0x81: {                                                  // NEWOBJ: cls, args
        pop();                                                      // args
        const cls = pop();
        if (cls instanceof GlobalRef && cls.name === "ndarray") {
          stack.push(new NdArrayStub());
        } else {
          throw new PickleError("NEWOBJ of an unsupported class");
        }
        break;
      }
      case 0x62: {                                                  // BUILD 'b'
        const state = pop();
        const obj = pop();
        stack.push(applyState(obj, state));
        break;
      }

      case 0x2e: {                                                  // STOP '.'
        const result = pop();
        return result;
      }
      default:
        throw new PickleError(`unsupported pickle opcode 0x${op.toString(16)} at ${pos - 1}`);
    }
  }
}

/** Normalize mixed key representations: bytes become latin-1 strings. */
export function keyToString(v: PyValue): string {
  if (typeof v === "string") return v;
  if (Buffer.isBuffer(v)) return v.toString("latin1");
  throw new PickleError("dictionary key is not string-like");
}

export function expectDict(v: PyValue): PyDict {
  if (!(v instanceof PyDict)) throw new PickleError("archive root is not a dict");
  return v;
}

export function expectNdArray(v: PyValue): NdArray {
  if (!isNdArray(v)) throw new PickleError("archive value is not an ndarray");
  return v;
}
