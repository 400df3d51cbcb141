/**
 * Minimal .npz codec: enough of the zip and npy formats to read MedMNIST
 * style archives (uint8 image stacks plus label vectors) and to write
 * compatible fixtures for tests. Reading follows the central directory
 * and handles both stored and deflated entries; writing emits stored
 * entries with fixed timestamps so output bytes are deterministic.
 */

import { readFileSync, writeFileSync } from 'node:fs'
import { crc32, inflateRawSync } from 'node:zlib'

export class NpzFormatError extends Error {}

export type NpyData =
  | Uint8Array
  | Int8Array
  | Uint16Array
  | Int16Array
  | Uint32Array
  | Int32Array
  | BigUint64Array
  | BigInt64Array
  | Float32Array
  | Float64Array

export interface NpyArray {
  shape: number[]
  /** numpy descr string, e.g. "|u1" or "<f4" */
  dtype: string
  data: NpyData
}

interface DtypeInfo {
  bytes: number
  make: (buf: ArrayBuffer) => NpyData
}

const DTYPES: Record<string, DtypeInfo> = {
  '|u1': { bytes: 1, make: b => new Uint8Array(b) },
  '|i1': { bytes: 1, make: b => new Int8Array(b) },
  '<u2': { bytes: 2, make: b => new Uint16Array(b) },
  '<i2': { bytes: 2, make: b => new Int16Array(b) },
  '<u4': { bytes: 4, make: b => new Uint32Array(b) },
  '<i4': { bytes: 4, make: b => new Int32Array(b) },
  '<u8': { bytes: 8, make: b => new BigUint64Array(b) },
  '<i8': { bytes: 8, make: b => new BigInt64Array(b) },
  '<f4': { bytes: 4, make: b => new Float32Array(b) },
  '<f8': { bytes: 8, make: b => new Float64Array(b) },
}

const NPY_MAGIC = Buffer.from('\x93NUMPY', 'latin1')

export function descrFor(data: NpyData): string {
  if (data instanceof Uint8Array) return '|u1'
  if (data instanceof Int8Array) return '|i1'
  if (data instanceof Uint16Array) return '<u2'
  if (data instanceof Int16Array) return '<i2'
  if (data instanceof Uint32Array) return '<u4'
  if (data instanceof Int32Array) return '<i4'
  if (data instanceof BigUint64Array) return '<u8'
  if (data instanceof BigInt64Array) return '<i8'
  if (data instanceof Float32Array) return '<f4'
  if (data instanceof Float64Array) return '<f8'
  throw new NpzFormatError('unsupported typed array')
}

export function parseNpy(buf: Buffer): NpyArray {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(NPY_MAGIC)) {
    throw new NpzFormatError('not an npy array (bad magic)')
  }
  const major = buf.readUInt8(6)
  let headerLen: number
  let dataStart: number
  if (major === 1) {
    headerLen = buf.readUInt16LE(8)
    dataStart = 10 + headerLen
  } else if (major === 2 || major === 3) {
    headerLen = buf.readUInt32LE(8)
    dataStart = 12 + headerLen
  } else {
    throw new NpzFormatError(`unsupported npy version ${major}`)
  }
  const header = buf.toString('latin1', dataStart - headerLen, dataStart)

  const descrMatch = header.match(/'descr'\s*:\s*'([^']+)'/)
  const orderMatch = header.match(/'fortran_order'\s*:\s*(True|False)/)
  const shapeMatch = header.match(/'shape'\s*:\s*\(([^)]*)\)/)
  if (!descrMatch || !orderMatch || !shapeMatch) {
    throw new NpzFormatError(`unparseable npy header: ${header.trim()}`)
  }
  if (orderMatch[1] === 'True') {
    throw new NpzFormatError('fortran-ordered arrays are not supported')
  }
  const descr = descrMatch[1]!
  const info = DTYPES[descr]
  if (!info) throw new NpzFormatError(`unsupported dtype ${descr}`)

  const shape = shapeMatch[1]!
    .split(',')
    .map(s => s.trim())
    .filter(s => s.length > 0)
    .map(s => {
      const n = Number(s)
      if (!Number.isInteger(n) || n < 0) {
        throw new NpzFormatError(`bad shape entry ${s}`)
      }
      return n
    })
  const count = shape.reduce((a, b) => a * b, 1)
  const byteLen = count * info.bytes
  if (buf.length - dataStart !== byteLen) {
    throw new NpzFormatError(
      `npy payload holds ${buf.length - dataStart} bytes, expected ${byteLen}`,
    )
  }
  // Copy into a fresh, aligned buffer; the source slice may sit at an
  // odd offset inside the zip.
  const aligned = new ArrayBuffer(byteLen)
  new Uint8Array(aligned).set(buf.subarray(dataStart, dataStart + byteLen))
  return { shape, dtype: descr, data: info.make(aligned) }
}

export function encodeNpy(arr: NpyArray): Buffer {
  const info = DTYPES[arr.dtype]
  if (!info) throw new NpzFormatError(`unsupported dtype ${arr.dtype}`)
  const count = arr.shape.reduce((a, b) => a * b, 1)
  if (arr.data.length !== count) {
    throw new NpzFormatError(
      `data holds ${arr.data.length} items, shape wants ${count}`,
    )
  }
  const shapeStr =
    arr.shape.length === 1
      ? `(${arr.shape[0]},)`
      : `(${arr.shape.join(', ')})`
  let dict = `{'descr': '${arr.dtype}', 'fortran_order': False, 'shape': ${shapeStr}, }`
  // numpy pads the header with spaces so the data starts 64-byte aligned.
  const unpadded = 10 + dict.length + 1
  dict = dict + ' '.repeat((64 - (unpadded % 64)) % 64) + '\n'

  const head = Buffer.alloc(10)
  NPY_MAGIC.copy(head, 0)
  head.writeUInt8(1, 6)
  head.writeUInt8(0, 7)
  head.writeUInt16LE(dict.length, 8)
  const body = Buffer.from(
    arr.data.buffer,
    arr.data.byteOffset,
    arr.data.byteLength,
  )
  return Buffer.concat([head, Buffer.from(dict, 'latin1'), body])
}

const SIG_LOCAL = 0x04034b50
const SIG_CENTRAL = 0x02014b50
const SIG_EOCD = 0x06054b50

function findEocd(buf: Buffer): number {
  // EOCD is at the end, possibly followed by a comment up to 64k.
  const floor = Math.max(0, buf.length - 22 - 0xffff)
  for (let at = buf.length - 22; at >= floor; at--) {
    if (buf.readUInt32LE(at) === SIG_EOCD) return at
  }
  throw new NpzFormatError('not a zip archive (no end-of-central-directory)')
}

export function readNpz(source: string | Buffer): Record<string, NpyArray> {
  const buf = typeof source === 'string' ? readFileSync(source) : source
  const eocd = findEocd(buf)
  const entryCount = buf.readUInt16LE(eocd + 10)
  let at = buf.readUInt32LE(eocd + 16)
  if (at === 0xffffffff) {
    throw new NpzFormatError('zip64 archives are not supported')
  }

  const out: Record<string, NpyArray> = {}
  for (let i = 0; i < entryCount; i++) {
    if (buf.readUInt32LE(at) !== SIG_CENTRAL) {
      throw new NpzFormatError('corrupt central directory')
    }
    const method = buf.readUInt16LE(at + 10)
    const crcWant = buf.readUInt32LE(at + 16)
    const compSize = buf.readUInt32LE(at + 20)
    const rawSize = buf.readUInt32LE(at + 24)
    const nameLen = buf.readUInt16LE(at + 28)
    const extraLen = buf.readUInt16LE(at + 30)
    const commentLen = buf.readUInt16LE(at + 32)
    const localAt = buf.readUInt32LE(at + 42)
    const name = buf.toString('utf-8', at + 46, at + 46 + nameLen)
    at += 46 + nameLen + extraLen + commentLen

    if (buf.readUInt32LE(localAt) !== SIG_LOCAL) {
      throw new NpzFormatError(`corrupt local header for ${name}`)
    }
    const localNameLen = buf.readUInt16LE(localAt + 26)
    const localExtraLen = buf.readUInt16LE(localAt + 28)
    const dataAt = localAt + 30 + localNameLen + localExtraLen
    const compressed = buf.subarray(dataAt, dataAt + compSize)

    let raw: Buffer
    if (method === 0) {
      raw = compressed
    } else if (method === 8) {
      raw = inflateRawSync(compressed)
    } else {
      throw new NpzFormatError(`unsupported compression method ${method}`)
    }
    if (raw.length !== rawSize) {
      throw new NpzFormatError(`entry ${name}: size mismatch after inflate`)
    }
    if ((crc32(raw) >>> 0) !== crcWant) {
      throw new NpzFormatError(`entry ${name}: CRC mismatch`)
    }
    const key = name.endsWith('.npy') ? name.slice(0, -4) : name
    out[key] = parseNpy(Buffer.from(raw))
  }
  return out
}

export function encodeNpz(entries: Record<string, NpyArray>): Buffer {
  const locals: Buffer[] = []
  const centrals: Buffer[] = []
  let offset = 0
  for (const [key, arr] of Object.entries(entries)) {
    const name = Buffer.from(`${key}.npy`, 'utf-8')
    const body = encodeNpy(arr)
    const crc = crc32(body) >>> 0

    const local = Buffer.alloc(30)
    local.writeUInt32LE(SIG_LOCAL, 0)
    local.writeUInt16LE(20, 4) // version needed
    local.writeUInt16LE(0, 8) // method: stored
    local.writeUInt32LE(crc, 14)
    local.writeUInt32LE(body.length, 18)
    local.writeUInt32LE(body.length, 22)
    local.writeUInt16LE(name.length, 26)
    locals.push(local, name, body)

    const central = Buffer.alloc(46)
    central.writeUInt32LE(SIG_CENTRAL, 0)
    central.writeUInt16LE(20, 4) // version made by
    central.writeUInt16LE(20, 6) // version needed
    central.writeUInt16LE(0, 10) // method: stored
    central.writeUInt32LE(crc, 16)
    central.writeUInt32LE(body.length, 20)
    central.writeUInt32LE(body.length, 24)
    central.writeUInt16LE(name.length, 28)
    central.writeUInt32LE(offset, 42)
    centrals.push(central, name)

    offset += local.length + name.length + body.length
  }

  const cdSize = centrals.reduce((a, b) => a + b.length, 0)
  const eocd = Buffer.alloc(22)
  eocd.writeUInt32LE(SIG_EOCD, 0)
  eocd.writeUInt16LE(centrals.length / 2, 8)
  eocd.writeUInt16LE(centrals.length / 2, 10)
  eocd.writeUInt32LE(cdSize, 12)
  eocd.writeUInt32LE(offset, 16)
  return Buffer.concat([...locals, ...centrals, eocd])
}

export function writeNpz(
  path: string,
  entries: Record<string, NpyArray>,
): void {
  writeFileSync(path, encodeNpz(entries))
}
