/**
 * FSET1 container reader/writer.
 *
 * The byte layout is the only channel between this extractor and the
 * retrieval engine, so it is reproduced here exactly. Everything is
 * little-endian:
 *
 *   bytes 0-4    magic, ASCII "FSET1"
 *   byte  5      format version (currently 1)
 *   byte  6      role: 0 = database, 1 = query
 *   byte  7      is_3d: 0 or 1
 *   bytes 8-15   record count, u64
 *   bytes 16-19  feature dimensionality, u32
 *   bytes 20-23  number of classes, u32
 *   bytes 24-27  image size in pixels per side, u32
 *   bytes 28-31  metadata byte length M, u32
 *   next M bytes UTF-8 JSON object: model_name, dataset_name, extra pairs
 *   per record   item_id u64, label u32, dim x float32
 *
 * Vector bytes pass through untouched in both directions (NaN payloads,
 * signed zeros), which keeps round trips bitwise and lets tests compare
 * files produced here against files produced by the engine.
 */

import { readFileSync, writeFileSync } from 'node:fs'

export const MAGIC = 'FSET1'
export const FORMAT_VERSION = 1
export const HEADER_SIZE = 32

export type Role = 'database' | 'query'

export interface SetMeta {
  modelName: string
  datasetName: string
  imageSize: number
  is3d: boolean
  numClasses: number
  role: Role
  /** free-form provenance pairs; values are strings on disk */
  extra: Record<string, string>
}

export interface FeatureSet {
  meta: SetMeta
  /** split ordinals, strictly increasing */
  itemIds: BigUint64Array
  labels: Uint32Array
  /** row-major [count x dim] */
  vectors: Float32Array
  dim: number
}

export class FsetFormatError extends Error {}
export class FsetValidationError extends Error {}

// The record payload is copied byte-for-byte into typed arrays, which
// assumes a little-endian host (true for every platform node ships on;
// checked once here rather than per float).
const probe = new Uint8Array(new Uint32Array([1]).buffer)
if (probe[0] !== 1) {
  throw new Error('FSET1 codec requires a little-endian host')
}

function roleByte(role: Role): number {
  return role === 'database' ? 0 : 1
}

export function recordBytes(dim: number): number {
  return 8 + 4 + dim * 4
}

/** Sequential ids 0..n-1, the split-order convention for extracted sets. */
export function sequentialIds(n: number): BigUint64Array {
  const ids = new BigUint64Array(n)
  for (let i = 0; i < n; i++) ids[i] = BigInt(i)
  return ids
}

function validate(fs: FeatureSet): void {
  const n = fs.labels.length
  if (n === 0) throw new FsetValidationError('feature set is empty')
  if (fs.itemIds.length !== n) {
    throw new FsetValidationError(
      `length mismatch: ${fs.itemIds.length} ids, ${n} labels`,
    )
  }
  if (fs.vectors.length !== n * fs.dim) {
    throw new FsetValidationError(
      `vectors hold ${fs.vectors.length} floats, expected ${n} x ${fs.dim}`,
    )
  }
  if (fs.dim <= 0 || fs.dim > 0xffffffff) {
    throw new FsetValidationError(`dim ${fs.dim} outside u32 range`)
  }
  if (fs.meta.numClasses <= 0 || fs.meta.imageSize <= 0) {
    throw new FsetValidationError('num_classes and image_size must be positive')
  }
  for (let i = 0; i < n; i++) {
    const label = fs.labels[i]!
    if (label >= fs.meta.numClasses) {
      throw new FsetValidationError(
        `record ${i}: label ${label} >= num_classes ${fs.meta.numClasses}`,
      )
    }
    if (i > 0 && fs.itemIds[i]! <= fs.itemIds[i - 1]!) {
      throw new FsetValidationError(
        `record ${i}: item_id ${fs.itemIds[i]} not greater than predecessor`,
      )
    }
  }
}

function metaJson(meta: SetMeta): Buffer {
  // Compact JSON with fixed top-level key order; matches the engine's
  // encoder byte for byte when the extra pairs agree.
  return Buffer.from(
    JSON.stringify({
      model_name: meta.modelName,
      dataset_name: meta.datasetName,
      extra: meta.extra,
    }),
    'utf-8',
  )
}

export function encodeFset(fs: FeatureSet): Buffer {
  validate(fs)
  const n = fs.labels.length
  const meta = metaJson(fs.meta)
  const header = Buffer.alloc(HEADER_SIZE)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt8(FORMAT_VERSION, 5)
  header.writeUInt8(roleByte(fs.meta.role), 6)
  header.writeUInt8(fs.meta.is3d ? 1 : 0, 7)
  header.writeBigUInt64LE(BigInt(n), 8)
  header.writeUInt32LE(fs.dim, 16)
  header.writeUInt32LE(fs.meta.numClasses, 20)
  header.writeUInt32LE(fs.meta.imageSize, 24)
  header.writeUInt32LE(meta.length, 28)

  const stride = recordBytes(fs.dim)
  const payload = Buffer.alloc(n * stride)
  const vecBytes = Buffer.from(
    fs.vectors.buffer,
    fs.vectors.byteOffset,
    fs.vectors.byteLength,
  )
  for (let i = 0; i < n; i++) {
    const at = i * stride
    payload.writeBigUInt64LE(fs.itemIds[i]!, at)
    payload.writeUInt32LE(fs.labels[i]!, at + 8)
    vecBytes.copy(payload, at + 12, i * fs.dim * 4, (i + 1) * fs.dim * 4)
  }
  return Buffer.concat([header, meta, payload])
}

export function decodeFset(data: Buffer): FeatureSet {
  if (data.length < HEADER_SIZE) {
    throw new FsetFormatError(
      `file too short for FSET1 header: ${data.length} bytes`,
    )
  }
  const magic = data.toString('ascii', 0, 5)
  if (magic !== MAGIC) {
    throw new FsetFormatError(`bad magic ${JSON.stringify(magic)}`)
  }
  const version = data.readUInt8(5)
  if (version !== FORMAT_VERSION) {
    throw new FsetFormatError(`unsupported format version ${version}`)
  }
  const roleValue = data.readUInt8(6)
  if (roleValue !== 0 && roleValue !== 1) {
    throw new FsetFormatError(`invalid role byte ${roleValue}`)
  }
  const is3dByte = data.readUInt8(7)
  if (is3dByte !== 0 && is3dByte !== 1) {
    throw new FsetFormatError(`invalid is_3d byte ${is3dByte}`)
  }
  const countBig = data.readBigUInt64LE(8)
  if (countBig > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FsetFormatError(`record count ${countBig} too large`)
  }
  const count = Number(countBig)
  const dim = data.readUInt32LE(16)
  if (dim === 0) throw new FsetFormatError('dim must be positive')
  const numClasses = data.readUInt32LE(20)
  const imageSize = data.readUInt32LE(24)
  const metaLen = data.readUInt32LE(28)

  const metaEnd = HEADER_SIZE + metaLen
  if (data.length < metaEnd) {
    throw new FsetFormatError('metadata block truncated')
  }
  let doc: unknown
  try {
    doc = JSON.parse(data.toString('utf-8', HEADER_SIZE, metaEnd))
  } catch (e) {
    throw new FsetFormatError(`metadata is not valid JSON: ${e}`)
  }
  if (
    typeof doc !== 'object' ||
    doc === null ||
    !('model_name' in doc) ||
    !('dataset_name' in doc)
  ) {
    throw new FsetFormatError(
      'metadata JSON must be an object with model_name and dataset_name',
    )
  }
  const docObj = doc as Record<string, unknown>
  const extraRaw = (docObj.extra ?? {}) as Record<string, unknown>
  const extra: Record<string, string> = {}
  for (const [k, v] of Object.entries(extraRaw)) extra[k] = String(v)

  const stride = recordBytes(dim)
  const payload = data.subarray(metaEnd)
  if (payload.length !== count * stride) {
    throw new FsetFormatError(
      `payload holds ${payload.length} bytes but header declares ` +
        `${count} records of ${stride} bytes`,
    )
  }
  const itemIds = new BigUint64Array(count)
  const labels = new Uint32Array(count)
  const vectors = new Float32Array(count * dim)
  const vecBytes = Buffer.from(vectors.buffer)
  for (let i = 0; i < count; i++) {
    const at = i * stride
    itemIds[i] = payload.readBigUInt64LE(at)
    labels[i] = payload.readUInt32LE(at + 8)
    payload.copy(vecBytes, i * dim * 4, at + 12, at + stride)
  }

  const fs: FeatureSet = {
    meta: {
      modelName: String(docObj.model_name),
      datasetName: String(docObj.dataset_name),
      imageSize,
      is3d: is3dByte === 1,
      numClasses,
      role: roleValue === 0 ? 'database' : 'query',
      extra,
    },
    itemIds,
    labels,
    vectors,
    dim,
  }
  validate(fs)
  return fs
}

export function writeFsetFile(fs: FeatureSet, path: string): number {
  const bytes = encodeFset(fs)
  writeFileSync(path, bytes)
  return bytes.length
}

export function readFsetFile(path: string): FeatureSet {
  return decodeFset(readFileSync(path))
}
