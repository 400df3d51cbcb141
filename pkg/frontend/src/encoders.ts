/**
 * Feature encoders. An Encoder turns a preprocessed RGB batch into one
 * vector of model.featureDim floats per image.
 *
 * Real backbones (the four CNNs via average-pooled final conv maps, the
 * five vision-language and pathology models via their vision-encoder
 * embedding) plug in behind this interface; they need downloadable
 * weights and a tensor runtime, neither of which this repository vendors.
 * What ships here is a deterministic stub that honors every contract the
 * pipeline relies on: correct output width, bit-for-bit reproducibility,
 * and features that actually depend on pixel content.
 */

import type { ImageBatch } from './images.js'
import type { ModelSpec } from './tables.js'

export interface Encoder {
  readonly spec: ModelSpec
  /** short identifier recorded in file metadata, e.g. "stub" */
  readonly name: string
  /** batch is NHWC RGB in [0, 1]; returns [n x featureDim] row-major */
  encode(batch: ImageBatch): Float32Array
}

export class EncoderError extends Error {}

function fnv1a(text: string): number {
  let h = 0x811c9dc5
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i)
    h = Math.imul(h, 0x01000193)
  }
  return h >>> 0
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

const GRID = 4
const DESCRIPTOR_LEN = GRID * GRID * 3

/**
 * Average-pool the batch over a GRID x GRID cell layout, one value per
 * cell and channel. This is the image-content summary the stub projects
 * into feature space.
 */
function gridDescriptors(batch: ImageBatch): Float32Array {
  const { n, height: h, width: w, channels: c } = batch
  const out = new Float32Array(n * DESCRIPTOR_LEN)
  const src = batch.data
  for (let img = 0; img < n; img++) {
    const base = img * h * w * c
    const dst = img * DESCRIPTOR_LEN
    for (let y = 0; y < h; y++) {
      const gy = Math.min(Math.floor((y * GRID) / h), GRID - 1)
      const row = base + y * w * c
      for (let x = 0; x < w; x++) {
        const gx = Math.min(Math.floor((x * GRID) / w), GRID - 1)
        const cell = dst + (gy * GRID + gx) * 3
        const px = row + x * c
        out[cell] = out[cell]! + src[px]!
        out[cell + 1] = out[cell + 1]! + src[px + 1]!
        out[cell + 2] = out[cell + 2]! + src[px + 2]!
      }
    }
    // Cell populations differ when the side is not divisible by GRID;
    // normalize by exact counts so the descriptor stays a mean.
    for (let gy = 0; gy < GRID; gy++) {
      const rows =
        Math.ceil(((gy + 1) * h) / GRID) - Math.ceil((gy * h) / GRID)
      for (let gx = 0; gx < GRID; gx++) {
        const cols =
          Math.ceil(((gx + 1) * w) / GRID) - Math.ceil((gx * w) / GRID)
        const cell = dst + (gy * GRID + gx) * 3
        const count = rows * cols
        out[cell] = out[cell]! / count
        out[cell + 1] = out[cell + 1]! / count
        out[cell + 2] = out[cell + 2]! / count
      }
    }
  }
  return out
}

/**
 * Deterministic stand-in encoder: a grid-pooled descriptor pushed
 * through a fixed random projection seeded by the model name. Same
 * pixels in, same bits out, every run.
 */
export function stubEncoder(spec: ModelSpec): Encoder {
  const rand = mulberry32(fnv1a(`stub:${spec.name}`))
  const projection = new Float32Array(spec.featureDim * DESCRIPTOR_LEN)
  for (let i = 0; i < projection.length; i++) {
    projection[i] = rand() * 2 - 1
  }
  return {
    spec,
    name: 'stub',
    encode(batch: ImageBatch): Float32Array {
      if (batch.channels !== 3) {
        throw new EncoderError(
          `encoder expects RGB batches, got ${batch.channels} channels`,
        )
      }
      const desc = gridDescriptors(batch)
      const dim = spec.featureDim
      const out = new Float32Array(batch.n * dim)
      for (let img = 0; img < batch.n; img++) {
        const d = img * DESCRIPTOR_LEN
        const o = img * dim
        for (let j = 0; j < dim; j++) {
          let acc = 0
          const p = j * DESCRIPTOR_LEN
          for (let k = 0; k < DESCRIPTOR_LEN; k++) {
            acc += projection[p + k]! * desc[d + k]!
          }
          out[o + j] = acc
        }
      }
      return out
    },
  }
}

export function resolveEncoder(kind: string, spec: ModelSpec): Encoder {
  if (kind === 'stub') return stubEncoder(spec)
  throw new EncoderError(
    `unknown encoder ${JSON.stringify(kind)}; available: stub`,
  )
}
