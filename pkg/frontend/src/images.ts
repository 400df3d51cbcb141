/**
 * Image batch plumbing between the npz archives and the encoders:
 * uint8 stacks become float RGB batches in [0, 1], resized per model
 * input rule with half-pixel-center bilinear interpolation.
 */

import type { ModelSpec } from './tables.js'
import { inputSideFor } from './tables.js'

export class ImageShapeError extends Error {}

/** Row-major NHWC batch, values in [0, 1]. */
export interface ImageBatch {
  data: Float32Array
  n: number
  height: number
  width: number
  channels: number
}

/**
 * Convert a raw uint8 stack of shape [n, h, w] or [n, h, w, 3] into a
 * float batch, scaling to [0, 1].
 */
export function toFloatBatch(raw: Uint8Array, shape: number[]): ImageBatch {
  let n: number, h: number, w: number, c: number
  if (shape.length === 3) {
    ;[n, h, w] = shape as [number, number, number]
    c = 1
  } else if (shape.length === 4 && shape[3] === 3) {
    ;[n, h, w, c] = shape as [number, number, number, number]
  } else {
    throw new ImageShapeError(
      `expected [n, h, w] or [n, h, w, 3] image stack, got [${shape.join(', ')}]`,
    )
  }
  const count = n * h * w * c
  if (raw.length !== count) {
    throw new ImageShapeError(
      `image stack holds ${raw.length} bytes, shape wants ${count}`,
    )
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = raw[i]! / 255
  return { data, n, height: h, width: w, channels: c }
}

/** Replicate a single channel into RGB; three-channel batches pass through. */
export function toRgb(batch: ImageBatch): ImageBatch {
  if (batch.channels === 3) return batch
  if (batch.channels !== 1) {
    throw new ImageShapeError(`cannot widen ${batch.channels} channels to RGB`)
  }
  const { n, height, width } = batch
  const out = new Float32Array(n * height * width * 3)
  for (let i = 0; i < batch.data.length; i++) {
    const v = batch.data[i]!
    out[i * 3] = v
    out[i * 3 + 1] = v
    out[i * 3 + 2] = v
  }
  return { data: out, n, height, width, channels: 3 }
}

/** Bilinear resize with half-pixel sample centers. */
export function resizeBilinear(
  batch: ImageBatch,
  outH: number,
  outW: number,
): ImageBatch {
  const { n, height: h, width: w, channels: c } = batch
  if (outH === h && outW === w) return batch
  const out = new Float32Array(n * outH * outW * c)
  const src = batch.data
  const scaleY = h / outH
  const scaleX = w / outW

  // Sample positions depend only on the output grid; compute them once.
  const y0s = new Int32Array(outH)
  const y1s = new Int32Array(outH)
  const fys = new Float32Array(outH)
  for (let oy = 0; oy < outH; oy++) {
    const sy = Math.min(Math.max((oy + 0.5) * scaleY - 0.5, 0), h - 1)
    const y0 = Math.floor(sy)
    y0s[oy] = y0
    y1s[oy] = Math.min(y0 + 1, h - 1)
    fys[oy] = sy - y0
  }
  const x0s = new Int32Array(outW)
  const x1s = new Int32Array(outW)
  const fxs = new Float32Array(outW)
  for (let ox = 0; ox < outW; ox++) {
    const sx = Math.min(Math.max((ox + 0.5) * scaleX - 0.5, 0), w - 1)
    const x0 = Math.floor(sx)
    x0s[ox] = x0
    x1s[ox] = Math.min(x0 + 1, w - 1)
    fxs[ox] = sx - x0
  }

  for (let img = 0; img < n; img++) {
    const srcBase = img * h * w * c
    const dstBase = img * outH * outW * c
    for (let oy = 0; oy < outH; oy++) {
      const rowTop = srcBase + y0s[oy]! * w * c
      const rowBot = srcBase + y1s[oy]! * w * c
      const fy = fys[oy]!
      const dstRow = dstBase + oy * outW * c
      for (let ox = 0; ox < outW; ox++) {
        const left = x0s[ox]! * c
        const right = x1s[ox]! * c
        const fx = fxs[ox]!
        const dst = dstRow + ox * c
        for (let ch = 0; ch < c; ch++) {
          const tl = src[rowTop + left + ch]!
          const tr = src[rowTop + right + ch]!
          const bl = src[rowBot + left + ch]!
          const br = src[rowBot + right + ch]!
          const top = tl + (tr - tl) * fx
          const bot = bl + (br - bl) * fx
          out[dst + ch] = top + (bot - top) * fy
        }
      }
    }
  }
  return { data: out, n, height: outH, width: outW, channels: c }
}

/**
 * Full preprocessing for one model: float scale, RGB widening, and the
 * resize the model's input rule demands for this dataset size.
 */
export function preprocessForModel(
  raw: Uint8Array,
  shape: number[],
  model: ModelSpec,
): ImageBatch {
  const batch = toRgb(toFloatBatch(raw, shape))
  if (batch.height !== batch.width) {
    throw new ImageShapeError(
      `expected square images, got ${batch.height}x${batch.width}`,
    )
  }
  const side = inputSideFor(model, batch.height)
  return resizeBilinear(batch, side, side)
}
