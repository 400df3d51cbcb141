/**
 * Extraction pipelines: npz archive in, FSET1 feature file out.
 *
 * The pipeline enforces the two contracts the retrieval engine checks
 * on its side: record counts must equal the dataset table's split
 * counts exactly, and the emitted dimensionality must match the model
 * table (times depth for volumes).
 */

import { join } from 'node:path'

import type { Encoder } from './encoders.js'
import { stubEncoder } from './encoders.js'
import type { FeatureSet, Role, SetMeta } from './fset.js'
import { sequentialIds, writeFsetFile } from './fset.js'
import type { ImageBatch } from './images.js'
import { preprocessForModel } from './images.js'
import type { NpyArray } from './npz.js'
import { readNpz } from './npz.js'
import type { DatasetSpec, ModelSpec } from './tables.js'
import { inputSideFor, npzFileName } from './tables.js'

export type Split = 'train' | 'test'

export class ExtractError extends Error {}

export interface ExtractOptions {
  /** directory holding the MedMNIST-style .npz archives */
  dataDir: string
  outPath: string
  encoder?: Encoder
  /** images (2D) or volume slices (3D) encoded per encoder call */
  batchSize?: number
}

export interface ExtractResult {
  path: string
  count: number
  dim: number
  bytes: number
}

function splitCount(dataset: DatasetSpec, split: Split): number {
  return split === 'train' ? dataset.trainCount : dataset.testCount
}

function roleFor(split: Split): Role {
  return split === 'train' ? 'database' : 'query'
}

function asLabels(arr: NpyArray, count: number, numClasses: number): Uint32Array {
  const flatOk =
    arr.shape.length === 1 ||
    (arr.shape.length === 2 && arr.shape[1] === 1)
  if (!flatOk || arr.shape[0] !== count) {
    throw new ExtractError(
      `labels have shape [${arr.shape.join(', ')}], expected [${count}] or [${count}, 1]`,
    )
  }
  if (arr.data instanceof Float32Array || arr.data instanceof Float64Array) {
    throw new ExtractError(`labels must be integers, got dtype ${arr.dtype}`)
  }
  const out = new Uint32Array(count)
  for (let i = 0; i < count; i++) {
    const v = Number(arr.data[i]!)
    if (v >= numClasses) {
      throw new ExtractError(
        `label ${v} at record ${i} >= num_classes ${numClasses}`,
      )
    }
    out[i] = v
  }
  return out
}

interface LoadedSplit {
  images: NpyArray
  labels: Uint32Array
}

function loadSplit(
  dataset: DatasetSpec,
  size: number,
  split: Split,
  dataDir: string,
): LoadedSplit {
  if (!dataset.sizes.includes(size)) {
    throw new ExtractError(
      `${dataset.name} is not available at ${size}px; sizes: ` +
        dataset.sizes.join(', '),
    )
  }
  const archive = readNpz(join(dataDir, npzFileName(dataset, size)))
  const images = archive[`${split}_images`]
  const labelsArr = archive[`${split}_labels`]
  if (!images || !labelsArr) {
    throw new ExtractError(
      `archive is missing ${split}_images or ${split}_labels`,
    )
  }
  if (!(images.data instanceof Uint8Array)) {
    throw new ExtractError(`images must be uint8, got dtype ${images.dtype}`)
  }
  const expected = splitCount(dataset, split)
  if (images.shape[0] !== expected) {
    throw new ExtractError(
      `${dataset.name} ${split} split holds ${images.shape[0]} images, ` +
        `expected ${expected}`,
    )
  }
  return {
    images,
    labels: asLabels(labelsArr, expected, dataset.numClasses),
  }
}

function baseExtra(
  model: ModelSpec,
  encoder: Encoder,
  split: Split,
  size: number,
): Record<string, string> {
  const extra: Record<string, string> = {
    split,
    encoder: encoder.name,
    input_side: String(inputSideFor(model, size)),
    interpolation: 'bilinear',
  }
  if (model.family === 'cnn') extra.pooling = 'avg'
  return extra
}

function encodeChecked(
  encoder: Encoder,
  batch: ImageBatch,
  model: ModelSpec,
): Float32Array {
  const out = encoder.encode(batch)
  if (out.length !== batch.n * model.featureDim) {
    throw new ExtractError(
      `encoder produced ${out.length / batch.n} floats per image, ` +
        `${model.name} requires ${model.featureDim}`,
    )
  }
  return out
}

/** Take a [count, ...] uint8 stack slice as a view, rows lo..hi. */
function rowView(arr: NpyArray, lo: number, hi: number): Uint8Array {
  const rowLen = arr.shape.slice(1).reduce((a, b) => a * b, 1)
  return (arr.data as Uint8Array).subarray(lo * rowLen, hi * rowLen)
}

export function extract(
  dataset: DatasetSpec,
  size: number,
  model: ModelSpec,
  split: Split,
  opts: ExtractOptions,
): ExtractResult {
  if (dataset.is3d) {
    throw new ExtractError(
      `${dataset.name} is a 3D dataset; use the volume pipeline`,
    )
  }
  const { images, labels } = loadSplit(dataset, size, split, opts.dataDir)
  const shape = images.shape
  if (shape[1] !== size || shape[2] !== size) {
    throw new ExtractError(
      `archive images are ${shape[1]}x${shape[2]}, expected ${size}x${size}`,
    )
  }
  const encoder = opts.encoder ?? stubEncoder(model)
  const n = shape[0]!
  const batchSize = opts.batchSize ?? 512

  const vectors = new Float32Array(n * model.featureDim)
  for (let lo = 0; lo < n; lo += batchSize) {
    const hi = Math.min(lo + batchSize, n)
    const batch = preprocessForModel(
      rowView(images, lo, hi),
      [hi - lo, ...shape.slice(1)],
      model,
    )
    vectors.set(encodeChecked(encoder, batch, model), lo * model.featureDim)
  }

  const fs: FeatureSet = {
    meta: {
      modelName: model.name,
      datasetName: dataset.name,
      imageSize: size,
      is3d: false,
      numClasses: dataset.numClasses,
      role: roleFor(split),
      extra: baseExtra(model, encoder, split, size),
    },
    itemIds: sequentialIds(n),
    labels,
    vectors,
    dim: model.featureDim,
  }
  const bytes = writeFsetFile(fs, opts.outPath)
  return { path: opts.outPath, count: n, dim: model.featureDim, bytes }
}

interface Volumes {
  images: NpyArray
  labels: Uint32Array
  depth: number
}

function loadVolumes(
  dataset: DatasetSpec,
  size: number,
  split: Split,
  dataDir: string,
): Volumes {
  if (!dataset.is3d) {
    throw new ExtractError(
      `${dataset.name} is a 2D dataset; the volume pipeline needs 3D input`,
    )
  }
  const loaded = loadSplit(dataset, size, split, dataDir)
  const shape = loaded.images.shape
  if (
    shape.length !== 4 ||
    shape[1] !== size ||
    shape[2] !== size ||
    shape[3] !== size
  ) {
    throw new ExtractError(
      `expected [n, ${size}, ${size}, ${size}] volumes, got [${shape.join(', ')}]`,
    )
  }
  return { ...loaded, depth: size }
}

function extra3d(
  model: ModelSpec,
  encoder: Encoder,
  split: Split,
  size: number,
  depth: number,
): Record<string, string> {
  return {
    ...baseExtra(model, encoder, split, size),
    slice_axis: '0',
    slices: String(depth),
  }
}

/**
 * Encode every slice of every volume, returning features laid out as
 * [n * depth, featureDim] with a volume's slices contiguous in slice
 * order. That layout doubles as the concatenated per-volume vectors.
 */
function encodeAllSlices(
  vols: Volumes,
  model: ModelSpec,
  encoder: Encoder,
  batchSize: number,
): Float32Array {
  const n = vols.images.shape[0]!
  const depth = vols.depth
  const sliceCount = n * depth
  const out = new Float32Array(sliceCount * model.featureDim)
  // Volumes chunked so each encode call sees about batchSize slices;
  // a volume's slices always travel in one call.
  const volsPerChunk = Math.max(1, Math.floor(batchSize / depth))
  for (let lo = 0; lo < n; lo += volsPerChunk) {
    const hi = Math.min(lo + volsPerChunk, n)
    // A [v, d, s, s] uint8 block reads as (v*d) square gray images.
    const batch = preprocessForModel(
      rowView(vols.images, lo, hi),
      [(hi - lo) * depth, depth, depth],
      model,
    )
    out.set(
      encodeChecked(encoder, batch, model),
      lo * depth * model.featureDim,
    )
  }
  return out
}

export function extract3d(
  dataset: DatasetSpec,
  size: number,
  model: ModelSpec,
  split: Split,
  opts: ExtractOptions,
): ExtractResult {
  const vols = loadVolumes(dataset, size, split, opts.dataDir)
  const encoder = opts.encoder ?? stubEncoder(model)
  const n = vols.images.shape[0]!
  const dim = vols.depth * model.featureDim
  if (dim > 0xffffffff) {
    throw new ExtractError(`concatenated dim ${dim} exceeds the u32 limit`)
  }
  const vectors = encodeAllSlices(vols, model, encoder, opts.batchSize ?? 512)

  const fs: FeatureSet = {
    meta: {
      modelName: model.name,
      datasetName: dataset.name,
      imageSize: size,
      is3d: true,
      numClasses: dataset.numClasses,
      role: roleFor(split),
      extra: extra3d(model, encoder, split, size, vols.depth),
    },
    itemIds: sequentialIds(n),
    labels: vols.labels,
    vectors,
    dim,
  }
  const bytes = writeFsetFile(fs, opts.outPath)
  return { path: opts.outPath, count: n, dim, bytes }
}

export interface SliceFilesResult {
  paths: string[]
  count: number
  dim: number
}

/**
 * Alternative volume route: one 2D feature file per slice index, named
 * <dataset>_<model>_<size>_slice<NNN>.fset, for the engine's own
 * concatenation command. Concatenating them reproduces extract3d's
 * output byte for byte.
 */
export function extract3dSlices(
  dataset: DatasetSpec,
  size: number,
  model: ModelSpec,
  split: Split,
  opts: Omit<ExtractOptions, 'outPath'> & { outDir: string },
): SliceFilesResult {
  const vols = loadVolumes(dataset, size, split, opts.dataDir)
  const encoder = opts.encoder ?? stubEncoder(model)
  const n = vols.images.shape[0]!
  const depth = vols.depth
  const all = encodeAllSlices(vols, model, encoder, opts.batchSize ?? 512)

  const itemIds = sequentialIds(n)
  const paths: string[] = []
  for (let s = 0; s < depth; s++) {
    const vectors = new Float32Array(n * model.featureDim)
    for (let v = 0; v < n; v++) {
      const src = (v * depth + s) * model.featureDim
      vectors.set(
        all.subarray(src, src + model.featureDim),
        v * model.featureDim,
      )
    }
    const meta: SetMeta = {
      modelName: model.name,
      datasetName: dataset.name,
      imageSize: size,
      is3d: false,
      numClasses: dataset.numClasses,
      role: roleFor(split),
      extra: extra3d(model, encoder, split, size, depth),
    }
    const name = `${dataset.name}_${model.name}_${size}_slice${String(s).padStart(3, '0')}.fset`
    const path = join(opts.outDir, name)
    writeFsetFile(
      { meta, itemIds, labels: vols.labels, vectors, dim: model.featureDim },
      path,
    )
    paths.push(path)
  }
  return { paths, count: n, dim: model.featureDim }
}
