/**
 * Deterministic npz fixtures shaped like real MedMNIST archives: right
 * key names, right dtypes, right split counts, synthetic pixels.
 */

import { join } from 'node:path'

import type { NpyArray } from '../src/npz.js'
import { writeNpz } from '../src/npz.js'
import type { DatasetSpec } from '../src/tables.js'
import { npzFileName } from '../src/tables.js'

/** Cheap deterministic byte pattern; varies with every index and seed. */
export function fillBytes(out: Uint8Array, seed: number): void {
  let state = (seed ^ 0x9e3779b9) >>> 0
  for (let i = 0; i < out.length; i++) {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0
    out[i] = state >>> 24
  }
}

function labelColumn(count: number, numClasses: number): NpyArray {
  const data = new Uint8Array(count)
  for (let i = 0; i < count; i++) data[i] = i % numClasses
  return { shape: [count, 1], dtype: '|u1', data }
}

function imageStack(
  count: number,
  dims: number[],
  seed: number,
): NpyArray {
  const total = dims.reduce((a, b) => a * b, count)
  const data = new Uint8Array(total)
  fillBytes(data, seed)
  return { shape: [count, ...dims], dtype: '|u1', data }
}

export interface FixtureOverrides {
  trainCount?: number
  testCount?: number
}

/**
 * Write <dataDir>/<dataset archive name> with all four MedMNIST keys.
 * Count overrides exist so tests can produce archives that violate the
 * count contract on purpose.
 */
export function writeFixture(
  dataDir: string,
  dataset: DatasetSpec,
  size: number,
  overrides: FixtureOverrides = {},
): string {
  const train = overrides.trainCount ?? dataset.trainCount
  const test = overrides.testCount ?? dataset.testCount
  const dims = dataset.is3d ? [size, size, size] : [size, size]
  const path = join(dataDir, npzFileName(dataset, size))
  writeNpz(path, {
    train_images: imageStack(train, dims, size * 31 + 1),
    train_labels: labelColumn(train, dataset.numClasses),
    test_images: imageStack(test, dims, size * 31 + 2),
    test_labels: labelColumn(test, dataset.numClasses),
  })
  return path
}
