#!/usr/bin/env node
/**
 * Command line front end.
 *
 *   extract --dataset <name> --size <px> --model <name> --split train|test
 *           --out <file.fset> [--data-dir <dir>] [--encoder stub]
 *           [--slices-out <dir>]
 *   plots   --in <csv dir> --out <dir>
 *
 * Exit codes: 0 success, 1 data or validation problem, 2 I/O problem.
 */

import { parseArgs } from 'node:util'
import { fileURLToPath } from 'node:url'

import { resolveEncoder } from './encoders.js'
import { extract, extract3d, extract3dSlices } from './extract.js'
import { renderFigures } from './plots.js'
import { findDataset, findModel } from './tables.js'

const USAGE = `usage:
  cbmir-extractor extract --dataset <name> --size <px> --model <name> \\
      --split train|test --out <file.fset> [--data-dir <dir>] \\
      [--encoder stub] [--slices-out <dir>]
  cbmir-extractor plots --in <csv dir> --out <dir>`

class UsageError extends Error {}

function required(
  values: Record<string, string | undefined>,
  name: string,
): string {
  const v = values[name]
  if (v === undefined) throw new UsageError(`missing required --${name}`)
  return v
}

function cmdExtract(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      dataset: { type: 'string' },
      size: { type: 'string' },
      model: { type: 'string' },
      split: { type: 'string' },
      out: { type: 'string' },
      'data-dir': { type: 'string', default: 'data' },
      encoder: { type: 'string', default: 'stub' },
      'slices-out': { type: 'string' },
    },
  })
  const dataset = findDataset(required(values, 'dataset'))
  const model = findModel(required(values, 'model'))
  const size = Number(required(values, 'size'))
  if (!Number.isInteger(size) || size <= 0) {
    throw new UsageError(`--size must be a positive integer, got ${values.size}`)
  }
  const split = required(values, 'split')
  if (split !== 'train' && split !== 'test') {
    throw new UsageError(`--split must be train or test, got ${split}`)
  }
  const encoder = resolveEncoder(values.encoder ?? 'stub', model)
  const opts = {
    dataDir: values['data-dir'] ?? 'data',
    encoder,
  }

  if (values['slices-out'] !== undefined) {
    const res = extract3dSlices(dataset, size, model, split, {
      ...opts,
      outDir: values['slices-out'],
    })
    console.log(
      `wrote ${res.paths.length} slice files (${res.count} records each, ` +
        `dim ${res.dim}) to ${values['slices-out']}`,
    )
    return 0
  }

  const outPath = required(values, 'out')
  const run = dataset.is3d ? extract3d : extract
  const res = run(dataset, size, model, split, { ...opts, outPath })
  console.log(`wrote ${res.count} records of dim ${res.dim} to ${res.path}`)
  return 0
}

function cmdPlots(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: 'string' },
      out: { type: 'string' },
    },
  })
  const outcome = renderFigures(required(values, 'in'), required(values, 'out'))
  for (const warning of outcome.warnings) console.error(`warning: ${warning}`)
  for (const path of outcome.written) console.log(path)
  return 0
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv
  try {
    if (command === 'extract') return cmdExtract(rest)
    if (command === 'plots') return cmdPlots(rest)
    console.error(USAGE)
    return command === undefined || command === '--help' ? 0 : 1
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}\n${USAGE}`)
      return 1
    }
    if (err instanceof Error && 'code' in err && typeof err.code === 'string') {
      if (err.code.startsWith('ERR_PARSE_ARGS')) {
        console.error(`error: ${err.message}\n${USAGE}`)
        return 1
      }
      // Filesystem problems (ENOENT and friends) are distinct from data
      // problems so scripted callers can tell them apart.
      console.error(`error: ${err.message}`)
      return 2
    }
    if (err instanceof Error) {
      console.error(`error: ${err.message}`)
      return 1
    }
    throw err
  }
}

const entry = process.argv[1]
if (entry !== undefined && fileURLToPath(import.meta.url) === entry) {
  process.exit(main(process.argv.slice(2)))
}
