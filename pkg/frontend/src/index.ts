export {
  MAGIC,
  FORMAT_VERSION,
  HEADER_SIZE,
  FsetFormatError,
  FsetValidationError,
  decodeFset,
  encodeFset,
  readFsetFile,
  recordBytes,
  sequentialIds,
  writeFsetFile,
} from './fset.js'
export type { FeatureSet, Role, SetMeta } from './fset.js'

export {
  DATASETS,
  MODELS,
  UnknownNameError,
  findDataset,
  findModel,
  inputSideFor,
  npzFileName,
} from './tables.js'
export type { DatasetSpec, ModelFamily, ModelSpec } from './tables.js'

export {
  NpzFormatError,
  descrFor,
  encodeNpy,
  encodeNpz,
  parseNpy,
  readNpz,
  writeNpz,
} from './npz.js'
export type { NpyArray, NpyData } from './npz.js'

export {
  ImageShapeError,
  preprocessForModel,
  resizeBilinear,
  toFloatBatch,
  toRgb,
} from './images.js'
export type { ImageBatch } from './images.js'

export { EncoderError, resolveEncoder, stubEncoder } from './encoders.js'
export type { Encoder } from './encoders.js'

export {
  ExtractError,
  extract,
  extract3d,
  extract3dSlices,
} from './extract.js'
export type {
  ExtractOptions,
  ExtractResult,
  SliceFilesResult,
  Split,
} from './extract.js'

export {
  FIGURE_HEADER,
  FigureFormatError,
  parseFigureCsv,
  renderChartSvg,
  renderFigures,
} from './plots.js'
export type { FigureRow, RenderOutcome } from './plots.js'
