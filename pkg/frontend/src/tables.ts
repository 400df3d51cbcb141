/**
 * The model and dataset tables everything else keys off: nine pretrained
 * feature extractors and eight MedMNIST V2 sub-datasets, with the exact
 * split counts the count contract enforces at extraction time.
 */

export type ModelFamily = 'cnn' | 'foundation'

export interface ModelSpec {
  name: string
  family: ModelFamily
  /** length of the emitted feature vector for a single 2D image */
  featureDim: number
}

export const MODELS: readonly ModelSpec[] = [
  { name: 'VGG19', family: 'cnn', featureDim: 512 },
  { name: 'ResNet50', family: 'cnn', featureDim: 2048 },
  { name: 'DenseNet121', family: 'cnn', featureDim: 1024 },
  { name: 'EfficientNetV2M', family: 'cnn', featureDim: 1280 },
  { name: 'MedCLIP', family: 'foundation', featureDim: 512 },
  { name: 'BioMedCLIP', family: 'foundation', featureDim: 512 },
  { name: 'OpenCLIP', family: 'foundation', featureDim: 1024 },
  { name: 'CONCH', family: 'foundation', featureDim: 512 },
  { name: 'UNI', family: 'foundation', featureDim: 1024 },
]

export interface DatasetSpec {
  /** full name as written into file metadata, e.g. "BreastMNIST" */
  name: string
  is3d: boolean
  /** pixel sizes the dataset ships in */
  sizes: readonly number[]
  trainCount: number
  testCount: number
  numClasses: number
  modality: string
}

const SIZES_2D = [28, 64, 128, 224] as const
const SIZES_3D = [28, 64] as const

export const DATASETS: readonly DatasetSpec[] = [
  { name: 'BreastMNIST', is3d: false, sizes: SIZES_2D, trainCount: 546, testCount: 156, numClasses: 2, modality: 'ultrasound' },
  { name: 'PneumoniaMNIST', is3d: false, sizes: SIZES_2D, trainCount: 4708, testCount: 624, numClasses: 2, modality: 'x-ray' },
  { name: 'RetinaMNIST', is3d: false, sizes: SIZES_2D, trainCount: 1080, testCount: 400, numClasses: 5, modality: 'fundus' },
  { name: 'DermaMNIST', is3d: false, sizes: SIZES_2D, trainCount: 7007, testCount: 2005, numClasses: 7, modality: 'dermatoscopy' },
  { name: 'BloodMNIST', is3d: false, sizes: SIZES_2D, trainCount: 11959, testCount: 3421, numClasses: 8, modality: 'microscopy' },
  { name: 'PathMNIST', is3d: false, sizes: SIZES_2D, trainCount: 89996, testCount: 7180, numClasses: 9, modality: 'pathology' },
  { name: 'AdrenalMNIST3D', is3d: true, sizes: SIZES_3D, trainCount: 1188, testCount: 298, numClasses: 2, modality: 'ct' },
  { name: 'SynapseMNIST3D', is3d: true, sizes: SIZES_3D, trainCount: 1230, testCount: 352, numClasses: 2, modality: 'electron microscopy' },
]

export class UnknownNameError extends Error {}

export function findModel(name: string): ModelSpec {
  const wanted = name.toLowerCase()
  const hit = MODELS.find(m => m.name.toLowerCase() === wanted)
  if (!hit) {
    throw new UnknownNameError(
      `unknown model ${JSON.stringify(name)}; known: ` +
        MODELS.map(m => m.name).join(', '),
    )
  }
  return hit
}

/**
 * Accepts the full name, the short form without the MNIST infix
 * ("Breast", "Adrenal3D"), or any casing of either.
 */
export function findDataset(name: string): DatasetSpec {
  const wanted = name.toLowerCase()
  const hit = DATASETS.find(
    d =>
      d.name.toLowerCase() === wanted ||
      d.name.toLowerCase().replace('mnist', '') === wanted,
  )
  if (!hit) {
    throw new UnknownNameError(
      `unknown dataset ${JSON.stringify(name)}; known: ` +
        DATASETS.map(d => d.name).join(', '),
    )
  }
  return hit
}

/**
 * Archive file name for a dataset at a given size, following the
 * MedMNIST V2 convention: the 28-pixel edition has no size suffix.
 */
export function npzFileName(dataset: DatasetSpec, size: number): string {
  const base = dataset.name.toLowerCase()
  return size === 28 ? `${base}.npz` : `${base}_${size}.npz`
}

/**
 * Side length a model actually consumes. CNN backbones take the native
 * size but cannot go below 32, so the 28-pixel editions are upscaled;
 * foundation models always resize to their fixed 224 input.
 */
export function inputSideFor(model: ModelSpec, size: number): number {
  if (model.family === 'foundation') return 224
  return size === 28 ? 32 : size
}
