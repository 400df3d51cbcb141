import { expect, test } from 'vitest'

import {
  DATASETS,
  MODELS,
  UnknownNameError,
  findDataset,
  findModel,
  inputSideFor,
  npzFileName,
} from '../src/tables.js'

test('nine models with the documented feature widths', () => {
  expect(MODELS).toHaveLength(9)
  const dims = Object.fromEntries(MODELS.map(m => [m.name, m.featureDim]))
  expect(dims).toEqual({
    VGG19: 512,
    ResNet50: 2048,
    DenseNet121: 1024,
    EfficientNetV2M: 1280,
    MedCLIP: 512,
    BioMedCLIP: 512,
    OpenCLIP: 1024,
    CONCH: 512,
    UNI: 1024,
  })
  for (const m of MODELS) {
    expect([512, 1024, 1280, 2048]).toContain(m.featureDim)
  }
})

test('model families split four CNNs and five foundation models', () => {
  const cnn = MODELS.filter(m => m.family === 'cnn').map(m => m.name)
  expect(cnn).toEqual(['VGG19', 'ResNet50', 'DenseNet121', 'EfficientNetV2M'])
  expect(MODELS.filter(m => m.family === 'foundation')).toHaveLength(5)
})

test('eight datasets with exact split counts and class numbers', () => {
  const byName = Object.fromEntries(
    DATASETS.map(d => [d.name, [d.trainCount, d.testCount, d.numClasses]]),
  )
  expect(byName).toEqual({
    BreastMNIST: [546, 156, 2],
    PneumoniaMNIST: [4708, 624, 2],
    RetinaMNIST: [1080, 400, 5],
    DermaMNIST: [7007, 2005, 7],
    BloodMNIST: [11959, 3421, 8],
    PathMNIST: [89996, 7180, 9],
    AdrenalMNIST3D: [1188, 298, 2],
    SynapseMNIST3D: [1230, 352, 2],
  })
})

test('2D datasets ship four sizes, 3D two', () => {
  for (const d of DATASETS) {
    expect([...d.sizes]).toEqual(d.is3d ? [28, 64] : [28, 64, 128, 224])
  }
  expect(DATASETS.filter(d => d.is3d).map(d => d.name)).toEqual([
    'AdrenalMNIST3D',
    'SynapseMNIST3D',
  ])
})

test('lookup accepts short names and any casing', () => {
  expect(findDataset('breast').name).toBe('BreastMNIST')
  expect(findDataset('BreastMNIST').name).toBe('BreastMNIST')
  expect(findDataset('Adrenal3D').name).toBe('AdrenalMNIST3D')
  expect(findDataset('adrenalmnist3d').name).toBe('AdrenalMNIST3D')
  expect(findModel('resnet50').name).toBe('ResNet50')
  expect(findModel('UNI').featureDim).toBe(1024)
  expect(() => findDataset('Chest')).toThrow(UnknownNameError)
  expect(() => findModel('AlexNet')).toThrow(/known:/)
})

test('archive names follow the no-suffix-at-28 convention', () => {
  const breast = findDataset('breast')
  expect(npzFileName(breast, 28)).toBe('breastmnist.npz')
  expect(npzFileName(breast, 224)).toBe('breastmnist_224.npz')
  expect(npzFileName(findDataset('synapse3d'), 64)).toBe(
    'synapsemnist3d_64.npz',
  )
})

test('input rule: CNNs keep native size above the 32px floor', () => {
  const vgg = findModel('VGG19')
  expect(inputSideFor(vgg, 28)).toBe(32)
  expect(inputSideFor(vgg, 64)).toBe(64)
  expect(inputSideFor(vgg, 128)).toBe(128)
  expect(inputSideFor(vgg, 224)).toBe(224)
})

test('input rule: foundation models always get 224', () => {
  for (const name of ['MedCLIP', 'BioMedCLIP', 'OpenCLIP', 'CONCH', 'UNI']) {
    const m = findModel(name)
    for (const size of [28, 64, 128, 224]) {
      expect(inputSideFor(m, size)).toBe(224)
    }
  }
})
