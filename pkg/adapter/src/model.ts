import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';
import {ModelVariant, VARIANT_TABLE} from './spec';
import {LabeledImage} from './data';

export const INPUT_WIDTH = 64;
export const INPUT_HEIGHT = 48;

/**
 * Small convolutional box regressor used as a desk-scale stand-in for the
 * full detector family. Output: [cx, cy, w, h, conf], all sigmoid-normalized.
 */
export function buildModel(variant: ModelVariant, seed: number): tf.LayersModel {
  const {channels} = VARIANT_TABLE[variant];
  const model = tf.sequential();
  channels.forEach((filters, i) => {
    model.add(
      tf.layers.conv2d({
        inputShape: i === 0 ? [INPUT_HEIGHT, INPUT_WIDTH, 1] : undefined,
        filters,
        kernelSize: 3,
        strides: 2,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.heNormal({seed: seed + i}),
      }),
    );
  });
  model.add(tf.layers.globalAveragePooling2d({}));
  model.add(
    tf.layers.dense({
      units: 32,
      activation: 'relu',
      kernelInitializer: tf.initializers.heNormal({seed: seed + 10}),
    }),
  );
  model.add(
    tf.layers.dense({
      units: 5,
      activation: 'sigmoid',
      kernelInitializer: tf.initializers.glorotUniform({seed: seed + 11}),
    }),
  );
  return model;
}

/** Resize a decoded grayscale image to the model's input resolution. */
export function toInputTensor(image: LabeledImage): tf.Tensor3D {
  return tf.tidy(() => {
    const full = tf.tensor3d(image.pixels, [image.height, image.width, 1]);
    return tf.image.resizeBilinear(full, [INPUT_HEIGHT, INPUT_WIDTH]);
  });
}

interface SavedModelJson {
  modelTopology: unknown;
  weightSpecs: tf.io.WeightsManifestEntry[];
}

export async function saveModel(model: tf.LayersModel, artifactDir: string): Promise<void> {
  fs.mkdirSync(artifactDir, {recursive: true});
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const payload: SavedModelJson = {
        modelTopology: artifacts.modelTopology,
        weightSpecs: artifacts.weightSpecs ?? [],
      };
      fs.writeFileSync(path.join(artifactDir, 'model.json'), JSON.stringify(payload));
      const data = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(artifactDir, 'weights.bin'), Buffer.from(data));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      };
    }),
  );
}

export async function loadModel(artifactDir: string): Promise<tf.LayersModel> {
  const raw = JSON.parse(
    fs.readFileSync(path.join(artifactDir, 'model.json'), 'utf-8'),
  ) as SavedModelJson;
  const weights = fs.readFileSync(path.join(artifactDir, 'weights.bin'));
  const weightData = weights.buffer.slice(
    weights.byteOffset,
    weights.byteOffset + weights.byteLength,
  );
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: raw.modelTopology as {},
      weightSpecs: raw.weightSpecs,
      weightData,
    }),
  );
}
