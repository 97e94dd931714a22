import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';
import {loadSplit} from './data';
import {buildModel, saveModel, toInputTensor} from './model';
import {AdapterRunSpec, VARIANT_TABLE} from './spec';

export interface TrainReport {
  variant: string;
  nominal_params_millions: number;
  surrogate_trainable_params: number;
  epochs: number;
  learning_rate: number;
  weight_decay: number;
  images: number;
  labeled_images: number;
  final_loss: number;
}

/**
 * Train the surrogate regressor with Adam plus decoupled weight decay
 * (weights are shrunk by lr * wd after each step, separate from the
 * gradient), matching the optimizer family used for the full detectors.
 */
export async function train(spec: AdapterRunSpec): Promise<TrainReport> {
  const images = loadSplit(spec.dataset_dir, spec.split);
  const model = buildModel(spec.model_variant, spec.seed);
  const optimizer = tf.train.adam(spec.learning_rate);

  const xs = tf.stack(images.map((img) => {
    const t = toInputTensor(img);
    const out = t.clone();
    t.dispose();
    return out;
  })) as tf.Tensor4D;
  const boxTargets = tf.tensor2d(
    images.map((img) => img.box ?? [0, 0, 0, 0]),
    [images.length, 4],
  );
  const confTargets = tf.tensor2d(
    images.map((img) => [img.box ? 1 : 0]),
    [images.length, 1],
  );
  const boxWeights = tf.tensor2d(
    images.map((img) => {
      const w = img.box ? 1 : 0;
      return [w, w, w, w];
    }),
    [images.length, 4],
  );

  const kernels = model.trainableWeights.filter((w) => w.name.includes('kernel'));
  const shrink = 1 - spec.learning_rate * spec.weight_decay;

  let finalLoss = Number.NaN;
  const n = images.length;
  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    let epochLoss = 0;
    let batches = 0;
    for (let start = 0; start < n; start += spec.batch_size) {
      const size = Math.min(spec.batch_size, n - start);
      const lossTensor = optimizer.minimize(
        () =>
          tf.tidy(() => {
            const bx = xs.slice([start, 0, 0, 0], [size, -1, -1, -1]);
            const pred = model.apply(bx, {training: true}) as tf.Tensor2D;
            const predBox = pred.slice([0, 0], [size, 4]);
            const predConf = pred.slice([0, 4], [size, 1]);
            const tBox = boxTargets.slice([start, 0], [size, 4]);
            const tConf = confTargets.slice([start, 0], [size, 1]);
            const wBox = boxWeights.slice([start, 0], [size, 4]);
            const boxLoss = predBox.sub(tBox).square().mul(wBox).mean();
            const confLoss = predConf.sub(tConf).square().mean();
            return boxLoss.add(confLoss) as tf.Scalar;
          }),
        true,
      ) as tf.Scalar;
      if (shrink < 1) {
        tf.tidy(() => {
          for (const kernel of kernels) {
            kernel.write(kernel.read().mul(shrink));
          }
        });
      }
      epochLoss += lossTensor.dataSync()[0];
      lossTensor.dispose();
      batches++;
    }
    finalLoss = epochLoss / batches;
    console.log(`epoch ${epoch + 1}/${spec.epochs} loss=${finalLoss.toFixed(6)}`);
  }

  await saveModel(model, spec.artifact_dir);
  const report: TrainReport = {
    variant: spec.model_variant,
    nominal_params_millions: VARIANT_TABLE[spec.model_variant].nominalParamsMillions,
    surrogate_trainable_params: model.countParams(),
    epochs: spec.epochs,
    learning_rate: spec.learning_rate,
    weight_decay: spec.weight_decay,
    images: images.length,
    labeled_images: images.filter((img) => img.box !== null).length,
    final_loss: finalLoss,
  };
  fs.writeFileSync(
    path.join(spec.artifact_dir, 'train_report.json'),
    JSON.stringify(report, null, 2) + '\n',
  );
  console.log(
    `variant ${report.variant}: nominal ${report.nominal_params_millions}M parameters ` +
      `(surrogate trains ${report.surrogate_trainable_params})`,
  );

  xs.dispose();
  boxTargets.dispose();
  confTargets.dispose();
  boxWeights.dispose();
  optimizer.dispose();
  model.dispose();
  return report;
}
