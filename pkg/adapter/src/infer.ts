import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';
import {loadSplit} from './data';
import {loadModel, toInputTensor} from './model';
import {AdapterRunSpec, DetectionRecord, detectionsFileSchema} from './spec';

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

/**
 * Run the trained model over one dataset split and write detections JSON in
 * the interchange schema. Frames whose confidence falls below the cutoff are
 * omitted entirely (absent frame == no detections).
 */
export async function infer(spec: AdapterRunSpec): Promise<DetectionRecord[]> {
  const images = loadSplit(spec.dataset_dir, spec.split);
  const model = await loadModel(spec.artifact_dir);

  const records: DetectionRecord[] = [];
  for (const image of images) {
    const output = tf.tidy(() => {
      const x = toInputTensor(image).expandDims(0);
      return (model.predict(x) as tf.Tensor2D).dataSync();
    });
    const conf = clamp(output[4], 0, 1);
    if (conf < spec.min_confidence) {
      continue;
    }
    const cx = output[0] * image.width;
    const cy = output[1] * image.height;
    // floor the box extent so the record never degenerates
    const halfW = Math.max((output[2] * image.width) / 2, 1);
    const halfH = Math.max((output[3] * image.height) / 2, 1);
    const xMin = clamp(cx - halfW, 0, image.width - 1);
    const yMin = clamp(cy - halfH, 0, image.height - 1);
    const xMax = clamp(cx + halfW, xMin + 1, image.width);
    const yMax = clamp(cy + halfH, yMin + 1, image.height);
    records.push({
      frame: image.frame,
      class: 0,
      box: [xMin, yMin, xMax, yMax],
      conf,
    });
  }
  model.dispose();

  detectionsFileSchema.parse(records); // never emit an invalid interchange file
  fs.mkdirSync(path.dirname(path.resolve(spec.detections_path)), {recursive: true});
  fs.writeFileSync(spec.detections_path, JSON.stringify(records, null, 2) + '\n');
  console.log(`wrote ${records.length} detections to ${spec.detections_path}`);
  return records;
}
