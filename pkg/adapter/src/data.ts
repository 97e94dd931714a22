import * as fs from 'fs';
import * as path from 'path';
import {PNG} from 'pngjs';

export interface LabeledImage {
  /** Image basename; the frame reference used in detections JSON. */
  frame: string;
  width: number;
  height: number;
  /** Row-major grayscale pixels in [0, 1]. */
  pixels: Float32Array;
  /** Normalized [cx, cy, w, h] of the first labeled box, if any. */
  box: [number, number, number, number] | null;
}

export function decodeGrayscalePng(buffer: Buffer): {
  width: number;
  height: number;
  pixels: Float32Array;
} {
  const png = PNG.sync.read(buffer);
  const pixels = new Float32Array(png.width * png.height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = png.data[i * 4] / 255; // R channel; grayscale PNGs replicate it
  }
  return {width: png.width, height: png.height, pixels};
}

export function encodeGrayscalePng(width: number, height: number, pixels: Uint8Array): Buffer {
  const png = new PNG({width, height});
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = pixels[i];
    png.data[i * 4 + 1] = pixels[i];
    png.data[i * 4 + 2] = pixels[i];
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png);
}

export function parseYoloLabel(text: string): [number, number, number, number] | null {
  for (const raw of text.split('\n')) {
    const line = raw.trim();
    if (!line) continue;
    const parts = line.split(/\s+/);
    if (parts.length !== 5) {
      throw new Error(`malformed label line: "${line}"`);
    }
    const [cx, cy, w, h] = parts.slice(1).map(Number);
    if ([cx, cy, w, h].some((v) => !Number.isFinite(v))) {
      throw new Error(`non-numeric label line: "${line}"`);
    }
    return [cx, cy, w, h]; // single pupil class: first box wins
  }
  return null;
}

/** Load one split of the dataset layout: images/{split}/*.png + labels. */
export function loadSplit(datasetDir: string, split: string): LabeledImage[] {
  const imageDir = path.join(datasetDir, 'images', split);
  const labelDir = path.join(datasetDir, 'labels', split);
  if (!fs.existsSync(imageDir)) {
    throw new Error(`missing dataset split directory: ${imageDir}`);
  }
  const names = fs
    .readdirSync(imageDir)
    .filter((n) => n.toLowerCase().endsWith('.png'))
    .sort();
  if (names.length === 0) {
    throw new Error(`no images in ${imageDir}`);
  }
  return names.map((name) => {
    const decoded = decodeGrayscalePng(fs.readFileSync(path.join(imageDir, name)));
    const labelPath = path.join(labelDir, name.replace(/\.png$/i, '.txt'));
    let box: LabeledImage['box'] = null;
    if (fs.existsSync(labelPath)) {
      box = parseYoloLabel(fs.readFileSync(labelPath, 'utf-8'));
    }
    return {frame: name, ...decoded, box};
  });
}
