import * as fs from 'fs';
import {z} from 'zod';

export const MODEL_VARIANTS = ['n', 's', 'm', 'l'] as const;
export type ModelVariant = (typeof MODEL_VARIANTS)[number];

export interface VariantInfo {
  /** Published parameter count of the full-scale detector, in millions. */
  nominalParamsMillions: number;
  /** Channel widths of the local surrogate backbone. */
  channels: [number, number, number];
}

// Reference sizes of the four detector variants (reported, not rebuilt here);
// the surrogate only scales its channel widths with the variant.
export const VARIANT_TABLE: Record<ModelVariant, VariantInfo> = {
  n: {nominalParamsMillions: 3.0, channels: [8, 16, 32]},
  s: {nominalParamsMillions: 11.1, channels: [12, 24, 48]},
  m: {nominalParamsMillions: 25.8, channels: [16, 32, 64]},
  l: {nominalParamsMillions: 43.6, channels: [24, 48, 96]},
};

export const runSpecSchema = z.object({
  dataset_dir: z.string().min(1),
  model_variant: z.enum(MODEL_VARIANTS).default('n'),
  epochs: z.number().int().min(1).default(3),
  learning_rate: z.number().positive().default(1e-3),
  weight_decay: z.number().min(0).default(1e-3),
  artifact_dir: z.string().min(1),
  detections_path: z.string().min(1),
  split: z.enum(['train', 'val', 'test']).default('train'),
  min_confidence: z.number().min(0).max(1).default(0.0),
  batch_size: z.number().int().min(1).default(4),
  seed: z.number().int().min(0).default(0),
});

export type AdapterRunSpec = z.infer<typeof runSpecSchema>;

export function loadRunSpec(path: string): AdapterRunSpec {
  const raw = JSON.parse(fs.readFileSync(path, 'utf-8'));
  const parsed = runSpecSchema.safeParse(raw);
  if (!parsed.success) {
    throw new Error(`invalid run spec ${path}: ${parsed.error.message}`);
  }
  return parsed.data;
}

/** Interchange schema consumed by the primary pipeline's loader. */
export const detectionRecordSchema = z
  .object({
    frame: z.string().min(1),
    class: z.number().int().min(0),
    box: z.tuple([z.number(), z.number(), z.number(), z.number()]),
    conf: z.number().min(0).max(1),
  })
  .refine((r) => r.box[0] < r.box[2] && r.box[1] < r.box[3], {
    message: 'degenerate box',
  });

export const detectionsFileSchema = z.array(detectionRecordSchema);
export type DetectionRecord = z.infer<typeof detectionRecordSchema>;
