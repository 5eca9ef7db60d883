/**
 * Export job: scan an image folder, embed every image with a backbone,
 * and write the embeddings as a `fecemb v1` text file.
 *
 * Labels are the class-directory names mapped to dense integers in
 * sorted order, matching the loader's deterministic class ordering.
 */

import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";
import { loadBackbone } from "./backbone";
import { RawImage, scanFolder } from "./images";

export interface ExportJob {
  root: string;
  backbone: string;
  size: 84 | 224;
  out: string;
  weights: string;
  batchSize: number;
  width: number;
}

export interface ExportReport {
  examples: number;
  skipped: number;
  featureDim: number;
  variant: string;
}

function toInputTensor(images: RawImage[], size: number): tf.Tensor4D {
  return tf.tidy(() => {
    const batch = images.map((img) => {
      const raw = tf.tensor3d(img.pixels, [img.height, img.width, 3]);
      const resized =
        img.height === size && img.width === size
          ? raw
          : tf.image.resizeBilinear(raw, [size, size], true);
      // mobilenet-style preprocessing: scale into [-1, 1]
      return resized.div(127.5).sub(1.0);
    });
    return tf.stack(batch) as tf.Tensor4D;
  });
}

/** shortest round-trip decimal for a float64 (JS String() guarantees it) */
export function formatFeature(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite feature value ${v}`);
  return String(v);
}

export function writeEmbeddingsText(
  path: string,
  rows: Array<{ id: string; label: number; features: Float32Array | number[] }>,
  dim: number,
): void {
  const lines = [`fecemb v1 n=${rows.length} d=${dim} labeled=1`];
  for (const row of rows) {
    if (row.id.includes(",") || row.id.includes("\n")) {
      throw new Error(`id ${JSON.stringify(row.id)} cannot appear in a fecemb file`);
    }
    const feats = Array.from(row.features, formatFeature).join(",");
    lines.push(`${row.id},${row.label},${feats}`);
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", { encoding: "utf-8" });
}

export async function runExport(job: ExportJob): Promise<ExportReport> {
  const scan = scanFolder(job.root);
  const labelOf = new Map(scan.classNames.map((name, i) => [name, i]));
  const backbone = await loadBackbone(job.backbone, job.size, job.weights, job.width);
  const rows: Array<{ id: string; label: number; features: Float32Array }> = [];
  for (let start = 0; start < scan.images.length; start += job.batchSize) {
    const chunk = scan.images.slice(start, start + job.batchSize);
    const input = toInputTensor(chunk, job.size);
    const output = backbone.model.predict(input) as tf.Tensor;
    const data = (await output.data()) as Float32Array;
    input.dispose();
    output.dispose();
    chunk.forEach((img, i) => {
      rows.push({
        id: img.id,
        label: labelOf.get(img.className)!,
        features: data.subarray(i * backbone.featureDim, (i + 1) * backbone.featureDim),
      });
    });
  }
  writeEmbeddingsText(job.out, rows, backbone.featureDim);
  return {
    examples: rows.length,
    skipped: scan.skipped,
    featureDim: backbone.featureDim,
    variant: backbone.variant,
  };
}
