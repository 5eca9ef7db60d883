/**
 * Feature backbones.
 *
 * Two ways to get one:
 *  - `--weights <path>`: load a saved tfjs LayersModel (any architecture;
 *    the classification head, if present, is stripped so features come
 *    from the penultimate layer).
 *  - `--weights random:<seed>`: build a MobileNet-style depthwise-separable
 *    stack with deterministic seeded weights. Untrained features are still
 *    useful as a fixed random projection for smoke tests and toy runs; the
 *    output records that the variant is "random" so nobody mistakes them
 *    for pretrained features.
 *
 * Pretrained weights for the named families are not bundled; asking for
 * resnet18 / resnet50 / densenet without a weights file is an error.
 */

import * as tf from "@tensorflow/tfjs";
import { SplitMix64 } from "./rng";

export const BACKBONES = ["mobilenet", "resnet18", "resnet50", "densenet"] as const;
export type BackboneName = (typeof BACKBONES)[number];

export interface Backbone {
  model: tf.LayersModel;
  featureDim: number;
  variant: string;
}

/** MobileNet-style separable-conv feature extractor ending in global pooling. */
export function buildMobileNetFeatures(inputSize: number, width: number): tf.LayersModel {
  const round8 = (c: number) => Math.max(8, Math.round((c * width) / 8) * 8);
  const input = tf.input({ shape: [inputSize, inputSize, 3] });
  let x = tf.layers
    .conv2d({ filters: round8(32), kernelSize: 3, strides: 2, padding: "same", useBias: true })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers.reLU({ maxValue: 6 }).apply(x) as tf.SymbolicTensor;
  const blocks: Array<[number, number]> = [
    [64, 1],
    [128, 2],
    [128, 1],
    [256, 2],
    [256, 1],
    [512, 2],
    [512, 1],
    [512, 1],
    [512, 1],
    [512, 1],
    [512, 1],
    [1024, 2],
    [1024, 1],
  ];
  for (const [filters, stride] of blocks) {
    x = tf.layers
      .depthwiseConv2d({ kernelSize: 3, strides: stride, padding: "same", useBias: true })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.reLU({ maxValue: 6 }).apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .conv2d({ filters: round8(filters), kernelSize: 1, strides: 1, padding: "same", useBias: true })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.reLU({ maxValue: 6 }).apply(x) as tf.SymbolicTensor;
  }
  const pooled = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: pooled });
}

/** He-style seeded weights: N(0, 2/fan_in) kernels, zero biases. */
export function seedWeights(model: tf.LayersModel, seed: number): void {
  const rng = new SplitMix64(seed);
  for (const variable of model.weights) {
    const shape = variable.shape as number[]; // weight shapes are concrete
    const size = shape.reduce((a, b) => a * b, 1);
    if (shape.length === 1) {
      variable.write(tf.zeros(shape)); // biases
      continue;
    }
    // depthwise kernels are [h, w, channels, multiplier]: each output sees
    // only its own channel, so fan_in is the kernel area alone
    const fanIn = variable.name.includes("depthwise")
      ? shape[0] * shape[1]
      : shape.slice(0, -1).reduce((a, b) => a * b, 1);
    variable.write(tf.tensor(rng.normals(size, Math.sqrt(2 / fanIn)), shape));
  }
}

function stripClassifierHead(model: tf.LayersModel): tf.LayersModel {
  const last = model.layers[model.layers.length - 1];
  const cls = last.getClassName();
  if ((cls === "Dense" || cls === "Activation" || cls === "Softmax") && model.layers.length > 1) {
    const inner = model.layers[model.layers.length - (cls === "Dense" ? 2 : 3)];
    return tf.model({ inputs: model.inputs, outputs: inner.output as tf.SymbolicTensor });
  }
  return model;
}

export async function loadBackbone(
  name: string,
  inputSize: number,
  weights: string,
  width: number,
): Promise<Backbone> {
  if (!(BACKBONES as readonly string[]).includes(name)) {
    throw new Error(`unknown backbone ${name}; expected one of ${BACKBONES.join(", ")}`);
  }
  let model: tf.LayersModel;
  let variant: string;
  if (weights.startsWith("random:")) {
    if (name !== "mobilenet") {
      throw new Error(`${name} needs a pretrained weights file; only mobilenet supports random:<seed>`);
    }
    const seed = parseInt(weights.slice("random:".length), 10);
    if (!Number.isFinite(seed)) throw new Error(`bad seed in ${weights}`);
    model = buildMobileNetFeatures(inputSize, width);
    seedWeights(model, seed);
    variant = `random-init(seed=${seed},width=${width})`;
  } else {
    const url = weights.includes("://") ? weights : `file://${weights}`;
    model = stripClassifierHead(await tf.loadLayersModel(url));
    variant = `weights(${weights})`;
  }
  const outShape = model.outputs[0].shape;
  const featureDim = outShape[outShape.length - 1];
  if (!featureDim || featureDim < 1) {
    throw new Error("backbone output has no channel dimension");
  }
  return { model, featureDim, variant };
}
