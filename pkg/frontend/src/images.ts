/**
 * Image-folder walking and decoding.
 *
 * Layout convention: one subdirectory per class under the root; every
 * readable image inside becomes one example with label = directory name.
 * PNG is decoded via pngjs, binary PPM (P6) by hand. Unreadable or
 * unsupported files are skipped with a warning and counted.
 */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

export interface RawImage {
  /** id in the output file: path relative to the root, forward slashes */
  id: string;
  className: string;
  width: number;
  height: number;
  /** RGB, row-major, 3 channels, values 0..255 */
  pixels: Float32Array;
}

export interface FolderScan {
  images: RawImage[];
  skipped: number;
  classNames: string[];
}

const IMAGE_EXTENSIONS = new Set([".png", ".ppm"]);

export function decodePng(data: Buffer): { width: number; height: number; pixels: Float32Array } {
  const png = PNG.sync.read(data);
  const pixels = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    pixels[i * 3] = png.data[i * 4];
    pixels[i * 3 + 1] = png.data[i * 4 + 1];
    pixels[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, pixels };
}

export function decodePpm(data: Buffer): { width: number; height: number; pixels: Float32Array } {
  // P6 header: magic, width, height, maxval, single whitespace, then raw RGB
  let offset = 0;
  const token = () => {
    while (offset < data.length && /\s/.test(String.fromCharCode(data[offset]))) offset++;
    if (data[offset] === 0x23) {
      // comment line
      while (offset < data.length && data[offset] !== 0x0a) offset++;
      return token();
    }
    const start = offset;
    while (offset < data.length && !/\s/.test(String.fromCharCode(data[offset]))) offset++;
    return data.subarray(start, offset).toString("ascii");
  };
  const magic = token();
  if (magic !== "P6") throw new Error(`unsupported PPM magic ${magic}`);
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0) || maxval <= 0 || maxval > 255) {
    throw new Error("bad PPM header");
  }
  offset++; // single whitespace after maxval
  const need = width * height * 3;
  if (data.length - offset < need) throw new Error("truncated PPM payload");
  const pixels = new Float32Array(need);
  const scale = 255 / maxval;
  for (let i = 0; i < need; i++) pixels[i] = data[offset + i] * scale;
  return { width, height, pixels };
}

export function decodeImage(filePath: string): { width: number; height: number; pixels: Float32Array } {
  const ext = path.extname(filePath).toLowerCase();
  const data = fs.readFileSync(filePath);
  if (ext === ".png") return decodePng(data);
  if (ext === ".ppm") return decodePpm(data);
  throw new Error(`unsupported image type ${ext}`);
}

export function scanFolder(root: string): FolderScan {
  const classNames = fs
    .readdirSync(root, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classNames.length === 0) {
    throw new Error(`no class directories under ${root}`);
  }
  const images: RawImage[] = [];
  let skipped = 0;
  for (const className of classNames) {
    const dir = path.join(root, className);
    for (const file of fs.readdirSync(dir).sort()) {
      const full = path.join(dir, file);
      if (!fs.statSync(full).isFile()) continue;
      if (!IMAGE_EXTENSIONS.has(path.extname(file).toLowerCase())) {
        console.warn(`skipping unsupported file: ${full}`);
        skipped++;
        continue;
      }
      try {
        const decoded = decodeImage(full);
        images.push({
          id: `${className}/${file}`,
          className,
          ...decoded,
        });
      } catch (err) {
        console.warn(`skipping unreadable image ${full}: ${(err as Error).message}`);
        skipped++;
      }
    }
  }
  if (images.length === 0) {
    throw new Error(`no readable images under ${root}`);
  }
  return { images, skipped, classNames };
}
