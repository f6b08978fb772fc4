/**
 * Image decoding, patch zeroing, and the fixed-resolution feature grid.
 *
 * Masking happens on the decoded pixels in their original size; the
 * feature grid (the model's preprocessing) only ever sees the already
 * masked buffer.
 */

import fs from "node:fs";
import pngjs from "pngjs";
import jpeg from "jpeg-js";

export interface DecodedImage {
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel. */
  rgb: Uint8Array;
}

/** (x0, y0, x1, y1) half-open pixel bounds. */
export type Rect = readonly [number, number, number, number];

export class ImageDecodeError extends Error {}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);
const JPEG_MAGIC = Buffer.from([0xff, 0xd8, 0xff]);

export function decodeImage(bytes: Buffer): DecodedImage {
  try {
    if (bytes.subarray(0, 4).equals(PNG_MAGIC)) {
      const png = pngjs.PNG.sync.read(bytes);
      return {
        width: png.width,
        height: png.height,
        rgb: dropAlpha(png.data, png.width * png.height),
      };
    }
    if (bytes.subarray(0, 3).equals(JPEG_MAGIC)) {
      const img = jpeg.decode(bytes, { useTArray: true, formatAsRGBA: true });
      return {
        width: img.width,
        height: img.height,
        rgb: dropAlpha(img.data, img.width * img.height),
      };
    }
  } catch (err) {
    throw new ImageDecodeError(`cannot decode image: ${(err as Error).message}`);
  }
  throw new ImageDecodeError("unsupported image format (PNG and JPEG only)");
}

function dropAlpha(rgba: Uint8Array, pixels: number): Uint8Array {
  const rgb = new Uint8Array(pixels * 3);
  for (let p = 0; p < pixels; p++) {
    rgb[p * 3] = rgba[p * 4];
    rgb[p * 3 + 1] = rgba[p * 4 + 1];
    rgb[p * 3 + 2] = rgba[p * 4 + 2];
  }
  return rgb;
}

/** Decode the image referenced by register assets (file path or base64). */
export function loadImageAssets(assets: Record<string, unknown>): DecodedImage {
  const path = assets["image_path"];
  if (typeof path === "string") {
    let bytes: Buffer;
    try {
      bytes = fs.readFileSync(path);
    } catch (err) {
      throw new ImageDecodeError(
        `cannot read image file ${path}: ${(err as Error).message}`
      );
    }
    return decodeImage(bytes);
  }
  const b64 = assets["image_base64"];
  if (typeof b64 === "string") {
    return decodeImage(Buffer.from(b64, "base64"));
  }
  throw new ImageDecodeError("assets carry neither image_path nor image_base64");
}

/**
 * Copy of the image with every pixel inside the given rectangles set to
 * zero, in original pixel space.  Bounds are clamped to the image.
 */
export function zeroPatches(image: DecodedImage, rects: readonly Rect[]): DecodedImage {
  const rgb = new Uint8Array(image.rgb);
  for (const rect of rects) {
    const x0 = Math.max(0, rect[0]);
    const y0 = Math.max(0, rect[1]);
    const x1 = Math.min(image.width, rect[2]);
    const y1 = Math.min(image.height, rect[3]);
    for (let y = y0; y < y1; y++) {
      const row = y * image.width;
      for (let x = x0; x < x1; x++) {
        const off = (row + x) * 3;
        rgb[off] = 0;
        rgb[off + 1] = 0;
        rgb[off + 2] = 0;
      }
    }
  }
  return { width: image.width, height: image.height, rgb };
}

export const FEATURE_GRID = 16;

/**
 * Box-averaged FEATURE_GRID x FEATURE_GRID RGB means scaled to [0, 1].
 * Cell edges sit at floor(i * size / grid), so any image size partitions
 * exactly; cells narrower than one pixel stay zero.
 */
export function imageFeatures(image: DecodedImage): Float64Array {
  const g = FEATURE_GRID;
  const out = new Float64Array(g * g * 3);
  for (let gy = 0; gy < g; gy++) {
    const y0 = Math.floor((gy * image.height) / g);
    const y1 = Math.floor(((gy + 1) * image.height) / g);
    for (let gx = 0; gx < g; gx++) {
      const x0 = Math.floor((gx * image.width) / g);
      const x1 = Math.floor(((gx + 1) * image.width) / g);
      let r = 0;
      let green = 0;
      let b = 0;
      let n = 0;
      for (let y = y0; y < y1; y++) {
        const row = y * image.width;
        for (let x = x0; x < x1; x++) {
          const off = (row + x) * 3;
          r += image.rgb[off];
          green += image.rgb[off + 1];
          b += image.rgb[off + 2];
          n++;
        }
      }
      if (n > 0) {
        const cell = (gy * g + gx) * 3;
        out[cell] = r / n / 255;
        out[cell + 1] = green / n / 255;
        out[cell + 2] = b / n / 255;
      }
    }
  }
  return out;
}
