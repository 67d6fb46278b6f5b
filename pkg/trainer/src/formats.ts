/**
 * Binary exchange formats shared with the DOA toolkit.
 *
 * .spx: "SPX1", u32 LE L, K, M, then channel-major planes of complex
 *       interleaved (re, im) float-32 LE, rows t-major then f.
 * .msk: "MSK1", u32 LE L, K, provenance byte (0 oracle, 1 estimated),
 *       then float-32 LE planes irm_s and irm_d, t-major.
 *
 * Round-trips must be bit-exact; all floats are little-endian.
 */

import * as fs from 'fs';

export interface SpxTensor {
  frames: number;
  bins: number;
  channels: number;
  /** Interleaved (re, im) per channel plane, length frames*bins*2 each. */
  planes: Float32Array[];
}

export interface MaskPair {
  frames: number;
  bins: number;
  provenance: 'oracle' | 'estimated';
  irmS: Float32Array;
  irmD: Float32Array;
}

const SPX_MAGIC = 'SPX1';
const MSK_MAGIC = 'MSK1';

function alignedFloats(buf: Buffer, offset: number, count: number): Float32Array {
  // Buffer slices are rarely 4-byte aligned; copy into a fresh ArrayBuffer.
  const bytes = buf.subarray(offset, offset + count * 4);
  const copy = new Uint8Array(count * 4);
  copy.set(bytes);
  return new Float32Array(copy.buffer);
}

export function readSpx(path: string): SpxTensor {
  const buf = fs.readFileSync(path);
  if (buf.length < 16 || buf.toString('latin1', 0, 4) !== SPX_MAGIC) {
    throw new Error(`${path}: not an SPX1 file`);
  }
  const frames = buf.readUInt32LE(4);
  const bins = buf.readUInt32LE(8);
  const channels = buf.readUInt32LE(12);
  const expected = 16 + frames * bins * channels * 8;
  if (buf.length !== expected) {
    throw new Error(`${path}: expected ${expected} bytes, found ${buf.length}`);
  }
  const planes: Float32Array[] = [];
  for (let m = 0; m < channels; m++) {
    planes.push(alignedFloats(buf, 16 + m * frames * bins * 8, frames * bins * 2));
  }
  return { frames, bins, channels, planes };
}

export function writeSpx(path: string, spx: SpxTensor): void {
  const header = Buffer.alloc(16);
  header.write(SPX_MAGIC, 0, 'latin1');
  header.writeUInt32LE(spx.frames, 4);
  header.writeUInt32LE(spx.bins, 8);
  header.writeUInt32LE(spx.channels, 12);
  const parts: Uint8Array[] = [header];
  for (const plane of spx.planes) {
    parts.push(new Uint8Array(plane.buffer, plane.byteOffset, plane.byteLength));
  }
  atomicWrite(path, Buffer.concat(parts));
}

/** Real part of one channel as a dense (frames, bins) row-major array. */
export function spxRealChannel(spx: SpxTensor, channel = 0): Float32Array {
  const plane = spx.planes[channel];
  const out = new Float32Array(spx.frames * spx.bins);
  for (let i = 0; i < out.length; i++) {
    out[i] = plane[2 * i];
  }
  return out;
}

export function readMsk(path: string): MaskPair {
  const buf = fs.readFileSync(path);
  if (buf.length < 13 || buf.toString('latin1', 0, 4) !== MSK_MAGIC) {
    throw new Error(`${path}: not an MSK1 file`);
  }
  const frames = buf.readUInt32LE(4);
  const bins = buf.readUInt32LE(8);
  const prov = buf.readUInt8(12);
  if (prov !== 0 && prov !== 1) {
    throw new Error(`${path}: unknown provenance byte ${prov}`);
  }
  const expected = 13 + 2 * frames * bins * 4;
  if (buf.length !== expected) {
    throw new Error(`${path}: expected ${expected} bytes, found ${buf.length}`);
  }
  return {
    frames,
    bins,
    provenance: prov === 0 ? 'oracle' : 'estimated',
    irmS: alignedFloats(buf, 13, frames * bins),
    irmD: alignedFloats(buf, 13 + frames * bins * 4, frames * bins),
  };
}

export function writeMsk(path: string, masks: MaskPair): void {
  const n = masks.frames * masks.bins;
  if (masks.irmS.length !== n || masks.irmD.length !== n) {
    throw new Error('mask plane size does not match header dims');
  }
  const header = Buffer.alloc(13);
  header.write(MSK_MAGIC, 0, 'latin1');
  header.writeUInt32LE(masks.frames, 4);
  header.writeUInt32LE(masks.bins, 8);
  header.writeUInt8(masks.provenance === 'oracle' ? 0 : 1, 12);
  const parts: Uint8Array[] = [
    header,
    new Uint8Array(masks.irmS.buffer, masks.irmS.byteOffset, masks.irmS.byteLength),
    new Uint8Array(masks.irmD.buffer, masks.irmD.byteOffset, masks.irmD.byteLength),
  ];
  atomicWrite(path, Buffer.concat(parts));
}

function atomicWrite(path: string, data: Buffer): void {
  const tmp = `${path}.tmp-${process.pid}`;
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, path);
}
