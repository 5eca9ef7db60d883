/**
 * SplitMix64 over BigInt: deterministic weight initialization for the
 * seeded-backbone path. The stream only has to be reproducible across
 * runs of this tool, so no cross-language contract applies here.
 */

const MASK = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

function mix64(z: bigint): bigint {
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint | number) {
    this.state = BigInt(seed) & MASK;
  }

  nextU64(): bigint {
    this.state = (this.state + GAMMA) & MASK;
    return mix64(this.state);
  }

  /** uniform in [0, 1) with 53 bits */
  random(): number {
    return Number(this.nextU64() >> 11n) / 2 ** 53;
  }

  /** standard normal via Box-Muller */
  normal(): number {
    const u1 = (Number(this.nextU64() >> 11n) + 1) / (2 ** 53 + 1);
    const u2 = this.random();
    return Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
  }

  normals(n: number, scale = 1): Float32Array {
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = this.normal() * scale;
    return out;
  }
}
