export interface DecayFitResult {
  slope: number;
  intercept: number;
  rSquared: number;
  window: [number, number];
  nSamples: number;
}

/**
 * Least-squares slope of log(values) against log(times) over a window.
 *
 * Same definition the simulator side uses to grade runs (mask t > 0 and
 * lo <= t <= hi, centered normal equations), so annotated slopes on the
 * figures agree with the run diagnostics instead of a second opinion.
 */
export function fitDecay(
  times: number[],
  values: number[],
  window?: [number, number],
  minSamples = 10
): DecayFitResult {
  if (times.length !== values.length) {
    throw new Error("times and values must have matching lengths");
  }
  const [lo, hi] = window ?? [0, Infinity];
  if (!(hi > lo)) {
    throw new Error(`empty window [${lo}, ${hi}]`);
  }
  const tv: number[] = [];
  const vv: number[] = [];
  for (let i = 0; i < times.length; i++) {
    const t = times[i]!;
    if (t > 0 && t >= lo && t <= hi) {
      tv.push(t);
      vv.push(values[i]!);
    }
  }
  if (tv.length < minSamples) {
    throw new Error(`need at least ${minSamples} samples in window, got ${tv.length}`);
  }
  if (vv.some((v) => v <= 0)) {
    throw new Error("non-positive norm values inside the fit window");
  }
  const x = tv.map(Math.log);
  const y = vv.map(Math.log);
  const mean = (a: number[]) => a.reduce((s, v) => s + v, 0) / a.length;
  const xMean = mean(x);
  const yMean = mean(y);
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < x.length; i++) {
    const xc = x[i]! - xMean;
    sxx += xc * xc;
    sxy += xc * y[i]!;
  }
  if (sxx === 0) {
    throw new Error("degenerate window: all times equal");
  }
  const slope = sxy / sxx;
  const intercept = yMean - slope * xMean;
  let ssRes = 0;
  let ssTot = 0;
  for (let i = 0; i < x.length; i++) {
    const r = y[i]! - (slope * x[i]! + intercept);
    ssRes += r * r;
    const c = y[i]! - yMean;
    ssTot += c * c;
  }
  const rSquared = ssTot === 0 ? 1 : 1 - ssRes / ssTot;
  return {
    slope,
    intercept,
    rSquared,
    window: [lo, Math.min(hi, tv[tv.length - 1]!)],
    nSamples: tv.length,
  };
}
