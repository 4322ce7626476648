/** Pure risk arithmetic over a validated bundle.
 *
 * This mirrors the exporter's reference path exactly: z-score, logit,
 * clamped sigmoid, per-axis points with range clamping, probability
 * readback by table interpolation, and background-relative attributions.
 * The model is never refit here; everything is a function of
 * (bundle, inputs).
 */

import type { Axis, HorizonEntry, Horizon, ModelBundle } from "./bundle.js";
import { HORIZONS } from "./bundle.js";

export interface HorizonRisk {
  probability: number;
  probabilityFromPoints: number;
  totalPoints: number;
  points: Record<string, number>;
  clamped: string[];
  attributions: Record<string, number>;
  baseValue: number;
}

export type RiskResult = Record<Horizon, HorizonRisk>;

const PROB_FLOOR = 1e-15;

export function sigmoid(z: number): number {
  if (z >= 0) {
    return 1 / (1 + Math.exp(-z));
  }
  const ez = Math.exp(z);
  return ez / (1 + ez);
}

/** Linear interpolation over an ascending grid, constant beyond the ends. */
export function interpolate(x: number, xs: number[], ys: number[]): number {
  const n = xs.length;
  if (x <= (xs[0] as number)) return ys[0] as number;
  if (x >= (xs[n - 1] as number)) return ys[n - 1] as number;
  let lo = 0;
  let hi = n - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if ((xs[mid] as number) <= x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const x0 = xs[lo] as number;
  const x1 = xs[hi] as number;
  const y0 = ys[lo] as number;
  const y1 = ys[hi] as number;
  return y0 + ((x - x0) / (x1 - x0)) * (y1 - y0);
}

function axisPoints(axis: Axis, value: number): number {
  let frac = (value - axis.lo) / (axis.hi - axis.lo);
  if (axis.direction < 0) {
    frac = 1 - frac;
  }
  return axis.span * frac;
}

function horizonRisk(
  entry: HorizonEntry,
  names: string[],
  x: number[],
  background: number[],
): HorizonRisk {
  let logit = entry.intercept;
  let base = entry.intercept;
  const attributions: Record<string, number> = {};
  for (let i = 0; i < names.length; i++) {
    const mean = entry.norm_mean[i] as number;
    const sd = entry.norm_sd[i] as number;
    const coef = entry.coefficients[i] as number;
    const z = ((x[i] as number) - mean) / sd;
    const zBar = ((background[i] as number) - mean) / sd;
    logit += coef * z;
    base += coef * zBar;
    attributions[names[i] as string] = coef * (z - zBar);
  }
  const probability = Math.min(Math.max(sigmoid(logit), PROB_FLOOR), 1 - PROB_FLOOR);

  const points: Record<string, number> = {};
  const clamped: string[] = [];
  let total = 0;
  for (let i = 0; i < names.length; i++) {
    const axis = entry.nomogram.axes[i] as Axis;
    let v = x[i] as number;
    if (v < axis.lo || v > axis.hi) {
      v = Math.min(Math.max(v, axis.lo), axis.hi);
      clamped.push(axis.name);
    }
    const p = axisPoints(axis, v);
    points[axis.name] = p;
    total += p;
  }

  return {
    probability,
    probabilityFromPoints: interpolate(
      total,
      entry.nomogram.prob_map.points,
      entry.nomogram.prob_map.prob,
    ),
    totalPoints: total,
    points,
    clamped,
    attributions,
    baseValue: base,
  };
}

/** Score one patient against every horizon in the bundle. */
export function computeRisk(bundle: ModelBundle, patient: Record<string, number>): RiskResult {
  const names = bundle.feature_names;
  const x: number[] = [];
  for (const nm of names) {
    const value = patient[nm];
    if (value === undefined || !Number.isFinite(value)) {
      throw new Error(`missing or non-numeric value for ${nm}`);
    }
    x.push(value);
  }
  const background = names.map((nm) => bundle.background_mean[nm] as number);
  const out = {} as RiskResult;
  for (const h of HORIZONS) {
    out[h] = horizonRisk(bundle.horizons[h], names, x, background);
  }
  return out;
}
