/** Bundle schema types and validation.
 *
 * Validation never throws: every problem becomes a banner message, so a
 * malformed bundle can never silently render a wrong number.
 */

export const SUPPORTED_SCHEMA_VERSION = 1;
export const HORIZONS = ["7", "14", "28"] as const;
export type Horizon = (typeof HORIZONS)[number];

export interface Axis {
  name: string;
  unit: string;
  lo: number;
  hi: number;
  span: number;
  direction: number;
  flat: boolean;
}

export interface NomogramTable {
  horizon_days: number;
  axes: Axis[];
  alpha: number;
  l0: number;
  total_points_max: number;
  prob_map: { points: number[]; prob: number[] };
  model_ref: string;
}

export interface HorizonEntry {
  intercept: number;
  coefficients: number[];
  norm_mean: number[];
  norm_sd: number[];
  nomogram: NomogramTable;
  svg?: string;
}

export interface ModelBundle {
  schema_version: number;
  feature_names: string[];
  units: Record<string, string>;
  background_mean: Record<string, number>;
  horizons: Record<Horizon, HorizonEntry>;
  provenance: Record<string, unknown>;
}

export type ValidationResult =
  | { ok: true; bundle: ModelBundle }
  | { ok: false; errors: string[] };

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isNumberArray(v: unknown, length?: number): v is number[] {
  return (
    Array.isArray(v) &&
    (length === undefined || v.length === length) &&
    v.every(isFiniteNumber)
  );
}

function checkHorizon(entry: unknown, key: string, names: string[], errors: string[]): void {
  if (!isRecord(entry)) {
    errors.push(`SchemaMismatch: horizon ${key} is not an object`);
    return;
  }
  const d = names.length;
  if (!isFiniteNumber(entry.intercept)) {
    errors.push(`SchemaMismatch: horizon ${key} lacks a numeric intercept`);
  }
  for (const field of ["coefficients", "norm_mean", "norm_sd"] as const) {
    if (!isNumberArray(entry[field], d)) {
      errors.push(`SchemaMismatch: horizon ${key} field ${field} must be ${d} numbers`);
    }
  }
  if (isNumberArray(entry.norm_sd, d) && entry.norm_sd.some((s) => s <= 0)) {
    errors.push(`SchemaMismatch: horizon ${key} has a non-positive norm_sd`);
  }

  const nomogram = entry.nomogram;
  if (!isRecord(nomogram)) {
    errors.push(`SchemaMismatch: horizon ${key} lacks its nomogram table`);
    return;
  }
  const axes = nomogram.axes;
  if (!Array.isArray(axes) || axes.length !== d) {
    errors.push(`SchemaMismatch: horizon ${key} needs ${d} nomogram axes`);
  } else {
    axes.forEach((axis, i) => {
      if (
        !isRecord(axis) ||
        axis.name !== names[i] ||
        !isFiniteNumber(axis.lo) ||
        !isFiniteNumber(axis.hi) ||
        !isFiniteNumber(axis.span) ||
        axis.lo >= axis.hi
      ) {
        errors.push(`SchemaMismatch: horizon ${key} axis ${i} is malformed`);
      }
    });
  }
  for (const field of ["alpha", "l0", "total_points_max"] as const) {
    if (!isFiniteNumber(nomogram[field])) {
      errors.push(`SchemaMismatch: horizon ${key} nomogram lacks numeric ${field}`);
    }
  }
  const probMap = nomogram.prob_map;
  if (
    !isRecord(probMap) ||
    !isNumberArray(probMap.points) ||
    !isNumberArray(probMap.prob) ||
    probMap.points.length !== probMap.prob.length ||
    probMap.points.length < 2
  ) {
    errors.push(`SchemaMismatch: horizon ${key} probability table is malformed`);
  } else {
    for (let i = 1; i < probMap.points.length; i++) {
      if (!((probMap.points[i] as number) > (probMap.points[i - 1] as number))) {
        errors.push(`SchemaMismatch: horizon ${key} probability table is not ascending`);
        break;
      }
    }
  }
}

/** Structural validation of an already-parsed JSON value. */
export function validateBundle(data: unknown): ValidationResult {
  const errors: string[] = [];
  if (!isRecord(data)) {
    return { ok: false, errors: ["MalformedBundle: bundle is not a JSON object"] };
  }
  if (data.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    errors.push(
      `SchemaMismatch: schema_version ${JSON.stringify(
        data.schema_version,
      )} is not supported (expected ${SUPPORTED_SCHEMA_VERSION})`,
    );
  }

  const names = data.feature_names;
  if (!Array.isArray(names) || names.length === 0 || !names.every((n) => typeof n === "string")) {
    errors.push("SchemaMismatch: feature_names must be a nonempty list of strings");
    return { ok: false, errors };
  }
  const featureNames = names as string[];

  const background = data.background_mean;
  if (!isRecord(background)) {
    errors.push("SchemaMismatch: background_mean must map feature names to numbers");
  } else {
    for (const nm of featureNames) {
      if (!isFiniteNumber(background[nm])) {
        errors.push(`SchemaMismatch: background_mean lacks feature ${nm}`);
      }
    }
  }

  const horizons = data.horizons;
  if (!isRecord(horizons)) {
    errors.push("SchemaMismatch: horizons must be an object");
  } else {
    for (const h of HORIZONS) {
      if (!(h in horizons)) {
        errors.push(`SchemaMismatch: bundle lacks horizon ${h}`);
      } else {
        checkHorizon(horizons[h], h, featureNames, errors);
      }
    }
  }

  if (errors.length > 0) {
    return { ok: false, errors };
  }
  return { ok: true, bundle: data as unknown as ModelBundle };
}

/** Parse raw JSON text, folding parse failures into the same result shape. */
export function parseBundle(text: string): ValidationResult {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    return { ok: false, errors: [`MalformedBundle: ${(err as Error).message}`] };
  }
  return validateBundle(data);
}
