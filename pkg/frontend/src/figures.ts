import { readFileSync } from "node:fs";
import { dirname, isAbsolute, resolve } from "node:path";

export const FIGURE_KINDS = ["decay", "blowup", "gap", "picard"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  input: string;
  kind: FigureKind;
  output: string;
  window?: [number, number];
  /** decay: norm column to fit, default L2 */
  column?: string;
  /** decay: space dimension for the reference slope, default 3 */
  dim?: number;
  /** decay: lower norm exponent for the reference slope, default 1 */
  mu?: number;
  /** decay: exponent of the fitted column; inferred from the column name if omitted */
  m?: number;
  /** blowup: vertical reference at the predicted horizon */
  tStar?: number;
  title?: string;
}

function fail(index: number, message: string): never {
  throw new Error(`figures[${index}]: ${message}`);
}

function checkSpec(raw: unknown, index: number, baseDir: string): FigureSpec {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    fail(index, "must be an object");
  }
  const obj = raw as Record<string, unknown>;
  for (const key of ["input", "output"]) {
    if (typeof obj[key] !== "string" || obj[key] === "") {
      fail(index, `'${key}' must be a non-empty path`);
    }
  }
  const kind = obj["kind"];
  if (typeof kind !== "string" || !FIGURE_KINDS.includes(kind as FigureKind)) {
    fail(index, `'kind' must be one of ${FIGURE_KINDS.join(", ")}`);
  }
  const spec: FigureSpec = {
    input: resolvePath(obj["input"] as string, baseDir),
    kind: kind as FigureKind,
    output: resolvePath(obj["output"] as string, baseDir),
  };
  if (obj["window"] !== undefined) {
    const w = obj["window"];
    if (
      !Array.isArray(w) ||
      w.length !== 2 ||
      typeof w[0] !== "number" ||
      typeof w[1] !== "number"
    ) {
      fail(index, "'window' must be [lo, hi]");
    }
    spec.window = [w[0], w[1]];
  }
  for (const key of ["dim", "mu", "m", "tStar"] as const) {
    if (obj[key] !== undefined) {
      if (typeof obj[key] !== "number") {
        fail(index, `'${key}' must be a number`);
      }
      spec[key] = obj[key] as number;
    }
  }
  if (obj["column"] !== undefined) {
    if (typeof obj["column"] !== "string") {
      fail(index, "'column' must be a string");
    }
    spec.column = obj["column"] as string;
  }
  if (obj["title"] !== undefined && typeof obj["title"] === "string") {
    spec.title = obj["title"];
  }
  return spec;
}

function resolvePath(p: string, baseDir: string): string {
  return isAbsolute(p) ? p : resolve(baseDir, p);
}

/** Load a figures.json: either an array of specs or { "figures": [...] }.
 * Relative input/output paths are taken relative to the JSON file. */
export function loadFigures(path: string): FigureSpec[] {
  const parsed: unknown = JSON.parse(readFileSync(path, "utf8"));
  const list = Array.isArray(parsed)
    ? parsed
    : typeof parsed === "object" && parsed !== null && Array.isArray((parsed as Record<string, unknown>)["figures"])
      ? ((parsed as Record<string, unknown>)["figures"] as unknown[])
      : null;
  if (list === null) {
    throw new Error(`${path}: expected an array of figure specs or {"figures": [...]}`);
  }
  const baseDir = dirname(resolve(path));
  return list.map((raw, i) => checkSpec(raw, i, baseDir));
}
