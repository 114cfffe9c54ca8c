import { readFileSync } from "node:fs";

export interface Table {
  header: string[];
  columns: Map<string, number[]>;
  rows: number;
}

export class MissingColumnError extends Error {
  readonly column: string;
  readonly path: string;

  constructor(column: string, path: string) {
    super(`missing column '${column}' in ${path}`);
    this.name = "MissingColumnError";
    this.column = column;
    this.path = path;
  }
}

function parseNumber(token: string, path: string, line: number): number {
  const t = token.trim();
  if (t === "nan") return NaN;
  if (t === "inf") return Infinity;
  if (t === "-inf") return -Infinity;
  if (t === "") throw new Error(`${path}:${line}: empty numeric field`);
  const v = Number(t);
  if (Number.isNaN(v)) {
    throw new Error(`${path}:${line}: cannot parse '${t}' as a number`);
  }
  return v;
}

export function parseCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length < 2) {
    throw new Error(`${path}: need a header row and at least one data row`);
  }
  const header = lines[0]!.split(",").map((h) => h.trim());
  const data = header.map(() => [] as number[]);
  for (let i = 1; i < lines.length; i++) {
    const tokens = lines[i]!.split(",");
    if (tokens.length !== header.length) {
      throw new Error(
        `${path}:${i + 1}: expected ${header.length} fields, got ${tokens.length}`
      );
    }
    for (let j = 0; j < tokens.length; j++) {
      data[j]!.push(parseNumber(tokens[j]!, path, i + 1));
    }
  }
  const columns = new Map<string, number[]>();
  header.forEach((name, j) => columns.set(name, data[j]!));
  return { header, columns, rows: lines.length - 1 };
}

export function requireColumns(table: Table, path: string, names: string[]): void {
  for (const name of names) {
    if (!table.columns.has(name)) {
      throw new MissingColumnError(name, path);
    }
  }
}

export function column(table: Table, name: string): number[] {
  const col = table.columns.get(name);
  if (col === undefined) {
    throw new Error(`column '${name}' not present`);
  }
  return col;
}
