#!/usr/bin/env node
import { writeFileSync } from "node:fs";

import { MissingColumnError } from "./csv";
import { loadFigures } from "./figures";
import { renderFigure } from "./render";

export function runCli(argv: string[]): number {
  if (argv.length !== 1 || argv[0] === "--help" || argv[0] === "-h") {
    console.error("usage: plots <figures.json>");
    return argv.length === 1 ? 0 : 1;
  }
  let figures;
  try {
    figures = loadFigures(argv[0]!);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  for (const spec of figures) {
    try {
      const result = renderFigure(spec);
      writeFileSync(spec.output, result.svg);
      const extra =
        spec.kind === "decay" ? ` slope ${(result.meta["slope"] as number).toFixed(6)}` : "";
      console.log(`${spec.kind}: ${spec.input} -> ${spec.output}${extra}`);
    } catch (err) {
      if (err instanceof MissingColumnError) {
        console.error(`error: ${err.message}`);
        return 2;
      }
      console.error(`error: ${spec.kind} on ${spec.input}: ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

if (require.main === module) {
  process.exit(runCli(process.argv.slice(2)));
}
