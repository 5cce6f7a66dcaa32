/**
 * Command-line entry: riglid-figures --spec PATH
 *
 * The spec is a JSON FigureSpec; paths inside it are resolved relative to
 * the spec file's directory.
 */

import { readFileSync, writeFileSync } from "fs";
import { dirname, resolve } from "path";

import { FigureSpec, figureSlope, renderFigure } from "./figures.js";

function usage(): never {
  console.error("usage: riglid-figures --spec PATH");
  process.exit(2);
}

export function main(argv: string[]): number {
  const idx = argv.indexOf("--spec");
  if (idx < 0 || idx + 1 >= argv.length) {
    usage();
  }
  const specPath = argv[idx + 1];
  let spec: FigureSpec;
  try {
    spec = JSON.parse(readFileSync(specPath, "utf-8")) as FigureSpec;
  } catch (err) {
    console.error(`cannot read spec ${specPath}: ${(err as Error).message}`);
    return 2;
  }
  const base = dirname(resolve(specPath));
  const inputPath = resolve(base, spec.input);
  const outputPath = resolve(base, spec.output);
  try {
    const csvText = readFileSync(inputPath, "utf-8");
    const svg = renderFigure(spec, csvText);
    writeFileSync(outputPath, svg);
    const slope = figureSlope(spec, csvText);
    console.log(`${outputPath}: kind=${spec.kind} slope=${isFinite(slope) ? slope : "n/a"}`);
    return 0;
  } catch (err) {
    console.error(`figure failed: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
