/**
 * export --root <dir> --backbone <name> --size <84|224> --out <file>
 *        [--weights <path>|random:<seed>] [--batch-size N] [--width W]
 *
 * Writes one embedding row per image under root (one subdirectory per
 * class) in the fecemb v1 text format.
 */

import { runExport } from "./export";

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) {
      throw new Error(`flag ${arg} needs a value`);
    }
    out[arg.slice(2)] = value;
    i++;
  }
  return out;
}

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== "export") {
    console.error("usage: export --root <dir> --backbone <name> --size <84|224> --out <file>");
    return 2;
  }
  let flags: Record<string, string>;
  try {
    flags = parseArgs(argv.slice(1));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  for (const required of ["root", "backbone", "size", "out"]) {
    if (!(required in flags)) {
      console.error(`error: --${required} is required`);
      return 2;
    }
  }
  const size = parseInt(flags.size, 10);
  if (size !== 84 && size !== 224) {
    console.error("error: --size must be 84 or 224");
    return 2;
  }
  try {
    const report = await runExport({
      root: flags.root,
      backbone: flags.backbone,
      size,
      out: flags.out,
      weights: flags.weights ?? "random:0",
      batchSize: parseInt(flags["batch-size"] ?? "8", 10),
      width: parseFloat(flags.width ?? "1.0"),
    });
    console.log(
      `wrote ${report.examples} embeddings (d=${report.featureDim}, ` +
        `backbone=${flags.backbone}, variant=${report.variant}, skipped=${report.skipped}) to ${flags.out}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
