/**
 * CLI wrapper: --script <path> --data-dir <dir> [--tolerance <rel>]
 * [--python <bin>]. Emits a one-line JSON report on stdout; exit 0 iff the
 * comparison passed, 2 on script failure.
 */

import { runAndCompare, ScriptFailure } from "./harness.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`expected --flag value pairs, got ${argv.join(" ")}`);
    }
    args.set(key.slice(2), value);
  }
  return args;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const script = args.get("script");
  const dataDir = args.get("data-dir");
  if (!script || !dataDir) {
    console.error("usage: harness --script <path> --data-dir <dir> [--tolerance <rel>]");
    return 2;
  }
  const tolerance = args.has("tolerance") ? Number(args.get("tolerance")) : 1e-2;
  const pythonBin = args.get("python") ?? "python3";
  try {
    const report = runAndCompare(script, dataDir, tolerance, pythonBin);
    console.log(JSON.stringify(report));
    return report.pass ? 0 : 1;
  } catch (err) {
    if (err instanceof ScriptFailure) {
      console.log(JSON.stringify({ scriptPath: script, error: err.name, pass: false }));
      console.error(err.message);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("main.js")
  || process.argv[1]?.endsWith("main.ts");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
