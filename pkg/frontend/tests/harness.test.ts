import { spawnSync } from "node:child_process";
import { cpSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, test } from "vitest";

import {
  compare,
  readInterpreterLoss,
  relativeDifference,
  runAndCompare,
  runScript,
  ScriptFailure,
} from "../src/harness.js";

const HERE = fileURLToPath(new URL(".", import.meta.url));
const REPO_ROOT = join(HERE, "..", "..");
const LINREG = join(REPO_ROOT, "fixtures", "linreg");
const PYTHON = process.env.PYTHON_BIN ?? "python3";

function runCli(args: string[]): void {
  const result = spawnSync(PYTHON, ["-m", "sqlgrad.cli", ...args], {
    encoding: "utf-8",
    cwd: REPO_ROOT,
  });
  if (result.status !== 0) {
    throw new Error(`sqlgrad CLI failed: ${result.stderr}`);
  }
}

describe("compare", () => {
  test("within one percent passes", () => {
    const report = compare("s.py", 10.0, 10.05);
    expect(report.pass).toBe(true);
    expect(report.relDiff).toBeCloseTo(0.05 / 10.05, 10);
  });

  test("twenty percent apart fails", () => {
    expect(compare("s.py", 10.0, 12.0).pass).toBe(false);
  });

  test("non-finite loss fails regardless of difference", () => {
    const report = compare("s.py", Number.NaN, 10.0);
    expect(report.pass).toBe(false);
  });

  test("relative difference uses max(1, |a|, |b|)", () => {
    expect(relativeDifference(0.001, 0.002)).toBeCloseTo(0.001, 12);
    expect(relativeDifference(100, 101)).toBeCloseTo(1 / 101, 12);
  });
});

describe("runScript", () => {
  test("captures the last printed objective", () => {
    const dir = mkdtempSync(join(tmpdir(), "harness-"));
    const script = join(dir, "fake_train.py");
    writeFileSync(script, [
      'print("objective:", 3.0)',
      'print("objective:", 2.5)',
      'print("objective:", 2.25)',
    ].join("\n"));
    expect(runScript(script, dir, PYTHON)).toBe(2.25);
  });

  test("zero-iteration script reports its initial objective", () => {
    const dir = mkdtempSync(join(tmpdir(), "harness-"));
    const script = join(dir, "zero_iter.py");
    writeFileSync(script, [
      "initial = 42.0",
      "for step in range(0):",
      "    initial = initial - 1",
      'print("objective:", initial)',
    ].join("\n"));
    expect(runScript(script, dir, PYTHON)).toBe(42.0);
  });

  test("syntax damage raises ScriptFailure with captured output", () => {
    const dir = mkdtempSync(join(tmpdir(), "harness-"));
    const script = join(dir, "broken.py");
    writeFileSync(script, "def broken(:\n");
    expect(() => runScript(script, dir, PYTHON)).toThrowError(ScriptFailure);
  });

  test("missing objective lines raise ScriptFailure", () => {
    const dir = mkdtempSync(join(tmpdir(), "harness-"));
    const script = join(dir, "silent.py");
    writeFileSync(script, 'print("all done")\n');
    expect(() => runScript(script, dir, PYTHON)).toThrowError(/no objective lines/);
  });
});

describe("emitted-script equivalence", () => {
  const work = mkdtempSync(join(tmpdir(), "harness-e2e-"));
  const fixtureSnapshot = new Map<string, string>();

  beforeAll(() => {
    for (const name of ["features.csv", "targets.csv", "observations.csv"]) {
      fixtureSnapshot.set(name, readFileSync(join(LINREG, name), "utf-8"));
    }
    const common = [
      "--sql", join(LINREG, "model.sql"),
      "--config", join(LINREG, "config.cfg"),
      "--data-dir", LINREG,
      "--out-dir", work,
    ];
    runCli(["train", ...common]);
    runCli(["translate", ...common]);
  }, 120_000);

  test("final losses agree within 1e-2 relative", () => {
    const report = runAndCompare(join(work, "model_train.py"), work, 1e-2, PYTHON);
    expect(Number.isFinite(report.finalLossEmitted)).toBe(true);
    expect(Number.isFinite(report.finalLossInterpreter)).toBe(true);
    expect(report.relDiff).toBeLessThanOrEqual(1e-2);
    expect(report.pass).toBe(true);
  }, 300_000);

  test("reruns are idempotent and fixtures are untouched", () => {
    const first = runAndCompare(join(work, "model_train.py"), work, 1e-2, PYTHON);
    const second = runAndCompare(join(work, "model_train.py"), work, 1e-2, PYTHON);
    expect(second).toEqual(first);
    for (const [name, before] of fixtureSnapshot) {
      expect(readFileSync(join(LINREG, name), "utf-8")).toBe(before);
    }
  }, 600_000);

  test("interpreter loss comes from the trace artifact", () => {
    const loss = readInterpreterLoss(work);
    expect(Number.isFinite(loss)).toBe(true);
  });
});
