/**
 * Execute an emitted training script against a directory of exported data
 * and compare its final printed objective with the in-process trainer's.
 *
 * The script contract: it reads its inputs from $DATA_DIR and prints lines
 * of the form `objective: <number>`; the last such line is the final loss.
 * The in-process loss comes from the loss_trace.csv the trainer wrote next
 * to the data.
 */

import { spawnSync } from "node:child_process";
import { readFileSync } from "node:fs";
import { join } from "node:path";

export interface HarnessReport {
  scriptPath: string;
  finalLossEmitted: number;
  finalLossInterpreter: number;
  relDiff: number;
  pass: boolean;
}

export class ScriptFailure extends Error {
  readonly output: string;

  constructor(message: string, output: string) {
    super(`${message}\n--- captured output ---\n${output}`);
    this.name = "ScriptFailure";
    this.output = output;
  }
}

const OBJECTIVE_LINE = /objective:\s*(-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|nan|inf|-inf)/g;

/** Run the script under `python`, returning the last printed objective. */
export function runScript(
  scriptPath: string,
  dataDir: string,
  pythonBin = "python3",
  timeoutMs = 600_000,
): number {
  const result = spawnSync(pythonBin, [scriptPath], {
    env: { ...process.env, DATA_DIR: dataDir },
    encoding: "utf-8",
    timeout: timeoutMs,
    maxBuffer: 64 * 1024 * 1024,
  });
  const output = `${result.stdout ?? ""}\n${result.stderr ?? ""}`;
  if (result.error) {
    throw new ScriptFailure(`failed to launch ${pythonBin}: ${result.error.message}`, output);
  }
  if (result.status !== 0) {
    throw new ScriptFailure(`script exited with status ${result.status}`, output);
  }
  const matches = [...(result.stdout ?? "").matchAll(OBJECTIVE_LINE)];
  if (matches.length === 0) {
    throw new ScriptFailure("script printed no objective lines", output);
  }
  return Number(matches[matches.length - 1][1]);
}

/** Final objective recorded by the in-process trainer (loss_trace.csv). */
export function readInterpreterLoss(dataDir: string): number {
  const text = readFileSync(join(dataDir, "loss_trace.csv"), "utf-8");
  const lines = text.trim().split("\n");
  if (lines.length < 2) {
    throw new ScriptFailure("loss_trace.csv has no data rows", text);
  }
  const last = lines[lines.length - 1].split(",");
  return Number(last[1]);
}

export function relativeDifference(a: number, b: number): number {
  return Math.abs(a - b) / Math.max(1, Math.abs(a), Math.abs(b));
}

/** Build the report; pass requires finite losses within tolerance. */
export function compare(
  scriptPath: string,
  finalLossEmitted: number,
  finalLossInterpreter: number,
  tolerance = 1e-2,
): HarnessReport {
  const relDiff = relativeDifference(finalLossEmitted, finalLossInterpreter);
  const finite = Number.isFinite(finalLossEmitted) && Number.isFinite(finalLossInterpreter);
  return {
    scriptPath,
    finalLossEmitted,
    finalLossInterpreter,
    relDiff,
    pass: finite && relDiff <= tolerance,
  };
}

export function runAndCompare(
  scriptPath: string,
  dataDir: string,
  tolerance = 1e-2,
  pythonBin = "python3",
): HarnessReport {
  const emitted = runScript(scriptPath, dataDir, pythonBin);
  const interpreter = readInterpreterLoss(dataDir);
  return compare(scriptPath, emitted, interpreter, tolerance);
}
