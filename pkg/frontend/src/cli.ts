/**
 * CLI transport: one synchronous subprocess per call, record-mode output.
 *
 * Floats cross the boundary as Python repr strings (shortest round-trip),
 * so parsing them recovers bit-identical doubles; no re-rounding happens on
 * this side of the fence.
 */

import { spawnSync } from "node:child_process";

import { CliProcessError, errorFromStderr } from "./errors.js";

export interface CliOptions {
  /** Command used to launch the CLI; default ["xtok"]. Use e.g.
   * ["python3", "-m", "xtok.cli"] when the entry point is not on PATH. */
  launcher?: string[];
}

export interface Record {
  key: string;
  value: string;
}

export function runCli(args: string[], options: CliOptions = {}): Record[] {
  const launcher = options.launcher ?? ["xtok"];
  const [cmd, ...prefix] = launcher;
  const result = spawnSync(cmd, [...prefix, ...args, "--records"], {
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error !== undefined) {
    throw new CliProcessError(`failed to launch ${launcher.join(" ")}: ${result.error.message}`);
  }
  if (result.status !== 0) {
    throw errorFromStderr(result.stderr ?? "", result.status);
  }
  const records: Record[] = [];
  for (const line of result.stdout.split("\n")) {
    if (line.length === 0) {
      continue;
    }
    const space = line.indexOf(" ");
    if (space < 0) {
      records.push({ key: line, value: "" });
    } else {
      records.push({ key: line.slice(0, space), value: line.slice(space + 1) });
    }
  }
  return records;
}

export function values(records: Record[], key: string): string[] {
  return records.filter((r) => r.key === key).map((r) => r.value);
}

export function firstValue(records: Record[], key: string): string {
  const hits = values(records, key);
  if (hits.length === 0) {
    throw new CliProcessError(`expected a '${key}' record in CLI output`);
  }
  return hits[0];
}

/** Parse a Python repr float, including inf/-inf/nan spellings. */
export function parseReprFloat(text: string): number {
  switch (text) {
    case "inf":
      return Number.POSITIVE_INFINITY;
    case "-inf":
      return Number.NEGATIVE_INFINITY;
    case "nan":
      return Number.NaN;
    default: {
      const out = Number(text);
      if (Number.isNaN(out) && text !== "nan") {
        throw new CliProcessError(`unparseable float ${JSON.stringify(text)}`);
      }
      return out;
    }
  }
}
