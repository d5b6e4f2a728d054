/**
 * BoundSession: an immutable vocab + backend pair, plus an optional sampler
 * prompt advanced one sub-token at a time.
 *
 * Backends cross the boundary as specification strings (table:/ngram:/
 * replay:/uniform), never as callbacks, so the core's concurrency contract
 * stays intact and results are reproducible from the files alone.  Every
 * operation shells out to the CLI; numbers come back bit-identical through
 * repr parsing.  Sampler state is recomputed per call from the prompt, so
 * the core's one-model-call-per-advance guarantee does not extend across
 * the process boundary.
 */

import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CliOptions, firstValue, parseReprFloat, runCli, values } from "./cli.js";
import { ClosedSessionError, XtokError } from "./errors.js";
import { SoftLabelStep, formatSoftLabels } from "./softLabels.js";

export interface SessionConfig {
  /** Path to the vocab file (the full vocabulary the backend lives at). */
  vocabPath: string;
  /** Target subset bound M' for scoring and sampling. */
  bound: number;
  /** Backend specification string: uniform | table:FILE | ngram:FILE | replay:FILE[@BOUND]. */
  backend: string;
  launcher?: string[];
}

export interface PklResult {
  value: number;
  grads: number[][];
}

export interface ConvertUpOptions {
  encBound?: number;
  approx?: boolean;
  beams?: number;
  maxLen?: number;
  stop?: "eos" | "space";
}

export class BoundSession {
  private open = true;
  private prompt: number[] = [];
  private readonly config: SessionConfig;
  private readonly cliOptions: CliOptions;

  constructor(config: SessionConfig) {
    this.config = config;
    this.cliOptions = { launcher: config.launcher };
  }

  private assertOpen(): void {
    if (!this.open) {
      throw new ClosedSessionError();
    }
  }

  close(): void {
    this.open = false;
  }

  /** Log-probability of a subset encoding under the session backend. */
  score(tokenIds: number[]): number {
    return this.scoreMany([tokenIds])[0];
  }

  /** Batch scoring: one CLI invocation, one log-probability per encoding. */
  scoreMany(encodings: number[][]): number[] {
    this.assertOpen();
    const args = [
      "score",
      "--from-vocab", this.config.vocabPath,
      "--to-bound", String(this.config.bound),
      "--backend", this.config.backend,
    ];
    for (const ids of encodings) {
      args.push("--enc", ids.join(" "));
    }
    const records = runCli(args, this.cliOptions);
    const out = values(records, "logprob").map(parseReprFloat);
    if (out.length !== encodings.length) {
      throw new XtokError("CliProcess", `expected ${encodings.length} logprob records, got ${out.length}`);
    }
    return out;
  }

  /** Next-sub-token log-probabilities after the session prompt. */
  nextSubtokenDist(): number[] {
    this.assertOpen();
    const records = runCli(
      [
        "sample",
        "--from-vocab", this.config.vocabPath,
        "--to-bound", String(this.config.bound),
        "--backend", this.config.backend,
        "--prompt", this.prompt.join(" "),
        "--max-tokens", "0",
        "--print-dist",
      ],
      this.cliOptions,
    );
    return firstValue(records, "dist")
      .split(" ")
      .map((item) => parseReprFloat(item.slice(item.indexOf(":") + 1)));
  }

  /** Extend the sampler prompt by one sub-token. */
  advance(tokenId: number): void {
    this.assertOpen();
    const dist = this.nextSubtokenDist();
    if (tokenId < 0 || tokenId >= dist.length) {
      throw new XtokError("InvalidEncoding", `token id ${tokenId} outside the subset vocabulary`);
    }
    if (dist[tokenId] === Number.NEGATIVE_INFINITY) {
      throw new XtokError("ZeroProbabilityChoice", `sub-token ${tokenId} has zero probability`);
    }
    this.prompt.push(tokenId);
  }

  get promptIds(): number[] {
    return [...this.prompt];
  }

  resetPrompt(ids: number[] = []): void {
    this.assertOpen();
    this.prompt = [...ids];
  }

  /** Probability of an encoding at a larger bound under the session backend. */
  convertProb(tokenIds: number[], options: ConvertUpOptions = {}): number {
    this.assertOpen();
    const args = [
      "convert-up",
      "--vocab", this.config.vocabPath,
      "--backend", this.config.backend,
      "--enc", tokenIds.join(" "),
    ];
    if (options.encBound !== undefined) {
      args.push("--bound", String(options.encBound));
    }
    if (options.approx === true) {
      args.push("--approx");
    }
    if (options.beams !== undefined) {
      args.push("--beams", String(options.beams));
    }
    if (options.maxLen !== undefined) {
      args.push("--max-len", String(options.maxLen));
    }
    if (options.stop !== undefined) {
      args.push("--stop", options.stop);
    }
    return parseReprFloat(firstValue(runCli(args, this.cliOptions), "prob"));
  }

  convertProbExact(tokenIds: number[], encBound?: number): number {
    return this.convertProb(tokenIds, { encBound });
  }

  convertProbApprox(tokenIds: number[], options: ConvertUpOptions = {}): number {
    return this.convertProb(tokenIds, { ...options, approx: true });
  }

  /** Partial-KL loss value and per-step analytic gradients. */
  pklLoss(steps: SoftLabelStep[]): PklResult {
    this.assertOpen();
    if (steps.length === 0) {
      return { value: 0.0, grads: [] };
    }
    const dir = mkdtempSync(join(tmpdir(), "xtok-labels-"));
    try {
      const path = join(dir, "labels.txt");
      writeFileSync(path, formatSoftLabels(steps));
      const records = runCli(
        ["loss", "--soft-labels", path, "--kind", "pkl", "--grad"],
        this.cliOptions,
      );
      const value = parseReprFloat(firstValue(records, "loss"));
      const grads = values(records, "grad").map((line) => {
        const parts = line.split(" ");
        return parts.slice(1).map(parseReprFloat);
      });
      return { value, grads };
    } finally {
      rmSync(dir, { recursive: true, force: true });
    }
  }
}
