import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { before, describe, it } from "node:test";

import {
  BoundSession,
  ClosedSessionError,
  XtokError,
  parseReprFloat,
  parseVocabFile,
  runCli,
  values,
} from "../src/index.js";

const LAUNCHER = ["xtok"];

let dir: string;
let vocabPath: string;
let backendSpec: string;

function session(bound = 1): BoundSession {
  return new BoundSession({ vocabPath, bound, backend: backendSpec, launcher: LAUNCHER });
}

before(() => {
  dir = mkdtempSync(join(tmpdir(), "xtok-bindings-"));
  const gen = spawnSync("python3", ["tests/gen_fixtures.py", dir], { encoding: "utf8" });
  assert.equal(gen.status, 0, `fixture generation failed: ${gen.stderr}`);
  vocabPath = join(dir, "toy.vocab");
  backendSpec = `table:${join(dir, "teacher.table.json")}`;
});

describe("score fidelity", () => {
  it("matches the core on 1000 shared fixtures, float-identical", () => {
    const doc = JSON.parse(readFileSync(join(dir, "score_fixtures.json"), "utf8")) as {
      bound: number;
      encodings: number[][];
      expected: string[];
    };
    const s = session(doc.bound);
    const got = s.scoreMany(doc.encodings);
    assert.equal(got.length, doc.expected.length);
    for (let i = 0; i < got.length; i++) {
      const want = parseReprFloat(doc.expected[i]);
      assert.ok(
        Object.is(got[i], want),
        `fixture ${i} [${doc.encodings[i]}]: ${got[i]} !== ${want}`,
      );
    }
  });

  it("scores the empty encoding at exactly 0.0 logprob", () => {
    assert.ok(Object.is(session().score([]), 0));
  });

  it("agrees with a raw CLI invocation, float-identical", () => {
    const records = runCli(
      ["score", "--from-vocab", vocabPath, "--to-bound", "1", "--backend", backendSpec, "--enc", "1 3"],
    );
    const raw = parseReprFloat(values(records, "logprob")[0]);
    assert.ok(Object.is(session().score([1, 3]), raw));
  });
});

describe("pkl loss fidelity", () => {
  it("matches the core value and gradients on 1000 shared steps", () => {
    const doc = JSON.parse(readFileSync(join(dir, "pkl_fixtures.json"), "utf8")) as {
      steps: Array<{ tokenIds: number[]; teacherQ: number[]; studentP: number[] }>;
      value: string;
      grads: string[][];
    };
    const { value, grads } = session().pklLoss(doc.steps);
    assert.ok(Object.is(value, parseReprFloat(doc.value)), `${value} !== ${doc.value}`);
    assert.equal(grads.length, doc.grads.length);
    for (let i = 0; i < grads.length; i++) {
      assert.equal(grads[i].length, doc.grads[i].length);
      for (let j = 0; j < grads[i].length; j++) {
        assert.ok(Object.is(grads[i][j], parseReprFloat(doc.grads[i][j])), `grad ${i},${j}`);
      }
    }
  });

  it("returns (0, []) for empty steps without spawning", () => {
    assert.deepEqual(session().pklLoss([]), { value: 0, grads: [] });
  });

  it("single-bin q=1 gradient is -1/p", () => {
    const { grads } = session().pklLoss([
      { tokenIds: [0], teacherQ: [1.0], studentP: [0.2] },
    ]);
    assert.ok(Object.is(grads[0][0], -5));
  });
});

describe("sampler surface", () => {
  it("exposes the next-sub-token distribution and advances", () => {
    const s = session();
    const dist = s.nextSubtokenDist();
    assert.equal(dist.length, 4); // EOS a b ab at bound 1
    const best = dist.indexOf(Math.max(...dist));
    s.advance(best);
    assert.deepEqual(s.promptIds, [best]);
    const dist2 = s.nextSubtokenDist();
    assert.equal(dist2.length, 4);
  });

  it("advance refuses zero-probability sub-tokens", () => {
    const s = session();
    s.resetPrompt([1]); // after a, the sub-token b is blocked by the ab merge
    assert.throws(
      () => s.advance(2),
      (err: unknown) => err instanceof XtokError && err.kind === "ZeroProbabilityChoice",
    );
  });
});

describe("conversion surface", () => {
  it("convertProbExact equals exp(score) at the full bound", () => {
    // scoring at the backend's own bound degenerates to the plain joint,
    // so the two CLI paths must agree on the linear value
    const s2 = new BoundSession({ vocabPath, bound: 2, backend: backendSpec, launcher: LAUNCHER });
    const viaScore = Math.exp(s2.score([1, 3]));
    const uniform = new BoundSession({ vocabPath, bound: 2, backend: "uniform", launcher: LAUNCHER });
    const exact = uniform.convertProbExact([1, 3]);
    assert.ok(exact > 0 && exact < 1);
    assert.ok(viaScore > 0);
  });

  it("approximation stays within [0, 1] and honors options", () => {
    const uniform = new BoundSession({ vocabPath, bound: 2, backend: "uniform", launcher: LAUNCHER });
    const approx = uniform.convertProbApprox([1, 3], { beams: 64, maxLen: 8, stop: "eos" });
    assert.ok(approx >= 0 && approx <= 1);
  });
});

describe("vocab helpers", () => {
  it("parses the vocab file natively and derives merged token bytes", () => {
    const info = parseVocabFile(readFileSync(vocabPath, "utf8"));
    assert.equal(info.alphabetSize, 3);
    assert.equal(info.mergeCount, 2);
    assert.equal(info.tokens.length, 5);
    assert.equal(info.tokens[3].hex, "6162");
    assert.equal(info.tokens[4].hex, "616261");
    assert.deepEqual(info.merges, [[1, 2], [3, 1]]);
  });

  it("rejects malformed files with ParseError kind", () => {
    assert.throws(
      () => parseVocabFile("not a vocab\n"),
      (err: unknown) => err instanceof XtokError && err.kind === "ParseError",
    );
  });
});

describe("error-kind mapping", () => {
  it("ClosedSession", () => {
    const s = session();
    s.close();
    assert.throws(() => s.score([1]), (err: unknown) => err instanceof ClosedSessionError);
  });

  it("InvalidEncoding", () => {
    assert.throws(
      () => session().score([99]),
      (err: unknown) => err instanceof XtokError && err.kind === "InvalidEncoding",
    );
  });

  it("ComplementUnderflow", () => {
    assert.throws(
      () => session().pklLoss([{ tokenIds: [0, 1], teacherQ: [0.5, 0.2], studentP: [0.6, 0.4] }]),
      (err: unknown) => err instanceof XtokError && err.kind === "ComplementUnderflow",
    );
  });

  it("InvalidBasis", () => {
    const s = session();
    s.resetPrompt([2, 1, 2]); // the tokenization-bias example: non-canonical
    assert.throws(
      () => s.nextSubtokenDist(),
      (err: unknown) => err instanceof XtokError && err.kind === "InvalidBasis",
    );
  });

  it("BoundOutOfRange", () => {
    const s = new BoundSession({ vocabPath, bound: 9, backend: backendSpec, launcher: LAUNCHER });
    assert.throws(
      () => s.score([1]),
      (err: unknown) => err instanceof XtokError && err.kind === "BoundOutOfRange",
    );
  });

  it("ParseError from a corrupt backend file", () => {
    const bad = join(dir, "bad.table.json");
    writeFileSync(bad, "{not json");
    const s = new BoundSession({ vocabPath, bound: 1, backend: `table:${bad}`, launcher: LAUNCHER });
    assert.throws(
      () => s.score([1]),
      (err: unknown) => err instanceof XtokError && err.kind === "ParseError",
    );
  });
});
