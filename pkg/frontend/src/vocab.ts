/**
 * Native parser for the vocab file format (no CLI round-trip needed):
 *   header  "xtok-vocab v1 |A|=<n> M=<m>"
 *   n alphabet symbol lines as hex bytes (EOS sentinel first)
 *   m merge lines "<left_id> <right_id>"
 */

import { XtokError } from "./errors.js";

export interface VocabToken {
  id: number;
  hex: string;
}

export interface VocabInfo {
  alphabetSize: number;
  mergeCount: number;
  tokens: VocabToken[];
  merges: Array<[number, number]>;
}

const HEADER = /^xtok-vocab v1 \|A\|=(\d+) M=(\d+)$/;

function concatHex(a: string, b: string): string {
  return a + b;
}

export function parseVocabFile(text: string): VocabInfo {
  const lines = text.split("\n").filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) {
    throw new XtokError("ParseError", "empty vocab file");
  }
  const header = HEADER.exec(lines[0]);
  if (header === null) {
    throw new XtokError("ParseError", `bad header: ${JSON.stringify(lines[0])}`);
  }
  const alphabetSize = Number(header[1]);
  const mergeCount = Number(header[2]);
  if (lines.length !== 1 + alphabetSize + mergeCount) {
    throw new XtokError(
      "ParseError",
      `expected ${alphabetSize} symbol and ${mergeCount} merge lines, found ${lines.length - 1}`,
    );
  }
  const tokens: VocabToken[] = [];
  for (let i = 0; i < alphabetSize; i++) {
    const hex = lines[1 + i].trim().toLowerCase();
    if (!/^([0-9a-f]{2})+$/.test(hex)) {
      throw new XtokError("ParseError", `bad hex symbol line: ${JSON.stringify(lines[1 + i])}`);
    }
    tokens.push({ id: i, hex });
  }
  const merges: Array<[number, number]> = [];
  for (let i = 0; i < mergeCount; i++) {
    const parts = lines[1 + alphabetSize + i].trim().split(/\s+/);
    if (parts.length !== 2) {
      throw new XtokError("ParseError", `bad merge line: ${JSON.stringify(lines[1 + alphabetSize + i])}`);
    }
    const left = Number(parts[0]);
    const right = Number(parts[1]);
    const id = alphabetSize + i;
    if (!Number.isInteger(left) || !Number.isInteger(right) || left >= id || right >= id || left === 0 || right === 0) {
      throw new XtokError("MergeOrderViolation", `merge ${i + 1} references an undefined token or EOS`);
    }
    merges.push([left, right]);
    tokens.push({ id, hex: concatHex(tokens[left].hex, tokens[right].hex) });
  }
  return { alphabetSize, mergeCount, tokens, merges };
}
