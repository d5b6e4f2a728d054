/**
 * Soft-label step type and the line format the loss subcommand consumes:
 *   step <l> | <id>:<q> ... | student <id>:<p> ...
 */

import { XtokError } from "./errors.js";

export interface SoftLabelStep {
  tokenIds: number[];
  teacherQ: number[];
  studentP: number[];
}

function reprFloat(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e16) {
    return `${x}.0`;
  }
  // JS shortest round-trip printing matches Python repr for finite doubles
  return String(x);
}

export function formatSoftLabels(steps: SoftLabelStep[]): string {
  const lines = steps.map((step, i) => {
    const n = step.tokenIds.length;
    if (step.teacherQ.length !== n || step.studentP.length !== n) {
      throw new XtokError("ShapeMismatch", `step ${i}: arrays must have equal length`);
    }
    const teacher = step.tokenIds.map((t, j) => `${t}:${reprFloat(step.teacherQ[j])}`).join(" ");
    const student = step.tokenIds.map((t, j) => `${t}:${reprFloat(step.studentP[j])}`).join(" ");
    return `step ${i} | ${teacher} | student ${student}`;
  });
  return lines.join("\n") + "\n";
}
