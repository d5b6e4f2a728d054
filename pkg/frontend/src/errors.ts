/**
 * Error mapping — the CLI reports domain failures on stderr as
 * `error: <Kind>: <message>` with exit code 1; each kind maps to a
 * dedicated exception class here so callers can catch selectively.
 */

export class XtokError extends Error {
  public readonly kind: string;

  constructor(kind: string, message: string) {
    super(message);
    this.name = "XtokError";
    this.kind = kind;
  }
}

export class ClosedSessionError extends XtokError {
  constructor(message = "session is closed") {
    super("ClosedSession", message);
    this.name = "ClosedSessionError";
  }
}

export class CliProcessError extends XtokError {
  constructor(message: string) {
    super("CliProcess", message);
    this.name = "CliProcessError";
  }
}

/** Kinds raised by the core; anything unlisted still surfaces as XtokError. */
export const KNOWN_KINDS: ReadonlySet<string> = new Set([
  "MergeOrderViolation",
  "DuplicateToken",
  "BoundOutOfRange",
  "ParseError",
  "LevelMismatch",
  "UnknownSymbol",
  "InvalidEncoding",
  "BackendUnavailable",
  "PrefixContainsEos",
  "InvalidBasis",
  "DeadEnd",
  "ZeroProbabilityChoice",
  "BudgetExceeded",
  "NegativeResult",
  "MaxRejections",
  "ShapeMismatch",
  "ComplementUnderflow",
  "BudgetIntractable",
]);

const ERROR_LINE = /^error: ([A-Za-z]+): (.*)$/m;

/** Build the mapped error for a failed CLI run (exit code 1). */
export function errorFromStderr(stderr: string, exitCode: number | null): XtokError {
  const match = ERROR_LINE.exec(stderr);
  if (match !== null) {
    const [, kind, message] = match;
    return new XtokError(kind, message);
  }
  return new CliProcessError(
    `xtok exited with code ${exitCode}: ${stderr.trim() || "(no stderr)"}`,
  );
}
