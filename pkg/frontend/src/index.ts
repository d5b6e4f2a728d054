export { BoundSession } from "./session.js";
export type { SessionConfig, PklResult, ConvertUpOptions } from "./session.js";
export { XtokError, ClosedSessionError, CliProcessError, errorFromStderr, KNOWN_KINDS } from "./errors.js";
export { runCli, parseReprFloat, values, firstValue } from "./cli.js";
export type { CliOptions, Record } from "./cli.js";
export { parseVocabFile } from "./vocab.js";
export type { VocabInfo, VocabToken } from "./vocab.js";
export { formatSoftLabels } from "./softLabels.js";
export type { SoftLabelStep } from "./softLabels.js";

export const VERSION = "0.1.0";
