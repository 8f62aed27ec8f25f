/** Input files that do not match the documented formats. */
export class FormatError extends Error {
  override name = "FormatError";
}

/** Command lines that cannot be acted on (bad flags, empty selections). */
export class UsageError extends Error {
  override name = "UsageError";
}
