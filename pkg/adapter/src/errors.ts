/** Base class for everything the adapter throws on purpose. */
export class AdapterError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

export class DuplicateSampleId extends AdapterError {}

export class LabelOutOfRange extends AdapterError {}

/** Logits do not match the declared (n_samples, n_classes). */
export class ShapeMismatch extends AdapterError {}

/** A NaN or infinity reached the writer; nothing was appended. */
export class NonFinite extends AdapterError {}

/** Epochs must arrive as 1, 2, 3, ... with no gaps or repeats. */
export class EpochOutOfOrder extends AdapterError {}

/** finalize() needs at least one recorded epoch. */
export class EmptySession extends AdapterError {}

/** The session was finalized; no further writes are possible. */
export class ClosedSession extends AdapterError {}

/** endEpoch() was called before every sample had logits this epoch. */
export class IncompleteEpoch extends AdapterError {}

/** Filesystem trouble, with the underlying error attached as cause. */
export class IoFailure extends AdapterError {
  constructor(message: string, cause?: unknown) {
    super(message);
    (this as { cause?: unknown }).cause = cause;
  }
}
