export { AdapterSession, beginSession } from "./session.js";
export type { LogitRows, SessionOptions } from "./session.js";
export {
  AdapterError,
  ClosedSession,
  DuplicateSampleId,
  EmptySession,
  EpochOutOfOrder,
  IncompleteEpoch,
  IoFailure,
  LabelOutOfRange,
  NonFinite,
  ShapeMismatch,
} from "./errors.js";
