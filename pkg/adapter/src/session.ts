/**
 * Session writer for LTRJ v1 trajectory logs.
 *
 * A session wraps one output file for one training run. The header is
 * written up front with a provisional epoch count of zero and patched when
 * the session is finalized, so a crash mid-run leaves a file that readers
 * reject instead of a silently short log.
 *
 * Two capture styles:
 *  - recordEpoch(e, logits): one full-dataset forward snapshot per epoch.
 *  - beginEpoch(e) / recordBatch(ids, logits) / endEpoch(): accumulate
 *    per-batch outputs as training visits samples; the last forward pass
 *    a sample saw within the epoch is what gets written.
 */

import * as fs from "node:fs";

import {
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

const MAGIC = "LTRJ";
const VERSION = 1;
const HEADER_SIZE = 32;
const EPOCHS_OFFSET = 20; // after magic, version, n_samples, n_classes

export interface SessionOptions {
  runSeed?: bigint;
}

/** Rows of logits, one row per sample, each row n_classes long. */
export type LogitRows = ReadonlyArray<ReadonlyArray<number>>;

export class AdapterSession {
  readonly path: string;
  readonly nSamples: number;
  readonly nClasses: number;

  private fd: number;
  private epochsWritten = 0;
  private closed = false;
  private rowOf = new Map<number, number>();

  // in-flight epoch for the batch API, null between epochs
  private pending: { index: number; values: Float32Array; seen: Uint8Array } | null =
    null;

  private constructor(path: string, nSamples: number, nClasses: number, fd: number) {
    this.path = path;
    this.nSamples = nSamples;
    this.nClasses = nClasses;
    this.fd = fd;
  }

  get epochCount(): number {
    return this.epochsWritten;
  }

  get isOpen(): boolean {
    return !this.closed;
  }

  static begin(
    path: string,
    sampleIds: ReadonlyArray<number>,
    labels: ReadonlyArray<number>,
    nClasses: number,
    options: SessionOptions = {},
  ): AdapterSession {
    const n = sampleIds.length;
    if (n < 1) throw new ShapeMismatch("need at least one sample");
    if (labels.length !== n) {
      throw new ShapeMismatch(`${n} sample ids but ${labels.length} labels`);
    }
    if (!Number.isInteger(nClasses) || nClasses < 1) {
      throw new ShapeMismatch(`n_classes must be a positive integer, got ${nClasses}`);
    }
    // validate everything before the file exists: an error here must not
    // leave a half-written artifact on disk
    const ids = new Set<number>();
    for (const id of sampleIds) {
      if (!Number.isInteger(id) || id < 0) {
        throw new ShapeMismatch(`sample id ${id} is not a non-negative integer`);
      }
      if (ids.has(id)) throw new DuplicateSampleId(`sample id ${id} appears twice`);
      ids.add(id);
    }
    for (let i = 0; i < n; i++) {
      const y = labels[i];
      if (!Number.isInteger(y) || y < 0 || y >= nClasses) {
        throw new LabelOutOfRange(
          `label ${y} for sample ${sampleIds[i]} outside [0, ${nClasses})`,
        );
      }
    }

    const header = Buffer.alloc(HEADER_SIZE + 8 * n + 4 * n);
    header.write(MAGIC, 0, "ascii");
    header.writeUInt32LE(VERSION, 4);
    header.writeBigUInt64LE(BigInt(n), 8);
    header.writeUInt32LE(nClasses, 16);
    header.writeUInt32LE(0, EPOCHS_OFFSET); // provisional, patched by finalize
    header.writeBigUInt64LE(options.runSeed ?? 0n, 24);
    for (let i = 0; i < n; i++) {
      header.writeBigUInt64LE(BigInt(sampleIds[i]), HEADER_SIZE + 8 * i);
      header.writeUInt32LE(labels[i], HEADER_SIZE + 8 * n + 4 * i);
    }

    let fd: number;
    try {
      fd = fs.openSync(path, "w");
      fs.writeSync(fd, header);
    } catch (err) {
      throw new IoFailure(`cannot create ${path}`, err);
    }
    const session = new AdapterSession(path, n, nClasses, fd);
    sampleIds.forEach((id, row) => session.rowOf.set(id, row));
    return session;
  }

  /** Write one epoch from a full-dataset snapshot, rows in declared order. */
  recordEpoch(epochIndex: number, logits: LogitRows | Float32Array): void {
    this.assertWritable(epochIndex);
    const flat = this.flatten(logits);
    this.appendEpoch(epochIndex, flat);
  }

  /** Start accumulating an epoch from per-batch forward passes. */
  beginEpoch(epochIndex: number): void {
    this.assertWritable(epochIndex);
    this.pending = {
      index: epochIndex,
      values: new Float32Array(this.nSamples * this.nClasses),
      seen: new Uint8Array(this.nSamples),
    };
  }

  /** Record a batch; a sample visited twice keeps its latest logits. */
  recordBatch(sampleIds: ReadonlyArray<number>, logits: LogitRows): void {
    if (this.closed) throw new ClosedSession(`${this.path} is finalized`);
    const p = this.pending;
    if (p === null) throw new EpochOutOfOrder("recordBatch outside beginEpoch/endEpoch");
    if (logits.length !== sampleIds.length) {
      throw new ShapeMismatch(`${sampleIds.length} ids but ${logits.length} logit rows`);
    }
    for (let b = 0; b < sampleIds.length; b++) {
      const row = this.rowOf.get(sampleIds[b]);
      if (row === undefined) {
        throw new ShapeMismatch(`sample id ${sampleIds[b]} was not declared at begin`);
      }
      const vals = logits[b];
      if (vals.length !== this.nClasses) {
        throw new ShapeMismatch(
          `sample ${sampleIds[b]}: ${vals.length} logits, expected ${this.nClasses}`,
        );
      }
      for (const v of vals) {
        if (!Number.isFinite(v)) {
          throw new NonFinite(`non-finite logit for sample ${sampleIds[b]}`);
        }
      }
      for (let j = 0; j < this.nClasses; j++) {
        p.values[row * this.nClasses + j] = Math.fround(vals[j]);
      }
      p.seen[row] = 1;
    }
  }

  /** Close the accumulating epoch and append it to the file. */
  endEpoch(): void {
    if (this.closed) throw new ClosedSession(`${this.path} is finalized`);
    const p = this.pending;
    if (p === null) throw new EpochOutOfOrder("endEpoch without beginEpoch");
    const missing = [];
    for (let i = 0; i < this.nSamples; i++) if (!p.seen[i]) missing.push(i);
    if (missing.length) {
      throw new IncompleteEpoch(
        `epoch ${p.index}: ${missing.length} of ${this.nSamples} samples never saw ` +
          "a forward pass; every sample needs logits before endEpoch()",
      );
    }
    this.pending = null;
    this.appendEpoch(p.index, p.values);
  }

  /** Patch the real epoch count into the header and close the file. */
  finalize(): void {
    if (this.closed) throw new ClosedSession(`${this.path} is already finalized`);
    if (this.pending !== null) {
      throw new EpochOutOfOrder(`epoch ${this.pending.index} still open at finalize`);
    }
    if (this.epochsWritten === 0) {
      throw new EmptySession("refusing to finalize a log with zero epochs");
    }
    const patch = Buffer.alloc(4);
    patch.writeUInt32LE(this.epochsWritten, 0);
    try {
      fs.writeSync(this.fd, patch, 0, 4, EPOCHS_OFFSET);
      fs.closeSync(this.fd);
    } catch (err) {
      throw new IoFailure(`cannot finalize ${this.path}`, err);
    }
    this.closed = true;
  }

  private assertWritable(epochIndex: number): void {
    if (this.closed) throw new ClosedSession(`${this.path} is finalized`);
    if (this.pending !== null) {
      throw new EpochOutOfOrder(
        `epoch ${this.pending.index} is still open; call endEpoch() first`,
      );
    }
    if (epochIndex !== this.epochsWritten + 1) {
      throw new EpochOutOfOrder(
        `expected epoch ${this.epochsWritten + 1}, got ${epochIndex}`,
      );
    }
  }

  /** Validate shape and finiteness, returning f32-quantized values. */
  private flatten(logits: LogitRows | Float32Array): Float32Array {
    const size = this.nSamples * this.nClasses;
    if (logits instanceof Float32Array) {
      if (logits.length !== size) {
        throw new ShapeMismatch(`flat logits length ${logits.length}, expected ${size}`);
      }
      for (const v of logits) {
        if (!Number.isFinite(v)) throw new NonFinite("non-finite logit in epoch block");
      }
      return logits;
    }
    if (logits.length !== this.nSamples) {
      throw new ShapeMismatch(`${logits.length} rows, expected ${this.nSamples}`);
    }
    const flat = new Float32Array(size);
    for (let i = 0; i < this.nSamples; i++) {
      const row = logits[i];
      if (row.length !== this.nClasses) {
        throw new ShapeMismatch(
          `row ${i} has ${row.length} logits, expected ${this.nClasses}`,
        );
      }
      for (let j = 0; j < this.nClasses; j++) {
        const v = row[j];
        if (!Number.isFinite(v)) {
          throw new NonFinite(`non-finite logit at row ${i}, class ${j}`);
        }
        flat[i * this.nClasses + j] = Math.fround(v);
      }
    }
    return flat;
  }

  private appendEpoch(epochIndex: number, flat: Float32Array): void {
    const block = Buffer.alloc(4 + 4 * flat.length);
    block.writeUInt32LE(epochIndex, 0);
    for (let i = 0; i < flat.length; i++) block.writeFloatLE(flat[i], 4 + 4 * i);
    try {
      fs.writeSync(this.fd, block);
    } catch (err) {
      throw new IoFailure(`cannot append epoch ${epochIndex} to ${this.path}`, err);
    }
    this.epochsWritten += 1;
  }
}

/** Spec-shaped convenience wrapper around AdapterSession.begin. */
export function beginSession(
  path: string,
  sampleIds: ReadonlyArray<number>,
  labels: ReadonlyArray<number>,
  nClasses: number,
  options: SessionOptions = {},
): AdapterSession {
  return AdapterSession.begin(path, sampleIds, labels, nClasses, options);
}
