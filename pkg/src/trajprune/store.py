"""Reading, writing, and validating per-epoch logit trajectory logs.

A trajectory log records, for every training sample, its raw classifier
logits at the end of each epoch, together with the assigned labels. Two
encodings exist:

* "LTRJ v1" binary (canonical): little-endian, f32 logits, epoch-major so
  one epoch's matrix streams contiguously.
* JSONL (debugging/interop): a header line, then one object per
  (epoch, sample).

Logits are stored as 32-bit floats on disk; all downstream arithmetic
promotes to 64-bit. Epochs are 1-indexed and must be contiguous 1..T.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateSampleId,
    EpochGap,
    FormatError,
    LabelOutOfRange,
    MagicMismatch,
    NonFinite,
    TruncatedFile,
)

MAGIC = b"LTRJ"
VERSION = 1
SCHEMA_VERSION = 1

# header: magic, u32 version, u64 n_samples, u32 n_classes, u32 n_epochs, u64 run_seed
_HEADER = struct.Struct("<4sIQIIQ")


@dataclass
class TrajectoryLog:
    """In-memory trajectory log.

    logits has shape (n_epochs, n_samples, n_classes) and dtype float32,
    matching the on-disk precision bit for bit. Immutable by convention
    once opened; nothing in the toolkit mutates a log in place.
    """

    sample_ids: np.ndarray  # (n,) uint64
    labels: np.ndarray  # (n,) int64, each in [0, n_classes)
    logits: np.ndarray  # (T, n, c) float32
    run_seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @property
    def n_samples(self) -> int:
        return int(self.logits.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.logits.shape[2])

    @property
    def n_epochs(self) -> int:
        return int(self.logits.shape[0])

    def logits64(self) -> np.ndarray:
        """Logits promoted to float64 for downstream arithmetic."""
        return self.logits.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectoryLog):
            return NotImplemented
        return (
            self.run_seed == other.run_seed
            and self.schema_version == other.schema_version
            and np.array_equal(self.sample_ids, other.sample_ids)
            and np.array_equal(self.labels, other.labels)
            and self.logits.shape == other.logits.shape
            and np.array_equal(
                self.logits.view(np.uint32), other.logits.view(np.uint32)
            )
        )


@dataclass
class Issue:
    code: str
    where: int | None  # sample id or epoch index, depending on the code
    message: str


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def make_log(
    sample_ids,
    labels,
    logits,
    run_seed: int = 0,
    schema_version: int = SCHEMA_VERSION,
) -> TrajectoryLog:
    """Build a log from array-likes, normalizing dtypes (no validation)."""
    return TrajectoryLog(
        sample_ids=np.asarray(sample_ids, dtype=np.uint64),
        labels=np.asarray(labels, dtype=np.int64),
        logits=np.asarray(logits, dtype=np.float32),
        run_seed=int(run_seed),
        schema_version=int(schema_version),
    )


def validate(log: TrajectoryLog) -> ValidationReport:
    """Check every type invariant, reporting all violations (never raises)."""
    report = ValidationReport()
    n, c, t = log.n_samples, log.n_classes, log.n_epochs

    if log.logits.ndim != 3:
        report.issues.append(
            Issue("ShapeMismatch", None, f"logits must be 3-d, got {log.logits.ndim}-d")
        )
        return report
    if len(log.sample_ids) != n or len(log.labels) != n:
        report.issues.append(
            Issue(
                "ShapeMismatch",
                None,
                f"ids/labels length {len(log.sample_ids)}/{len(log.labels)} != n_samples {n}",
            )
        )
        return report
    if t < 1:
        report.issues.append(Issue("EpochGap", None, "log must contain at least one epoch"))

    ids, counts = np.unique(log.sample_ids, return_counts=True)
    for sid in ids[counts > 1]:
        report.issues.append(
            Issue("DuplicateSampleId", int(sid), f"sample id {int(sid)} appears more than once")
        )

    bad = np.flatnonzero((log.labels < 0) | (log.labels >= c))
    for i in bad:
        report.issues.append(
            Issue(
                "LabelOutOfRange",
                int(log.sample_ids[i]),
                f"label {int(log.labels[i])} outside [0, {c}) for sample {int(log.sample_ids[i])}",
            )
        )

    finite = np.isfinite(log.logits)
    if not finite.all():
        epochs, samples = np.nonzero(~finite.all(axis=2))
        for e, s in zip(epochs, samples):
            report.issues.append(
                Issue(
                    "NonFinite",
                    int(log.sample_ids[s]),
                    f"non-finite logit for sample {int(log.sample_ids[s])} at epoch {int(e) + 1}",
                )
            )
    return report


def _raise_for_report(report: ValidationReport) -> None:
    if report.ok:
        return
    first = report.issues[0]
    exc = {
        "DuplicateSampleId": DuplicateSampleId,
        "LabelOutOfRange": LabelOutOfRange,
        "NonFinite": NonFinite,
        "EpochGap": EpochGap,
    }.get(first.code, FormatError)
    raise exc(first.message)


def write_log(log: TrajectoryLog, path, format: str = "binary") -> None:
    """Serialize a log; `format` is "binary" (canonical) or "jsonl".

    The log must already satisfy all type invariants; a degenerate log
    (T = 0, bad labels, ...) is rejected with FormatError rather than
    written.
    """
    if log.n_epochs < 1:
        raise FormatError("cannot write a log with no epochs (T >= 1 required)")
    _raise_for_report(validate(log))
    if format == "binary":
        _write_binary(log, path)
    elif format == "jsonl":
        _write_jsonl(log, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def _write_binary(log: TrajectoryLog, path) -> None:
    n, c, t = log.n_samples, log.n_classes, log.n_epochs
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, c, t, log.run_seed & (2**64 - 1)))
        f.write(log.sample_ids.astype("<u8").tobytes())
        f.write(log.labels.astype("<u4").tobytes())
        for e in range(t):
            f.write(struct.pack("<I", e + 1))
            f.write(np.ascontiguousarray(log.logits[e], dtype="<f4").tobytes())


def _write_jsonl(log: TrajectoryLog, path) -> None:
    header = {
        "version": VERSION,
        "n_samples": log.n_samples,
        "n_classes": log.n_classes,
        "n_epochs": log.n_epochs,
        "run_seed": log.run_seed,
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for e in range(log.n_epochs):
            for i in range(log.n_samples):
                row = {
                    "epoch": e + 1,
                    "sample_id": int(log.sample_ids[i]),
                    "label": int(log.labels[i]),
                    # float() of an f32 is exact in f64, so the round-trip
                    # through JSON text preserves the f32 bits
                    "logits": [float(v) for v in log.logits[e, i]],
                }
                f.write(json.dumps(row) + "\n")


def open_log(path) -> TrajectoryLog:
    """Read a log in either encoding, enforcing every type invariant.

    Raises MagicMismatch for unrecognized files, TruncatedFile when the
    declared counts exceed the bytes present, and NonFinite /
    DuplicateSampleId / LabelOutOfRange / EpochGap for invariant
    violations.
    """
    with open(path, "rb") as f:
        head = f.read(4)
    if head == MAGIC:
        log = _read_binary(path)
    elif head[:1] == b"{":
        log = _read_jsonl(path)
    else:
        raise MagicMismatch(f"{path}: not a trajectory log (magic {head!r})")
    _raise_for_report(validate(log))
    return log


def _read_binary(path) -> TrajectoryLog:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path}: header truncated ({len(data)} bytes)")
    magic, version, n, c, t, run_seed = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MagicMismatch(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if t < 1:
        raise EpochGap(f"{path}: header declares {t} epochs (T >= 1 required)")

    buf = io.BytesIO(data)
    buf.seek(_HEADER.size)

    def take(nbytes: int, what: str) -> bytes:
        chunk = buf.read(nbytes)
        if len(chunk) != nbytes:
            raise TruncatedFile(f"{path}: truncated in {what} (wanted {nbytes} bytes)")
        return chunk

    sample_ids = np.frombuffer(take(8 * n, "sample-id block"), dtype="<u8")
    labels = np.frombuffer(take(4 * n, "label block"), dtype="<u4").astype(np.int64)
    logits = np.empty((t, n, c), dtype=np.float32)
    for e in range(t):
        (epoch_index,) = struct.unpack("<I", take(4, f"epoch header {e + 1}"))
        if epoch_index != e + 1:
            raise EpochGap(
                f"{path}: epoch block {e + 1} carries index {epoch_index} "
                "(epochs must be contiguous 1..T)"
            )
        block = take(4 * n * c, f"epoch {e + 1} logits")
        logits[e] = np.frombuffer(block, dtype="<f4").reshape(n, c)
    if buf.read(1):
        raise FormatError(f"{path}: trailing bytes after declared content")
    return TrajectoryLog(
        sample_ids=sample_ids.copy(), labels=labels, logits=logits, run_seed=run_seed
    )


def _read_jsonl(path) -> TrajectoryLog:
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise TruncatedFile(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise MagicMismatch(f"{path}: first line is not a JSON header: {e}") from e
    for key in ("version", "n_samples", "n_classes", "n_epochs", "run_seed"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    if header["version"] != VERSION:
        raise FormatError(f"{path}: unsupported version {header['version']}")
    n, c, t = int(header["n_samples"]), int(header["n_classes"]), int(header["n_epochs"])
    if t < 1:
        raise EpochGap(f"{path}: header declares {t} epochs (T >= 1 required)")
    if len(lines) - 1 != n * t:
        raise TruncatedFile(
            f"{path}: expected {n * t} record lines for n={n}, T={t}, found {len(lines) - 1}"
        )

    sample_ids = np.zeros(n, dtype=np.uint64)
    labels = np.zeros(n, dtype=np.int64)
    logits = np.empty((t, n, c), dtype=np.float32)
    pos = 1
    for e in range(t):
        for i in range(n):
            row = json.loads(lines[pos])
            pos += 1
            if int(row["epoch"]) != e + 1:
                raise EpochGap(
                    f"{path}: line {pos}: epoch {row['epoch']} out of order "
                    f"(expected {e + 1}; records are epoch-major, samples in a "
                    "fixed order)"
                )
            vals = row["logits"]
            if len(vals) != c:
                raise FormatError(f"{path}: line {pos}: expected {c} logits, got {len(vals)}")
            if e == 0:
                sample_ids[i] = np.uint64(int(row["sample_id"]))
                labels[i] = int(row["label"])
            elif int(row["sample_id"]) != int(sample_ids[i]) or int(row["label"]) != int(
                labels[i]
            ):
                raise FormatError(
                    f"{path}: line {pos}: sample id/label disagree with epoch 1 ordering"
                )
            logits[e, i] = np.asarray(vals, dtype=np.float64).astype(np.float32)
    return TrajectoryLog(
        sample_ids=sample_ids, labels=labels, logits=logits, run_seed=int(header["run_seed"])
    )
