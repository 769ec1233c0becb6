/**
 * Conformance against the primary toolkit: a log written by this adapter
 * must validate cleanly, and entropy scores computed from it must equal
 * scores computed in-process from the same arrays, exactly (f32
 * quantization happens once, in the adapter, before anything is compared).
 *
 * Requires python3 with the primary package importable; skipped when the
 * interpreter or package is missing so the unit tests stay standalone.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { beginSession } from "../src/index.js";

function havePrimary(): boolean {
  try {
    execFileSync("python3", ["-c", "import trajprune"], { stdio: "pipe" });
    return true;
  } catch {
    return false;
  }
}

const maybe = havePrimary() ? describe : describe.skip;

// deterministic 32-bit generator so the fixture never drifts
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function py(args: string[], input?: string): string {
  return execFileSync("python3", args, {
    input,
    encoding: "utf-8",
    stdio: ["pipe", "pipe", "pipe"],
  });
}

maybe("primary-toolkit conformance", () => {
  const T = 4;
  const N = 7;
  const C = 5;
  const rand = mulberry32(0xc0ffee);
  const sampleIds = Array.from({ length: N }, (_, i) => 100 + 3 * i);
  const labels = Array.from({ length: N }, () => Math.floor(rand() * C));
  // Math.fround here mirrors the adapter's own quantization so the JSON
  // dump and the file carry bit-identical values
  const logits: number[][][] = Array.from({ length: T }, () =>
    Array.from({ length: N }, () =>
      Array.from({ length: C }, () => Math.fround((rand() - 0.5) * 12)),
    ),
  );

  function writeAdapterLog(dir: string): string {
    const p = path.join(dir, "adapter.ltrj");
    const s = beginSession(p, sampleIds, labels, C, { runSeed: 77n });
    logits.forEach((block, e) => s.recordEpoch(e + 1, block));
    s.finalize();
    return p;
  }

  it("validates and scores identically to an in-process log", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ltrj-conf-"));
    try {
      const logPath = writeAdapterLog(dir);
      const dataPath = path.join(dir, "arrays.json");
      fs.writeFileSync(
        dataPath,
        JSON.stringify({ sample_ids: sampleIds, labels, logits, run_seed: 77 }),
      );

      const validated = py(["-m", "trajprune.cli", "validate", logPath]);
      expect(validated).toContain("OK");

      const check = `
import json, sys
import numpy as np
import trajprune as tp

log_path, data_path = sys.argv[1], sys.argv[2]
with open(data_path) as f:
    data = json.load(f)
from_file = tp.open_log(log_path)
in_process = tp.make_log(
    data["sample_ids"], data["labels"],
    np.array(data["logits"], dtype=np.float32),
    run_seed=data["run_seed"],
)
assert from_file == in_process, "adapter bytes differ from the in-process log"
sel = tp.EpochSelector.every_k(1)
a = tp.score_dataset(from_file, "entropy", sel)
b = tp.score_dataset(in_process, "entropy", sel)
assert np.array_equal(a.scores, b.scores), "entropy scores differ"
assert np.array_equal(a.soft_labels, b.soft_labels), "soft labels differ"
print("EQUAL")
`;
      const result = py(["-", logPath, dataPath], check);
      expect(result.trim()).toBe("EQUAL");
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });

  it("yields byte-identical score CSVs through both encodings", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ltrj-conf-"));
    try {
      const logPath = writeAdapterLog(dir);
      const jsonlPath = path.join(dir, "same.jsonl");
      py(
        ["-", logPath, jsonlPath],
        [
          "import sys, trajprune as tp",
          "log = tp.open_log(sys.argv[1])",
          "tp.write_log(log, sys.argv[2], format='jsonl')",
        ].join("\n"),
      );
      const csvA = path.join(dir, "a.csv");
      const csvB = path.join(dir, "b.csv");
      py(["-m", "trajprune.cli", "score", "--log", logPath, "--out", csvA]);
      py(["-m", "trajprune.cli", "score", "--log", jsonlPath, "--out", csvB]);
      expect(fs.readFileSync(csvA)).toEqual(fs.readFileSync(csvB));
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });

  it("round-trips a batch-accumulated log through validate", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "ltrj-conf-"));
    try {
      const p = path.join(dir, "acc.ltrj");
      const s = beginSession(p, sampleIds, labels, C);
      logits.forEach((block, e) => {
        s.beginEpoch(e + 1);
        for (let i = N - 1; i >= 0; i--) {
          s.recordBatch([sampleIds[i]], [block[i]]);
        }
        s.endEpoch();
      });
      s.finalize();
      expect(py(["-m", "trajprune.cli", "validate", p])).toContain("OK");
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});
