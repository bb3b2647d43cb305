/**
 * Live contract test: the compiled client against the real service.
 *
 * Spawns the Python service over a generated fixture store, then drives
 * the same ApiClient the browser uses. Skipped when the backend CLI is
 * not installed in the environment.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { DEFAULT_STATE } from "../src/state.js";

const PORT = 8763;
const BASE = `http://127.0.0.1:${PORT}`;

function backendAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import backreg"], { timeout: 30_000 });
  return probe.status === 0;
}

const available = backendAvailable();

describe.skipIf(!available)("viewer client against the live service", () => {
  let server: ChildProcess;
  let client: ApiClient;

  beforeAll(async () => {
    const store = mkdtempSync(join(tmpdir(), "viewer-store-"));
    const gen = spawnSync(
      "python3",
      ["-m", "backreg.cli", "gen-fixtures", "--out", store, "--seed", "11", "--count", "1"],
      { timeout: 120_000 },
    );
    expect(gen.status).toBe(0);
    server = spawn("python3", [
      "-m",
      "backreg.cli",
      "serve",
      "--store",
      store,
      "--port",
      String(PORT),
    ]);
    client = new ApiClient((url, init) => fetch(url, init), BASE);
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        await fetch(`${BASE}/patients`);
        break;
      } catch {
        if (Date.now() > deadline) throw new Error("service did not come up");
        await new Promise((r) => setTimeout(r, 250));
      }
    }
  }, 120_000);

  afterAll(() => {
    server?.kill();
  });

  it("lists the generated patient and exams", async () => {
    const patients = await client.listPatients();
    expect(patients.length).toBe(1);
    expect(patients[0]!.exams.length).toBeGreaterThanOrEqual(3);
  });

  it("registers a pair once and sweeps alpha without re-registering", async () => {
    const patients = await client.listPatients();
    const patient = patients[0]!;
    const rgb = patient.exams.filter((e) => e.modality === "rgb");
    const target = rgb[0]!.exam_id;
    const source = rgb[1]!.exam_id;

    const report = await client.register(patient.patient_id, source, target, "angle");
    expect(report.transform.scale).toBeGreaterThan(0);
    expect(report.residual_left).toBeCloseTo(report.residual_right, 9);

    const state = {
      ...DEFAULT_STATE,
      patient: patient.patient_id,
      target,
      sources: [source],
    };
    for (const alpha of [0, 0.25, 0.5, 0.75, 1]) {
      const blob = await client.fetchBlend({ ...state, alpha });
      expect(blob.type).toBe("image/png");
      const head = new Uint8Array(await blob.slice(0, 4).arrayBuffer());
      expect([...head]).toEqual([137, 80, 78, 71]);
    }
    const posts = client.log.filter((e) => e.method === "POST").length;
    expect(posts).toBe(1);
  });

  it("surfaces service validation errors as ApiError bodies", async () => {
    const patients = await client.listPatients();
    const patient = patients[0]!;
    const exams = patient.exams;
    const bad = client.fetchBlend({
      ...DEFAULT_STATE,
      patient: patient.patient_id,
      target: exams[0]!.exam_id,
      sources: [exams[1]!.exam_id],
      alpha: 0.5,
      method: "warp" as never,
    });
    await expect(bad).rejects.toMatchObject({ body: { code: "bad_method", status: 400 } });
  });
});
