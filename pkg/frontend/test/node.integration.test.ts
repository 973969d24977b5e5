/** Console acceptance against a live cluster: a compromised device turns
 * red within two polling intervals of the status committing, the
 * drill-down names the offending artifact, and quarantine lands on the
 * ledger and shows up in the event table. */

import { spawn, ChildProcess } from "node:child_process";
import { createInterface } from "node:readline";
import { fileURLToPath } from "node:url";
import path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { NodeApi } from "../src/api.js";
import { ConsoleApp } from "../src/main.js";
import { identityFromSeedHex } from "../src/signing.js";

const SCRIPT = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "scripts",
  "demo_cluster.py",
);

interface Bootstrap {
  baseUrl: string;
  operatorKeyHex: string;
  auditorKeyHex: string;
  devices: string[];
  pollIntervalMs: number;
  injection: { device: string; artifact: string; afterS: number };
}

let child: ChildProcess;
let bootstrap: Bootstrap;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

class FakeElement {
  innerHTML = "";
}

beforeAll(async () => {
  child = spawn("python3", [SCRIPT], {
    stdio: ["ignore", "pipe", "inherit"],
    env: { ...process.env, PYTHONUNBUFFERED: "1" },
  });
  const lines = createInterface({ input: child.stdout! });
  bootstrap = await new Promise<Bootstrap>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("cluster did not start")), 30_000);
    lines.once("line", (line) => {
      clearTimeout(timer);
      resolve(JSON.parse(line) as Bootstrap);
    });
    child.once("exit", (code) => reject(new Error(`cluster exited early: ${code}`)));
  });
}, 40_000);

afterAll(() => {
  child?.kill("SIGTERM");
});

describe("console against a live cluster", () => {
  it(
    "shows the compromise red within two polls, drills down, quarantines",
    async () => {
      const operator = identityFromSeedHex(bootstrap.operatorKeyHex);
      const api = new NodeApi(bootstrap.baseUrl, operator);
      const root = new FakeElement();
      const panel = new FakeElement();
      const app = new ConsoleApp(api, root, panel);

      // Signed requests from this implementation are accepted by the node.
      const head = await api.getHead();
      expect(head.status).toBe(200);

      // Poll at the console cadence until the injected compromise shows up.
      const poll = bootstrap.pollIntervalMs;
      let redAt: number | null = null;
      const deadline = Date.now() + 40_000;
      while (Date.now() < deadline && redAt === null) {
        await app.poll();
        const victim = app.state.topology?.nodes.find(
          (n) => n.deviceId === bootstrap.injection.device,
        );
        if (victim?.status === "Compromised") {
          redAt = Date.now();
          expect(root.innerHTML).toContain("status-compromised");
          expect(root.innerHTML).toContain(`data-status="Compromised"`);
        } else {
          await sleep(poll);
        }
      }
      expect(redAt, "compromise never reached the console").not.toBeNull();

      // Within 2 polling intervals of the deciding block's commit.
      const blocks = await api.getBlocks(0);
      let committedAt: number | null = null;
      for (const block of blocks.data.blocks) {
        for (const event of block.events) {
          const body = event.body as Record<string, unknown>;
          if (
            event.kind === 6 &&
            body["device_id"] === bootstrap.injection.device &&
            body["overall"] === "compromised"
          ) {
            committedAt = block.header.timestamp;
            break;
          }
        }
        if (committedAt !== null) {
          break;
        }
      }
      expect(committedAt).not.toBeNull();
      expect(redAt! - committedAt!).toBeLessThanOrEqual(2 * poll);

      // Drill-down names the offending artifact.
      await app.drilldown(bootstrap.injection.device);
      expect(panel.innerHTML).toContain(bootstrap.injection.artifact);
      expect(panel.innerHTML).toContain('class="offending"');

      // Quarantine commits and becomes visible in the event table.
      await app.quarantine(bootstrap.injection.device);
      expect(app.state.toast).toContain("quarantine recorded");
      let quarantineRow = false;
      const qDeadline = Date.now() + 15_000;
      while (Date.now() < qDeadline && !quarantineRow) {
        await sleep(poll);
        await app.poll();
        quarantineRow = app.state.events.some(
          (row) =>
            row.kind === 5 &&
            row.subject === bootstrap.injection.device &&
            row.summary.includes("quarantine"),
        );
      }
      expect(quarantineRow, "quarantine event not visible in table").toBe(true);
      expect(root.innerHTML).toContain("quarantine");

      // The healthy device stayed clean throughout.
      const other = app.state.topology?.nodes.find((n) => n.deviceId === "dev-1");
      expect(other?.status).toBe("Clean");
    },
    90_000,
  );

  it("rejects quarantine from a read-only identity and changes nothing", async () => {
    const auditor = identityFromSeedHex(bootstrap.auditorKeyHex);
    const api = new NodeApi(bootstrap.baseUrl, auditor);
    const app = new ConsoleApp(api, new FakeElement(), new FakeElement());
    const response = await api.quarantine("dev-1");
    expect(response.status).toBe(403);

    await app.quarantine("dev-1");
    expect(app.state.toast).toContain("rejected");

    await sleep(2500);
    await app.poll();
    const rows = app.state.events.filter(
      (row) => row.kind === 5 && row.subject === "dev-1",
    );
    expect(rows).toEqual([]);
  }, 30_000);
});
