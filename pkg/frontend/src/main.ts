/** Browser bootstrap: a polling loop over the node's read API with at most
 * one in-flight poll, plus drill-down and quarantine actions. */

import { NodeApi } from "./api.js";
import {
  ConsoleState,
  INITIAL_STATE,
  deriveDrilldown,
  deriveEventRows,
  deriveTopology,
  reduce,
} from "./model.js";
import { renderConsole, renderDrilldown } from "./render.js";
import { identityFromSeedHex } from "./signing.js";

interface ConsoleConfig {
  nodeUrl: string;
  operatorKeyHex: string;
  pollIntervalMs?: number;
}

declare global {
  interface Window {
    VERILEDGER_CONFIG?: ConsoleConfig;
  }
}

export class ConsoleApp {
  state: ConsoleState = INITIAL_STATE;
  private polling = false;
  private quarantined = new Set<string>();
  private blocksCache: Parameters<typeof deriveEventRows>[0] = [];

  constructor(
    private readonly api: NodeApi,
    private readonly root: { innerHTML: string },
    private readonly panel: { innerHTML: string },
    private readonly now: () => number = () => Date.now(),
  ) {}

  async poll(): Promise<void> {
    if (this.polling) {
      return;
    }
    this.polling = true;
    try {
      const topology = await this.api.getTopology();
      if (topology.status !== 200) {
        throw new Error(`topology fetch -> ${topology.status}`);
      }
      const head = topology.data.head;
      const blocks = await this.api.getBlocks(Math.max(0, head - 50), head);
      if (blocks.status !== 200) {
        throw new Error(`blocks fetch -> ${blocks.status}`);
      }
      this.blocksCache = blocks.data.blocks;
      this.state = reduce(this.state, {
        type: "poll-ok",
        topology: deriveTopology(topology.data, this.now(), this.quarantined),
        events: deriveEventRows(blocks.data.blocks),
      });
    } catch (error) {
      this.state = reduce(this.state, {
        type: "poll-failed",
        error: error instanceof Error ? error.message : String(error),
      });
    } finally {
      this.polling = false;
      this.render();
    }
  }

  async drilldown(deviceId: string): Promise<void> {
    const status = await this.api.getDeviceStatus(deviceId);
    const audit = await this.api.getAuditReport(0, this.now());
    const view = deriveDrilldown(
      deviceId,
      status.status === 200 ? status.data : null,
      this.blocksCache,
      audit.status === 200 ? audit.data : null,
    );
    this.panel.innerHTML = renderDrilldown(view);
  }

  async quarantine(deviceId: string): Promise<void> {
    const response = await this.api.quarantine(deviceId);
    if (response.status === 202) {
      this.quarantined.add(deviceId);
      this.state = reduce(this.state, { type: "toast", message: `quarantine recorded for ${deviceId}` });
    } else {
      this.state = reduce(this.state, {
        type: "toast",
        message: `quarantine rejected (${response.status}): ${response.data.error ?? "denied"}`,
      });
    }
    this.render();
  }

  render(): void {
    this.root.innerHTML = renderConsole(this.state);
  }
}

export function start(): void {
  const config = window.VERILEDGER_CONFIG;
  if (!config) {
    document.body.innerHTML = "<p>missing VERILEDGER_CONFIG</p>";
    return;
  }
  const api = new NodeApi(config.nodeUrl, identityFromSeedHex(config.operatorKeyHex));
  const root = document.getElementById("console")!;
  const panel = document.getElementById("panel")!;
  const app = new ConsoleApp(api, root, panel);
  root.addEventListener("click", (raw) => {
    const target = raw.target as HTMLElement;
    const device = target.dataset["device"];
    if (!device) {
      return;
    }
    if (target.classList.contains("drill")) {
      void app.drilldown(device);
    } else if (target.classList.contains("quarantine")) {
      void app.quarantine(device);
    }
  });
  void app.poll();
  setInterval(() => void app.poll(), config.pollIntervalMs ?? 2000);
}

if (typeof document !== "undefined" && document.getElementById("console")) {
  start();
}
