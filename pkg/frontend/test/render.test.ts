/** Rendering is pure string generation; styles stay distinct per state. */

import { describe, expect, it } from "vitest";

import { TopologyPayload } from "../src/api.js";
import { INITIAL_STATE, deriveDrilldown, deriveTopology, reduce } from "../src/model.js";
import { renderBanner, renderConsole, renderDrilldown, renderTopology, escapeHtml } from "../src/render.js";

function payload(status: string): TopologyPayload {
  return {
    devices: [
      { device_id: "dev-0", display_name: "Device 0", status, evidence: null, last_report_at: null },
    ],
    links: [],
    generated_at: 0,
    head: 3,
  };
}

describe("rendering", () => {
  it("same state renders identical markup", () => {
    const view = deriveTopology(payload("Compromised"), 10, new Set());
    expect(renderTopology(view)).toBe(renderTopology(view));
  });

  it("compromised devices carry the red style and status attribute", () => {
    const html = renderTopology(deriveTopology(payload("Compromised"), 10, new Set()));
    expect(html).toContain("status-compromised");
    expect(html).toContain('data-status="Compromised"');
    expect(html).toContain("#c62828");
  });

  it("each state renders a distinct class", () => {
    const classes = ["Clean", "Compromised", "Stale", "Unknown"].map((s) => {
      const html = renderTopology(deriveTopology(payload(s), 1, new Set()));
      const match = html.match(/class="device (status-[a-z]+)"/);
      return match ? match[1] : "";
    });
    expect(new Set(classes).size).toBe(4);
  });

  it("raises the stale banner only after a failed poll", () => {
    expect(renderBanner(INITIAL_STATE)).toBe("");
    const failed = reduce(INITIAL_STATE, { type: "poll-failed", error: "down" });
    expect(renderBanner(failed)).toContain("banner-stale");
    expect(renderBanner(failed)).toContain("down");
  });

  it("drilldown highlights offending artifacts", () => {
    const view = deriveDrilldown(
      "dev-0",
      { device_id: "dev-0", state: "Compromised", last_report_at: 1, last_counter: 1, evidence: "e1" },
      [
        {
          header: { height: 1, timestamp: 1000, proposer: "p", chain_id: "main" },
          events: [
            {
              body: {
                agent_signature: "00".repeat(64),
                counter: 1,
                device_id: "dev-0",
                manifest_id: "ab".repeat(32),
                measured_at: 1,
                overall: "compromised",
                verdicts: [["bin/app", null, "missing"]],
              },
              event_id: "e1",
              kind: 6,
              submitted_at: 1,
              submitter: "s",
              submitter_signature: "",
            },
          ],
        },
      ],
      null,
    );
    const html = renderDrilldown(view);
    expect(html).toContain('class="offending"');
    expect(html).toContain("bin/app");
  });

  it("not-found devices get the not-found panel", () => {
    const html = renderDrilldown(deriveDrilldown("ghost", null, [], null));
    expect(html).toContain("not-found");
  });

  it("escapes untrusted text", () => {
    expect(escapeHtml("<script>")).toBe("&lt;script&gt;");
    const view = deriveTopology(
      {
        devices: [
          { device_id: "dev-0", display_name: "<img>", status: "Clean", evidence: null, last_report_at: null },
        ],
        links: [],
        generated_at: 0,
        head: 0,
      },
      0,
      new Set(),
    );
    expect(renderTopology(view)).not.toContain("<img>");
  });

  it("renderConsole composes banner, topology, and events", () => {
    const state = reduce(INITIAL_STATE, {
      type: "poll-ok",
      topology: deriveTopology(payload("Clean"), 5, new Set()),
      events: [],
    });
    const html = renderConsole(state);
    expect(html).toContain('id="topology"');
    expect(html).toContain('id="events"');
  });
});
