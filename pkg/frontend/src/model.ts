/** Pure view derivation: everything rendered is a function of the latest
 * successfully fetched payloads, so views are snapshot-testable. */

import { AuditPayload, BlockPayload, StatusPayload, TopologyPayload } from "./api.js";
import { WireEvent } from "./signing.js";

export type DeviceState = "Clean" | "Compromised" | "Stale" | "Unknown";

export interface IconStyle {
  className: string;
  color: string;
  label: string;
}

/** Total mapping: every state has a distinct, documented style; red is
 * reserved for Compromised. */
export const ICON_STYLES: Record<DeviceState, IconStyle> = {
  Clean: { className: "status-clean", color: "#2e7d32", label: "clean" },
  Compromised: { className: "status-compromised", color: "#c62828", label: "COMPROMISED" },
  Stale: { className: "status-stale", color: "#f9a825", label: "stale" },
  Unknown: { className: "status-unknown", color: "#757575", label: "unknown" },
};

export function asDeviceState(raw: string): DeviceState {
  return raw === "Clean" || raw === "Compromised" || raw === "Stale" ? raw : "Unknown";
}

export interface DeviceIcon {
  deviceId: string;
  displayName: string;
  status: DeviceState;
  icon: IconStyle;
  quarantined: boolean;
}

export interface TopologyView {
  nodes: DeviceIcon[];
  links: [string, string][];
  lastRefresh: number;
  headHeight: number;
}

export interface EventTableRow {
  eventId: string;
  kind: number;
  kindLabel: string;
  subject: string;
  time: number;
  height: number;
  index: number;
  summary: string;
  verdictDetails: string[];
}

export interface ConsoleState {
  topology: TopologyView | null;
  events: EventTableRow[];
  staleData: boolean;
  lastError: string | null;
  toast: string | null;
}

export const INITIAL_STATE: ConsoleState = {
  topology: null,
  events: [],
  staleData: false,
  lastError: null,
  toast: null,
};

const KIND_LABELS: Record<number, string> = {
  1: "supply-chain",
  2: "maintenance",
  3: "appliance-log",
  4: "network-config",
  5: "system-event",
  6: "tamper-report",
  7: "anchor",
};

export function deriveTopology(
  payload: TopologyPayload,
  refreshedAt: number,
  quarantined: ReadonlySet<string>,
): TopologyView {
  return {
    nodes: payload.devices.map((d) => {
      const status = asDeviceState(d.status);
      return {
        deviceId: d.device_id,
        displayName: d.display_name,
        status,
        icon: ICON_STYLES[status],
        quarantined: quarantined.has(d.device_id),
      };
    }),
    links: payload.links,
    lastRefresh: refreshedAt,
    headHeight: payload.head,
  };
}

function eventSubject(event: WireEvent): string {
  const body = event.body as Record<string, unknown>;
  for (const key of ["device_id", "subject", "appliance_id", "satellite_id", "scope"]) {
    const value = body[key];
    if (typeof value === "string") {
      return value;
    }
  }
  return event.submitter.slice(0, 12);
}

function eventSummary(event: WireEvent): string {
  const body = event.body as Record<string, unknown>;
  switch (event.kind) {
    case 1: {
      const components = body["components"] as unknown[];
      return `${components.length} component(s) registered`;
    }
    case 2:
      return `${body["action"]}: ${body["version_before"]} -> ${body["version_after"]}`;
    case 3:
      return `${body["appliance_class"]} ${body["severity"]}`;
    case 4:
      return `${body["scope"]} configuration recorded`;
    case 5:
      return `${body["kind"]}: ${body["detail"]}`;
    case 6:
      return `measurement #${body["counter"]}: ${body["overall"]}`;
    case 7:
      return `satellite head @${body["satellite_height"]}`;
    default:
      return "unknown event kind";
  }
}

function verdictDetails(event: WireEvent): string[] {
  if (event.kind !== 6) {
    return [];
  }
  const verdicts = (event.body as Record<string, unknown>)["verdicts"] as [
    string,
    string | null,
    string,
  ][];
  return verdicts
    .filter(([, , verdict]) => verdict !== "clean")
    .map(([path, , verdict]) => `${path}: ${verdict}`);
}

/** Event table rows ordered by block height, then position in the block. */
export function deriveEventRows(blocks: BlockPayload[], limit = 200): EventTableRow[] {
  const rows: EventTableRow[] = [];
  for (const block of blocks) {
    block.events.forEach((event, index) => {
      rows.push({
        eventId: event.event_id,
        kind: event.kind,
        kindLabel: KIND_LABELS[event.kind] ?? `kind-${event.kind}`,
        subject: eventSubject(event),
        time: event.submitted_at,
        height: block.header.height,
        index,
        summary: eventSummary(event),
        verdictDetails: verdictDetails(event),
      });
    });
  }
  rows.sort((a, b) => a.height - b.height || a.index - b.index);
  return rows.slice(-limit);
}

export interface DrilldownView {
  deviceId: string;
  found: boolean;
  status: DeviceState;
  evidence: string | null;
  verdicts: { path: string; verdict: string; offending: boolean }[];
  components: { name: string; version: string; supplier: string; finding: string }[];
  maintenance: { action: string; from: string; to: string; time: number }[];
}

/** Per-device panel: latest measurement verdicts, registered components
 * with their audit finding, and maintenance history. */
export function deriveDrilldown(
  deviceId: string,
  status: StatusPayload | null,
  blocks: BlockPayload[],
  audit: AuditPayload | null,
): DrilldownView {
  if (status === null) {
    return {
      deviceId,
      found: false,
      status: "Unknown",
      evidence: null,
      verdicts: [],
      components: [],
      maintenance: [],
    };
  }
  let latestReport: WireEvent | null = null;
  let latestSupply: WireEvent | null = null;
  const maintenance: DrilldownView["maintenance"] = [];
  for (const block of blocks) {
    for (const event of block.events) {
      const body = event.body as Record<string, unknown>;
      if (body["device_id"] !== deviceId) {
        continue;
      }
      if (event.kind === 6 && (status.evidence === null || event.event_id === status.evidence)) {
        latestReport = event;
      } else if (event.kind === 6 && latestReport === null) {
        latestReport = event;
      }
      if (event.kind === 1) {
        latestSupply = event;
      }
      if (event.kind === 2) {
        maintenance.push({
          action: String(body["action"]),
          from: String(body["version_before"]),
          to: String(body["version_after"]),
          time: event.submitted_at,
        });
      }
    }
  }
  const verdicts =
    latestReport === null
      ? []
      : ((latestReport.body as Record<string, unknown>)["verdicts"] as [
          string,
          string | null,
          string,
        ][]).map(([path, , verdict]) => ({
          path,
          verdict,
          offending: verdict !== "clean",
        }));
  let components: DrilldownView["components"] = [];
  if (latestSupply !== null) {
    const finding =
      audit?.supply_findings.find((f) => f.device_id === deviceId)?.result ?? "unaudited";
    components = (
      (latestSupply.body as Record<string, unknown>)["components"] as [
        string,
        string,
        string,
        string,
      ][]
    ).map(([name, version, supplier]) => ({ name, version, supplier, finding }));
  }
  return {
    deviceId,
    found: true,
    status: asDeviceState(status.state),
    evidence: status.evidence,
    verdicts,
    components,
    maintenance,
  };
}

export type Action =
  | { type: "poll-ok"; topology: TopologyView; events: EventTableRow[] }
  | { type: "poll-failed"; error: string }
  | { type: "toast"; message: string | null };

/** Reducer over poll outcomes: a failed poll keeps the previous view and
 * raises the stale-data banner. */
export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "poll-ok":
      return {
        ...state,
        topology: action.topology,
        events: action.events,
        staleData: false,
        lastError: null,
      };
    case "poll-failed":
      return { ...state, staleData: true, lastError: action.error };
    case "toast":
      return { ...state, toast: action.message };
  }
}
