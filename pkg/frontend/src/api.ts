/** Typed client over the node's public REST endpoints. The console never
 * touches any other surface; its only write is event submission. */

import { Canonical, canonicalBytes } from "./canonical.js";
import { Identity, WireEvent, authHeaders, makeEvent } from "./signing.js";

export interface TopologyPayload {
  devices: {
    device_id: string;
    display_name: string;
    status: string;
    evidence: string | null;
    last_report_at: number | null;
  }[];
  links: [string, string][];
  generated_at: number;
  head: number;
}

export interface BlockPayload {
  header: { height: number; timestamp: number; proposer: string; chain_id: string };
  events: WireEvent[];
}

export interface StatusPayload {
  device_id: string;
  state: string;
  last_report_at: number | null;
  last_counter: number | null;
  evidence: string | null;
}

export interface AuditPayload {
  supply_findings: { device_id: string; result: string; reasons: string[] }[];
  rejected_reports: { device_id: string; event_id: string; reason: string }[];
  reports_accepted: number;
  chain_integrity: { status: string };
}

export interface ApiResponse<T> {
  status: number;
  data: T;
}

export type FetchLike = (
  url: string,
  init: { method: string; headers: Record<string, string>; body?: string },
) => Promise<{ status: number; text(): Promise<string> }>;

export class NodeApi {
  constructor(
    private readonly baseUrl: string,
    private readonly identity: Identity,
    private readonly fetchFn: FetchLike = fetch as unknown as FetchLike,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get memberId(): string {
    return this.identity.memberId;
  }

  async request<T>(method: string, target: string, body?: Canonical): Promise<ApiResponse<T>> {
    const raw = body === undefined ? new Uint8Array(0) : canonicalBytes(body);
    const headers = authHeaders(this.identity, method, target, raw, this.now());
    headers["content-type"] = "application/json";
    const init: { method: string; headers: Record<string, string>; body?: string } = {
      method,
      headers,
    };
    if (body !== undefined) {
      init.body = new TextDecoder().decode(raw);
    }
    const response = await this.fetchFn(this.baseUrl + target, init);
    const text = await response.text();
    return { status: response.status, data: (text ? JSON.parse(text) : {}) as T };
  }

  async getTopology(): Promise<ApiResponse<TopologyPayload>> {
    return this.request("GET", "/v1/topology");
  }

  async getHead(): Promise<ApiResponse<{ height: number; digest: string }>> {
    return this.request("GET", "/v1/chains/main/head");
  }

  async getBlocks(from: number, to?: number): Promise<ApiResponse<{ blocks: BlockPayload[]; head: number }>> {
    const suffix = to === undefined ? "" : `&to=${to}`;
    return this.request("GET", `/v1/chains/main/blocks?from=${from}${suffix}`);
  }

  async getDeviceStatus(deviceId: string): Promise<ApiResponse<StatusPayload>> {
    return this.request("GET", `/v1/devices/${deviceId}/status`);
  }

  async getAuditReport(fromMs: number, toMs: number): Promise<ApiResponse<AuditPayload>> {
    return this.request("GET", `/v1/audit/report?from=${fromMs}&to=${toMs}`);
  }

  /** Incident response: record a quarantine system event for a device. */
  async quarantine(deviceId: string): Promise<ApiResponse<{ event_id?: string; status?: string; error?: string }>> {
    const event = makeEvent(
      5,
      { detail: "quarantine", kind: "facility_error", subject: deviceId },
      this.identity,
      this.now(),
    );
    return this.request("POST", "/v1/chains/main/events", event as unknown as Canonical);
  }
}
